"""Point spectrum of the linearization around the one-component wave.

Around the fundamental wave the four-component eigenvalue problem
block-diagonalizes and the point eigenvalues come in pairs +-i nu_k with
nu_k = s - omega (kappa - k)^2, kappa(kappa+1)/2 = beta1.  A dense
finite-difference discretization reproduces them to ~1e-7.
"""
import numpy as np

from cnls_waves import ModelParams, embedded_eigenvalues, essential_spectrum_gap
from cnls_waves.verify import dense_linearization_spectrum

model = ModelParams(omega=1.0, s=4.0, beta1=10.0, beta2=2.0)
gap = essential_spectrum_gap(model)
print(f"essential spectrum: i(-inf, -{gap}] U i[{gap}, inf)\n")

analytic = embedded_eigenvalues(model)
print("computing dense finite-difference spectrum (4000 points, [-20, 20])...")
spectrum = dense_linearization_spectrum(1.0, 4.0, 10.0, 4000, 20.0)

print("\n  k | |lambda| analytic | nearest dense |   error   | embedded?")
print("----+-------------------+---------------+-----------+----------")
kap = 4.0
for ev in analytic:
    nu = 4.0 - (kap - ev.k) ** 2
    err = np.min(np.abs(spectrum - nu))
    print(f"  {ev.k} | {ev.lambda_imag:17.12f} | {abs(nu):13.9f} | {err:.3e} | "
          f"{'yes' if ev.embedded else 'no'}")

print("\nEigenvalues inside the essential spectrum (|lambda| >= min(omega, s))")
print("are embedded; under coupling perturbations the ones with k < ell split")
print("off the axis and destabilize the bifurcated waves.")

"""Critical couplings, bounded modes, and the pitchfork normal-form coefficients.

At beta1 = (q + ell)(q + ell + 1)/2 with q = sqrt(s/omega) the linearization
around the one-component wave gains a bounded second-component mode with
exactly ell zeros, and a new solitary-wave family branches off.  The sign of
the coefficient b2 decides whether the branch opens toward larger couplings
(supercritical) or smaller ones (subcritical).
"""
import numpy as np

from cnls_waves import bif_coefficients, critical_coupling, kernel_mode_V1

omega, s, beta2 = 1.0, 4.0, 2.0

print(f"model: omega={omega}, s={s}, beta2={beta2}\n")
print(" ell | threshold |      a2      |      b2      | branch opens")
print("-----+-----------+--------------+--------------+-------------")
for ell in range(5):
    thr = critical_coupling(omega, s, ell)
    c = bif_coefficients(s / omega, beta2, ell)
    side = "supercritical (+)" if c.b_bar2 > 0 else "subcritical (-)"
    print(f"  {ell}  |   {thr:5.1f}   | {c.a_bar2:+.6e} | {c.b_bar2:+.6e} | {side}")

print("\nmode profiles at a few points (ell-node structure):")
x = np.linspace(0.0, 3.0, 7)
for ell in range(3):
    v = kernel_mode_V1(x, omega, s, ell)
    row = "  ".join(f"{val:+.4f}" for val in v)
    print(f"  V1^({ell})(x) for x in [0,3]: {row}")

print("\nzero counts on [-12, 12]:")
grid = np.linspace(-12, 12, 10_000)
for ell in range(5):
    v = kernel_mode_V1(grid, omega, s, ell)
    signs = np.sign(v[np.abs(v) > 1e-12 * np.abs(v).max()])
    print(f"  ell={ell}: {int(np.sum(signs[1:] != signs[:-1]))} sign changes")

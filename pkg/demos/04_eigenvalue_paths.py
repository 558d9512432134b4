"""Follow one eigenvalue of the linearized operator along a bifurcated branch.

The 20-dimensional joint BVP (profile + real/imaginary eigenfunction parts,
with the dummy parameter and both eigenvalue components free) starts from
the closed-form embedded eigenvalue at the branch onset.  The real part
turns positive immediately: the second-branch wave is spectrally unstable.
"""
from cnls_waves import ScenarioConfig
from cnls_waves.scenarios import compute_eigen_path

# second branch (one-node mode), eigenvalue emerging from 5i at beta1 = 6
cfg = ScenarioConfig(scenario="eigenloci", beta1_max=20.0, ntst=100).resolved()
system, branch, info = compute_eigen_path(cfg, ell=1, k=0, record_values=(12.0,))

print(f"onset: beta1 = {info['beta1_onset']}, lambda = {info['lambda_onset']}i\n")
print("  beta1   |  Re(lambda)  |  Im(lambda)  |    d1    | flag")
print("----------+--------------+--------------+----------+------")
for p in branch.points:
    pv = p.solution.parameter_values
    print(f" {p.parameter_value:8.4f} | {pv['lambda_re']:+.6e} | "
          f"{pv['lambda_im']:12.8f} | {pv['d1']:+.1e} | {p.flag}")

print("\nRe(lambda) > 0 for every coupling past the onset: instability.")
print("The dummy parameter d1 stays at roundoff, as it must for genuine solutions.")

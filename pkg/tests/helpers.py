"""Shared oracles for the BVP test modules."""
import numpy as np

from cnls_waves.collocation import assemble_jacobian, assemble_residual, parameter_column


def fd_system_jacobian(system, sol, h=1e-6):
    """Central finite differences of the assembled residual w.r.t. all unknowns."""
    base = sol.copy()
    P, n = sol.mesh.n_points, sol.state_dim
    n_eq = len(assemble_residual(system, sol))
    cols = np.zeros((n_eq, P * n + len(system.free_parameters)))
    flat = base.coefficients.ravel()
    for k in range(P * n):
        up, dn = base.copy(), base.copy()
        up.coefficients.ravel()[k] = flat[k] + h
        dn.coefficients.ravel()[k] = flat[k] - h
        cols[:, k] = (assemble_residual(system, up) - assemble_residual(system, dn)) / (2 * h)
    for j, name in enumerate(system.free_parameters):
        up, dn = base.copy(), base.copy()
        up.parameter_values[name] += h
        dn.parameter_values[name] -= h
        cols[:, P * n + j] = (
            assemble_residual(system, up) - assemble_residual(system, dn)
        ) / (2 * h)
    return cols


def assert_jacobian_consistent(system, sol, rtol=1e-6, h=1e-6):
    J = assemble_jacobian(system, sol).toarray()
    J_fd = fd_system_jacobian(system, sol, h=h)
    scale = max(1.0, np.abs(J).max())
    err = np.abs(J - J_fd).max() / scale
    assert err < rtol, f"analytic vs FD Jacobian mismatch: {err:.3e}"


def assert_parameter_column_consistent(system, sol, name, rtol=1e-6, h=1e-6):
    col = parameter_column(system, sol, name)
    up, dn = sol.copy(), sol.copy()
    up.parameter_values[name] = sol.parameter_values[name] + h
    dn.parameter_values[name] = sol.parameter_values[name] - h
    fd = (assemble_residual(system, up) - assemble_residual(system, dn)) / (2 * h)
    scale = max(1.0, np.abs(col).max())
    err = np.abs(col - fd).max() / scale
    assert err < rtol, f"analytic vs FD parameter column '{name}' mismatch: {err:.3e}"

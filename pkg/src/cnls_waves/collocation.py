"""Two-point BVP solver on a truncated interval.

Gauss-Legendre collocation with a per-interval Lagrange representation:
every interval carries a degree-NCOL polynomial through NCOL+1 Lobatto-spaced
points whose endpoints are shared with the neighbours, so the piecewise
polynomial is C0 by construction.  The nonlinear collocation system together
with boundary and integral conditions is solved by a damped Newton iteration
on a sparse bordered Jacobian.

Well-posedness requires n_bc + n_ic = state_dim + n_free; this is enforced
when a system is constructed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import numpy.polynomial.legendre as npleg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, SingularJacobianError

__all__ = [
    "Mesh",
    "CollocationSolution",
    "IntegralCondition",
    "BvpSystemSpec",
    "NewtonSettings",
    "assemble_residual",
    "assemble_jacobian",
    "parameter_column",
    "solve_newton",
    "interpolate",
    "integral_functional",
    "remesh",
]


# ---------------------------------------------------------------------------
# Reference basis data, cached per collocation degree
# ---------------------------------------------------------------------------

def _lobatto_points(m: int) -> np.ndarray:
    """m+1 Gauss-Lobatto points on [0, 1] (endpoints included)."""
    c = np.zeros(m + 1)
    c[m] = 1.0
    interior = npleg.legroots(npleg.legder(c))
    return np.concatenate([[0.0], 0.5 * (interior + 1.0), [1.0]])


def _lagrange_matrices(nodes: np.ndarray, at: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative matrices of the Lagrange basis on ``nodes`` at ``at``."""
    m1 = len(nodes)
    val = np.ones((len(at), m1))
    der = np.zeros((len(at), m1))
    for i in range(m1):
        for r, x in enumerate(at):
            prod = 1.0
            for k in range(m1):
                if k != i:
                    prod *= (x - nodes[k]) / (nodes[i] - nodes[k])
            val[r, i] = prod
            dsum = 0.0
            for j in range(m1):
                if j == i:
                    continue
                p = 1.0 / (nodes[i] - nodes[j])
                for k in range(m1):
                    if k != i and k != j:
                        p *= (x - nodes[k]) / (nodes[i] - nodes[k])
                dsum += p
            der[r, i] = dsum
    return val, der


class _Basis:
    def __init__(self, m: int):
        self.m = m
        self.sigma = _lobatto_points(m)
        gauss, weights = npleg.leggauss(m)
        self.col_points = 0.5 * (gauss + 1.0)
        self.col_weights = 0.5 * weights
        self.phi, self.dphi = _lagrange_matrices(self.sigma, self.col_points)
        # barycentric weights for interpolation at arbitrary points
        diffs = self.sigma[:, None] - self.sigma[None, :]
        np.fill_diagonal(diffs, 1.0)
        self.bary = 1.0 / np.prod(diffs, axis=1)


_BASIS_CACHE: dict[int, _Basis] = {}


def _basis(m: int) -> _Basis:
    if m not in _BASIS_CACHE:
        _BASIS_CACHE[m] = _Basis(m)
    return _BASIS_CACHE[m]


# ---------------------------------------------------------------------------
# Mesh and solution containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mesh:
    """Truncated-interval mesh with x_minus < 0 < x_plus."""

    x_minus: float
    x_plus: float
    interval_count: int
    collocation_degree: int
    node_positions: np.ndarray

    def __post_init__(self):
        if not self.x_minus < 0.0 < self.x_plus:
            raise ValueError(f"need x_minus < 0 < x_plus, got [{self.x_minus}, {self.x_plus}]")
        if not 2 <= self.collocation_degree <= 7:
            raise ValueError(f"collocation_degree must be in [2, 7], got {self.collocation_degree}")
        nodes = np.asarray(self.node_positions, dtype=float)
        if len(nodes) != self.interval_count + 1:
            raise ValueError("node_positions must have interval_count + 1 entries")
        if nodes[0] != self.x_minus or nodes[-1] != self.x_plus:
            raise ValueError("node_positions must span [x_minus, x_plus]")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("node_positions must be strictly increasing")
        object.__setattr__(self, "node_positions", nodes)

    @classmethod
    def uniform(cls, x_minus: float, x_plus: float, interval_count: int,
                collocation_degree: int = 4) -> "Mesh":
        nodes = np.linspace(x_minus, x_plus, interval_count + 1)
        return cls(x_minus, x_plus, interval_count, collocation_degree, nodes)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.node_positions)

    @property
    def n_points(self) -> int:
        return self.interval_count * self.collocation_degree + 1

    def representation_points(self) -> np.ndarray:
        m = self.collocation_degree
        sigma = _basis(m).sigma
        pts = self.node_positions[:-1, None] + self.widths[:, None] * sigma[None, :]
        out = np.empty(self.n_points)
        out[:-1] = pts[:, :-1].ravel()
        out[-1] = self.x_plus
        return out

    def collocation_points(self) -> np.ndarray:
        c = _basis(self.collocation_degree).col_points
        return (self.node_positions[:-1, None] + self.widths[:, None] * c[None, :]).ravel()

    def quadrature_weights(self) -> np.ndarray:
        w = _basis(self.collocation_degree).col_weights
        return (self.widths[:, None] * w[None, :]).ravel()


@dataclass
class CollocationSolution:
    """Piecewise-polynomial solution: values at the representation points.

    ``coefficients`` has shape (n_points, state_dim) and holds the nodal
    values of the per-interval Lagrange representation.
    """

    mesh: Mesh
    state_dim: int
    coefficients: np.ndarray
    parameter_values: dict[str, float]

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.mesh.n_points, self.state_dim):
            raise ValueError(
                f"coefficients must have shape {(self.mesh.n_points, self.state_dim)}, "
                f"got {self.coefficients.shape}"
            )

    def copy(self) -> "CollocationSolution":
        return CollocationSolution(
            self.mesh, self.state_dim, self.coefficients.copy(), dict(self.parameter_values)
        )

    def interpolate(self, x) -> np.ndarray:
        return interpolate(self, x)

    def boundary_values(self) -> tuple[np.ndarray, np.ndarray]:
        return self.coefficients[0], self.coefficients[-1]

    def to_json(self) -> str:
        doc = {
            "mesh": {
                "x_minus": self.mesh.x_minus,
                "x_plus": self.mesh.x_plus,
                "interval_count": self.mesh.interval_count,
                "collocation_degree": self.mesh.collocation_degree,
                "node_positions": self.mesh.node_positions.tolist(),
            },
            "state_dim": self.state_dim,
            "points": self.mesh.representation_points().tolist(),
            "states": self.coefficients.tolist(),
            "parameters": dict(sorted(self.parameter_values.items())),
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CollocationSolution":
        doc = json.loads(text)
        md = doc["mesh"]
        mesh = Mesh(
            md["x_minus"], md["x_plus"], md["interval_count"],
            md["collocation_degree"], np.asarray(md["node_positions"]),
        )
        return cls(mesh, doc["state_dim"], np.asarray(doc["states"]), dict(doc["parameters"]))


# ---------------------------------------------------------------------------
# System description
# ---------------------------------------------------------------------------

@dataclass
class IntegralCondition:
    """Scalar condition  integral of f(x, u; p) dx + offset(p) = 0.

    ``integrand`` maps (x (M,), u (n, M), params) to (M,) and
    ``integrand_jac_state`` to (n, M).  Parameter derivatives are split the
    same way into an integrand part and an offset part.
    """

    integrand: Callable
    integrand_jac_state: Callable
    offset: Callable = lambda p: 0.0
    integrand_jac_param: Callable = lambda x, u, p, name: None
    offset_jac_param: Callable = lambda p, name: 0.0


@dataclass
class BvpSystemSpec:
    """Pluggable first-order ODE system u' = rhs(x, u; p) with side conditions.

    All callables are vectorized over the evaluation points: ``rhs`` maps
    (x (M,), u (n, M), params) to (n, M), its state Jacobian to (n, n, M) and
    parameter derivatives to (n, M).  Boundary conditions couple the two
    endpoint states.
    """

    state_dim: int
    rhs: Callable
    rhs_jac_state: Callable
    rhs_jac_param: Callable
    boundary_conditions: Callable          # (ua, ub, p) -> (n_bc,)
    bc_jac_states: Callable                # (ua, ub, p) -> (n_bc, n), (n_bc, n)
    bc_jac_param: Callable                 # (ua, ub, p, name) -> (n_bc,)
    n_bc: int
    integral_conditions: Sequence[IntegralCondition] = field(default_factory=list)
    free_parameters: Sequence[str] = field(default_factory=list)

    def __post_init__(self):
        n_ic = len(self.integral_conditions)
        n_free = len(self.free_parameters)
        if self.n_bc + n_ic != self.state_dim + n_free:
            raise ValueError(
                f"ill-posed condition count: n_bc({self.n_bc}) + n_ic({n_ic}) "
                f"!= state_dim({self.state_dim}) + n_free({n_free})"
            )

    def with_conditions(self, extra_ics: Sequence[IntegralCondition] = (),
                        free_parameters: Sequence[str] | None = None) -> "BvpSystemSpec":
        return replace(
            self,
            integral_conditions=list(self.integral_conditions) + list(extra_ics),
            free_parameters=list(self.free_parameters if free_parameters is None
                                 else free_parameters),
        )


@dataclass(frozen=True)
class NewtonSettings:
    residual_tol: float = 1e-10
    max_iterations: int = 12
    damping: float = 1.0

    def __post_init__(self):
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _local_values(sol: CollocationSolution) -> np.ndarray:
    """Values grouped per interval, shape (N, m+1, n)."""
    mesh = sol.mesh
    m = mesh.collocation_degree
    idx = np.arange(mesh.interval_count)[:, None] * m + np.arange(m + 1)[None, :]
    return sol.coefficients[idx]


def _collocation_states(sol: CollocationSolution):
    """States and x-derivatives at the collocation points, each (N, m, n)."""
    mesh = sol.mesh
    basis = _basis(mesh.collocation_degree)
    loc = _local_values(sol)
    u = np.einsum("ri,jin->jrn", basis.phi, loc)
    du = np.einsum("ri,jin->jrn", basis.dphi, loc) / mesh.widths[:, None, None]
    return u, du


def _ic_value(ic: IntegralCondition, sol: CollocationSolution, x_col, u_col_T, w_col,
              params) -> float:
    vals = ic.integrand(x_col, u_col_T, params)
    return float(np.sum(w_col * vals)) + float(ic.offset(params))


def assemble_residual(system: BvpSystemSpec, sol: CollocationSolution) -> np.ndarray:
    """Full residual: collocation rows, then boundary rows, then integral rows."""
    if sol.state_dim != system.state_dim:
        raise ValueError(
            f"state_dim mismatch: solution has {sol.state_dim}, system {system.state_dim}"
        )
    mesh = sol.mesh
    n = system.state_dim
    params = sol.parameter_values
    u_col, du_col = _collocation_states(sol)
    x_col = mesh.collocation_points()
    u_col_T = u_col.reshape(-1, n).T
    f = system.rhs(x_col, u_col_T, params)
    res_col = (du_col.reshape(-1, n).T - f).T.ravel()

    ua, ub = sol.boundary_values()
    res_bc = np.asarray(system.boundary_conditions(ua, ub, params), dtype=float)
    if res_bc.shape != (system.n_bc,):
        raise ValueError(f"boundary_conditions returned shape {res_bc.shape}, "
                         f"expected ({system.n_bc},)")

    w_col = mesh.quadrature_weights()
    res_ic = np.array(
        [_ic_value(ic, sol, x_col, u_col_T, w_col, params)
         for ic in system.integral_conditions]
    )
    return np.concatenate([res_col, res_bc, res_ic])


def _collocation_jacobian_blocks(system, sol):
    """COO data of the collocation rows w.r.t. the nodal values."""
    mesh = sol.mesh
    n = system.state_dim
    m = mesh.collocation_degree
    N = mesh.interval_count
    basis = _basis(m)
    params = sol.parameter_values

    u_col, _ = _collocation_states(sol)
    x_col = mesh.collocation_points()
    u_col_T = u_col.reshape(-1, n).T
    jf = system.rhs_jac_state(x_col, u_col_T, params)      # (n, n, N*m)
    jf = jf.reshape(n, n, N, m).transpose(2, 3, 0, 1)      # (N, m, n, n)

    # entries[j, r, c, i, c2] = dphi[r, i]/h_j * delta(c, c2) - jf[j, r, c, c2] * phi[r, i]
    eye = np.eye(n)
    ent = (basis.dphi[None, :, None, :, None] / mesh.widths[:, None, None, None, None]
           * eye[None, None, :, None, :])
    ent = ent - jf[:, :, :, None, :] * basis.phi[None, :, None, :, None]

    rows = ((np.arange(N)[:, None, None] * m + np.arange(m)[None, :, None]) * n
            + np.arange(n)[None, None, :])                  # (N, m, n)
    cols = ((np.arange(N)[:, None, None] * m + np.arange(m + 1)[None, :, None]) * n
            + np.arange(n)[None, None, :])                  # (N, m+1, n)
    row_idx = np.broadcast_to(rows[:, :, :, None, None], ent.shape)
    col_idx = np.broadcast_to(cols[:, None, None, :, :], ent.shape)
    return row_idx.ravel(), col_idx.ravel(), ent.ravel()


def assemble_jacobian(system: BvpSystemSpec, sol: CollocationSolution) -> sp.csc_matrix:
    """Sparse Jacobian w.r.t. [nodal values, free parameters]."""
    mesh = sol.mesh
    n = system.state_dim
    m = mesh.collocation_degree
    N = mesh.interval_count
    P = mesh.n_points
    params = sol.parameter_values
    n_col = N * m * n
    n_ic = len(system.integral_conditions)
    n_eq = n_col + system.n_bc + n_ic
    n_unknown = P * n + len(system.free_parameters)

    rows_l, cols_l, data_l = [], [], []
    r, c, d = _collocation_jacobian_blocks(system, sol)
    rows_l.append(r); cols_l.append(c); data_l.append(d)

    ua, ub = sol.boundary_values()
    ja, jb = system.bc_jac_states(ua, ub, params)
    bc_rows = n_col + np.arange(system.n_bc)
    for jmat, p0 in ((np.asarray(ja), 0), (np.asarray(jb), P - 1)):
        rr, cc = np.nonzero(np.ones_like(jmat))
        rows_l.append(bc_rows[rr])
        cols_l.append(p0 * n + cc)
        data_l.append(jmat[rr, cc])

    # integral-condition rows (dense in the nodal values)
    if n_ic:
        basis = _basis(m)
        x_col = mesh.collocation_points()
        u_col, _ = _collocation_states(sol)
        u_col_T = u_col.reshape(-1, n).T
        w_col = mesh.quadrature_weights().reshape(N, m)
        pt_idx = np.arange(N)[:, None] * m + np.arange(m + 1)[None, :]
        for k, ic in enumerate(system.integral_conditions):
            g = ic.integrand_jac_state(x_col, u_col_T, params)   # (n, N*m)
            g = g.reshape(n, N, m).transpose(1, 2, 0)            # (N, m, n)
            contrib = np.einsum("jr,jrc,ri->jic", w_col, g, basis.phi)  # (N, m+1, n)
            grad = np.zeros((P, n))
            np.add.at(grad, pt_idx, contrib)
            rows_l.append(np.full(P * n, n_col + system.n_bc + k))
            cols_l.append(np.arange(P * n))
            data_l.append(grad.ravel())

    # free-parameter columns
    for j, name in enumerate(system.free_parameters):
        col = parameter_column(system, sol, name)
        rows_l.append(np.arange(n_eq))
        cols_l.append(np.full(n_eq, P * n + j))
        data_l.append(col)

    rows = np.concatenate(rows_l)
    cols = np.concatenate(cols_l)
    data = np.concatenate(data_l)
    return sp.coo_matrix((data, (rows, cols)), shape=(n_eq, n_unknown)).tocsc()


def parameter_column(system: BvpSystemSpec, sol: CollocationSolution, name: str) -> np.ndarray:
    """Dense residual derivative w.r.t. one named parameter."""
    mesh = sol.mesh
    n = system.state_dim
    params = sol.parameter_values
    x_col = mesh.collocation_points()
    u_col, _ = _collocation_states(sol)
    u_col_T = u_col.reshape(-1, n).T
    w_col = mesh.quadrature_weights()

    dcol = -system.rhs_jac_param(x_col, u_col_T, params, name).T.ravel()
    ua, ub = sol.boundary_values()
    dbc = np.asarray(system.bc_jac_param(ua, ub, params, name), dtype=float)
    dic = []
    for ic in system.integral_conditions:
        gi = ic.integrand_jac_param(x_col, u_col_T, params, name)
        val = float(np.sum(w_col * gi)) if gi is not None else 0.0
        dic.append(val + float(ic.offset_jac_param(params, name)))
    return np.concatenate([dcol, dbc, np.asarray(dic)])


# ---------------------------------------------------------------------------
# Newton iteration
# ---------------------------------------------------------------------------

def _sparse_solve(J: sp.csc_matrix, rhs: np.ndarray) -> np.ndarray:
    try:
        lu = spla.splu(J)
    except RuntimeError as exc:
        raise SingularJacobianError(str(exc)) from exc
    out = lu.solve(rhs)
    if not np.all(np.isfinite(out)):
        raise SingularJacobianError("linear solve produced non-finite values")
    return out


def _apply_step(sol: CollocationSolution, system: BvpSystemSpec,
                step: np.ndarray, scale: float) -> CollocationSolution:
    P, n = sol.mesh.n_points, sol.state_dim
    new = sol.copy()
    new.coefficients = sol.coefficients + scale * step[: P * n].reshape(P, n)
    for j, name in enumerate(system.free_parameters):
        new.parameter_values[name] = sol.parameter_values[name] + scale * step[P * n + j]
    return new


def solve_newton(system: BvpSystemSpec, guess: CollocationSolution,
                 settings: NewtonSettings = NewtonSettings()) -> CollocationSolution:
    """Damped Newton iteration; free parameters are solved for alongside the states.

    Raises :class:`ConvergenceError` after ``max_iterations`` without meeting
    ``residual_tol`` and :class:`SingularJacobianError` on a singular system.
    """
    sol = guess.copy()
    res = assemble_residual(system, sol)
    res_norm = float(np.max(np.abs(res)))
    for _ in range(settings.max_iterations):
        if res_norm < settings.residual_tol:
            return sol
        J = assemble_jacobian(system, sol)
        step = _sparse_solve(J, -res)
        scale = settings.damping
        for _ in range(9):
            trial = _apply_step(sol, system, step, scale)
            trial_res = assemble_residual(system, trial)
            trial_norm = float(np.max(np.abs(trial_res)))
            if np.isfinite(trial_norm) and (trial_norm < res_norm
                                            or trial_norm < settings.residual_tol):
                sol, res, res_norm = trial, trial_res, trial_norm
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                f"residual did not decrease after 8 halvings (residual {res_norm:.3e})"
            )
    if res_norm < settings.residual_tol:
        return sol
    raise ConvergenceError(
        f"no convergence after {settings.max_iterations} iterations "
        f"(residual {res_norm:.3e}, tol {settings.residual_tol:.1e})"
    )


# ---------------------------------------------------------------------------
# Evaluation helpers
# ---------------------------------------------------------------------------

def interpolate(sol: CollocationSolution, x) -> np.ndarray:
    """Evaluate the piecewise polynomial; exact at representation points."""
    mesh = sol.mesh
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    span = mesh.x_plus - mesh.x_minus
    if np.any(xs < mesh.x_minus - 1e-12 * span) or np.any(xs > mesh.x_plus + 1e-12 * span):
        raise ValueError(f"interpolation point outside [{mesh.x_minus}, {mesh.x_plus}]")
    xs = np.clip(xs, mesh.x_minus, mesh.x_plus)
    basis = _basis(mesh.collocation_degree)
    m = mesh.collocation_degree
    j = np.clip(np.searchsorted(mesh.node_positions, xs, side="right") - 1,
                0, mesh.interval_count - 1)
    sigma = (xs - mesh.node_positions[j]) / mesh.widths[j]
    loc = _local_values(sol)[j]                      # (M, m+1, n)

    diff = sigma[:, None] - basis.sigma[None, :]     # (M, m+1)
    out = np.empty((len(xs), sol.state_dim))
    exact = np.abs(diff) < 1e-14
    regular = ~exact.any(axis=1)
    if np.any(regular):
        wdiff = basis.bary[None, :] / diff[regular]
        out[regular] = np.einsum("Mi,Min->Mn", wdiff, loc[regular]) / wdiff.sum(axis=1)[:, None]
    hit = np.nonzero(~regular)[0]
    for idx in hit:
        i = int(np.argmax(exact[idx]))
        out[idx] = loc[idx, i]
    if np.ndim(x) == 0:
        return out[0]
    return out


def integral_functional(sol: CollocationSolution, weight: Callable) -> float:
    """Gauss-quadrature value of integral weight(x, u(x)) dx over the mesh."""
    mesh = sol.mesh
    x_col = mesh.collocation_points()
    u_col, _ = _collocation_states(sol)
    vals = weight(x_col, u_col.reshape(-1, sol.state_dim).T)
    return float(np.sum(mesh.quadrature_weights() * np.asarray(vals)))


def remesh(sol: CollocationSolution, new_mesh: Mesh,
           decay_rates: Sequence[float] | None = None) -> CollocationSolution:
    """Re-interpolate onto ``new_mesh``.

    Points beyond the old domain are padded with exponential decay from the
    boundary values at the given per-component rates (flat when omitted).
    """
    old = sol.mesh
    pts = new_mesh.representation_points()
    inside = np.clip(pts, old.x_minus, old.x_plus)
    values = interpolate(sol, inside)
    rates = np.zeros(sol.state_dim) if decay_rates is None else np.asarray(decay_rates, float)
    right = pts > old.x_plus
    if np.any(right):
        values[right] = sol.coefficients[-1][None, :] * np.exp(
            -np.outer(pts[right] - old.x_plus, rates)
        )
    left = pts < old.x_minus
    if np.any(left):
        values[left] = sol.coefficients[0][None, :] * np.exp(
            -np.outer(old.x_minus - pts[left], rates)
        )
    return CollocationSolution(new_mesh, sol.state_dim, values, dict(sol.parameter_values))

"""Pseudo-arclength continuation with fold detection and branch seeding.

One principal parameter is driven; the system's own free parameters ride
along as bordered unknowns.  Steps adapt multiplicatively (double on fast
convergence, halve on failure) and folds are localized by bisection on the
arclength using the tangent's principal component as detector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .analytic import ModelParams
from .collocation import (
    CollocationSolution,
    Mesh,
    NewtonSettings,
    assemble_jacobian,
    assemble_residual,
    integral_functional,
    parameter_column,
    solve_newton,
)
from .collocation import _sparse_solve  # shared bordered solver
from .errors import ConvergenceError, StallError
from .systems import HomoclinicSystem

__all__ = [
    "BranchPoint",
    "SpecialPoint",
    "ContinuationSettings",
    "Branch",
    "tangent",
    "continue_branch",
    "detect_fold",
    "branch_switch_seed",
    "correct_branch_seed",
]

BOUNDARY_HEALTH_LIMIT = 1e-2


@dataclass
class BranchPoint:
    solution: CollocationSolution
    parameter_name: str
    parameter_value: float
    diagnostics: dict[str, float]
    step_index: int
    flag: str = ""


@dataclass
class SpecialPoint:
    kind: str                       # FOLD, BRANCH_SEED or USER_EVENT
    location: BranchPoint
    detector_value: float


@dataclass(frozen=True)
class ContinuationSettings:
    initial_step: float = 0.05
    min_step: float = 1e-7
    max_step: float = 1.0
    max_steps: int = 300
    direction: int = 1
    target: float | None = None
    target_crossing: int = 1
    record_values: tuple[float, ...] = ()
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    detect_folds: bool = True
    fold_detector_tol: float = 1e-8
    event: Callable | None = None
    correct_start: bool = True

    def __post_init__(self):
        if not 0.0 < self.min_step <= self.initial_step <= self.max_step:
            raise ValueError("need 0 < min_step <= initial_step <= max_step")


@dataclass
class Branch:
    parameter_name: str
    points: list[BranchPoint] = field(default_factory=list)
    specials: list[SpecialPoint] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def values(self, key: str) -> np.ndarray:
        return np.array([p.diagnostics.get(key, np.nan) for p in self.points])

    def parameters(self) -> np.ndarray:
        return np.array([p.parameter_value for p in self.points])


class _SpecAdapter:
    """Uniform view over plain BvpSystemSpec objects and the CNLS systems."""

    def __init__(self, system):
        if hasattr(system, "spec"):
            self.spec = system.spec
            self._owner = system
        else:
            self.spec = system
            self._owner = None

    def set_reference(self, sol) -> None:
        if self._owner is not None and hasattr(self._owner, "set_reference"):
            self._owner.set_reference(sol)

    def diagnostics(self, sol) -> dict[str, float]:
        if self._owner is not None and hasattr(self._owner, "diagnostics"):
            return self._owner.diagnostics(sol)
        return {}


def _weights(sol: CollocationSolution, n_extra: int) -> np.ndarray:
    n_coef = sol.mesh.n_points * sol.state_dim
    w = np.empty(n_coef + n_extra)
    w[:n_coef] = 1.0 / sol.mesh.n_points
    w[n_coef:] = 1.0
    return w


def _pack(sol: CollocationSolution, free: Sequence[str], principal: str) -> np.ndarray:
    return np.concatenate([
        sol.coefficients.ravel(),
        [sol.parameter_values[name] for name in free],
        [sol.parameter_values[principal]],
    ])


def _unpack(sol: CollocationSolution, free: Sequence[str], principal: str,
            u: np.ndarray) -> CollocationSolution:
    out = sol.copy()
    n_coef = sol.mesh.n_points * sol.state_dim
    out.coefficients = u[:n_coef].reshape(sol.mesh.n_points, sol.state_dim).copy()
    for j, name in enumerate(free):
        out.parameter_values[name] = float(u[n_coef + j])
    out.parameter_values[principal] = float(u[-1])
    return out


def _augmented_jacobian(spec, sol, principal) -> sp.csc_matrix:
    J = assemble_jacobian(spec, sol)
    col = parameter_column(spec, sol, principal)
    return sp.hstack([J, sp.csc_matrix(col[:, None])], format="csc")


def tangent(system, point: CollocationSolution, principal: str,
            previous: np.ndarray | None = None) -> np.ndarray:
    """Unit tangent of the solution branch in (coefficients, free, principal).

    Oriented to keep a positive weighted inner product with ``previous``
    (or with the bare principal direction when no history exists).
    """
    ad = _SpecAdapter(system)
    spec = ad.spec
    J_aug = _augmented_jacobian(spec, point, principal)
    n_unknown = J_aug.shape[1]
    w = _weights(point, len(spec.free_parameters) + 1)
    if previous is None:
        previous = np.zeros(n_unknown)
        previous[-1] = 1.0
    border = sp.csc_matrix((previous * w)[None, :])
    M = sp.vstack([J_aug, border], format="csc")
    rhs = np.zeros(n_unknown)
    rhs[-1] = 1.0
    t = _sparse_solve(M, rhs)
    t /= np.sqrt(np.sum(w * t * t))
    if np.sum(w * t * previous) < 0:
        t = -t
    return t


def _arclength_corrector(ad: _SpecAdapter, guess: CollocationSolution,
                         base_u: np.ndarray, tang: np.ndarray, ds: float,
                         principal: str, newton: NewtonSettings):
    """Newton on the bordered system [residual; arclength constraint]."""
    spec = ad.spec
    free = spec.free_parameters
    sol = guess.copy()
    w = _weights(sol, len(free) + 1)

    def full_residual(s):
        res = assemble_residual(spec, s)
        u = _pack(s, free, principal)
        arc = np.sum(w * tang * (u - base_u)) - ds
        return np.concatenate([res, [arc]])

    res = full_residual(sol)
    res_norm = float(np.max(np.abs(res)))
    for it in range(newton.max_iterations):
        if res_norm < newton.residual_tol:
            return sol, it
        J_aug = _augmented_jacobian(spec, sol, principal)
        M = sp.vstack([J_aug, sp.csc_matrix((tang * w)[None, :])], format="csc")
        step = _sparse_solve(M, -res)
        scale = newton.damping
        for _ in range(9):
            u_trial = _pack(sol, free, principal) + scale * step
            trial = _unpack(sol, free, principal, u_trial)
            trial_res = full_residual(trial)
            trial_norm = float(np.max(np.abs(trial_res)))
            if np.isfinite(trial_norm) and (trial_norm < res_norm
                                            or trial_norm < newton.residual_tol):
                sol, res, res_norm = trial, trial_res, trial_norm
                break
            scale *= 0.5
        else:
            raise ConvergenceError("corrector stalled")
    if res_norm < newton.residual_tol:
        return sol, newton.max_iterations
    raise ConvergenceError(f"corrector did not converge (residual {res_norm:.3e})")


def _solve_at_value(ad: _SpecAdapter, guess: CollocationSolution, principal: str,
                    value: float, newton: NewtonSettings) -> CollocationSolution:
    fixed = guess.copy()
    fixed.parameter_values[principal] = value
    return solve_newton(ad.spec, fixed, newton)


def _make_point(ad: _SpecAdapter, sol: CollocationSolution, principal: str,
                step_index: int, flag: str = "") -> BranchPoint:
    return BranchPoint(
        solution=sol,
        parameter_name=principal,
        parameter_value=float(sol.parameter_values[principal]),
        diagnostics=ad.diagnostics(sol),
        step_index=step_index,
        flag=flag,
    )


def detect_fold(system, principal: str, base: CollocationSolution,
                base_tangent: np.ndarray, bracket_ds: float,
                newton: NewtonSettings = NewtonSettings(),
                detector_tol: float = 1e-8, max_bisections: int = 60) -> SpecialPoint:
    """Localize a fold inside (0, bracket_ds] by bisection on the arclength.

    The detector is the principal component of the unit tangent, which
    changes sign across the fold.
    """
    ad = _SpecAdapter(system)
    free = ad.spec.free_parameters
    base_u = _pack(base, free, principal)
    lo, hi = 0.0, bracket_ds
    det_lo = float(base_tangent[-1])
    sol_mid, det_mid = None, det_lo
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        guess = _unpack(base, free, principal, base_u + mid * base_tangent)
        sol_mid, _ = _arclength_corrector(ad, guess, base_u, base_tangent, mid,
                                          principal, newton)
        t_mid = tangent(system, sol_mid, principal, previous=base_tangent)
        det_mid = float(t_mid[-1])
        if abs(det_mid) < detector_tol:
            point = _make_point(ad, sol_mid, principal, step_index=-1, flag="FOLD")
            return SpecialPoint(kind="FOLD", location=point, detector_value=det_mid)
        if det_mid * det_lo > 0:
            lo, det_lo = mid, det_mid
        else:
            hi = mid
    raise ConvergenceError(
        f"fold localization failed after {max_bisections} bisections "
        f"(detector {det_mid:.3e})"
    )


def continue_branch(system, start: CollocationSolution, principal: str,
                    settings: ContinuationSettings) -> Branch:
    """Trace a branch from ``start``; returns the ordered points and specials.

    Stops at ``settings.target`` (the principal value is then hit exactly by
    a fixed-parameter solve), on ``max_steps``, or raises :class:`StallError`
    when the step floor is reached without convergence.
    """
    ad = _SpecAdapter(system)
    spec = ad.spec
    free = spec.free_parameters
    branch = Branch(parameter_name=principal)

    ad.set_reference(start)
    current = start.copy() if not settings.correct_start else solve_newton(
        spec, start, settings.newton
    )
    cur_point = _make_point(ad, current, principal, 0)
    branch.points.append(cur_point)
    _check_health(branch, cur_point)

    prev_dir = np.zeros(current.mesh.n_points * current.state_dim + len(free) + 1)
    prev_dir[-1] = float(settings.direction)
    t = tangent(system, current, principal, previous=prev_dir)

    ds = settings.initial_step
    step_index = 0
    crossings = 0
    while step_index < settings.max_steps:
        base_u = _pack(current, free, principal)
        guess = _unpack(current, free, principal, base_u + ds * t)
        try:
            corrected, iters = _arclength_corrector(
                ad, guess, base_u, t, ds, principal, settings.newton
            )
        except ConvergenceError:
            ds *= 0.5
            if ds < settings.min_step:
                raise StallError(
                    f"continuation stalled at step {step_index} "
                    f"({principal} = {current.parameter_values[principal]:.6g})"
                )
            continue

        step_index += 1
        t_new = tangent(system, corrected, principal, previous=t)
        p_old = float(current.parameter_values[principal])
        p_new = float(corrected.parameter_values[principal])

        if settings.detect_folds and t[-1] * t_new[-1] < 0:
            fold = detect_fold(system, principal, current, t, ds,
                               newton=settings.newton,
                               detector_tol=settings.fold_detector_tol)
            fold.location.step_index = step_index
            branch.points.append(fold.location)
            branch.specials.append(fold)
            _check_health(branch, fold.location)

        if settings.event is not None:
            e_old = settings.event(cur_point)
            probe = _make_point(ad, corrected, principal, step_index)
            e_new = settings.event(probe)
            if e_old * e_new < 0:
                ev = _localize_event(ad, system, settings, current, t, ds, principal)
                ev.location.step_index = step_index
                branch.points.append(ev.location)
                branch.specials.append(ev)

        for v in sorted(settings.record_values,
                        key=lambda vv: abs(vv - p_old)):
            if (p_old - v) * (p_new - v) < 0:
                frac = (v - p_old) / (p_new - p_old)
                guess_v = _unpack(current, free, principal,
                                  base_u + frac * (
                                      _pack(corrected, free, principal) - base_u))
                rec = _solve_at_value(ad, guess_v, principal, v, settings.newton)
                rec_point = _make_point(ad, rec, principal, step_index, flag="RECORD")
                branch.points.append(rec_point)
                _check_health(branch, rec_point)

        if settings.target is not None and (p_old - settings.target) * (
                p_new - settings.target) < 0:
            crossings += 1
            if crossings >= settings.target_crossing:
                frac = (settings.target - p_old) / (p_new - p_old)
                guess_t = _unpack(current, free, principal,
                                  base_u + frac * (_pack(corrected, free, principal)
                                                   - base_u))
                final = _solve_at_value(ad, guess_t, principal, settings.target,
                                        settings.newton)
                fin_point = _make_point(ad, final, principal, step_index, flag="TARGET")
                branch.points.append(fin_point)
                _check_health(branch, fin_point)
                return branch

        current = corrected
        ad.set_reference(current)
        cur_point = _make_point(ad, current, principal, step_index)
        cur_point.diagnostics["step_size"] = ds
        branch.points.append(cur_point)
        _check_health(branch, cur_point)
        t = t_new
        if iters <= 3:
            ds = min(2.0 * ds, settings.max_step)
        elif iters >= settings.newton.max_iterations - 1:
            ds = max(0.5 * ds, settings.min_step)
    return branch


def _localize_event(ad, system, settings, base, base_tangent, bracket_ds, principal):
    """Bisection on arclength for a scalar event crossing zero."""
    free = ad.spec.free_parameters
    base_u = _pack(base, free, principal)
    lo, hi = 0.0, bracket_ds
    e_lo = settings.event(_make_point(ad, base, principal, -1))
    sol_mid, e_mid = base, e_lo
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        guess = _unpack(base, free, principal, base_u + mid * base_tangent)
        sol_mid, _ = _arclength_corrector(ad, guess, base_u, base_tangent, mid,
                                          principal, settings.newton)
        e_mid = settings.event(_make_point(ad, sol_mid, principal, -1))
        if abs(e_mid) < settings.fold_detector_tol:
            break
        if e_mid * e_lo > 0:
            lo, e_lo = mid, e_mid
        else:
            hi = mid
    point = _make_point(ad, sol_mid, principal, -1, flag="EVENT")
    return SpecialPoint(kind="USER_EVENT", location=point, detector_value=float(e_mid))


def _check_health(branch: Branch, point: BranchPoint) -> None:
    worst = max(point.diagnostics.get("bnd_minus", 0.0),
                point.diagnostics.get("bnd_plus", 0.0))
    if worst > BOUNDARY_HEALTH_LIMIT:
        branch.warnings.append(
            f"step {point.step_index}: boundary state magnitude {worst:.3e} exceeds "
            f"{BOUNDARY_HEALTH_LIMIT:.0e} ({point.parameter_name} = "
            f"{point.parameter_value:.6g})"
        )


# ---------------------------------------------------------------------------
# Pitchfork branch seeding
# ---------------------------------------------------------------------------

def branch_switch_seed(model: ModelParams, ell: int, amplitude: float,
                       mesh: Mesh) -> CollocationSolution:
    """Guess for the branch born at the ell-th threshold.

    The profile is the fundamental wave plus ``amplitude`` times the
    ell-node mode, at the exact critical coupling.
    """
    system = HomoclinicSystem(model, mesh)
    return system.seed_with_mode(ell, amplitude)


def correct_branch_seed(system: HomoclinicSystem, seed: CollocationSolution,
                        newton: NewtonSettings = NewtonSettings()) -> CollocationSolution:
    """Newton-correct a pitchfork seed with the coupling free.

    The second-component amplitude is pinned to the seed by an extra overlap
    condition, so the corrector slides along the bifurcated branch and
    adjusts beta1; the sign of (corrected beta1 - threshold) reveals the
    branch criticality.
    """
    from .collocation import IntegralCondition, interpolate

    x_col = seed.mesh.collocation_points()
    ref = interpolate(seed, x_col).T.copy()
    amp_pin = IntegralCondition(
        integrand=lambda x, u, p: (u[1] - ref[1]) * ref[1],
        integrand_jac_state=lambda x, u, p: np.stack([
            np.zeros(len(x)), ref[1], np.zeros(len(x)), np.zeros(len(x)),
        ]),
        integrand_jac_param=lambda x, u, p, name: np.zeros(len(x)),
    )
    system.set_reference(seed)
    spec2 = system.spec.with_conditions([amp_pin], free_parameters=["d1", "beta1"])
    return solve_newton(spec2, seed, newton)

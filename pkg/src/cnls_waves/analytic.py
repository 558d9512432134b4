"""Closed-form and quadrature-based quantities for the coupled-NLS solitary waves.

Everything in this module is a pure function of its arguments: the fundamental
sech profile, the bounded modes of the linearized wave equation, the critical
couplings at which new solitary-wave branches appear, the point spectrum of the
linearization around the fundamental wave, and the two bifurcation coefficients
that decide whether each new branch is super- or subcritical.

The bifurcation coefficients are only defined in the frequency-normalized form
(first frequency scaled to 1); callers pass the frequency ratio ``s_norm``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import floor, sqrt

import numpy as np
import numpy.polynomial.legendre as npleg

from .errors import QuadratureError

__all__ = [
    "ModelParams",
    "EmbeddedEigenvalue",
    "BifCoefficients",
    "hyp2f1_terminating",
    "fundamental_profile",
    "kernel_mode_V1",
    "critical_coupling",
    "kappa",
    "embedded_eigenvalues",
    "embedded_eigenfunction_Psi",
    "bif_coefficients",
    "essential_spectrum_gap",
    "onset_eigenvalues",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the coupled-mode system.

    ``omega`` and ``s`` are the two carrier frequencies (both positive),
    ``beta1`` the cross-coupling and ``beta2`` the self-coupling of the
    second component.
    """

    omega: float
    s: float
    beta1: float
    beta2: float

    def __post_init__(self) -> None:
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.s <= 0:
            raise ValueError(f"s must be positive, got {self.s}")


@dataclass(frozen=True)
class EmbeddedEigenvalue:
    """One purely imaginary eigenvalue of the linearization, |lambda| = lambda_imag.

    ``embedded`` is true when the eigenvalue lies inside the essential
    spectrum, i.e. ``lambda_imag >= min(omega, s)``.
    """

    k: int
    lambda_imag: float
    embedded: bool


@dataclass(frozen=True)
class BifCoefficients:
    """Normal-form coefficients of the pitchfork at the mode-``ell`` threshold.

    ``a_bar2`` is always negative; the branch is supercritical when
    ``b_bar2 > 0`` and subcritical when ``b_bar2 < 0``.
    """

    a_bar2: float
    b_bar2: float
    ell: int


def hyp2f1_terminating(k_neg: int, b: float, c: float, z):
    """Terminating Gauss hypergeometric series with first argument ``-k_neg``.

    Evaluates sum_{j=0}^{k_neg} (-k_neg)_j (b)_j z^j / (j! (c)_j) by the
    finite sum, building the Pochhammer ratios as an iterative product so no
    Gamma-function poles are ever touched.  ``z`` may be a scalar or an array.

    Raises ``ValueError`` if a denominator Pochhammer (c)_j vanishes within
    the terminating range.
    """
    if k_neg < 0:
        raise ValueError(f"k_neg must be a nonnegative integer, got {k_neg}")
    if c == floor(c) and -(k_neg - 1) <= c <= 0:
        raise ValueError(
            f"(c)_j vanishes for some j <= {k_neg}: c={c} is a nonpositive integer"
        )
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    term = np.ones_like(z)
    for j in range(k_neg):
        term = term * ((-k_neg + j) * (b + j) / ((j + 1.0) * (c + j))) * z
        total = total + term
    if total.ndim == 0:
        return float(total)
    return total


def fundamental_profile(x, omega: float):
    """Profile of the one-component solitary wave, sqrt(2*omega)*sech(sqrt(omega)*x)."""
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    x = np.asarray(x, dtype=float)
    out = np.sqrt(2.0 * omega) / np.cosh(np.sqrt(omega) * x)
    if out.ndim == 0:
        return float(out)
    return out


def critical_coupling(omega: float, s: float, ell: int) -> float:
    """Cross-coupling value at which the ``ell``-node bounded mode exists.

    Given the frequency ratio q = sqrt(s/omega), returns (q+ell)(q+ell+1)/2.
    Strictly increasing in ``ell``.
    """
    if omega <= 0 or s <= 0:
        raise ValueError("omega and s must be positive")
    if ell < 0:
        raise ValueError(f"ell must be nonnegative, got {ell}")
    q = sqrt(s / omega)
    return (q + ell) * (q + ell + 1.0) / 2.0


def kernel_mode_V1(x, omega: float, s: float, ell: int):
    """Bounded second-component mode with exactly ``ell`` zeros.

    Even ``ell`` gives an even function, odd ``ell`` an odd one (extra tanh
    factor).  The hypergeometric factor terminates after ``ell // 2`` steps.
    """
    if omega <= 0 or s <= 0:
        raise ValueError("omega and s must be positive")
    if ell < 0:
        raise ValueError(f"ell must be nonnegative, got {ell}")
    x = np.asarray(x, dtype=float)
    q = sqrt(s / omega)
    y = np.sqrt(omega) * x
    sech = 1.0 / np.cosh(y)
    half = ell // 2
    if ell % 2 == 0:
        f = hyp2f1_terminating(half, q + half + 0.5, q + 1.0, sech**2)
        out = sech**q * f
    else:
        f = hyp2f1_terminating(half, q + half + 1.5, q + 1.0, sech**2)
        out = sech**q * np.tanh(y) * f
    if np.ndim(out) == 0:
        return float(out)
    return out


def kappa(beta1: float) -> float:
    """Positive root of kappa*(kappa+1)/2 = beta1."""
    if beta1 <= 0:
        raise ValueError(f"beta1 must be positive, got {beta1}")
    # cancellation-free form of (-1 + sqrt(1 + 8*beta1)) / 2
    return 4.0 * beta1 / (1.0 + sqrt(1.0 + 8.0 * beta1))


def essential_spectrum_gap(params: ModelParams) -> float:
    """Distance from the origin to the essential spectrum, min(omega, s)."""
    return min(params.omega, params.s)


def _imaginary_point_spectrum(omega: float, s: float, kap: float) -> list[EmbeddedEigenvalue]:
    gap = min(omega, s)
    out = []
    for k in range(int(floor(kap + 1e-12)) + 1):
        if abs(kap - k) < 1e-12:
            continue
        nu = s - omega * (kap - k) ** 2
        lam = abs(nu)
        out.append(EmbeddedEigenvalue(k=k, lambda_imag=lam, embedded=lam >= gap))
    return out


def embedded_eigenvalues(params: ModelParams) -> list[EmbeddedEigenvalue]:
    """Imaginary point eigenvalues of the linearization around the fundamental wave.

    One entry per admissible mode index ``k`` (positive-imaginary-part
    representative).  Requires ``beta1 > 0``.
    """
    kap = kappa(params.beta1)
    return _imaginary_point_spectrum(params.omega, params.s, kap)


def onset_eigenvalues(omega: float, s: float, ell: int) -> list[EmbeddedEigenvalue]:
    """Point eigenvalues at the ``ell``-th critical coupling.

    Same as :func:`embedded_eigenvalues` evaluated at
    ``beta1 = critical_coupling(omega, s, ell)`` but indexed by ``ell``.
    """
    if omega <= 0 or s <= 0:
        raise ValueError("omega and s must be positive")
    kap = sqrt(s / omega) + ell
    return _imaginary_point_spectrum(omega, s, kap)


def embedded_eigenfunction_Psi(x, omega: float, kap: float, k: int):
    """Profile of the second-component eigenfunction for mode index ``k``.

    Parity equals the parity of ``k``.  Requires ``k < kappa`` so the sech
    exponent is positive and the profile decays.
    """
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if not k < kap:
        raise ValueError(f"need k < kappa for a decaying profile, got k={k}, kappa={kap}")
    x = np.asarray(x, dtype=float)
    y = np.sqrt(omega) * x
    sech = 1.0 / np.cosh(y)
    p = kap - k
    half = k // 2
    if k % 2 == 0:
        f = hyp2f1_terminating(half, p + half + 0.5, p + 1.0, sech**2)
        out = sech**p * f
    else:
        f = hyp2f1_terminating(half, p + half + 1.5, p + 1.0, sech**2)
        out = sech**p * np.tanh(y) * f
    if np.ndim(out) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Bifurcation coefficients (frequency-normalized form)
# ---------------------------------------------------------------------------

def _phi11(x):
    return 0.5 / np.cosh(x) * (3.0 - np.cosh(x) ** 2 - 3.0 * x * np.tanh(x))


def _phi12(x):
    return np.tanh(x) / np.cosh(x)


def _graded_edges(x_max: float, core: float = 8.0, base: float = 0.5, growth: float = 1.4):
    """Panel edges on [0, x_max]: uniform width ``base`` out to ``core``, then geometric."""
    edges = list(np.arange(0.0, min(core, x_max) + 1e-12, base))
    w = base
    while edges[-1] < x_max:
        w *= growth
        edges.append(min(edges[-1] + w, x_max))
    return np.asarray(edges)


def _tail_cutoff(s_norm: float, ell: int, tail_tol: float = 1e-14) -> float:
    """Smallest x beyond which every integrand magnitude is below ``tail_tol``."""
    q = sqrt(s_norm)

    def envelope(x: float) -> float:
        v1 = kernel_mode_V1(x, 1.0, s_norm, ell)
        sech = 1.0 / np.cosh(x)
        inner_tail = abs(_phi12(x)) * v1**2 * sech / (2.0 * q + 2.0)
        return max(v1**2 * sech**2, v1**4, abs(_phi11(x)) * v1**2 * sech * inner_tail)

    x = max(8.0, 37.0 / min(2.0 * q + 2.0, 4.0 * q) + 2.0)
    while envelope(x) > tail_tol and x < 80.0:
        x *= 1.2
    return x


def _panel_quadrature(edges, n_gl: int):
    xg, wg = npleg.leggauss(n_gl)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = mid[:, None] + half[:, None] * xg[None, :]
    w = half[:, None] * wg[None, :]
    return x, w, xg


def _bif_coefficients_once(s_norm: float, beta2: float, ell: int,
                           n_gl: int, density: float) -> tuple[float, float]:
    q = sqrt(s_norm)
    x_max = _tail_cutoff(s_norm, ell)
    edges = _graded_edges(x_max, base=0.5 / density)
    x, w, xg_ref = _panel_quadrature(edges, n_gl)
    n_panels = x.shape[0]

    v1 = kernel_mode_V1(x.ravel(), 1.0, s_norm, ell).reshape(x.shape)
    sech = 1.0 / np.cosh(x)

    a2 = -2.0 * 2.0 * float(np.sum(v1**2 * sech**2 * w))

    # Inner integral from each outer node to +inf: per-panel polynomial
    # antiderivative on the shared nodes, accumulated right to left.
    inner = _phi12(x) * v1**2 * sech
    panel_ints = np.sum(inner * w, axis=1)
    tail_from_edge = np.concatenate([np.cumsum(panel_ints[::-1])[::-1], [0.0]])
    vander_inv = np.linalg.inv(npleg.legvander(xg_ref, n_gl - 1))
    cumulative = np.empty_like(x)
    for p in range(n_panels):
        h = 0.5 * (edges[p + 1] - edges[p])
        coef = npleg.legint(vander_inv @ inner[p])
        cumulative[p] = h * (npleg.legval(1.0, coef) - npleg.legval(xg_ref, coef))
        cumulative[p] += tail_from_edge[p + 1]

    beta1l = critical_coupling(1.0, s_norm, ell)
    outer = _phi11(x) * v1**2 * sech * cumulative
    term_nested = 8.0 * beta1l**2 * 2.0 * float(np.sum(outer * w))
    term_quartic = beta2 * 2.0 * float(np.sum(v1**4 * w))
    return a2, term_nested - term_quartic


def bif_coefficients(s_norm: float, beta2: float, ell: int, *,
                     tol: float = 1e-8) -> BifCoefficients:
    """Bifurcation coefficients for the mode-``ell`` branch, frequency-normalized.

    ``s_norm`` is the frequency ratio s/omega.  Both coefficients are computed
    by composite Gauss-Legendre quadrature on a graded half-line grid (the
    integrands are even); the nested inner integral is accumulated right to
    left on the same grid.  A refined pass must agree with the first to
    ``tol`` or :class:`QuadratureError` is raised.
    """
    if s_norm <= 0:
        raise ValueError(f"s_norm must be positive, got {s_norm}")
    if ell < 0:
        raise ValueError(f"ell must be nonnegative, got {ell}")
    a2_coarse, b2_coarse = _bif_coefficients_once(s_norm, beta2, ell, n_gl=24, density=1.0)
    a2, b2 = _bif_coefficients_once(s_norm, beta2, ell, n_gl=32, density=1.5)
    if abs(a2 - a2_coarse) > tol or abs(b2 - b2_coarse) > tol:
        raise QuadratureError(
            f"quadrature refinements disagree: d_a={a2 - a2_coarse:.3e}, "
            f"d_b={b2 - b2_coarse:.3e}, tol={tol:.1e}"
        )
    return BifCoefficients(a_bar2=a2, b_bar2=b2, ell=ell)

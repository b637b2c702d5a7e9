"""Scalar proximity operators for the four closed-form l_p penalties and the
induced singular-value thresholding of matrices.

``prox_scalar(x, tau, norm)`` returns ``argmin_u 0.5*(u - x)**2 + tau*|u|**p``
(for p = 0 the penalty is ``tau`` per nonzero entry). The p = 1/2 and p = 2/3
closed forms follow the half- and two-thirds-thresholding literature; both are
validated against the brute-force minimizer ``prox_oracle``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._svd import gram_singular, use_gram

__all__ = ["SpNorm", "SvtResult", "prox_scalar", "prox_array", "prox_oracle", "svt"]

# Post-threshold singular values at or below RANK_RTOL * sigma_max count as zero.
RANK_RTOL = 1e-12


class SpNorm(enum.Enum):
    """Schatten-p norm selector; only the four closed-form cases exist."""

    S0 = "s0"
    S12 = "s12"
    S23 = "s23"
    S1 = "s1"

    @property
    def p(self) -> float:
        return {"s0": 0.0, "s12": 0.5, "s23": 2.0 / 3.0, "s1": 1.0}[self.value]

    @classmethod
    def parse(cls, value) -> "SpNorm":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls(value.strip().lower())
            except ValueError:
                pass
        if isinstance(value, (int, float)):
            for norm in cls:
                if math.isclose(norm.p, float(value), abs_tol=1e-12):
                    return norm
        raise ValueError(
            f"invalid Schatten-p selector {value!r}; "
            f"use one of {[n.value for n in cls]} or p in {{0, 1/2, 2/3, 1}}"
        )


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0 or not math.isfinite(tau):
        raise ValueError(f"tau must be a positive finite real, got {tau}")
    return tau


def _prox_hard(x: np.ndarray, tau: float) -> np.ndarray:
    # Ties |x| = sqrt(2 tau) resolve to 0.
    return np.where(np.abs(x) > math.sqrt(2.0 * tau), x, 0.0)


def _prox_soft(x: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def _prox_half(x: np.ndarray, tau: float) -> np.ndarray:
    # Dead zone |x| <= (3/2) tau^(2/3); outside it the minimizer has the
    # trigonometric closed form of half thresholding.
    out = np.zeros_like(x)
    mask = np.abs(x) > 1.5 * tau ** (2.0 / 3.0)
    if np.any(mask):
        xm = x[mask]
        c = np.clip((tau / 4.0) * (np.abs(xm) / 3.0) ** -1.5, -1.0, 1.0)
        out[mask] = (2.0 / 3.0) * xm * (
            1.0 + np.cos(2.0 * np.pi / 3.0 - (2.0 / 3.0) * np.arccos(c))
        )
    return out


def _prox_twothirds(x: np.ndarray, tau: float) -> np.ndarray:
    # Dead zone |x| <= (2/3) (3 L^3)^(1/4) with L = 2 tau; outside it the
    # minimizer has the hyperbolic closed form of 2/3 thresholding.
    lam = 2.0 * tau
    out = np.zeros_like(x)
    mask = np.abs(x) > (2.0 / 3.0) * (3.0 * lam**3) ** 0.25
    if np.any(mask):
        xm = np.abs(x[mask])
        alpha = np.arccosh(np.maximum((27.0 / 16.0) * xm**2 * lam**-1.5, 1.0))
        c = (2.0 / math.sqrt(3.0)) * lam**0.25 * np.sqrt(np.cosh(alpha / 3.0))
        inner = np.sqrt(np.maximum(2.0 * xm / c - c**2, 0.0))
        out[mask] = np.sign(x[mask]) * ((c + inner) ** 3) / 8.0
    return out


_PROX_FNS = {
    SpNorm.S0: _prox_hard,
    SpNorm.S1: _prox_soft,
    SpNorm.S12: _prox_half,
    SpNorm.S23: _prox_twothirds,
}


def prox_array(x, tau: float, norm: SpNorm) -> np.ndarray:
    """Elementwise proximity operator over an array."""
    tau = _check_tau(tau)
    norm = SpNorm.parse(norm)
    return _PROX_FNS[norm](np.asarray(x, dtype=np.float64), tau)


def prox_scalar(x: float, tau: float, norm: SpNorm) -> float:
    """Proximity operator of ``tau * |.|**p`` evaluated at a scalar."""
    return float(prox_array(np.float64(x), tau, norm))


def _penalty(u: np.ndarray, p: float) -> np.ndarray:
    if p == 0.0:
        return (u != 0.0).astype(np.float64)
    return np.abs(u) ** p


def prox_oracle(x: float, tau: float, norm: SpNorm, grid_points: int = 4001) -> float:
    """Brute-force minimizer of ``0.5*(u - x)**2 + tau*|u|**p``.

    Evaluates the objective on a dense grid over ``[0, |x| + 1]`` (the
    minimizer shares the sign of ``x``), then refines the best bracket by
    golden-section search; resolution is far below 1e-5. Independent of the
    closed forms, so it can arbitrate them.
    """
    tau = _check_tau(tau)
    p = SpNorm.parse(norm).p
    sign = 1.0 if x >= 0 else -1.0
    a = abs(float(x))

    def objective(u):
        return 0.5 * (u - a) ** 2 + tau * _penalty(u, p)

    us = np.linspace(0.0, a + 1.0, grid_points)
    fs = objective(us)
    i = int(np.argmin(fs))
    lo, hi = us[max(i - 1, 0)], us[min(i + 1, grid_points - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    for _ in range(80):
        if objective(c) < objective(d):
            hi = d
        else:
            lo = c
        c = hi - invphi * (hi - lo)
        d = lo + invphi * (hi - lo)
    u_best = 0.5 * (lo + hi)
    # The objective has at most one interior basin plus the one at zero;
    # compare both (the grid can miss an exact tie at the origin for p = 0).
    candidates = np.array([0.0, a, u_best])
    best = candidates[int(np.argmin(objective(candidates)))]
    return float(sign * best)


@dataclass(frozen=True)
class SvtResult:
    """Outcome of singular-value thresholding.

    ``singular_values`` holds the full post-threshold spectrum, descending;
    ``rank`` counts the strictly positive entries after values at or below
    ``RANK_RTOL * sigma_max`` are snapped to zero.
    """

    matrix: np.ndarray
    rank: int
    singular_values: np.ndarray


def svt(m, tau: float, norm: SpNorm, *, validate: bool = True) -> SvtResult:
    """Schatten-p singular-value thresholding of a matrix.

    Computes a thin SVD of ``m``, applies :func:`prox_array` to the singular
    values with threshold ``tau``, and reassembles. Strongly rectangular
    large matrices take the Gram-matrix route, which never forms the right
    singular vectors explicitly and emits a Fortran-ordered result (so the
    subsequent canonical fold is a view). ``validate=False`` skips the
    finiteness scan for callers that already guarantee it.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    if validate and not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    tau = _check_tau(tau)
    norm = SpNorm.parse(norm)

    if use_gram(a.shape):
        if a.shape[0] <= a.shape[1]:
            s, u = gram_singular(a, "left")
            t, keep = _threshold_spectrum(s, tau, norm)
            left = u[:, keep] * (t[keep] / s[keep])
            # (right.T @ left.T).T is the same product laid out Fortran-style
            out = ((u[:, keep].T @ a).T @ left.T).T
        else:
            s, v = gram_singular(a, "right")
            t, keep = _threshold_spectrum(s, tau, norm)
            scaled = (a @ v[:, keep]) * (t[keep] / s[keep])
            out = (v[:, keep] @ scaled.T).T
    else:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        t, keep = _threshold_spectrum(s, tau, norm)
        out = (u[:, keep] * t[keep]) @ vt[keep]
    if not np.any(keep):
        out = np.zeros_like(a)
    return SvtResult(matrix=out, rank=int(np.count_nonzero(keep)), singular_values=t)


def _threshold_spectrum(s: np.ndarray, tau: float, norm: SpNorm):
    t = prox_array(s, tau, norm)
    if s.size and s[0] > 0.0:
        t[t <= RANK_RTOL * s[0]] = 0.0
    keep = t > 0.0
    return t, keep

"""Tensor-train (TT-SVD) and Tucker (HOOI) model fitting and reconstruction.

The TT sweep follows the sequential-SVD construction: reshape, thin SVD,
truncate (by a uniform share of the error budget, or to requested ranks),
carry the weighted right factors forward. Tucker fitting is higher-order
orthogonal iteration initialized from the leading left singular vectors of
each mode-n unfolding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._svd import gram_singular, sign_normalize, thin_svd, use_gram
from .admm import MlRank, TtRank
from .tensor import DenseTensor, _fold_mode, _unfold_mode, as_tensor

__all__ = [
    "TTModel",
    "TuckerModel",
    "tt_svd_eps",
    "tt_svd_ranks",
    "tt_reconstruct",
    "tucker_als",
    "tucker_reconstruct",
]


@dataclass
class TTModel:
    """Tensor-train core chain; core n has shape (R_{n-1}, I_n, R_n) with
    R_0 = R_N = 1."""

    cores: list[np.ndarray]
    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.cores) != len(self.dims):
            raise ValueError("one core per mode required")
        prev = 1
        for n, (core, dim) in enumerate(zip(self.cores, self.dims), start=1):
            if core.ndim != 3 or core.shape[0] != prev or core.shape[1] != dim:
                raise ValueError(
                    f"core {n} has shape {core.shape}; expected ({prev}, {dim}, *)"
                )
            prev = core.shape[2]
        if prev != 1:
            raise ValueError(f"trailing rank must be 1, got {prev}")

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(core.shape[2] for core in self.cores[:-1])

    def param_count(self) -> int:
        return sum(core.size for core in self.cores)


@dataclass
class TuckerModel:
    """Tucker model: core tensor plus one orthonormal factor per mode."""

    core: DenseTensor
    factors: list[np.ndarray]
    fit_history: list[float] = field(default_factory=list)
    ortho_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.core.order != len(self.factors):
            raise ValueError("one factor per core mode required")
        for n, (f, r) in enumerate(zip(self.factors, self.core.dims), start=1):
            if f.ndim != 2 or f.shape[1] != r:
                raise ValueError(
                    f"factor {n} has shape {f.shape}; expected (*, {r})"
                )
            if f.shape[0] < f.shape[1]:
                raise ValueError(f"factor {n} has more columns than rows")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.dims

    def param_count(self) -> int:
        return self.core.size + sum(f.size for f in self.factors)


def _tt_factor(c: np.ndarray):
    """Thin SVD of a sweep matrix, returning (U, s, carry) with
    carry = Sigma V^T = U^T c. Large strongly rectangular matrices take the
    Gram route."""
    rows, cols = c.shape
    if use_gram(c.shape):
        if rows <= cols:
            s, u = gram_singular(c, "left")
            u = sign_normalize(u)
            return u, s, u.T @ c
        s, v = gram_singular(c, "right")
        cutoff = s[0] * 1e-12 if s[0] > 0 else np.inf
        avail = max(int(np.count_nonzero(s > cutoff)), 1)
        v = v[:, :avail]
        s = s[:avail]
        u = (c @ v) / np.where(s > 0, s, 1.0)
        u = sign_normalize(u)
        return u, s, (u.T @ c)
    u, s, vt = thin_svd(c)
    return u, s, s[:, None] * vt


def _tt_sweep(x, rank_rule) -> TTModel:
    t = as_tensor(x)
    dims = t.dims
    n_modes = t.order
    if n_modes < 2:
        raise ValueError("need an order >= 2 tensor")
    cores: list[np.ndarray] = []
    c = t.data
    r_prev = 1
    for k in range(n_modes - 1):
        c = c.reshape((r_prev * dims[k], -1), order="F")
        u, s, carry = _tt_factor(c)
        r = max(1, min(rank_rule(k, s), len(s)))
        cores.append(u[:, :r].reshape((r_prev, dims[k], r), order="F"))
        c = carry[:r]
        r_prev = r
    cores.append(c.reshape((r_prev, dims[-1], 1), order="F"))
    return TTModel(cores=cores, dims=dims)


def tt_svd_eps(x, eps: float) -> TTModel:
    """TT decomposition with relative error budget ``eps``.

    Each sweep step truncates the spectrum so the discarded tail stays below
    delta = eps * ||x||_F / sqrt(N-1), which guarantees
    ``||x - reconstruct||_F <= eps * ||x||_F``.
    """
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    t = as_tensor(x)
    delta_sq = (eps * t.norm()) ** 2 / (t.order - 1)

    def rule(_k: int, s: np.ndarray) -> int:
        tails = np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]])
        return int(np.argmax(tails <= delta_sq))

    return _tt_sweep(t, rule)


def tt_svd_ranks(x, ranks) -> TTModel:
    """TT decomposition truncated to the requested ranks.

    Each step keeps min(requested, available) singular triplets; the achieved
    ranks are recorded in the returned model.
    """
    t = as_tensor(x)
    tt_rank = ranks if isinstance(ranks, TtRank) else TtRank(tuple(ranks))
    tt_rank.validate_for_dims(t.dims)
    return _tt_sweep(t, lambda k, s: tt_rank.ranks[k])


def tt_reconstruct(model: TTModel) -> DenseTensor:
    """Contract the core chain left to right back into a dense tensor."""
    out = model.cores[0][0]  # (I_1, R_1)
    for core in model.cores[1:]:
        out = np.tensordot(out, core, axes=(out.ndim - 1, 0))
    return DenseTensor._wrap_owned(out[..., 0])


def _mode_apply(arr: np.ndarray, mat: np.ndarray, n: int) -> np.ndarray:
    dims = arr.shape
    new_dims = dims[: n - 1] + (mat.shape[0],) + dims[n:]
    return _fold_mode(mat @ _unfold_mode(arr, n), new_dims, n)


def _leading_left(m: np.ndarray, r: int) -> np.ndarray:
    if use_gram(m.shape) and m.shape[0] <= m.shape[1]:
        _, u = gram_singular(m, "left")
        return sign_normalize(np.ascontiguousarray(u[:, :r]))
    u, _, _ = thin_svd(m)
    return u[:, :r]


def tucker_als(x, ranks, tol: float = 1e-6, max_sweeps: int = 50) -> TuckerModel:
    """Tucker fit by higher-order orthogonal iteration (HOOI).

    Factors start from the leading left singular vectors of each mode-n
    unfolding, then cycle: project all other modes, re-extract the leading
    subspace. The fit 1 - ||x - model||/||x|| is non-decreasing sweep to
    sweep; stops when its change drops below ``tol`` or after
    ``max_sweeps`` sweeps.
    """
    t = as_tensor(x)
    ml_rank = ranks if isinstance(ranks, MlRank) else MlRank(tuple(ranks))
    ml_rank.validate_for_dims(t.dims)
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    arr = t.array
    n_modes = t.order
    x_norm = t.norm()
    normalizer = x_norm if x_norm > 0 else 1.0

    factors = [
        _leading_left(_unfold_mode(arr, n), ml_rank.ranks[n - 1])
        for n in range(1, n_modes + 1)
    ]
    fit_history: list[float] = []
    ortho_history: list[float] = []
    core = None
    for _ in range(max_sweeps):
        for n in range(1, n_modes + 1):
            y = arr
            for m in range(1, n_modes + 1):
                if m != n:
                    y = _mode_apply(y, factors[m - 1].T, m)
            factors[n - 1] = _leading_left(_unfold_mode(y, n), ml_rank.ranks[n - 1])
        core = arr
        for n in range(1, n_modes + 1):
            core = _mode_apply(core, factors[n - 1].T, n)
        # orthonormal factors: ||x - model||^2 = ||x||^2 - ||core||^2
        core_norm_sq = float(np.linalg.norm(core) ** 2)
        err = math.sqrt(max(x_norm**2 - core_norm_sq, 0.0))
        fit_history.append(1.0 - err / normalizer)
        ortho_history.append(
            max(
                float(np.abs(f.T @ f - np.eye(f.shape[1])).max())
                for f in factors
            )
        )
        if len(fit_history) >= 2 and abs(fit_history[-1] - fit_history[-2]) < tol:
            break
    return TuckerModel(
        core=DenseTensor._wrap_owned(core),
        factors=factors,
        fit_history=fit_history,
        ortho_history=ortho_history,
    )


def tucker_reconstruct(model: TuckerModel) -> DenseTensor:
    """Multiply the core by every factor matrix along its mode."""
    out = model.core.array
    for n, f in enumerate(model.factors, start=1):
        out = _mode_apply(out, f, n)
    return DenseTensor._wrap_owned(out)

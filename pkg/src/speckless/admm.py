"""ADMM solvers for low TT-rank and low ML-rank tensor denoising.

Both solvers split the tensor into per-matricization subproblems solved by
Schatten-p singular-value thresholding, with multiplier updates and a
penalty that grows geometrically up to a cap. The TT variant works on the
canonical unfoldings (N-1 subproblems), the ML variant on the mode-n
unfoldings (N subproblems).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .prox import SpNorm, svt
from .tensor import DenseTensor, _fold_canonical, _fold_mode, _unfold_canonical, _unfold_mode, as_tensor

__all__ = [
    "AdmmConfig",
    "AdmmTrace",
    "TtRank",
    "MlRank",
    "tt_weights",
    "ml_weights",
    "denoise_tt",
    "denoise_ml",
    "DEFAULT_EPS_R_TT",
    "DEFAULT_EPS_R_ML",
]

DEFAULT_EPS_R_TT = 1e-3
DEFAULT_EPS_R_ML = 3e-3


@dataclass
class AdmmConfig:
    """Solver knobs: initial and maximal penalty, growth factor, stopping
    tolerance on the relative change, and the iteration budget.

    ``eps_r=None`` picks the solver's default (0.001 for TT, 0.003 for ML).
    """

    mu0: float
    mu_max: float
    norm: SpNorm
    rho: float = 1.1
    eps_r: float | None = None
    itmax: int = 100

    def __post_init__(self) -> None:
        self.norm = SpNorm.parse(self.norm)
        if not (self.mu0 > 0 and math.isfinite(self.mu0)):
            raise ValueError(f"mu0 must be positive, got {self.mu0}")
        if not (self.mu_max >= self.mu0 and math.isfinite(self.mu_max)):
            raise ValueError("mu_max must satisfy mu0 <= mu_max < inf")
        if not self.rho > 1:
            raise ValueError(f"rho must exceed 1, got {self.rho}")
        if self.eps_r is not None and not self.eps_r > 0:
            raise ValueError(f"eps_r must be positive, got {self.eps_r}")
        if not (isinstance(self.itmax, int) and self.itmax >= 1):
            raise ValueError(f"itmax must be a positive integer, got {self.itmax}")


@dataclass
class AdmmTrace:
    """Per-run convergence record.

    ``rel_change[l]`` is the relative change of the denoised iterate at
    iteration ``l+1``; ``z_norms`` tracks its Frobenius norm (these feed the
    boundedness and stationarity checks of the convergence theory).
    """

    iterations: int
    rel_change: list[float]
    converged: bool
    mu_final: float
    z_norms: list[float] = field(default_factory=list)
    max_primal_residual: float = float("nan")


@dataclass(frozen=True)
class TtRank:
    """TT rank tuple (R_1, ..., R_{N-1}); rank k bounds the rank of the
    mode-(1..k) canonical unfolding."""

    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if any(r < 0 for r in self.ranks):
            raise ValueError(f"ranks must be nonnegative, got {self.ranks}")

    @property
    def degenerate(self) -> bool:
        """True when any rank is zero (e.g. the solver saw a zero tensor)."""
        return any(r == 0 for r in self.ranks)

    def validate_for_dims(self, dims: tuple[int, ...]) -> None:
        if len(self.ranks) != len(dims) - 1:
            raise ValueError(
                f"expected {len(dims) - 1} TT ranks for dims {dims}, got {self.ranks}"
            )
        if self.degenerate:
            raise ValueError(f"TT ranks must be positive, got {self.ranks}")
        for k, r in enumerate(self.ranks, start=1):
            bound = min(math.prod(dims[:k]), math.prod(dims[k:]))
            if r > bound:
                raise ValueError(
                    f"TT rank R_{k}={r} exceeds bound {bound} for dims {dims}"
                )


@dataclass(frozen=True)
class MlRank:
    """Multilinear rank tuple (R_1, ..., R_N); rank n bounds the rank of the
    mode-n unfolding."""

    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if any(r < 0 for r in self.ranks):
            raise ValueError(f"ranks must be nonnegative, got {self.ranks}")

    @property
    def degenerate(self) -> bool:
        """True when any rank is zero (e.g. the solver saw a zero tensor)."""
        return any(r == 0 for r in self.ranks)

    def validate_for_dims(self, dims: tuple[int, ...]) -> None:
        if len(self.ranks) != len(dims):
            raise ValueError(
                f"expected {len(dims)} ML ranks for dims {dims}, got {self.ranks}"
            )
        if self.degenerate:
            raise ValueError(f"ML ranks must be positive, got {self.ranks}")
        for n, r in enumerate(self.ranks, start=1):
            bound = min(dims[n - 1], math.prod(dims) // dims[n - 1])
            if r > bound:
                raise ValueError(
                    f"ML rank R_{n}={r} exceeds bound {bound} for dims {dims}"
                )


def tt_weights(dims) -> np.ndarray:
    """Canonical-unfolding weights: beta_k = min of the two split sizes,
    normalized to sum to one."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ValueError("need an order >= 2 tensor")
    beta = np.array(
        [min(math.prod(dims[:k]), math.prod(dims[k:])) for k in range(1, len(dims))],
        dtype=np.float64,
    )
    return beta / beta.sum()


def ml_weights(dims) -> np.ndarray:
    """Mode-n-unfolding weights: gamma_n = min(I_n, prod of the others),
    normalized to sum to one."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ValueError("need an order >= 2 tensor")
    total = math.prod(dims)
    gamma = np.array([min(d, total // d) for d in dims], dtype=np.float64)
    return gamma / gamma.sum()


def _admm_denoise(x, cfg: AdmmConfig, scheme: str):
    """Shared driver; ``scheme`` selects the matricization family."""
    t = as_tensor(x)
    dims = t.dims
    if t.order < 2:
        raise ValueError("need an order >= 2 tensor")
    if scheme == "tt":
        weights = tt_weights(dims)
        eps_r = cfg.eps_r if cfg.eps_r is not None else DEFAULT_EPS_R_TT
        unfold = _unfold_canonical
        fold = lambda m, k: _fold_canonical(m, dims)
    else:
        weights = ml_weights(dims)
        eps_r = cfg.eps_r if cfg.eps_r is not None else DEFAULT_EPS_R_ML
        unfold = _unfold_mode
        fold = lambda m, k: _fold_mode(m, dims, k)

    n_sub = len(weights)
    x_norm = t.norm()
    normalizer = x_norm if x_norm > 0 else 1.0

    z = np.array(t.array, order="F", copy=True)
    z_next = np.zeros(dims, order="F")
    lambdas = [np.zeros_like(unfold(z, k)) for k in range(1, n_sub + 1)]
    scratch = [np.empty_like(lam) for lam in lambdas]
    # F-contiguous scratch reshapes to the tensor shape without copying, so
    # the fold accumulation below writes straight into reusable memory
    scratch_t = [s.reshape(dims, order="F") for s in scratch]
    mats = [None] * n_sub
    ranks = [0] * n_sub
    mu = cfg.mu0

    rel_change: list[float] = []
    z_norms: list[float] = []
    converged = False

    for _ in range(cfg.itmax):
        z_next.fill(0.0)
        for i, k in enumerate(range(1, n_sub + 1)):
            xk = unfold(z, k)
            buf = scratch[i]
            np.multiply(lambdas[i], 1.0 / mu, out=buf)
            buf += xk
            res = svt(buf, weights[i] / mu, cfg.norm, validate=False)
            mats[i] = res.matrix
            ranks[i] = res.rank
            np.subtract(xk, res.matrix, out=buf)
            buf *= mu
            lambdas[i] += buf
            np.multiply(fold(res.matrix, k), weights[i], out=scratch_t[i])
            z_next += scratch_t[i]
        np.subtract(z_next, z, out=z)
        rel = float(np.linalg.norm(z.ravel(order="K")) / normalizer)
        z, z_next = z_next, z
        mu = min(cfg.rho * mu, cfg.mu_max)
        rel_change.append(rel)
        z_norms.append(float(np.linalg.norm(z.ravel(order="K"))))
        if rel <= eps_r:
            converged = True
            break

    residual = max(
        float(np.linalg.norm(unfold(z, k) - mats[k - 1]) / normalizer)
        for k in range(1, n_sub + 1)
    )
    trace = AdmmTrace(
        iterations=len(rel_change),
        rel_change=rel_change,
        converged=converged,
        mu_final=mu,
        z_norms=z_norms,
        max_primal_residual=residual,
    )
    return DenseTensor._wrap_owned(z), trace, ranks


def denoise_tt(x, cfg: AdmmConfig) -> tuple[DenseTensor, AdmmTrace]:
    """Low TT-rank ADMM denoising over the canonical unfoldings."""
    out, trace, _ = _admm_denoise(x, cfg, "tt")
    return out, trace


def denoise_ml(x, cfg: AdmmConfig) -> tuple[DenseTensor, AdmmTrace, MlRank]:
    """Low ML-rank ADMM denoising over the mode-n unfoldings.

    Also reports the rank of each final thresholded unfolding; ranks are all
    zero (``MlRank.degenerate``) for a zero input.
    """
    out, trace, ranks = _admm_denoise(x, cfg, "ml")
    return out, trace, MlRank(tuple(ranks))

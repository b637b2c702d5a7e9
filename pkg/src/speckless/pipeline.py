"""Compression-ratio arithmetic, rank correction, and the end-to-end
de-speckle-and-compress pipelines.

Both pipelines interpolate ADMM penalties from a calibration table, denoise,
read off the model rank the denoised tensor suggests, correct that rank so
the model's parameter count hits the requested compression ratio, and fit
the final model at the corrected rank. By default the final decomposition is
applied to the original tensor (the error/ranks learned from denoising steer
it); ``decompose_denoised=True`` applies it to the denoised tensor instead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .admm import AdmmConfig, MlRank, TtRank, denoise_ml, denoise_tt
from .decomp import TTModel, TuckerModel, tt_svd_eps, tt_svd_ranks, tucker_als
from .prox import SpNorm
from .tensor import DenseTensor, as_tensor

__all__ = [
    "CompressionOutcome",
    "RankCorrectionWarning",
    "cr_tt",
    "cr_ml",
    "correct_tt_rank",
    "correct_ml_rank",
    "natural_cr",
    "despeckle_compress_tt",
    "despeckle_compress_ml",
]

# Denoising error from a degenerate run is clipped into this range before it
# is handed to the eps-driven TT sweep, whose domain is (0, 1).
_EPS_FLOOR = 1e-12
_EPS_CEIL = 0.999


class RankCorrectionWarning(UserWarning):
    """Requested compression ratio cannot be met by the correction scheme."""


def _check_dims3(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ValueError(f"expected positive 3-way dims, got {dims}")
    return dims


def cr_tt(dims, r1: int, r2: int) -> float:
    """Compression ratio of a TT model: voxels over parameter count
    I1*R1 + R1*I2*R2 + R2*I3."""
    i1, i2, i3 = _check_dims3(dims)
    if r1 < 1 or r2 < 1:
        raise ValueError(f"ranks must be positive, got {(r1, r2)}")
    return (i1 * i2 * i3) / (i1 * r1 + r1 * i2 * r2 + r2 * i3)


def cr_ml(dims, r1: int, r2: int, r3: int) -> float:
    """Compression ratio of a Tucker model: voxels over parameter count
    R1*R2*R3 + I1*R1 + I2*R2 + I3*R3."""
    i1, i2, i3 = _check_dims3(dims)
    if min(r1, r2, r3) < 1:
        raise ValueError(f"ranks must be positive, got {(r1, r2, r3)}")
    return (i1 * i2 * i3) / (r1 * r2 * r3 + i1 * r1 + i2 * r2 + i3 * r3)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def correct_tt_rank(dims, ranks, target_cr: float) -> tuple[int, int]:
    """Adjust one TT rank so the model parameter count meets ``target_cr``.

    Shrinks the larger rank when the achieved CR is too low, grows the
    smaller when too high (ties pick the lower mode index); the selected rank
    is re-solved from the CR identity, rounded, and clamped to [1, I_n].
    """
    i1, i2, i3 = _check_dims3(dims)
    r1, r2 = (int(r) for r in ranks)
    if not target_cr > 0:
        raise ValueError(f"target CR must be positive, got {target_cr}")
    achieved = cr_tt(dims, r1, r2)
    if achieved == target_cr:
        return r1, r2
    if target_cr > cr_tt(dims, 1, 1):
        warnings.warn(
            f"CR {target_cr:g} exceeds the maximum reachable "
            f"{cr_tt(dims, 1, 1):.3g} at ranks (1, 1); correcting best-effort",
            RankCorrectionWarning,
            stacklevel=2,
        )
    if achieved < target_cr:
        pick = 0 if r1 >= r2 else 1
    else:
        pick = 0 if r1 <= r2 else 1
    voxels = i1 * i2 * i3
    if pick == 0:
        est = (voxels - target_cr * r2 * i3) / (target_cr * (i1 + i2 * r2))
        r1 = min(max(_round_half_up(est), 1), i1)
    else:
        est = (voxels - target_cr * r1 * i1) / (target_cr * (i3 + i2 * r1))
        r2 = min(max(_round_half_up(est), 1), i2)
    corrected = cr_tt(dims, r1, r2)
    if abs(corrected - target_cr) > abs(achieved - target_cr):
        warnings.warn(
            f"TT rank correction could not reach CR {target_cr:g} "
            f"(best effort ({r1}, {r2}) gives {corrected:.3g})",
            RankCorrectionWarning,
            stacklevel=2,
        )
    return r1, r2


def correct_ml_rank(dims, ranks, target_cr: float) -> tuple[int, int, int]:
    """Adjust one multilinear rank so the Tucker parameter count meets
    ``target_cr``; same selection, rounding, and clamping policy as the TT
    correction."""
    i1, i2, i3 = _check_dims3(dims)
    r = [int(v) for v in ranks]
    if not target_cr > 0:
        raise ValueError(f"target CR must be positive, got {target_cr}")
    achieved = cr_ml(dims, *r)
    if achieved == target_cr:
        return tuple(r)
    if target_cr > cr_ml(dims, 1, 1, 1):
        warnings.warn(
            f"CR {target_cr:g} exceeds the maximum reachable "
            f"{cr_ml(dims, 1, 1, 1):.3g} at ranks (1, 1, 1); correcting best-effort",
            RankCorrectionWarning,
            stacklevel=2,
        )
    if achieved < target_cr:
        pick = max(range(3), key=lambda i: (r[i], -i))
    else:
        pick = min(range(3), key=lambda i: (r[i], i))
    voxels = i1 * i2 * i3
    dims_t = (i1, i2, i3)
    others = [i for i in range(3) if i != pick]
    numer = voxels - sum(target_cr * dims_t[i] * r[i] for i in others)
    denom = target_cr * (r[others[0]] * r[others[1]] + dims_t[pick])
    r[pick] = min(max(_round_half_up(numer / denom), 1), dims_t[pick])
    corrected = cr_ml(dims, *r)
    if abs(corrected - target_cr) > abs(achieved - target_cr):
        warnings.warn(
            f"ML rank correction could not reach CR {target_cr:g} "
            f"(best effort {tuple(r)} gives {corrected:.3g})",
            RankCorrectionWarning,
            stacklevel=2,
        )
    return tuple(r)


@dataclass
class CompressionOutcome:
    """Everything a pipeline run produces: the fitted model, the ADMM
    denoised tensor, requested vs achieved CR (from the final model ranks),
    the solver trace, and the denoising error that drove rank selection."""

    model: Union[TTModel, TuckerModel]
    denoised: DenseTensor
    requested_cr: float
    achieved_cr: float
    admm_trace: object
    approx_error: float


def _relative_change(x: DenseTensor, xhat: DenseTensor) -> float:
    return float(np.linalg.norm(xhat.array - x.array) / np.linalg.norm(x.array))


def _prepare(x, target_cr: float, norm, table, mode: str):
    t = as_tensor(x)
    if t.order != 3:
        raise ValueError(f"pipelines expect a 3-way volume, got order {t.order}")
    if not target_cr > 1:
        raise ValueError(f"target CR must exceed 1, got {target_cr}")
    norm = SpNorm.parse(norm)
    mu0, mu_max = table.interpolate(mode, norm, target_cr)
    return t, norm, mu0, mu_max


def despeckle_compress_tt(
    x,
    target_cr: float,
    norm,
    table,
    *,
    decompose_denoised: bool = False,
    eps_r: float | None = None,
    itmax: int = 100,
    rho: float = 1.1,
) -> CompressionOutcome:
    """Low-TT-rank de-speckling and compression of a 3-way volume."""
    t, norm, mu0, mu_max = _prepare(x, target_cr, norm, table, "tt")
    cfg = AdmmConfig(mu0=mu0, mu_max=mu_max, norm=norm, rho=rho, eps_r=eps_r, itmax=itmax)
    denoised, trace = denoise_tt(t, cfg)
    eps = _relative_change(t, denoised)
    source = denoised if decompose_denoised else t
    probe = tt_svd_eps(source, min(max(eps, _EPS_FLOOR), _EPS_CEIL))
    corrected = correct_tt_rank(t.dims, probe.ranks, target_cr)
    model = tt_svd_ranks(source, TtRank(corrected))
    achieved = cr_tt(t.dims, *model.ranks)
    return CompressionOutcome(
        model=model,
        denoised=denoised,
        requested_cr=float(target_cr),
        achieved_cr=achieved,
        admm_trace=trace,
        approx_error=eps,
    )


def despeckle_compress_ml(
    x,
    target_cr: float,
    norm,
    table,
    *,
    decompose_denoised: bool = False,
    eps_r: float | None = None,
    itmax: int = 100,
    rho: float = 1.1,
) -> CompressionOutcome:
    """Low-ML-rank de-speckling and compression of a 3-way volume."""
    t, norm, mu0, mu_max = _prepare(x, target_cr, norm, table, "ml")
    cfg = AdmmConfig(mu0=mu0, mu_max=mu_max, norm=norm, rho=rho, eps_r=eps_r, itmax=itmax)
    denoised, trace, ml_rank = denoise_ml(t, cfg)
    eps = _relative_change(t, denoised)
    ranks = tuple(max(r, 1) for r in ml_rank.ranks)  # floor degenerate ranks
    corrected = correct_ml_rank(t.dims, ranks, target_cr)
    source = denoised if decompose_denoised else t
    model = tucker_als(source, MlRank(corrected))
    achieved = cr_ml(t.dims, *model.ranks)
    return CompressionOutcome(
        model=model,
        denoised=denoised,
        requested_cr=float(target_cr),
        achieved_cr=achieved,
        admm_trace=trace,
        approx_error=eps,
    )


def natural_cr(x, mode: str, cfg: AdmmConfig) -> float:
    """Compression ratio the denoiser naturally produces before any rank
    correction; this is the quantity penalty calibration drives to a target.
    """
    t = as_tensor(x)
    if t.order != 3:
        raise ValueError(f"expected a 3-way volume, got order {t.order}")
    if mode == "tt":
        denoised, _ = denoise_tt(t, cfg)
        eps = _relative_change(t, denoised)
        probe = tt_svd_eps(t, min(max(eps, _EPS_FLOOR), _EPS_CEIL))
        return cr_tt(t.dims, *probe.ranks)
    if mode == "ml":
        _, _, ml_rank = denoise_ml(t, cfg)
        ranks = tuple(max(r, 1) for r in ml_rank.ranks)
        return cr_ml(t.dims, *ranks)
    raise ValueError(f"mode must be 'tt' or 'ml', got {mode!r}")

"""Synthetic layered phantoms with exact low-rank structure and
multiplicative gamma speckle.

The clean volume mimics a retina stack: piecewise-constant horizontal bands
whose intensities are modulated smoothly across columns and scans. Band
indicators on the first mode make the latent rank exact, and every voxel
stays positive so multiplicative speckle behaves like the physical artifact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DenseTensor

__all__ = ["SpeckledPhantomSpec", "make_phantom", "layered_phantom_spec"]


@dataclass(frozen=True)
class SpeckledPhantomSpec:
    """Recipe for a phantom: dims, latent model kind ('tt' or 'ml') with its
    rank tuple, speckle looks (gamma shape; 1 = fully developed), and seed."""

    dims: tuple[int, int, int]
    kind: str
    ranks: tuple[int, ...]
    looks: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        if self.kind not in ("tt", "ml"):
            raise ValueError(f"kind must be 'tt' or 'ml', got {self.kind!r}")
        expected = 2 if self.kind == "tt" else 3
        if len(self.ranks) != expected or any(r < 1 for r in self.ranks):
            raise ValueError(
                f"{self.kind} phantom needs {expected} positive ranks, got {self.ranks}"
            )
        for r, bound in zip(self.ranks, self._rank_bounds()):
            if r > bound:
                raise ValueError(f"rank {r} exceeds bound {bound} for dims {self.dims}")
        if not self.looks > 0:
            raise ValueError(f"looks must be positive, got {self.looks}")

    def _rank_bounds(self) -> tuple[int, ...]:
        i1, i2, i3 = self.dims
        if self.kind == "tt":
            return (min(i1, i2 * i3), min(i1 * i2, i3))
        total = i1 * i2 * i3
        return tuple(min(d, total // d) for d in self.dims)


def _bands(length: int, count: int) -> np.ndarray:
    """Indicator columns of ``count`` contiguous bands covering ``length``."""
    edges = np.linspace(0, length, count + 1).astype(int)
    out = np.zeros((length, count))
    for b in range(count):
        out[edges[b] : edges[b + 1], b] = 1.0
    return out


def _wave(rng, length: int, freq_base: float) -> np.ndarray:
    x = np.linspace(0.0, 1.0, length)
    freq = freq_base + rng.uniform(0.1, 0.9)
    return np.cos(2 * np.pi * freq * x + rng.uniform(0, 2 * np.pi))


def _profiles(rng, length: int, count: int) -> np.ndarray:
    """Column 0 is constant one; later columns are smooth bounded waves."""
    out = np.ones((length, count))
    for c in range(1, count):
        out[:, c] = _wave(rng, length, float(c))
    return out


def _clean_ml(rng, dims, ranks) -> np.ndarray:
    r1, r2, r3 = ranks
    a1 = _bands(dims[0], r1)
    a2 = _profiles(rng, dims[1], r2)
    a3 = _profiles(rng, dims[2], r3)
    levels = np.linspace(0.3, 1.0, r1)
    core = rng.uniform(-1.0, 1.0, size=ranks)
    core *= 0.2 * levels[:, None, None] / max(r2 * r3 - 1, 1)
    core[:, 0, 0] = levels  # dominant constant term keeps voxels positive
    out = np.einsum("abc,ia,jb,kc->ijk", core, a1, a2, a3, optimize=True)
    return out


def _clean_tt(rng, dims, ranks) -> np.ndarray:
    r1, r2 = ranks
    g1 = _bands(dims[0], r1)
    levels = np.linspace(0.3, 1.0, r1)
    g2 = np.zeros((r1, dims[1], r2))
    g3 = np.zeros((r2, dims[2]))
    g3[0] = 1.0
    for a in range(r1):
        g2[a, :, 0] = levels[a] * (1.0 + 0.1 * _wave(rng, dims[1], 1.0))
        for c in range(1, r2):
            g2[a, :, c] = 0.2 * levels[a] / (r2 - 1) * _wave(rng, dims[1], float(c))
    for c in range(1, r2):
        g3[c] = 0.15 * _wave(rng, dims[2], float(c))
    return np.einsum("ia,ajc,ck->ijk", g1, g2, g3, optimize=True)


def make_phantom(spec: SpeckledPhantomSpec) -> tuple[DenseTensor, DenseTensor]:
    """Build (clean, noisy): the exact-low-rank layered volume and its
    speckled counterpart ``clean * gamma(looks, 1/looks)`` (unit-mean noise,
    variance 1/looks). Deterministic under the spec's seed."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "ml":
        clean = _clean_ml(rng, spec.dims, spec.ranks)
    else:
        clean = _clean_tt(rng, spec.dims, spec.ranks)
    if clean.min() <= 0:
        # generic constructions above keep a positive floor; guard regardless
        clean = clean - clean.min() + 0.05
    speckle = rng.gamma(shape=spec.looks, scale=1.0 / spec.looks, size=spec.dims)
    return DenseTensor(clean), DenseTensor(clean * speckle)


def layered_phantom_spec(
    dims=(480, 512, 64), looks: float = 1.0, seed: int = 506
) -> SpeckledPhantomSpec:
    """The standard phantom recipe the bundled calibration table was built
    on: six retina-like layers with mild column/scan modulation."""
    return SpeckledPhantomSpec(dims=dims, kind="ml", ranks=(6, 4, 3), looks=looks, seed=seed)

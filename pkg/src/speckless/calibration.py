"""Penalty calibration: tables of (CR, mu0, mu_max) samples per model family
and norm, shape-preserving interpolation between them, and the search that
builds them by driving the denoiser's natural compression ratio to targets.

The bundled default table was produced by running :func:`calibrate` on the
synthetic layered phantom; regenerate on your own data with the ``speckless
calibrate`` subcommand for best denoising quality.
"""

from __future__ import annotations

import importlib.resources
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .admm import AdmmConfig
from .pipeline import natural_cr
from .prox import SpNorm
from .tensor import as_tensor

__all__ = [
    "CalibrationSample",
    "CalibrationTable",
    "CalibrationWarning",
    "interpolate_mu",
    "calibrate",
    "default_table",
    "DEFAULT_CR_TARGETS",
    "DEFAULT_MU_MAX_FACTOR",
]

MODES = ("tt", "ml")

# "from 1 to 100 in twelve steps", logarithmically spaced
DEFAULT_CR_TARGETS = tuple(float(v) for v in np.geomspace(1.0, 100.0, 12))
DEFAULT_MU_MAX_FACTOR = 1e3


class CalibrationWarning(UserWarning):
    """A calibration target could not be bracketed and was omitted."""


@dataclass(frozen=True)
class CalibrationSample:
    cr: float
    mu0: float
    mu_max: float

    def __post_init__(self) -> None:
        if not (self.cr > 0 and self.mu0 > 0 and self.mu_max > 0):
            raise ValueError(f"calibration sample fields must be positive: {self}")
        if self.mu_max < self.mu0:
            raise ValueError(f"mu_max must be >= mu0: {self}")


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


class CalibrationTable:
    """Per-(mode, norm) lists of (cr, mu0, mu_max) samples, strictly
    increasing in cr, interpolated by the monotone (Fritsch-Carlson) cubic
    Hermite rule and clamped to the endpoints outside the sampled range."""

    def __init__(self) -> None:
        self._entries: dict[tuple[str, SpNorm], list[CalibrationSample]] = {}

    def add(self, mode: str, norm, samples) -> None:
        mode = _check_mode(mode)
        norm = SpNorm.parse(norm)
        samples = sorted(
            (
                s if isinstance(s, CalibrationSample) else CalibrationSample(*s)
                for s in samples
            ),
            key=lambda s: s.cr,
        )
        crs = [s.cr for s in samples]
        if any(b <= a for a, b in zip(crs, crs[1:])):
            raise ValueError(f"cr values must be strictly increasing, got {crs}")
        self._entries[(mode, norm)] = samples

    def samples(self, mode: str, norm) -> list[CalibrationSample]:
        key = (_check_mode(mode), SpNorm.parse(norm))
        if key not in self._entries:
            raise KeyError(f"no calibration samples for mode={key[0]} norm={key[1].value}")
        return list(self._entries[key])

    def entries(self):
        for (mode, norm), samples in sorted(
            self._entries.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
        ):
            yield mode, norm, list(samples)

    def interpolate(self, mode: str, norm, target_cr: float) -> tuple[float, float]:
        """Penalties for ``target_cr``; exact at knots, clamped outside."""
        samples = self.samples(mode, norm)
        if len(samples) < 2:
            raise ValueError(
                f"need at least 2 samples to interpolate mode={mode} "
                f"norm={SpNorm.parse(norm).value}, have {len(samples)}"
            )
        crs = np.array([s.cr for s in samples])
        cr = float(np.clip(target_cr, crs[0], crs[-1]))
        for s in samples:  # knot queries return the sample verbatim
            if cr == s.cr:
                return s.mu0, s.mu_max
        mu0 = float(PchipInterpolator(crs, [s.mu0 for s in samples])(cr))
        mu_max = float(PchipInterpolator(crs, [s.mu_max for s in samples])(cr))
        return mu0, max(mu_max, mu0)

    def dumps(self) -> str:
        lines = ["# speckless calibration table v1"]
        for mode, norm, samples in self.entries():
            for s in samples:
                # repr keeps the shortest exact decimal form of each float
                lines.append(
                    f"mode={mode} norm={norm.value} cr={s.cr!r} "
                    f"mu0={s.mu0!r} mu_max={s.mu_max!r}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CalibrationTable":
        grouped: dict[tuple[str, SpNorm], list[CalibrationSample]] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = {}
            for token in line.split():
                if "=" not in token:
                    raise ValueError(f"line {lineno}: expected key=value, got {token!r}")
                key, value = token.split("=", 1)
                fields[key] = value
            missing = {"mode", "norm", "cr", "mu0", "mu_max"} - fields.keys()
            if missing:
                raise ValueError(f"line {lineno}: missing fields {sorted(missing)}")
            key = (_check_mode(fields["mode"]), SpNorm.parse(fields["norm"]))
            grouped.setdefault(key, []).append(
                CalibrationSample(
                    cr=float(fields["cr"]),
                    mu0=float(fields["mu0"]),
                    mu_max=float(fields["mu_max"]),
                )
            )
        table = cls()
        for (mode, norm), samples in grouped.items():
            table.add(mode, norm, samples)
        return table

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "CalibrationTable":
        with open(path, "r", encoding="ascii") as fh:
            return cls.loads(fh.read())


def interpolate_mu(table: CalibrationTable, mode: str, norm, target_cr: float):
    """Module-level alias for :meth:`CalibrationTable.interpolate`."""
    return table.interpolate(mode, norm, target_cr)


def calibrate(
    volumes,
    mode: str,
    norm,
    cr_targets=DEFAULT_CR_TARGETS,
    admm_defaults: dict | None = None,
    *,
    mu_max_factor: float = DEFAULT_MU_MAX_FACTOR,
    rel_tol: float = 0.10,
    max_bisections: int = 16,
    table: CalibrationTable | None = None,
) -> CalibrationTable:
    """Search mu0 per CR target so the denoiser's mean natural CR over the
    volumes lands within ``rel_tol`` of the target.

    mu0 moves on a geometric grid with mu_max tied to ``mu_max_factor * mu0``;
    the direction of the CR response is measured from the evaluations rather
    than assumed. Targets that cannot be bracketed are omitted with a
    :class:`CalibrationWarning`. Results accumulate into ``table`` (a fresh
    one by default) under (mode, norm), sorted by achieved CR.
    """
    mode = _check_mode(mode)
    norm = SpNorm.parse(norm)
    vols = [as_tensor(v) for v in volumes]
    if not vols:
        raise ValueError("need at least one volume")
    targets = sorted(float(t) for t in cr_targets)
    defaults = dict(admm_defaults or {})
    if not targets:
        out = table if table is not None else CalibrationTable()
        out.add(mode, norm, [])
        return out

    memo: dict[float, float] = {}

    def evaluate(mu0: float) -> float:
        key = round(math.log10(mu0), 12)
        if key not in memo:
            cfg = AdmmConfig(
                mu0=mu0, mu_max=mu_max_factor * mu0, norm=norm, **defaults
            )
            memo[key] = float(
                np.mean([natural_cr(v, mode, cfg) for v in vols])
            )
        return memo[key]

    # seed around the data scale: thresholds weight/mu compare to singular
    # values, whose magnitude tracks the Frobenius norm
    mu_ref = 1.0 / float(np.mean([v.norm() for v in vols]))
    mu_lo_limit = mu_ref * 1e-8
    mu_hi_limit = mu_ref * 1e14

    evaluated: list[tuple[float, float]] = []  # (mu0, cr)

    def record(mu0: float) -> float:
        cr = evaluate(mu0)
        evaluated.append((mu0, cr))
        return cr

    def tightest_bracket(target: float):
        """Adjacent straddling pair with the smallest mu ratio; robust to a
        mildly non-monotone response."""
        points = sorted(set(evaluated))
        best_pair = None
        for pa, pb in zip(points, points[1:]):
            if min(pa[1], pb[1]) <= target <= max(pa[1], pb[1]):
                if best_pair is None or pb[0] / pa[0] < best_pair[1][0] / best_pair[0][0]:
                    best_pair = (pa, pb)
        return best_pair

    for m in (mu_ref, mu_ref * 1e2, mu_ref * 1e4):
        record(m)

    samples: list[CalibrationSample] = []
    for target in targets:
        if tightest_bracket(target) is None:
            # expand toward the side that should contain the target; the
            # measured trend says which end to push
            points = sorted(set(evaluated))
            trend_down = points[-1][1] <= points[0][1]  # CR falls as mu grows
            need_higher_cr = target > max(c for _, c in points)
            grow_mu = trend_down != need_higher_cr
            m_edge = points[-1][0] if grow_mu else points[0][0]
            while tightest_bracket(target) is None:
                m_edge = m_edge * 1e2 if grow_mu else m_edge / 1e2
                if not mu_lo_limit <= m_edge <= mu_hi_limit:
                    break
                record(m_edge)
        bracket = tightest_bracket(target)
        if bracket is None:
            warnings.warn(
                f"could not bracket CR target {target:g} for mode={mode} "
                f"norm={norm.value}; knot omitted",
                CalibrationWarning,
                stacklevel=2,
            )
            continue
        best = min(bracket, key=lambda mc: abs(mc[1] - target))
        for _ in range(max_bisections):
            if abs(best[1] - target) <= rel_tol * target:
                break
            bracket = tightest_bracket(target)
            (m_a, c_a), (m_b, c_b) = bracket
            if m_b / m_a < 1.005:
                break  # the integer-rank response steps here; take the best
            c_mid = record(math.sqrt(m_a * m_b))
            if abs(c_mid - target) < abs(best[1] - target):
                best = (math.sqrt(m_a * m_b), c_mid)
        if abs(best[1] - target) <= rel_tol * target:
            samples.append(
                CalibrationSample(
                    cr=best[1], mu0=best[0], mu_max=mu_max_factor * best[0]
                )
            )
        else:
            warnings.warn(
                f"CR target {target:g} not reached within {rel_tol:.0%} for "
                f"mode={mode} norm={norm.value} (best {best[1]:.3g}); knot omitted",
                CalibrationWarning,
                stacklevel=2,
            )

    # keep one knot per achieved CR, strictly increasing
    samples.sort(key=lambda s: s.cr)
    deduped: list[CalibrationSample] = []
    for s in samples:
        if not deduped or s.cr > deduped[-1].cr * (1 + 1e-9):
            deduped.append(s)

    out = table if table is not None else CalibrationTable()
    out.add(mode, norm, deduped)
    return out


def default_table() -> CalibrationTable:
    """The calibration table bundled with the package."""
    text = (
        importlib.resources.files("speckless")
        .joinpath("data/default-table.txt")
        .read_text(encoding="ascii")
    )
    return CalibrationTable.loads(text)

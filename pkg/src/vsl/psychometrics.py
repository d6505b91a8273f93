"""Response analysis: per-cell counts, the d-prime transform, set-size slopes.

The d-prime transform assumes the observer held the optimal (unbiased)
criterion of the equal-prior yes/no task, so proportion correct maps to
sensitivity as d' = 2 * normal_quantile(pc). Set-size effects are then
summarized by the slope of log d' against log n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InsufficientDataError, ValidationError
from .records import ManifestRow, ResponseRecord

_SQRT2 = math.sqrt(2.0)


def normal_cdf(x: float) -> float:
    """Standard normal CDF, accurate to double precision via erfc."""
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_sf(x: float) -> float:
    """Standard normal upper tail P(Z > x); exact complement of normal_cdf."""
    return 0.5 * math.erfc(x / _SQRT2)


# Wichura's PPND16 rational approximation (Applied Statistics algorithm
# AS 241). Relative error below 1e-15 on (0, 1); far sharper than the
# 1e-8 inverse round-trip this package needs.
_PPND16_A = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
_PPND16_B = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_PPND16_C = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
_PPND16_D = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_PPND16_E = (
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
_PPND16_F = (
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coeffs: tuple, r: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * r + c
    return acc


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF for p in the open interval (0, 1).

    Raises:
        ValidationError: if p is outside (0, 1) or not finite.
    """
    if not (0.0 < p < 1.0):
        raise ValidationError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_PPND16_A, r) / _poly(_PPND16_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        x = _poly(_PPND16_C, r) / _poly(_PPND16_D, r)
    else:
        r -= 5.0
        x = _poly(_PPND16_E, r) / _poly(_PPND16_F, r)
    return -x if q < 0.0 else x


@dataclass(frozen=True)
class CellStats:
    """Trial counts for one (task, difficulty, set_size) cell."""

    task: str
    difficulty: int
    set_size: int
    n_present: int
    n_absent: int
    hits: int
    false_alarms: int
    pc: float

    @classmethod
    def from_counts(cls, task: str, difficulty: int, set_size: int,
                    n_present: int, n_absent: int, hits: int,
                    false_alarms: int) -> "CellStats":
        if hits > n_present or false_alarms > n_absent:
            raise ValidationError(
                f"cell ({task}, {difficulty}, n={set_size}): counts exceed trial totals"
            )
        total = n_present + n_absent
        pc = (hits + (n_absent - false_alarms)) / total if total else 0.0
        return cls(task, difficulty, set_size, n_present, n_absent,
                   hits, false_alarms, pc)


@dataclass(frozen=True)
class DPrimePoint:
    set_size: int
    dprime: float
    clamped: bool  # True if the proportion-correct correction was applied


@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    intercept: float
    points_used: int


def aggregate_cells(manifest: Sequence[ManifestRow],
                    responses: Iterable[ResponseRecord]) -> list[CellStats]:
    """Join responses to the manifest's test split and count per cell.

    Every test trial must have exactly one response; responses for unknown
    or non-test trials are rejected. Cells come back sorted by
    (task, difficulty, set_size).

    Raises:
        ValidationError: listing the offending trial ids.
    """
    test_rows = {row.trial_id: row for row in manifest if row.split == "test"}
    known_ids = {row.trial_id for row in manifest}

    seen: dict[str, bool] = {}
    duplicates, unknown, non_test = [], [], []
    for rec in responses:
        if rec.trial_id in seen:
            duplicates.append(rec.trial_id)
            continue
        if rec.trial_id not in known_ids:
            unknown.append(rec.trial_id)
            continue
        if rec.trial_id not in test_rows:
            non_test.append(rec.trial_id)
            continue
        seen[rec.trial_id] = rec.said_present

    if unknown:
        raise ValidationError("responses reference unknown trial ids", unknown)
    if duplicates:
        raise ValidationError("duplicate responses for trial ids", duplicates)
    if non_test:
        raise ValidationError("responses reference non-test trials", non_test)
    missing = [tid for tid in test_rows if tid not in seen]
    if missing:
        raise ValidationError("test trials missing a response", missing)

    counts: dict[tuple[str, int, int], list[int]] = {}
    for tid, said_present in seen.items():
        row = test_rows[tid]
        key = (row.task, row.difficulty, row.set_size)
        c = counts.setdefault(key, [0, 0, 0, 0])  # n_present, n_absent, hits, fas
        if row.target_present:
            c[0] += 1
            c[2] += said_present
        else:
            c[1] += 1
            c[3] += said_present

    return [
        CellStats.from_counts(task, diff, n, c[0], c[1], c[2], c[3])
        for (task, diff, n), c in sorted(counts.items())
    ]


def pc_to_dprime(pc: float, n_trials: int) -> tuple[float, bool]:
    """Optimal-criterion transform from proportion correct to d-prime.

    pc is clamped into [1/(2N), 1 - 1/(2N)] before inversion (the standard
    correction for perfect cells), and the factor 2 reflects the unbiased
    criterion midway between the two equal-prior distributions.

    Returns:
        (dprime, clamped) where clamped is True iff the raw pc fell outside
        the clamp bounds.
    """
    if not (0.0 <= pc <= 1.0):
        raise ValidationError(f"pc must lie in [0, 1], got {pc!r}")
    if n_trials < 1:
        raise ValidationError(f"n_trials must be >= 1, got {n_trials!r}")
    lo = 1.0 / (2.0 * n_trials)
    hi = 1.0 - lo
    clamped = pc < lo or pc > hi
    pc_eff = min(max(pc, lo), hi)
    return 2.0 * normal_quantile(pc_eff), clamped


def cell_dprime(cell: CellStats) -> DPrimePoint:
    """d-prime for one cell, using its own trial count for the clamp."""
    d, clamped = pc_to_dprime(cell.pc, cell.n_present + cell.n_absent)
    return DPrimePoint(cell.set_size, d, clamped)


def loglog_slope(points: Sequence[DPrimePoint]) -> SlopeEstimate:
    """OLS slope of ln(d') on ln(n) over points with positive d-prime.

    Raises:
        InsufficientDataError: fewer than 2 admissible points.
    """
    admissible = [p for p in points if p.dprime > 0.0]
    k = len(admissible)
    if k < 2:
        raise InsufficientDataError(
            f"log-log slope needs >= 2 points with dprime > 0, got {k}"
        )
    xs = [math.log(p.set_size) for p in admissible]
    ys = [math.log(p.dprime) for p in admissible]
    mx = sum(xs) / k
    my = sum(ys) / k
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    if sxx == 0.0:
        raise InsufficientDataError("log-log slope needs >= 2 distinct set sizes")
    slope = sxy / sxx
    return SlopeEstimate(slope, my - slope * mx, k)

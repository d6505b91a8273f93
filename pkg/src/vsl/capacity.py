"""Max-rule signal-detection model of visual search with a capacity exponent.

Each of the n display items yields a noisy internal sample; the observer
says "present" when the largest sample exceeds a criterion c. Internal
noise variance grows as n**alpha, which in standardized units shrinks the
per-item separation to d_n = d1 * n**(-alpha/2). alpha = 0 is unlimited
capacity (precision independent of set size) and alpha = 1 is fixed
capacity (variance proportional to set size).

With Phi the standard normal CDF, the max rule gives

    hit rate          H  = 1 - Phi(c - d_n) * Phi(c)**(n - 1)
    false-alarm rate  FA = 1 - Phi(c)**n

and proportion correct pc = (H + 1 - FA) / 2 under equal priors. The
"optimal criterion" is the c maximizing pc for the given (d1, alpha, n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import BracketError, InsufficientDataError, ValidationError
from .optim import golden_section_min, nelder_mead
from .psychometrics import CellStats, normal_sf

CRITERION_TOL = 1e-6
ALPHA_MIN, ALPHA_MAX = 0.0, 2.0
D1_MAX = 64.0
DEFAULT_ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(16))  # 0.0 .. 1.5

_RATE_FLOOR = 1e-12


def item_dprime(d1: float, alpha: float, n: float) -> float:
    """Per-item separation at set size n: d1 * n**(-alpha/2)."""
    if d1 < 0.0:
        raise ValidationError(f"d1 must be >= 0, got {d1!r}")
    if n < 1:
        raise ValidationError(f"set size must be >= 1, got {n!r}")
    return d1 * n ** (-alpha / 2.0)


def _log_phi(x: float) -> float:
    # log of the standard normal CDF, stable out to the deep lower tail
    # for the |c| <= 8 range this model exercises.
    q = normal_sf(x)
    if q >= 1.0:
        return -math.inf
    return math.log1p(-q)


def predicted_rates(d1: float, alpha: float, n: float,
                    c: float) -> tuple[float, float]:
    """Max-rule (hit, false alarm) rates at criterion c."""
    d_n = item_dprime(d1, alpha, n)
    log_phi_c = _log_phi(c)
    fa = -math.expm1(n * log_phi_c)
    hit = -math.expm1(_log_phi(c - d_n) + (n - 1.0) * log_phi_c)
    return hit, fa


def _pc_at(d1: float, alpha: float, n: float, c: float) -> float:
    hit, fa = predicted_rates(d1, alpha, n, c)
    return 0.5 * (hit + 1.0 - fa)


def optimal_criterion(d1: float, alpha: float, n: float) -> float:
    """Criterion maximizing proportion correct, via golden-section search.

    pc is unimodal in c on [-2, d_n + 8]; if both bracket ends beat the
    interior optimum the rate formulas are broken, so fail loudly.
    """
    d_n = item_dprime(d1, alpha, n)
    lo, hi = -2.0, d_n + 8.0
    c_star, neg_pc = golden_section_min(
        lambda c: -_pc_at(d1, alpha, n, c), lo, hi, xtol=CRITERION_TOL)
    pc_star = -neg_pc
    if _pc_at(d1, alpha, n, lo) > pc_star + 1e-9 and \
       _pc_at(d1, alpha, n, hi) > pc_star + 1e-9:
        raise BracketError(
            f"criterion bracket [{lo}, {hi}] does not contain the pc maximum "
            f"(d1={d1}, alpha={alpha}, n={n})"
        )
    return c_star


def predicted_pc(d1: float, alpha: float, n: float) -> float:
    """Proportion correct at the optimal criterion."""
    return _pc_at(d1, alpha, n, optimal_criterion(d1, alpha, n))


@dataclass(frozen=True)
class ModelEval:
    """Model rates for one set size at a given criterion."""

    set_size: float
    criterion: float
    hit_rate: float
    fa_rate: float

    @property
    def pc(self) -> float:
        return 0.5 * (self.hit_rate + 1.0 - self.fa_rate)


def evaluate(d1: float, alpha: float, n: float) -> ModelEval:
    """Rates and pc at the optimal criterion for (d1, alpha, n)."""
    c = optimal_criterion(d1, alpha, n)
    hit, fa = predicted_rates(d1, alpha, n, c)
    return ModelEval(n, c, hit, fa)


@dataclass(frozen=True)
class ModelParams:
    d1_by_difficulty: dict[int, float]
    alpha: float

    def __post_init__(self):
        if not (ALPHA_MIN <= self.alpha <= ALPHA_MAX):
            raise ValidationError(
                f"alpha must lie in [{ALPHA_MIN}, {ALPHA_MAX}], got {self.alpha!r}")
        for level, d1 in self.d1_by_difficulty.items():
            if not (0.0 <= d1 < math.inf):
                raise ValidationError(
                    f"d1 for difficulty {level} must be finite and >= 0, got {d1!r}")


@dataclass(frozen=True)
class CapacityFit:
    params: ModelParams
    neg_log_likelihood: float
    converged: bool
    evaluations: int  # objective evaluations across grid and simplex stages
    alpha_profile: tuple[tuple[float, float], ...]  # (alpha, nll) per grid point


def _cell_nll(cell: CellStats, d1: float, alpha: float) -> float:
    hit, fa = predicted_rates(d1, alpha, cell.set_size,
                              optimal_criterion(d1, alpha, cell.set_size))
    hit = min(max(hit, _RATE_FLOOR), 1.0 - _RATE_FLOOR)
    fa = min(max(fa, _RATE_FLOOR), 1.0 - _RATE_FLOOR)
    h, f = cell.hits, cell.false_alarms
    return -(h * math.log(hit) + (cell.n_present - h) * math.log(1.0 - hit)
             + f * math.log(fa) + (cell.n_absent - f) * math.log(1.0 - fa))


def neg_log_likelihood(params: ModelParams, cells: Sequence[CellStats]) -> float:
    """Joint binomial negative log-likelihood of hit/false-alarm counts.

    Rates are evaluated at each cell's optimal criterion and clamped away
    from 0 and 1 before the logs.

    Raises:
        ValidationError: a cell's difficulty has no d1 entry.
    """
    total = 0.0
    for cell in cells:
        if cell.difficulty not in params.d1_by_difficulty:
            raise ValidationError(
                f"no d1 parameter for difficulty level {cell.difficulty}")
        total += _cell_nll(cell, params.d1_by_difficulty[cell.difficulty],
                           params.alpha)
    return total


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def fit_capacity(cells: Sequence[CellStats],
                 alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                 diameter_tol: float = 1e-6,
                 max_evals: int = 2000) -> CapacityFit:
    """Maximum-likelihood fit of (one d1 per difficulty, shared alpha).

    Stage 1 scans alpha over a grid, optimizing each difficulty's d1
    separately (the likelihood separates across difficulty levels at fixed
    alpha). Stage 2 polishes all parameters jointly with Nelder-Mead from
    the best grid point; alpha stays clamped to [0, 2].

    Raises:
        InsufficientDataError: fewer than 2 distinct set sizes, or no cells.
    """
    if not cells:
        raise InsufficientDataError("capacity fit needs at least one cell")
    if len({c.set_size for c in cells}) < 2:
        raise InsufficientDataError("capacity fit needs >= 2 distinct set sizes")

    levels = sorted({c.difficulty for c in cells})
    by_level = {lvl: [c for c in cells if c.difficulty == lvl] for lvl in levels}

    evals = 0

    def level_nll(lvl: int, d1: float, alpha: float) -> float:
        nonlocal evals
        evals += 1
        return sum(_cell_nll(c, d1, alpha) for c in by_level[lvl])

    profile: list[tuple[float, float]] = []
    best: tuple[float, float, dict[int, float]] | None = None  # nll, alpha, d1s
    for alpha in alpha_grid:
        d1s: dict[int, float] = {}
        total = 0.0
        for lvl in levels:
            d1_opt, nll = golden_section_min(
                lambda d1: level_nll(lvl, d1, alpha), 0.0, D1_MAX, xtol=1e-3)
            d1s[lvl] = d1_opt
            total += nll
        profile.append((float(alpha), total))
        if best is None or total < best[0]:
            best = (total, float(alpha), d1s)

    assert best is not None
    _, alpha0, d1s0 = best
    grid_evals = evals

    def objective(x: Sequence[float]) -> float:
        alpha = _clip(x[-1], ALPHA_MIN, ALPHA_MAX)
        return sum(
            sum(_cell_nll(c, _clip(x[i], 0.0, D1_MAX), alpha) for c in by_level[lvl])
            for i, lvl in enumerate(levels)
        )

    x0 = [d1s0[lvl] for lvl in levels] + [alpha0]
    steps = [0.25] * len(levels) + [0.1]
    result = nelder_mead(objective, x0, steps,
                         diameter_tol=diameter_tol, max_evals=max_evals)
    evals = grid_evals + result.evaluations

    params = ModelParams(
        {lvl: _clip(result.x[i], 0.0, D1_MAX) for i, lvl in enumerate(levels)},
        _clip(result.x[-1], ALPHA_MIN, ALPHA_MAX),
    )
    return CapacityFit(params, result.fx, result.converged, evals,
                       tuple(profile))

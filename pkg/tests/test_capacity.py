"""Capacity-model tests: analytic reductions, Monte-Carlo oracles, fitting.

The Monte-Carlo oracle simulates the max rule directly with numpy draws
and never touches the package's rate formulas, so the two routes are
independent.
"""

import math

import mpmath as mp
import numpy as np
import pytest

from vsl.capacity import (ModelParams, evaluate, fit_capacity,
                          item_dprime, neg_log_likelihood, optimal_criterion,
                          predicted_pc, predicted_rates)
from vsl.errors import InsufficientDataError, ValidationError
from vsl.psychometrics import CellStats

mp.mp.dps = 50


def phi_mp(x: float) -> float:
    return float(mp.ncdf(x))


def mc_rates(d_n: float, n: int, c: float, trials: int,
             rng: np.random.Generator) -> tuple[float, float]:
    """Direct max-rule simulation: the independent oracle."""
    noise = rng.standard_normal((trials, n))
    fa = float(np.mean(noise.max(axis=1) > c))
    signal = rng.standard_normal((trials, n))
    signal[:, 0] += d_n
    hit = float(np.mean(signal.max(axis=1) > c))
    return hit, fa


class TestItemDprime:
    def test_unlimited_capacity(self):
        for n in (1, 2, 4, 8, 64):
            assert item_dprime(2.5, 0.0, n) == 2.5

    def test_fixed_capacity(self):
        assert item_dprime(2.0, 1.0, 4) == pytest.approx(1.0, abs=1e-12)

    def test_fractional_exponent(self):
        # 3 * 8**-0.3, frozen from a 50-digit mpmath evaluation
        assert item_dprime(3.0, 0.6, 8) == pytest.approx(1.6076601938044397,
                                                         abs=1e-12)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValidationError):
            item_dprime(-1.0, 0.5, 2)
        with pytest.raises(ValidationError):
            item_dprime(1.0, 0.5, 0)


class TestPredictedRates:
    def test_zero_sensitivity_analytic(self):
        hit, fa = predicted_rates(0.0, 0.0, 2, 0.0)
        assert hit == pytest.approx(0.75, abs=1e-12)
        assert fa == pytest.approx(0.75, abs=1e-12)

    def test_single_item_reduction(self):
        hit, fa = predicted_rates(3.0, 0.0, 1, 1.5)
        assert hit == pytest.approx(phi_mp(1.5), abs=1e-12)
        assert fa == pytest.approx(1.0 - phi_mp(1.5), abs=1e-12)

    def test_monte_carlo_agreement_large(self):
        rng = np.random.default_rng(42)
        hit, fa = predicted_rates(2.0, 0.0, 4, 2.0)
        hit_mc, fa_mc = mc_rates(2.0, 4, 2.0, 10**7, rng)
        assert hit == pytest.approx(hit_mc, abs=1e-3)
        assert fa == pytest.approx(fa_mc, abs=1e-3)

    def test_stable_at_extreme_criteria(self):
        for c in (-8.0, 8.0):
            for n in (1, 8, 64):
                hit, fa = predicted_rates(1.0, 0.5, n, c)
                assert 0.0 <= fa <= 1.0 and 0.0 <= hit <= 1.0
                assert math.isfinite(hit) and math.isfinite(fa)


class TestOptimalCriterion:
    def test_single_item_is_half_d1(self):
        for d1 in (0.5, 1.0, 2.0, 4.0):
            assert optimal_criterion(d1, 0.7, 1) == pytest.approx(d1 / 2, abs=1e-5)

    def test_zero_sensitivity_pc_is_half(self):
        c = optimal_criterion(0.0, 0.0, 4)
        hit, fa = predicted_rates(0.0, 0.0, 4, c)
        assert 0.5 * (hit + 1 - fa) == pytest.approx(0.5, abs=1e-12)

    def test_bracket_failure_signals_formula_bug(self, monkeypatch):
        import vsl.capacity as cm
        from vsl.errors import BracketError
        # emulate a broken inner search that reports an optimum both
        # bracket ends beat; optimal_criterion must refuse it
        monkeypatch.setattr(cm, "golden_section_min",
                            lambda f, lo, hi, xtol: (0.5 * (lo + hi), 5.0))
        with pytest.raises(BracketError, match="bracket"):
            cm.optimal_criterion(1.0, 0.0, 4)

    def test_matches_grid_scan(self):
        # 2001-point scan over the bracket, as an independent locator
        d1, alpha, n = 2.0, 0.0, 8
        d_n = item_dprime(d1, alpha, n)
        grid = np.linspace(-2.0, d_n + 8.0, 2001)
        pcs = [0.5 * (h + 1 - f) for h, f in
               (predicted_rates(d1, alpha, n, float(c)) for c in grid)]
        c_grid = float(grid[int(np.argmax(pcs))])
        assert optimal_criterion(d1, alpha, n) == pytest.approx(c_grid, abs=2e-3)


class TestPredictedPc:
    def test_zero_sensitivity(self):
        for n in (1, 2, 4, 8):
            assert predicted_pc(0.0, 1.0, n) == pytest.approx(0.5, abs=1e-9)

    def test_single_item_value(self):
        assert predicted_pc(2.0, 0.0, 1) == pytest.approx(phi_mp(1.0), abs=1e-9)

    def test_alpha_irrelevant_at_n1(self):
        for d1 in (0.5, 1.5, 3.0):
            base = predicted_pc(d1, 0.0, 1)
            for alpha in (0.3, 1.0, 2.0):
                assert predicted_pc(d1, alpha, 1) == base

    def test_monotone_in_d1(self):
        for alpha in (0.0, 0.5, 1.0):
            for n in (1, 2, 4, 8):
                pcs = [predicted_pc(d1, alpha, n)
                       for d1 in np.linspace(0.0, 6.0, 20)]
                assert all(b >= a - 1e-9 for a, b in zip(pcs, pcs[1:]))

    def test_monotone_in_n(self):
        for alpha in (0.0, 0.5, 1.0):
            for d1 in (0.5, 2.0, 4.0):
                pcs = [predicted_pc(d1, alpha, n) for n in (1, 2, 4, 8)]
                assert all(b <= a + 1e-9 for a, b in zip(pcs, pcs[1:]))

    def test_strictly_decreasing_sequence_example(self):
        pcs = [predicted_pc(2.0, 1.0, n) for n in (1, 2, 4, 8)]
        assert all(b < a for a, b in zip(pcs, pcs[1:]))
        # each value agrees with direct max-rule simulation
        rng = np.random.default_rng(9)
        for n, pc in zip((1, 2, 4, 8), pcs):
            c = optimal_criterion(2.0, 1.0, n)
            hit, fa = mc_rates(item_dprime(2.0, 1.0, n), n, c, 10**6, rng)
            assert pc == pytest.approx(0.5 * (hit + 1 - fa), abs=5e-3)

    def test_dprime_roundtrip_at_n1(self):
        from vsl.psychometrics import pc_to_dprime
        for d1 in (0.25, 1.0, 2.0, 4.0):
            d, _ = pc_to_dprime(predicted_pc(d1, 0.0, 1), 10**9)
            assert d == pytest.approx(d1, abs=1e-6)


def _cells_from_model(d1: float, alpha: float, n_present: int, n_absent: int,
                      rng: np.random.Generator, difficulty: int = 1,
                      set_sizes=(1, 2, 4, 8)) -> list[CellStats]:
    """Simulate max-rule counts at the model's own optimal criteria."""
    cells = []
    for n in set_sizes:
        c = optimal_criterion(d1, alpha, n)
        d_n = item_dprime(d1, alpha, n)
        signal = rng.standard_normal((n_present, n))
        signal[:, 0] += d_n
        hits = int(np.sum(signal.max(axis=1) > c))
        noise = rng.standard_normal((n_absent, n))
        fas = int(np.sum(noise.max(axis=1) > c))
        cells.append(CellStats.from_counts("sim", difficulty, n,
                                           n_present, n_absent, hits, fas))
    return cells


class TestNegLogLikelihood:
    def test_empty_cells(self):
        assert neg_log_likelihood(ModelParams({1: 1.0}, 0.5), []) == 0.0

    def test_missing_difficulty_key(self):
        cells = [CellStats.from_counts("t", 2, 4, 10, 10, 8, 2)]
        with pytest.raises(ValidationError, match="difficulty"):
            neg_log_likelihood(ModelParams({1: 1.0}, 0.5), cells)

    def test_mle_self_consistency(self):
        # counts exactly at the model's own rates: truth is the argmin
        d1, alpha, n = 2.0, 0.5, 4
        ev = evaluate(d1, alpha, n)
        cell = CellStats("t", 1, n, 1000.0, 1000.0,
                         1000.0 * ev.hit_rate, 1000.0 * ev.fa_rate, ev.pc)
        nll_truth = neg_log_likelihood(ModelParams({1: d1}, alpha), [cell])
        for dd, da in ((0.1, 0.0), (-0.1, 0.0), (0.0, 0.1), (0.05, -0.08)):
            perturbed = ModelParams({1: d1 + dd}, alpha + da)
            assert neg_log_likelihood(perturbed, [cell]) > nll_truth

    def test_truth_beats_wrong_alpha_on_simulated_cells(self):
        rng = np.random.default_rng(17)
        cells = _cells_from_model(3.0, 0.6, 2400, 2400, rng)
        nll = lambda a: neg_log_likelihood(ModelParams({1: 3.0}, a), cells)
        assert nll(0.6) <= nll(0.0)
        assert nll(0.6) <= nll(1.0)


class TestFitCapacity:
    def test_recovers_alpha(self):
        errs = []
        for seed in range(5):
            rng = np.random.default_rng(1000 + seed)
            cells = _cells_from_model(3.0, 0.6, 800, 800, rng)
            fit = fit_capacity(cells)
            errs.append(abs(fit.params.alpha - 0.6))
        assert float(np.mean(errs)) <= 0.08

    def test_unlimited_capacity_pins_alpha_near_zero(self):
        alphas = []
        for seed in range(5):
            rng = np.random.default_rng(2000 + seed)
            cells = _cells_from_model(3.0, 0.0, 800, 800, rng)
            alphas.append(fit_capacity(cells).params.alpha)
        assert float(np.mean(alphas)) <= 0.05

    def test_duplication_invariance(self):
        rng = np.random.default_rng(3)
        cells = _cells_from_model(2.5, 0.4, 400, 400, rng)
        fit1 = fit_capacity(cells)
        fit2 = fit_capacity(cells + cells)
        assert fit2.params.alpha == pytest.approx(fit1.params.alpha, abs=1e-9)
        assert fit2.neg_log_likelihood == pytest.approx(
            2 * fit1.neg_log_likelihood, rel=1e-9)

    def test_multilevel_fit_shapes(self):
        rng = np.random.default_rng(4)
        cells = []
        for lvl, d1 in ((1, 4.0), (2, 2.5), (3, 1.5)):
            cells.extend(_cells_from_model(d1, 0.5, 400, 400, rng,
                                           difficulty=lvl))
        fit = fit_capacity(cells)
        assert sorted(fit.params.d1_by_difficulty) == [1, 2, 3]
        d1s = fit.params.d1_by_difficulty
        assert d1s[1] > d1s[2] > d1s[3]
        assert len(fit.alpha_profile) == 16
        assert fit.evaluations > 0

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            fit_capacity([])
        one_size = [CellStats.from_counts("t", 1, 4, 50, 50, 40, 10)]
        with pytest.raises(InsufficientDataError):
            fit_capacity(one_size)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        cells = _cells_from_model(2.0, 0.8, 300, 300, rng)
        a = fit_capacity(cells)
        b = fit_capacity(cells)
        assert a.params == b.params
        assert a.neg_log_likelihood == b.neg_log_likelihood

    def test_tiny_budget_returns_best_so_far_unconverged(self):
        rng = np.random.default_rng(6)
        cells = _cells_from_model(3.0, 0.5, 400, 400, rng)
        fit = fit_capacity(cells, max_evals=5)
        assert not fit.converged
        assert 0.0 <= fit.params.alpha <= 2.0
        assert math.isfinite(fit.neg_log_likelihood)


def test_model_params_validation():
    with pytest.raises(ValidationError):
        ModelParams({1: -0.5}, 0.5)
    with pytest.raises(ValidationError):
        ModelParams({1: 1.0}, 2.5)
    with pytest.raises(ValidationError):
        ModelParams({1: math.inf}, 0.5)

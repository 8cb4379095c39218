"""
Testes para risco condicional, formas fechadas de ψ1 e o verificador de calibração.
"""

import pytest
import numpy as np
import sys
import os
from itertools import combinations

# Adicionar o projeto ao path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from scipy.special import softmax

from src.config.settings import Config
from src.core.losses import LossFamily, LossSpec, all_specs, loss_and_grad
from src.core.optim import MinimizeConfig
from src.core.ranking import TieBreakPolicy, is_top_k_preserving, top_k_error
from src.core.risk import (
    Psi1Case,
    _risk_objective,
    bayes_topk_risk,
    calibration_probe,
    calibration_scan,
    cd_counterexample,
    cond_risk,
    numeric_minimizer,
    psi1_closed_form,
    scan_distribution,
    structured_family,
    worst_case_topk_risk,
)
from src.services.comparison_service import CD_REFERENCE_OPTIMUM

# η com cauda pesada: 2 classes com 1/8 e 9 com 1/12
TAIL_HEAVY = np.r_[np.full(2, 1 / 8), np.full(9, 1 / 12)]

PSI2 = LossSpec(LossFamily.PSI2, 2)
PSI5 = LossSpec(LossFamily.PSI5, 2)


class TestConditionalRisk:
    """Testes para cond_risk e riscos top-k."""

    def test_psi2_at_zero(self):
        rng = np.random.default_rng(0)
        eta = rng.dirichlet(np.ones(8))
        assert cond_risk(PSI2, np.zeros(8), eta) == pytest.approx(1.0)

    def test_ent_uniform(self):
        assert cond_risk(LossSpec(LossFamily.ENT), np.zeros(3), np.full(3, 1 / 3)) == pytest.approx(np.log(3))

    def test_psi5_tail_mass(self):
        s = np.r_[1.0, 1.0, np.zeros(9)]
        assert cond_risk(PSI5, s, TAIL_HEAVY) == pytest.approx(0.75)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cond_risk(PSI2, np.zeros(4), np.full(3, 1 / 3))

    def test_bayes_risk(self):
        assert bayes_topk_risk(TAIL_HEAVY, 2) == pytest.approx(0.75)
        assert bayes_topk_risk([1.0, 0.0, 0.0], 1) == 0.0
        assert bayes_topk_risk([1.0, 0.0, 0.0], 2) == 0.0

    def test_bayes_risk_subset_oracle(self):
        """Testa o risco de Bayes contra a melhor escolha entre todos os subconjuntos de k classes."""
        rng = np.random.default_rng(20)
        for M in range(2, 9):
            for k in range(1, M):
                for _ in range(100):
                    eta = rng.dirichlet(np.ones(M))
                    best = max(eta[list(subset)].sum() for subset in combinations(range(M), k))
                    assert abs(bayes_topk_risk(eta, k) - (1.0 - best)) < 1e-12

    def test_preserving_iff_bayes_optimal(self):
        """Testa: s preserva o top-k de η (entradas distintas) sse o risco de pior caso é o de Bayes."""
        rng = np.random.default_rng(21)
        both = {True: 0, False: 0}
        for _ in range(2000):
            M = int(rng.integers(3, 7))
            k = int(rng.integers(1, M))
            eta = rng.dirichlet(np.ones(M))
            s = rng.integers(0, 3, size=M).astype(float) if rng.random() < 0.5 else rng.standard_normal(M)
            worst = sum(eta[y] * top_k_error(s, y, k, TieBreakPolicy.WORST_CASE_FOR_LABEL) for y in range(M))
            optimal = abs(worst - bayes_topk_risk(eta, k)) < 1e-12
            assert worst == pytest.approx(worst_case_topk_risk(s, eta, k), abs=1e-12)
            assert is_top_k_preserving(s, eta, k) is optimal
            both[optimal] += 1
        assert both[True] > 0 and both[False] > 0

    def test_linear_in_eta(self):
        rng = np.random.default_rng(22)
        for spec in all_specs(2):
            s = rng.standard_normal(6)
            eta1, eta2 = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
            alpha = float(rng.random())
            mixed = cond_risk(spec, s, alpha * eta1 + (1 - alpha) * eta2)
            expected = alpha * cond_risk(spec, s, eta1) + (1 - alpha) * cond_risk(spec, s, eta2)
            assert abs(mixed - expected) < 1e-12

    def test_worst_case_risk_at_zero(self):
        """Testa que o vetor nulo erra todo rótulo no pior caso."""
        assert worst_case_topk_risk(np.zeros(4), np.full(4, 0.25), 2) == pytest.approx(1.0)

    def test_batched_objective_matches_scalar(self):
        rng = np.random.default_rng(1)
        eta = rng.dirichlet(np.ones(5))
        S = rng.standard_normal((4, 5))
        for spec in (PSI2, LossSpec(LossFamily.ENT_TR2, 2), LossSpec(LossFamily.CD)):
            values, grads = _risk_objective(spec, eta)(S)
            for r in range(4):
                assert values[r] == pytest.approx(cond_risk(spec, S[r], eta))
                batch = loss_and_grad(spec, np.tile(S[r], (5, 1)), np.arange(5))
                np.testing.assert_allclose(grads[r], eta @ batch.grads)


class TestPsi1ClosedForm:
    """Testes para os minimizadores fechados de ψ1."""

    def test_top_mass_dominates(self):
        form = psi1_closed_form([0.5, 0.3, 0.2], 2)
        assert form.case is Psi1Case.TOP_MASS_DOMINATES
        np.testing.assert_array_equal(form.minimizer, [1, 1, 0])
        assert form.optimal_risk == pytest.approx(0.4)

    def test_tail_dominates(self):
        form = psi1_closed_form([0.4, 0.2, 0.2, 0.2], 1)
        assert form.case is Psi1Case.TAIL_DOMINATES
        np.testing.assert_array_equal(form.minimizer, np.zeros(4))

    def test_boundary_free_entry(self):
        """Testa que toda a faixa livre do posto k atinge o mesmo risco."""
        eta = [0.5, 0.25, 0.25]
        form = psi1_closed_form(eta, 1)
        assert form.case is Psi1Case.BOUNDARY
        spec = LossSpec(LossFamily.PSI1, 1)
        risks = [cond_risk(spec, s, eta) for s in ([0.5, 0, 0], [1, 0, 0], [0, 0, 0])]
        assert risks == pytest.approx([risks[0]] * 3, abs=1e-9)
        assert risks[0] == pytest.approx(form.optimal_risk)

    def test_permutation_applied(self):
        form = psi1_closed_form([0.2, 0.5, 0.3], 2)
        np.testing.assert_array_equal(form.minimizer, [0, 1, 1])

    def test_closed_form_risk_matches_cond_risk(self):
        rng = np.random.default_rng(2)
        spec_cache = {}
        for _ in range(30):
            M = int(rng.integers(3, 7))
            k = int(rng.integers(1, M))
            eta = rng.dirichlet(np.ones(M))
            form = psi1_closed_form(eta, k)
            spec = spec_cache.setdefault(k, LossSpec(LossFamily.PSI1, k))
            assert cond_risk(spec, form.minimizer, eta) == pytest.approx(form.optimal_risk, abs=1e-12)

    def test_ambiguous_ties(self):
        assert psi1_closed_form([0.4, 0.3, 0.3], 2).ambiguous
        assert not psi1_closed_form([0.5, 0.3, 0.2], 2).ambiguous

    def test_zero_entries_rejected(self):
        with pytest.raises(ValueError):
            psi1_closed_form([0.5, 0.5, 0.0], 1)

    def test_candidates(self):
        form = psi1_closed_form([0.5, 0.3, 0.2], 2)
        candidates = form.candidates()
        np.testing.assert_array_equal(candidates["k_ones"], [1, 1, 0])
        np.testing.assert_array_equal(candidates["k_minus_1_ones"], [1, 0, 0])


class TestNumericMinimizer:
    """Testes para o minimizador numérico multi-start."""

    @pytest.mark.parametrize("family", [LossFamily.PSI2, LossFamily.PSI3, LossFamily.PSI4])
    def test_zero_minimizer_tail_heavy(self, family):
        """Testa o minimizador nulo com risco 1 quando a cauda supera k/(k+1)."""
        spec = LossSpec(family, 2)
        s, risk = numeric_minimizer(spec, TAIL_HEAVY, MinimizeConfig())
        assert np.max(np.abs(s)) < 1e-3
        assert risk == pytest.approx(1.0, abs=1e-3)
        assert calibration_probe(spec, TAIL_HEAVY, 2, MinimizeConfig()).preserving is False

    def test_psi1_matches_closed_form(self):
        eta = [0.5, 0.3, 0.2]
        spec = LossSpec(LossFamily.PSI1, 2)
        _, risk = numeric_minimizer(spec, eta, MinimizeConfig())
        form = psi1_closed_form(eta, 2)
        assert risk == pytest.approx(cond_risk(spec, form.minimizer, eta), abs=1e-4)

    def _check_psi1_random(self, draws: int, seed: int) -> None:
        rng = np.random.default_rng(seed)
        for _ in range(draws):
            M = int(rng.integers(3, 9))
            k = int(rng.integers(1, M))
            eta = rng.dirichlet(np.ones(M))
            spec = LossSpec(LossFamily.PSI1, k)
            closed = cond_risk(spec, psi1_closed_form(eta, k).minimizer, eta)
            _, numeric = numeric_minimizer(spec, eta, MinimizeConfig())
            assert closed - 1e-6 <= numeric <= closed + 1e-4

    def test_psi1_random_eta(self):
        self._check_psi1_random(draws=15, seed=23)

    @pytest.mark.slow
    def test_psi1_random_eta_full(self):
        self._check_psi1_random(draws=200, seed=24)

    def test_ent_recovers_eta(self):
        """Testa que softmax do minimizador de Ent reproduz η."""
        eta = np.array([0.6, 0.3, 0.1])
        s, _ = numeric_minimizer(LossSpec(LossFamily.ENT), eta, MinimizeConfig())
        np.testing.assert_allclose(softmax(s), eta, atol=1e-3)

    def test_recentered(self):
        s, _ = numeric_minimizer(PSI5, TAIL_HEAVY, MinimizeConfig())
        assert s.min() == 0.0

    def test_deterministic(self):
        a, _ = numeric_minimizer(PSI5, [0.4, 0.3, 0.2, 0.1], MinimizeConfig(seed=5))
        b, _ = numeric_minimizer(PSI5, [0.4, 0.3, 0.2, 0.1], MinimizeConfig(seed=5))
        np.testing.assert_array_equal(a, b)

    def test_invalid_restarts(self):
        with pytest.raises(ValueError):
            numeric_minimizer(PSI5, [0.5, 0.5], MinimizeConfig(restarts=0))


class TestCalibrationProbe:
    """Testes para a sonda de calibração."""

    def test_psi2_counterexample(self):
        report = calibration_probe(PSI2, TAIL_HEAVY, 2, MinimizeConfig())
        assert report.preserving is False
        assert report.bayes_gap > 0

    def test_psi5_calibrated(self):
        report = calibration_probe(PSI5, TAIL_HEAVY, 2, MinimizeConfig())
        assert report.preserving is True
        assert report.bayes_gap == pytest.approx(0.0, abs=1e-12)

    def test_psi1_reports_closed_form_verdicts(self):
        report = calibration_probe(LossSpec(LossFamily.PSI1, 2), [0.5, 0.3, 0.2], 2, MinimizeConfig())
        assert report.closed_form is not None
        assert set(report.closed_form["preserving"]) == {"k_ones", "k_minus_1_ones"}
        assert report.closed_form["case"] == Psi1Case.TOP_MASS_DOMINATES.value

    def test_to_dict(self):
        report = calibration_probe(PSI5, [0.5, 0.3, 0.2], 1, MinimizeConfig(restarts=4))
        data = report.to_dict()
        assert data["loss"] == "psi5"
        assert data["k"] == 1
        assert len(data["minimizer"]) == 3


class TestCalibrationScan:
    """Testes para a varredura de calibração."""

    def test_structured_family(self):
        etas = structured_family(11, 2)
        assert len(etas) == Config.SCAN_STRUCTURED_POINTS + 1
        for eta in etas:
            assert eta.sum() == pytest.approx(1.0)
            assert np.sort(eta)[::-1][2:].sum() > 2 / 3
        np.testing.assert_allclose(etas[-1], TAIL_HEAVY)

    def test_scan_distribution_size(self):
        etas = scan_distribution(8, 2, 20, np.random.default_rng(0))
        assert len(etas) >= 20 + len(structured_family(8, 2))

    def test_psi3_violations_in_structured_family(self):
        cfg = MinimizeConfig(seed=1)
        violations = calibration_scan(LossSpec(LossFamily.PSI3, 2), 2, 5, np.random.default_rng(1), cfg, M=11)
        assert violations
        assert any(np.allclose(v.eta, TAIL_HEAVY) for v in violations)

    def test_psi5_no_violations_small(self):
        cfg = MinimizeConfig(seed=2)
        assert calibration_scan(PSI5, 2, 50, np.random.default_rng(2), cfg, M=8) == []

    def test_ent_no_violations_small(self):
        cfg = MinimizeConfig(seed=3)
        for k in (1, 2, 3):
            assert calibration_scan(LossSpec(LossFamily.ENT), k, 30, np.random.default_rng(k), cfg, M=5) == []

    def test_parallel_matches_serial(self):
        cfg = MinimizeConfig(seed=4, restarts=6, iterations=500)
        serial = calibration_scan(PSI2, 2, 5, np.random.default_rng(4), cfg, M=8, jobs=1)
        parallel = calibration_scan(PSI2, 2, 5, np.random.default_rng(4), cfg, M=8, jobs=2)
        assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]

    @pytest.mark.slow
    def test_psi5_no_violations_full(self):
        cfg = MinimizeConfig(seed=5)
        assert calibration_scan(PSI5, 2, 1000, np.random.default_rng(5), cfg, M=8, jobs=4) == []


class TestCdCounterexample:
    """Testes para o contraexemplo de CD."""

    def test_converges_to_stationary_point(self):
        found = cd_counterexample()
        assert found.grad_norm < Config.CD_TOL
        values, grads = _risk_objective(LossSpec(LossFamily.CD), found.eta)(found.optimum[None, :])
        assert np.linalg.norm(grads[0]) < 1e-8
        assert values[0] == pytest.approx(found.risk)

    def test_most_probable_class_on_top(self):
        found = cd_counterexample()
        assert found.preserving_k1 is True
        assert int(np.argmax(found.optimum)) == 4

    def test_risk_not_above_reference(self):
        """Testa que o ótimo encontrado não é pior que o vetor publicado."""
        found = cd_counterexample()
        reference = cond_risk(LossSpec(LossFamily.CD), CD_REFERENCE_OPTIMUM, found.eta)
        assert found.risk <= reference + 1e-12

    def test_preservation_matches_predicate(self):
        found = cd_counterexample()
        assert found.preserving_k2 == is_top_k_preserving(found.optimum, found.eta, 2)

    def test_not_converged(self):
        with pytest.raises(RuntimeError):
            cd_counterexample(max_iterations=3)


if __name__ == "__main__":
    pytest.main([__file__])

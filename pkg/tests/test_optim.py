"""
Testes para o otimizador de scores, o treino linear e a acurácia top-k.
"""

import pytest
import numpy as np
import sys
import os

# Adicionar o projeto ao path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.losses import LossFamily, LossSpec, eval_ent, subgrad
from src.core.optim import (
    Adam,
    LinearModel,
    MinimizeConfig,
    OptimizerKind,
    StepSchedule,
    TrainConfig,
    finite_diff_grad,
    minimize_scores,
    top_k_accuracy,
    train_linear,
)
from src.core.ranking import is_top_k_preserving
from src.core.risk import _risk_objective
from src.core.synth import Dataset, W_SEP, gen_exp1, gen_linear_sep_dataset


def _quadratic(X):
    return 0.5 * np.sum(X * X, axis=1), X.copy()


class TestFiniteDifferences:
    """Testes para o oráculo de diferenças finitas."""

    def test_quadratic(self):
        x = np.array([1.5, -2.0, 0.3])
        np.testing.assert_allclose(finite_diff_grad(lambda v: 0.5 * v @ v, x), x, atol=1e-8)

    def test_constant(self):
        np.testing.assert_allclose(finite_diff_grad(lambda v: 3.0, np.ones(4)), np.zeros(4))

    def test_ent_gradient(self):
        rng = np.random.default_rng(0)
        s = rng.standard_normal(5)
        numeric = finite_diff_grad(lambda v: eval_ent(v, 1), s)
        analytic = subgrad(LossSpec(LossFamily.ENT), s, 1)
        assert np.linalg.norm(numeric - analytic) / np.linalg.norm(analytic) < 1e-5

    def test_invalid_step(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda v: 0.0, np.ones(2), h=0.0)

    def test_non_finite(self):
        with pytest.raises(FloatingPointError):
            finite_diff_grad(lambda v: np.inf, np.ones(2))


class TestMinimizeScores:
    """Testes para a descida de subgradiente em lote."""

    def test_quadratic_converges(self):
        cfg = MinimizeConfig(iterations=100, step0=0.5, schedule=StepSchedule.CONSTANT, tol=1e-9)
        result = minimize_scores(_quadratic, np.array([3.0, -2.0]), cfg)
        assert result.converged
        assert result.iterations < 100
        np.testing.assert_allclose(result.x_final, 0.0, atol=1e-9)

    def test_batch_rows_independent(self):
        cfg = MinimizeConfig(iterations=50, step0=0.5, schedule=StepSchedule.CONSTANT, tol=0.0)
        starts = np.array([[3.0, -2.0], [1.0, 1.0]])
        batch = minimize_scores(_quadratic, starts, cfg)
        single = minimize_scores(_quadratic, starts[1], cfg)
        np.testing.assert_allclose(batch.x_final[1], single.x_final)
        assert batch.trace.shape == (51, 2)

    def test_best_trace_monotone(self):
        cfg = MinimizeConfig(iterations=200, step0=1.0)
        eta = np.array([0.4, 0.3, 0.2, 0.1])
        result = minimize_scores(_risk_objective(LossSpec(LossFamily.PSI5, 2), eta), np.zeros(4), cfg)
        assert np.all(np.diff(result.best_trace) <= 0)

    def test_divergence_reported(self):
        def explode(X):
            return -np.sum(X * X, axis=1) * 1e300, -X * 1e300

        cfg = MinimizeConfig(iterations=20, step0=1.0, schedule=StepSchedule.CONSTANT)
        result = minimize_scores(explode, np.ones(2), cfg)
        assert result.diverged

    def test_psi5_final_iterate_preserving(self):
        eta = np.array([0.35, 0.25, 0.2, 0.12, 0.08])
        cfg = MinimizeConfig(step0=1.0)
        result = minimize_scores(_risk_objective(LossSpec(LossFamily.PSI5, 2), eta), np.zeros(5), cfg)
        assert is_top_k_preserving(result.x_best, eta, 2)


class TestAdam:
    """Testes para o otimizador Adam."""

    def test_first_step_is_lr_sized(self):
        """Testa que o primeiro passo corrigido tem módulo lr por coordenada."""
        param = np.zeros(3)
        Adam(lr=0.1).step(param, np.array([2.0, -0.5, 1e-3]))
        np.testing.assert_allclose(np.abs(param), 0.1, rtol=1e-4)

    def test_minimizes_quadratic(self):
        param = np.array([2.0, -1.0])
        optimizer = Adam(lr=0.05)
        for _ in range(2000):
            optimizer.step(param, param.copy())
        np.testing.assert_allclose(param, 0.0, atol=1e-2)


class TestTrainLinear:
    """Testes para o treino de modelos lineares."""

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(lr=0.0).validate()
        with pytest.raises(ValueError):
            TrainConfig(epochs=0).validate()
        with pytest.raises(ValueError):
            TrainConfig(restarts=0).validate()

    def test_deterministic(self):
        data = gen_linear_sep_dataset()
        cfg = TrainConfig(optimizer=OptimizerKind.ADAM, epochs=50, seed=3, init_scale=0.1)
        a = train_linear(LossSpec(LossFamily.ENT), data, cfg)
        b = train_linear(LossSpec(LossFamily.ENT), data, cfg)
        np.testing.assert_array_equal(a.W, b.W)

    def test_bias_column(self):
        data = gen_exp1()
        model = train_linear(LossSpec(LossFamily.ENT), data, TrainConfig(epochs=5))
        assert model.W.shape == (8, 3)
        assert model.train_loss is not None

    def test_psi5_on_exp1_ranks_heavy_classes_first(self):
        """Testa o padrão do vetor de scores em x=0: classes 0 e 1 acima das demais."""
        data = gen_exp1()
        cfg = TrainConfig(optimizer=OptimizerKind.SUBGRAD_DESCENT, seed=0, grad_noise=1e-3)
        model = train_linear(LossSpec(LossFamily.PSI5, 2), data, cfg)
        s = model.scores(np.zeros((1, 2)))[0]
        assert min(s[0], s[1]) > max(s[2:])
        assert top_k_accuracy(model, data, 2) == pytest.approx(20 / 68)

    def test_separability_hinge_losses(self):
        data = gen_linear_sep_dataset()
        cfg = TrainConfig(
            optimizer=OptimizerKind.SUBGRAD_DESCENT, fit_bias=False, seed=0, init_scale=0.1, restarts=64,
        )
        for family in (LossFamily.PSI1, LossFamily.PSI5):
            model = train_linear(LossSpec(family, 2), data, cfg)
            assert top_k_accuracy(model, data, 2) == 1.0

    def test_separability_ent_misranks_negative_e1(self):
        data = gen_linear_sep_dataset()
        cfg = TrainConfig(
            optimizer=OptimizerKind.SUBGRAD_DESCENT, fit_bias=False, seed=0, init_scale=0.1, restarts=64,
        )
        model = train_linear(LossSpec(LossFamily.ENT), data, cfg)
        s = model.scores(-np.eye(3)[:1])[0]
        assert s[0] < s[1] and s[0] < s[2]
        assert top_k_accuracy(model, data, 2) < 1.0

    def test_non_finite_loss_raises(self):
        data = Dataset(np.array([[1e200, 1e200], [-1e200, 1e200]]), np.array([0, 1]), 2)
        cfg = TrainConfig(optimizer=OptimizerKind.SUBGRAD_DESCENT, lr=1e200, epochs=5, fit_bias=False)
        with pytest.raises(FloatingPointError):
            train_linear(LossSpec(LossFamily.CD), data, cfg)


class TestTopKAccuracy:
    """Testes para a acurácia top-k."""

    def test_zero_model_on_exp1(self):
        data = gen_exp1()
        model = LinearModel(np.zeros((8, 3)), fit_bias=True)
        assert top_k_accuracy(model, data, 2) <= 20 / 68

    def test_separator(self):
        data = gen_linear_sep_dataset()
        model = LinearModel(np.array(W_SEP), fit_bias=False)
        assert top_k_accuracy(model, data, 2) == 1.0
        assert top_k_accuracy(model, data, 1) < 1.0

    def test_k_equals_m_minus_one(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.standard_normal((40, 3)), rng.integers(0, 4, size=40), 4)
        model = LinearModel(rng.standard_normal((4, 3)))
        S = model.scores(data.inputs)
        expected = np.mean(np.argmin(S, axis=1) != data.labels)
        assert top_k_accuracy(model, data, 3) == pytest.approx(expected)


if __name__ == "__main__":
    pytest.main([__file__])

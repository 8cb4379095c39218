"""
Testes para divergências de Bregman, perdas substitutas e links.
"""

import pytest
import numpy as np
import sys
import os

# Adicionar o projeto ao path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from scipy.special import softmax

from src.core.bregman import (
    bregman_div,
    check_link_property,
    constant_link,
    invert_link,
    negative_entropy,
    reversing_link,
    softmax_link,
    squared_norm,
    surrogate_eval,
    truncated_softmax_link,
)
from src.core.losses import eval_ent, eval_ent_tr
from src.core.optim import finite_diff_grad


class TestBregmanDivergence:
    """Testes para D_φ."""

    def test_squared_norm(self):
        rng = np.random.default_rng(0)
        p, q = rng.standard_normal(4), rng.standard_normal(4)
        assert bregman_div(squared_norm(), p, q) == pytest.approx(0.5 * np.sum((q - p) ** 2))

    def test_identity(self):
        p = np.array([0.2, 0.3, 0.5])
        assert bregman_div(negative_entropy(), p, p) == pytest.approx(0.0, abs=1e-15)
        assert bregman_div(squared_norm(), p, p) == 0.0

    def test_negative_entropy_to_vertex(self):
        """Testa D_φ(softmax(s), e_y) = Ent(s, y)."""
        rng = np.random.default_rng(1)
        s = rng.standard_normal(5)
        e_y = np.eye(5)[2]
        assert bregman_div(negative_entropy(), softmax(s), e_y) == pytest.approx(eval_ent(s, 2), abs=1e-10)

    def test_nonnegative_and_zero_only_at_center(self):
        """Testa D_φ(p, q) >= 0, com igualdade apenas em p = q."""
        rng = np.random.default_rng(8)
        for phi, draw in (
            (negative_entropy(), lambda: rng.dirichlet(np.full(5, 2.0))),
            (squared_norm(), lambda: rng.standard_normal(5)),
        ):
            for _ in range(500):
                p, q = draw(), draw()
                assert bregman_div(phi, p, q) > 0.0
                assert bregman_div(phi, p, p) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("phi", [negative_entropy(), squared_norm()], ids=lambda phi: phi.name)
    def test_gradient_matches_finite_differences(self, phi):
        rng = np.random.default_rng(9)
        for _ in range(50):
            x = rng.uniform(0.05, 2.0, size=4)
            np.testing.assert_allclose(phi.gradient(x), finite_diff_grad(phi.value, x), atol=1e-6)

    def test_domain_violation(self):
        with pytest.raises(ValueError):
            bregman_div(negative_entropy(), [0.0, 1.0], [0.5, 0.5])
        with pytest.raises(ValueError):
            bregman_div(negative_entropy(), [0.5, 0.5], [-0.1, 1.1])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            bregman_div(squared_norm(), [1.0, 2.0], [1.0])


class TestSurrogate:
    """Testes para perdas construídas como D_φ(g(s), e_y)."""

    def test_softmax_link_gives_ent(self):
        rng = np.random.default_rng(2)
        for _ in range(10_000):
            s = 3.0 * rng.standard_normal(6)
            y = int(rng.integers(6))
            assert surrogate_eval(negative_entropy(), softmax_link(), s, y) == pytest.approx(eval_ent(s, y), abs=1e-10)

    def test_truncated_link_gives_ent_tr2(self):
        rng = np.random.default_rng(3)
        for _ in range(10_000):
            s = rng.standard_normal(6)
            y = int(rng.integers(6))
            k = int(rng.integers(1, 6))
            value = surrogate_eval(negative_entropy(), truncated_softmax_link(k), s, y)
            assert value == pytest.approx(eval_ent_tr(s, y, k, 2), abs=1e-10)

    def test_zero_scores(self):
        assert surrogate_eval(negative_entropy(), softmax_link(), np.zeros(3), 0) == pytest.approx(np.log(3))

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            surrogate_eval(negative_entropy(), softmax_link(), np.zeros(3), 3)


class TestLinkProperties:
    """Testes para a verificação amostral das propriedades de link."""

    def test_softmax_rank_preserving(self):
        report = check_link_property(softmax_link(), 2, 10_000, np.random.default_rng(4))
        assert report.passed
        assert report.n_checked == 10_000

    def test_truncated_softmax_rank_preserving(self):
        report = check_link_property(truncated_softmax_link(2), 2, 10_000, np.random.default_rng(5))
        assert report.passed

    def test_constant_link_vacuous(self):
        report = check_link_property(constant_link(2), 2, 1000, np.random.default_rng(6))
        assert report.passed

    def test_reversing_link_fails(self):
        report = check_link_property(reversing_link(2), 2, 1000, np.random.default_rng(7))
        assert not report.passed
        assert report.counterexample is not None
        assert report.to_dict()["counterexample"] is not None

    def test_invalid_samples(self):
        with pytest.raises(ValueError):
            check_link_property(softmax_link(), 2, 0, np.random.default_rng(0))


class TestRangeInversion:
    """Testes para o diagnóstico de inversão do link."""

    def test_softmax_inverts_interior_point(self):
        result = invert_link(softmax_link(), [0.6, 0.3, 0.1])
        assert result.success
        np.testing.assert_allclose(softmax(result.scores), [0.6, 0.3, 0.1], atol=1e-6)


if __name__ == "__main__":
    pytest.main([__file__])

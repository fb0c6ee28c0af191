import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import toy_frechet_enum, toy_wball_enum
from wassgsa.distributions import QuantileGrid
from wassgsa.errors import DomainError
from wassgsa.models import (
    TOY_SETS,
    TOY_WBALL_TABLE,
    ToyModelParams,
    gremaud_code,
    gremaud_rows,
    toy_cdf_code,
    toy_frechet_indices,
    toy_ideal_outputs,
    toy_level,
    toy_stochastic_code,
    toy_wball_indices,
)

probs = st.floats(0.01, 0.99)


def random_ps(k=100, seed=0):
    return np.random.default_rng(seed).uniform(0.01, 0.99, size=(k, 3))


class TestToyCode:
    @pytest.mark.parametrize("x,L", [((0, 0, 0), 1), ((1, 1, 1), 4), ((1, 0, 1), 3), ((0, 1, 1), 2)])
    def test_levels(self, x, L):
        code = toy_cdf_code(*x)
        assert code.level == L
        assert code.quantile(0.25) == 0.25 * L

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            toy_cdf_code(-1, 0, 0)
        with pytest.raises(DomainError):
            toy_level([[0, 0, -0.5]])

    def test_ideal_law(self):
        g = QuantileGrid.midpoint(8)
        assert toy_cdf_code(1, 1, 1).ideal(g).atoms.tolist() == (4 * g.nodes).tolist()
        out = toy_ideal_outputs(np.array([[0, 0, 0], [1, 0, 1]]), g)
        assert out.atoms[1].tolist() == (3 * g.nodes).tolist()

    def test_stochastic_draws_in_support(self):
        code = toy_stochastic_code()
        draws = code.draw(np.array([[1.0, 0, 1.0]]), 5000, np.random.default_rng(0))
        assert draws.min() >= 0 and draws.max() <= 3
        assert abs(draws.mean() - 1.5) < 0.05
        assert 0 <= code.evaluate([1.0, 1.0, 1.0], 3) <= 4

    @pytest.mark.parametrize("p", [(0, 0.5, 0.5), (0.5, 1, 0.5), (0.5, 0.5, 1.2)])
    def test_params_checked(self, p):
        with pytest.raises(DomainError):
            ToyModelParams(*p)


class TestFrechetIndices:
    def test_half(self):
        s = toy_frechet_indices((0.5, 0.5, 0.5))
        assert s[(1,)] == pytest.approx(0.6, abs=1e-15)
        assert s[(2,)] == pytest.approx(0.25 / 0.9375, abs=1e-15)
        assert s[(3,)] == pytest.approx(0.0625 / 0.9375, abs=1e-15)

    def test_frozen_values(self):
        s = toy_frechet_indices((1 / 3, 2 / 3, 3 / 4))
        assert [s[u] for u in TOY_SETS] == pytest.approx([0.7050359712, 0.2302158273, 0.0215827338, 0.7697841727],
                                                         abs=1e-9)

    def test_enumeration_on_random_p(self):
        for p in random_ps():
            got, ref = toy_frechet_indices(p), toy_frechet_enum(p)
            for u in TOY_SETS:
                assert got[u] == pytest.approx(ref[u], abs=1e-12)

    def test_vanishing_first_input(self):
        assert toy_frechet_indices((1e-6, 0.5, 0.5))[(1,)] < 1e-4

    @given(probs, probs, probs)
    def test_decomposition(self, p1, p2, p3):
        # L is additive in X2, so S{1,3} + S2 = 1 and S{1,3} >= S1 + S3
        s = toy_frechet_indices((p1, p2, p3))
        assert s[(1, 3)] + s[(2,)] == pytest.approx(1, abs=1e-12)
        assert s[(1, 3)] >= s[(1,)] + s[(3,)] - 1e-12


class TestWBallIndices:
    def test_case_one_denominator(self):
        for p in random_ps(10, seed=1):
            assert TOY_WBALL_TABLE[(1, 1)][4](*p) == pytest.approx((1 - p[0]) * (1 - p[1]), abs=1e-15)

    def test_sixteen_cases(self):
        assert sorted(TOY_WBALL_TABLE) == [(i, j) for i in range(1, 5) for j in range(1, 5)]

    def test_half(self):
        got, ref = toy_wball_indices((0.5, 0.5, 0.5)), toy_wball_enum((0.5, 0.5, 0.5))
        for u in TOY_SETS:
            assert got[u] == pytest.approx(ref[u], abs=1e-12)

    def test_frozen_values(self):
        s = toy_wball_indices((1 / 3, 2 / 3, 3 / 4))
        assert [s[u] for u in TOY_SETS] == pytest.approx([0.38615, 0.27063, 0.019300, 0.44405], abs=1e-5)

    def test_enumeration_on_random_p(self):
        for p in random_ps(seed=2):
            got, ref = toy_wball_indices(p), toy_wball_enum(p)
            for u in TOY_SETS:
                assert got[u] == pytest.approx(ref[u], abs=1e-12)


class TestGremaud:
    def test_values(self):
        assert gremaud_code(0, 0, 0) == 0
        assert gremaud_code(0, 1, 0) == 2
        assert gremaud_code(0.5, 0.5, 0.5) == pytest.approx(math.exp(-1) + 0.25, abs=1e-15)

    def test_rows(self):
        X = np.array([[[0, 1, 0], [0.5, 0.5, 0.5]]])
        assert gremaud_rows(X).shape == (1, 2)
        assert gremaud_rows(X)[0, 0] == 2

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import toy_frechet_enum
from wassgsa.distributions import EmpiricalDistribution, QuantileGrid
from wassgsa.errors import DomainError, UnsupportedFeatureError
from wassgsa.indices import (
    CUSTOM,
    OUTPUT_LAW,
    UNIFORM_UNIT,
    OutputSample,
    TestFunctionFamily,
    family_by_name,
    family_cvm,
    family_quantile_eval,
    family_sobol,
    family_wasserstein_ball,
)
from wassgsa.models import toy_frechet_indices, toy_level


def D(*xs):
    return EmpiricalDistribution(xs)


def test_sobol():
    f = family_sobol()
    assert f.m == 0 and f.evaluate((), 3.5) == 3.5


def test_cvm():
    f = family_cvm()
    assert (f.m, f.param_source) == (1, OUTPUT_LAW)
    assert f.evaluate((2.0,), 1.0) == 1
    assert f.evaluate((2.0,), 3.0) == 0
    assert f.evaluate((2.0,), 2.0) == 1


def test_wball():
    f = family_wasserstein_ball()
    assert (f.m, f.param_source) == (2, OUTPUT_LAW)
    F1, F2 = D(0.0, 1.0), D(2.0, 5.0)
    assert f.evaluate((F1, F2), F2) == 1
    assert f.evaluate((F1, F2), F1) == 1
    assert f.evaluate((D(0.0), D(1.0)), D(3.0)) == 0
    with pytest.raises(DomainError):
        family_wasserstein_ball(q=0.5)


def test_wball_tie_survives_rounding():
    # |2 - 3| and |2 - 1| are equal but the computed distances may differ in the last bit
    g = QuantileGrid.midpoint(512)
    F = {a: EmpiricalDistribution(a * g.nodes) for a in (1, 2, 3)}
    assert family_wasserstein_ball().evaluate((F[2], F[1]), F[3]) == 1


def test_quantile_eval():
    f = family_quantile_eval()
    assert (f.m, f.param_source) == (1, UNIFORM_UNIT)
    assert f.evaluate((0.5,), D(4.0)) == 4.0
    d = EmpiricalDistribution(2.0 * QuantileGrid.midpoint(1000).nodes)
    assert f.evaluate((0.3,), d) == pytest.approx(0.6, abs=2e-3)


def test_conditional_expectation_toy():
    # E[F^-(v) | X1] = v (1 + X1 (1 + E X3) + E X2) for independent Bernoulli inputs
    p = (0.3, 0.6, 0.8)
    v = 0.37
    for x1 in (0, 1):
        acc = 0.0
        for x2 in (0, 1):
            for x3 in (0, 1):
                w = (p[1] if x2 else 1 - p[1]) * (p[2] if x3 else 1 - p[2])
                acc += w * v * toy_level([x1, x2, x3])[0]
        assert acc == pytest.approx(v * (1 + x1 * (1 + p[2]) + p[1]), abs=1e-14)


def test_universal_quantile_index_equals_frechet():
    # exact enumeration of the universal index with T_v(F) = v L, on a grid of v
    for p in [(0.5, 0.5, 0.5), (1 / 3, 2 / 3, 3 / 4), (0.1, 0.9, 0.2)]:
        assert toy_frechet_enum(p) == pytest.approx(toy_frechet_indices(p), abs=1e-10)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=10), st.lists(st.floats(-5, 5), min_size=2, max_size=10))
def test_indicator_families_are_binary(zs, params):
    f = family_cvm()
    assert {f.evaluate((a,), z) for a in params for z in zs} <= {0.0, 1.0}
    g = family_wasserstein_ball()
    ds = [EmpiricalDistribution([z, z + 1]) for z in zs]
    assert {g.evaluate((ds[0], ds[-1]), d) for d in ds} <= {0.0, 1.0}


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=10), st.lists(st.floats(1e-6, 1 - 1e-6), min_size=2))
def test_quantile_eval_monotone(xs, vs):
    f = family_quantile_eval()
    d = EmpiricalDistribution(xs)
    vals = [f.evaluate((v,), d) for v in sorted(vs)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_arity_checked():
    with pytest.raises(DomainError):
        family_cvm().evaluate((), 1.0)


def test_bind_checks_output_kind():
    with pytest.raises(DomainError):
        family_cvm().bind([np.zeros(3)], [[D(1.0)] * 3])
    with pytest.raises(DomainError):
        family_wasserstein_ball().bind([np.zeros(3)] * 2, [np.zeros(3)])


def test_kernels_match_pointwise_evaluation():
    rng = np.random.default_rng(1)
    z = [EmpiricalDistribution(rng.normal(size=6)) for _ in range(5)]
    zu = [EmpiricalDistribution(rng.normal(size=6)) for _ in range(5)]
    f = family_wasserstein_ball()
    k = f.bind([z, z], [z, zu])
    idx = (np.array([0, 1, 4, 2]), np.array([3, 3, 0, 2]))
    got = k.values(idx, 1)
    for b in range(4):
        for j in range(5):
            assert got[b, j] == f.evaluate((z[idx[0][b]], z[idx[1][b]]), zu[j])
    out = np.array([1, 2, 3, 0])
    assert np.array_equal(k.at(idx, out, 0), got_at := k.values(idx, 0)[np.arange(4), out])
    assert got_at.shape == (4,)

    q = family_quantile_eval()
    v = rng.random(4)
    kq = q.bind([v], [z])
    vals = kq.values((np.arange(4),), 0)
    for b in range(4):
        for j in range(5):
            assert vals[b, j] == q.evaluate((v[b],), z[j])


def test_custom_family():
    f = TestFunctionFamily.custom("sq", 1, lambda params, z: (z - params[0]) ** 2,
                                  sampler=lambda rng, size: rng.normal(size=size))
    assert f.param_source == CUSTOM
    pool = f.sample_params(np.random.default_rng(0), 3)
    k = f.bind([pool], [np.array([0.0, 1.0])])
    assert k.values((np.array([0]),), 0).tolist() == [[pool[0] ** 2, (1 - pool[0]) ** 2]]
    with pytest.raises(DomainError):
        TestFunctionFamily.custom("bad", 1, lambda params, z: 0.0)


def test_uniform_levels_exclude_zero():
    v = family_quantile_eval().sample_params(np.random.default_rng(0), 10_000)
    assert np.all((v > 0) & (v < 1))
    with pytest.raises(UnsupportedFeatureError):
        family_cvm().sample_params(np.random.default_rng(0), 3)


def test_family_lookup():
    assert family_by_name("wball", q=1.0).options[0] == ("q", 1.0)
    with pytest.raises(UnsupportedFeatureError):
        family_by_name("nope")


def test_output_sample_mixing_rejected():
    with pytest.raises(DomainError):
        OutputSample([1.0, D(1.0)])

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kere.loss import (ExpectileLevel, ScalarDistribution, conjugate_grad, conjugate_value,
                       expectile_condition, lipschitz_constant, loss_grad, loss_value,
                       population_expectile, sample_expectile)

omegas = st.floats(0.01, 0.99)
reals = st.floats(-1e3, 1e3, allow_nan=False)


def test_loss_examples():
    assert loss_value(2.0, 0.5) == 2.0
    assert loss_value(0.0, 0.3) == 0.0
    assert loss_value(-1.0, 0.9) == pytest.approx(0.1)


def test_grad_examples():
    assert loss_grad(3.0, 0.5) == 3.0
    assert loss_grad(-2.0, 0.8) == pytest.approx(-0.8)
    assert loss_grad(0.0, 0.2) == 0.0


def test_lipschitz_examples():
    assert lipschitz_constant(0.5) == 1.0
    assert lipschitz_constant(0.9) == pytest.approx(1.8)
    assert lipschitz_constant(0.1) == pytest.approx(1.8)


def test_conjugate_examples():
    assert conjugate_value(2.0, 0.5) == 2.0
    assert conjugate_value(0.0, 0.7) == 0.0
    assert conjugate_value(-2.0, 0.75) == pytest.approx(4.0)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_level_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        ExpectileLevel(bad)


def test_vectorized_matches_scalar():
    t = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    vec = loss_value(t, 0.3)
    assert np.allclose(vec, [loss_value(float(x), 0.3) for x in t])


@given(reals, omegas)
def test_nonnegative_and_zero_only_at_zero(t, w):
    v = loss_value(t, w)
    assert v >= 0
    assert (v == 0) == (t == 0) or abs(t) < 1e-150


@given(reals, reals, omegas)
def test_gradient_lipschitz(a, b, w):
    lhs = abs(loss_grad(a, w) - loss_grad(b, w))
    assert lhs <= lipschitz_constant(w) * abs(a - b) * (1 + 1e-12) + 1e-9


@given(reals, reals, omegas)
def test_quadratic_majorizer(a, b, w):
    L = lipschitz_constant(w)
    upper = loss_value(b, w) + loss_grad(b, w) * (a - b) + 0.5 * L * (a - b) ** 2
    assert loss_value(a, w) <= upper + 1e-9 * (1 + abs(upper))


@given(reals, omegas)
def test_conjugate_derivative_inverts_gradient(t, w):
    assert conjugate_grad(loss_grad(t, w), w) == pytest.approx(t, abs=1e-10, rel=1e-12)


@given(reals, reals, omegas)
def test_fenchel_young(t, s, w):
    gap = loss_value(t, w) + conjugate_value(s, w) - t * s
    assert gap >= -1e-9 * (1 + abs(t * s))
    s0 = loss_grad(t, w)
    eq = loss_value(t, w) + conjugate_value(s0, w) - t * s0
    assert abs(eq) <= 1e-9 * (1 + abs(t * s0))


@given(reals)
def test_half_level_is_half_squared_error(t):
    assert loss_value(t, 0.5) == pytest.approx(0.5 * t * t)


def test_population_expectile_examples():
    assert population_expectile(ScalarDistribution.normal(), 0.5) == pytest.approx(0.0, abs=1e-9)
    assert population_expectile(ScalarDistribution.discrete([0.0, 1.0]), 0.5) == pytest.approx(0.5)


def test_population_expectile_condition_met():
    dist = ScalarDistribution.mixture([0.5, 0.5], [0.0, 1.0], [0.5, 0.25])
    b = population_expectile(dist, 0.8)
    assert abs(expectile_condition(dist, b, 0.8)) <= 1e-10


@pytest.mark.parametrize("dist", [
    ScalarDistribution.normal(0.3, 2.0),
    ScalarDistribution.student_t(4.0),
    ScalarDistribution.laplace(0.0, 1.0),
    ScalarDistribution.uniform(-1.0, 3.0),
    ScalarDistribution.mixture([0.9, 0.1], [0.0, 1.0], [1.0, 2.0]),
])
def test_expectile_strictly_increasing(dist):
    bs = [population_expectile(dist, w) for w in np.linspace(0.05, 0.95, 19)]
    assert np.all(np.diff(bs) > 0)


def test_symmetric_law_expectiles_are_antisymmetric():
    d = ScalarDistribution.laplace()
    for w in (0.05, 0.2, 0.4):
        assert population_expectile(d, w) == pytest.approx(-population_expectile(d, 1 - w), abs=1e-9)


def test_quadrature_route_matches_analytic():
    from scipy import stats
    a = population_expectile(ScalarDistribution.normal(0.0, 1.5), 0.9)
    b = population_expectile(ScalarDistribution.from_scipy(stats.norm(0.0, 1.5)), 0.9)
    assert a == pytest.approx(b, abs=1e-7)


def test_sample_expectile_minimizes_sample_loss():
    x = np.random.default_rng(0).standard_normal(200)
    b = sample_expectile(x, 0.3)
    f = lambda c: loss_value(x - c, 0.3).sum()
    assert f(b) <= min(f(b + 1e-4), f(b - 1e-4))


def test_sampler_is_deterministic_under_seed():
    a = ScalarDistribution.student_t(4.0, seed=3).sample(10)
    b = ScalarDistribution.student_t(4.0, seed=3).sample(10)
    assert np.array_equal(a, b)


def test_degenerate_expectile_is_the_point():
    assert population_expectile(ScalarDistribution.degenerate(2.5), 0.1) == pytest.approx(2.5)
    assert math.isfinite(population_expectile(ScalarDistribution.degenerate(0.0), 0.9))

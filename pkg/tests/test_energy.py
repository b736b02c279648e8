import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracwell.energy import (
    EnergyConfig,
    FractionalOrder,
    energy,
    energy_and_gradient,
    gradient,
    norm_factor,
)
from fracwell.gagliardo import assemble_form, seminorm
from fracwell.grid import Grid1D, GridFunction, GridMismatchError, OrderTooHighError, derivative, integrate, make_grid
from fracwell.potential import quartic_well
from oracles import wide_bump

ORDERS = [FractionalOrder(k, s) for k, s in itertools.product((0, 1, 2), (0.25, 0.5, 0.75)) if k + s > 0.5]


def test_order_needs_more_than_half():
    with pytest.raises(ValueError, match="1/2"):
        FractionalOrder(0, 0.4)
    with pytest.raises(ValueError):
        FractionalOrder(0, 0.0)
    with pytest.raises(ValueError):
        FractionalOrder(1, 1.0)
    assert FractionalOrder(1).is_integer


def test_constant_one_has_zero_energy_and_gradient():
    g = make_grid(0, 1, 40)
    for order in [FractionalOrder(1), FractionalOrder(0, 0.75), FractionalOrder(2, 0.3)]:
        cfg = EnergyConfig(order, 0.1, g)
        assert energy(cfg, np.ones(40)).total == pytest.approx(0, abs=1e-12)
        np.testing.assert_allclose(gradient(cfg, np.ones(40)), 0, atol=1e-9)


def test_zero_is_critical_for_the_well_part():
    cfg = EnergyConfig(FractionalOrder(1, 0.5), 0.3, make_grid(0, 1, 20))
    np.testing.assert_allclose(gradient(cfg, np.zeros(20)), 0, atol=1e-15)


def test_norm_factor_values():
    assert norm_factor(0.5) == pytest.approx(0.25 / np.sqrt(2), rel=1e-15)
    assert norm_factor(0.9) == pytest.approx(0.09 / 2**0.1, rel=1e-15)
    assert norm_factor(0.01) < norm_factor(0.1) < 0.1
    with pytest.raises(ValueError):
        norm_factor(1.0)


def test_normalized_needs_fractional_order():
    with pytest.raises(ValueError):
        EnergyConfig(FractionalOrder(1), 1.0, make_grid(0, 1, 10), normalized=True)


def test_order_too_high_for_grid():
    with pytest.raises(OrderTooHighError):
        EnergyConfig(FractionalOrder(3, 0.5), 1.0, make_grid(0, 1, 4))


def test_grid_mismatch():
    cfg = EnergyConfig(FractionalOrder(1), 1.0, make_grid(0, 1, 10))
    with pytest.raises(GridMismatchError):
        energy(cfg, GridFunction(make_grid(0, 2, 10), np.zeros(10)))


@given(seed=st.integers(0, 2**31), order=st.sampled_from(ORDERS), eps=st.floats(0.05, 2))
def test_breakdown_adds_up_and_is_nonnegative(seed, order, eps):
    g = make_grid(-1, 1, 24)
    u = np.random.default_rng(seed).normal(size=24)
    f = GridFunction(g, np.cos(g.nodes))
    br = energy(EnergyConfig(order, eps, g, forcing=f), u)
    assert br.total == br.well_term + br.seminorm_term + br.forcing_term
    assert br.well_term >= 0 and br.seminorm_term >= 0
    assert br.forcing_term == pytest.approx(-integrate(GridFunction(g, f.values * u)), rel=1e-12, abs=1e-14)


@given(seed=st.integers(0, 2**31), s=st.sampled_from([0.25, 0.5, 0.75, 0.9]), k=st.integers(1, 2))
def test_normalized_equals_rescaled_well(seed, s, k):
    g = make_grid(0, 1, 30)
    u = np.random.default_rng(seed).normal(size=30)
    order = FractionalOrder(k, s)
    c = 2 ** (s - 1) * s * (1 - s)
    lhs = energy(EnergyConfig(order, 0.2, g, normalized=True), u).total
    rhs = c * energy(EnergyConfig(order, 0.2, g, well=quartic_well().scaled(1 / c)), u).total
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize(
    "k,s,eps", [c for c in itertools.product((0, 1), (0.3, 0.7), (0.5, 0.25)) if c[0] + c[1] > 0.5]
)
def test_profile_scaling_in_eps(k, s, eps):
    n = 80
    v = np.tanh(np.linspace(-3, 3, n)) + 0.1 * np.sin(np.linspace(0, 7, n))
    unit = energy(EnergyConfig(FractionalOrder(k, s), 1.0, Grid1D(-3, 3, n)), v).total
    scaled = energy(EnergyConfig(FractionalOrder(k, s), eps, Grid1D(-3 * eps, 3 * eps, n)), v).total
    assert scaled == pytest.approx(unit, rel=1e-10)


def central_differences(cfg, u, step=1e-6):
    fd = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = step
        fd[i] = (energy(cfg, u + e).total - energy(cfg, u - e).total) / (2 * step)
    return fd


@pytest.mark.parametrize("order", ORDERS, ids=str)
def test_gradient_matches_central_differences(order):
    rng = np.random.default_rng(11)
    g = make_grid(0, 1, 32)
    cfg = EnergyConfig(order, 0.5, g, forcing=GridFunction(g, np.sin(g.nodes)))
    for _ in range(3):
        u = rng.uniform(-1.2, 1.2, 32)
        grad = gradient(cfg, u)
        fd = central_differences(cfg, u)
        assert np.max(np.abs(grad - fd)) <= 1e-5 * np.max(np.abs(grad))


def test_energy_and_gradient_agree_with_separate_calls():
    g = make_grid(0, 1, 30)
    cfg = EnergyConfig(FractionalOrder(1, 0.6), 0.3, g, tail_T=(-1, 2))
    u = np.linspace(-1, 1, 30) + 0.05 * np.sin(9 * g.nodes)
    br, grad = energy_and_gradient(cfg, u)
    assert br.total == pytest.approx(energy(cfg, u).total, rel=1e-13)
    np.testing.assert_allclose(grad, gradient(cfg, u), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("k", [0, 1])
@pytest.mark.parametrize("s", [0.01, 0.02, 0.98, 0.99])
def test_limits_at_the_ends_of_the_unit_interval(k, s):
    u = GridFunction.from_callable(Grid1D(-3, 3, 4096), wide_bump)
    v = derivative(u, k)
    form = assemble_form(v.grid, s, tail_T=(v.grid.a, v.grid.b))
    value = s * (1 - s) * seminorm(form, v)
    if s < 0.5:
        target = 2 * integrate(GridFunction(v.grid, v.values**2))
    else:
        w = derivative(u, k + 1)
        target = integrate(GridFunction(w.grid, w.values**2))
    assert abs(value / target - 1) <= 0.05

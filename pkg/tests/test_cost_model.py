import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgespan.cost_model import (
    COMPOSITE,
    CONCRETE,
    DEFAULT_MATERIALS,
    STEEL,
    MaterialCostParams,
    balance_ratio,
    cost_derivative,
    economic_span_closed_form,
    economic_span_numeric,
    golden_section_minimize,
    total_cost,
    unit_area_cost,
)


@pytest.mark.parametrize(
    "params, span, expected",
    [
        (CONCRETE, 40, 250 + 40 * 40**1.2 + 50000 * 40**-0.5),
        (COMPOSITE, 10, 500 + 90 * 10**1.07 + 45000 * 10**-0.5),
        (STEEL, 800, 2000 + 140 * 800 + 40000 * 800**-0.5),
    ],
)
def test_unit_area_cost_direct_evaluation(params, span, expected):
    assert unit_area_cost(params, span) == pytest.approx(expected, rel=1e-12)


def test_unit_area_cost_reference_values():
    assert unit_area_cost(CONCRETE, 40) == pytest.approx(11501.7, abs=0.1)
    assert unit_area_cost(COMPOSITE, 10) == pytest.approx(15787.7, abs=0.1)
    assert unit_area_cost(STEEL, 800) == pytest.approx(115414.2, abs=0.1)


@pytest.mark.parametrize("bad", [0, -1.0, float("nan"), float("inf")])
def test_non_positive_span_rejected(bad):
    with pytest.raises(ValueError):
        unit_area_cost(CONCRETE, bad)
    with pytest.raises(ValueError):
        cost_derivative(CONCRETE, bad)
    with pytest.raises(ValueError):
        balance_ratio(CONCRETE, bad)


def test_total_cost_scaling():
    one = total_cost(CONCRETE, 40, 1)
    assert one.total == unit_area_cost(CONCRETE, 40)
    assert one.total == one.superstructure + one.substructure
    thousand = total_cost(CONCRETE, 40, 1000)
    assert thousand.total == pytest.approx(1000 * unit_area_cost(CONCRETE, 40), rel=1e-12)
    assert total_cost(STEEL, 70, 500).total * 2 == pytest.approx(total_cost(STEEL, 70, 1000).total, rel=1e-12)
    with pytest.raises(ValueError):
        total_cost(CONCRETE, 40, 0)


def test_cost_derivative_values():
    assert cost_derivative(CONCRETE, 10) == pytest.approx(48 * 10**0.2 - 25000 * 10**-1.5, rel=1e-12)
    assert cost_derivative(STEEL, 800) == pytest.approx(140 - 20000 * 800**-1.5, rel=1e-12)
    assert cost_derivative(STEEL, 800) == pytest.approx(139.12, abs=0.01)


@pytest.mark.parametrize("params", DEFAULT_MATERIALS, ids=lambda p: p.name)
def test_derivative_matches_central_difference(params):
    for x in (12.5, 39.0, 250.0, 790.0):
        h = 1e-4 * x
        fd = (unit_area_cost(params, x + h) - unit_area_cost(params, x - h)) / (2 * h)
        assert cost_derivative(params, x) == pytest.approx(fd, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize(
    "params, span, cost",
    [(CONCRETE, 39.6, 11501), (COMPOSITE, 32.3, 12125), (STEEL, 27.3, 13478)],
    ids=["concrete", "composite", "steel"],
)
def test_closed_form_matches_hand_computation(params, span, cost):
    result = economic_span_closed_form(params)
    assert result.span_star == pytest.approx(span, abs=0.1)
    assert result.unit_cost_star == pytest.approx(cost, abs=2)
    assert abs(cost_derivative(params, result.span_star)) < 1e-6 * params.b * params.m * result.span_star ** (params.m - 1)


def test_balance_ratio_at_economic_span():
    assert balance_ratio(CONCRETE, 39.64) == pytest.approx(1 / 2.4, abs=1e-3)
    assert balance_ratio(STEEL, 27.33) == pytest.approx(0.5, abs=1e-3)
    composite = economic_span_closed_form(COMPOSITE)
    assert composite.balance_ratio_star == pytest.approx(1 / (2 * 1.07), rel=1e-9)


def test_numeric_solver():
    closed = economic_span_closed_form(CONCRETE).span_star
    assert economic_span_numeric(CONCRETE, 10, 800, 1e-4).span_star == pytest.approx(closed, abs=1e-3)
    unit = MaterialCostParams("unit", a=0, b=1, m=1, c=2, r=0.5)
    assert economic_span_numeric(unit, 0.1, 10, 1e-8).span_star == pytest.approx(1.0, abs=1e-6)
    assert economic_span_numeric(STEEL, 10, 800, 1e-4).span_star == pytest.approx(142.857142857**(2 / 3), abs=1e-3)


def test_numeric_solver_argument_errors():
    with pytest.raises(ValueError):
        economic_span_numeric(CONCRETE, 10, 10, 1e-4)
    with pytest.raises(ValueError):
        economic_span_numeric(CONCRETE, 10, 800, 0)
    with pytest.raises(ValueError):
        golden_section_minimize(math.cos, 4, 2, 1e-3)


@pytest.mark.parametrize(
    "kwargs",
    [dict(a=-1), dict(b=0), dict(c=-5), dict(m=0.9), dict(r=0), dict(r=1), dict(a=float("nan"))],
)
def test_invalid_params_rejected(kwargs):
    base = dict(name="x", a=1.0, b=1.0, m=1.0, c=1.0, r=0.5)
    base.update(kwargs)
    with pytest.raises(ValueError):
        MaterialCostParams(**base)


@pytest.mark.parametrize("params", DEFAULT_MATERIALS, ids=lambda p: p.name)
def test_grid_costs_have_single_valley(params):
    costs = np.array([unit_area_cost(params, x) for x in range(10, 801, 10)])
    signs = np.sign(np.diff(costs))
    assert np.all(signs != 0)
    assert np.count_nonzero(np.diff(signs)) == 1
    assert signs[0] < 0 < signs[-1]


valid_params = st.builds(
    MaterialCostParams,
    name=st.just("random"),
    a=st.floats(0, 5000),
    b=st.floats(1.0, 500.0),
    m=st.floats(1.0, 1.6),
    c=st.floats(1e3, 1e5),
    r=st.floats(0.1, 0.9),
)


@settings(max_examples=150, deadline=None)
@given(valid_params)
def test_closed_form_is_stationary_and_balanced(p):
    result = economic_span_closed_form(p)
    x = result.span_star
    assert abs(cost_derivative(p, x)) < 1e-6 * p.b * p.m * x ** (p.m - 1)
    assert result.balance_ratio_star == pytest.approx((p.n - 1) / (p.m * p.n), rel=1e-6)


@settings(max_examples=150, deadline=None)
@given(valid_params)
def test_numeric_and_closed_form_agree(p):
    closed = economic_span_closed_form(p).span_star
    numeric = economic_span_numeric(p, closed / 20, closed * 20, 1e-6).span_star
    assert numeric == pytest.approx(closed, abs=1e-3)


@settings(max_examples=100, deadline=None)
@given(valid_params, st.floats(1e-3, 1e3))
def test_argmin_invariant_under_joint_scaling(p, k):
    assert economic_span_closed_form(p.scaled(k)).span_star == pytest.approx(
        economic_span_closed_form(p).span_star, rel=1e-9
    )

from __future__ import annotations

import math

import numpy as np
import pytest

from aether_lab.errors import ConfigError
from aether_lab.loads import LoadSpec, load_spec, parse_expression, parse_load


def test_parse_sum_of_terms():
    expr = parse_expression("2.5*sin(1,1) - 0.5*cos(1,1)")
    x, y = 0.3, 1.1
    expected = 2.5 * math.sin(x) * math.sin(y) - 0.5 * math.cos(x) * math.cos(y)
    assert float(expr(x, y)) == pytest.approx(expected)
    assert [term.name for term in expr.terms] == ["sin", "cos"]


def test_parse_pi_arguments():
    expr = parse_expression("sin(pi,2pi)")
    assert expr.terms[0].params == pytest.approx((math.pi, 2.0 * math.pi))
    assert float(expr(0.5, 0.25)) == pytest.approx(1.0)


def test_parse_negative_arguments_and_implicit_coefficient():
    expr = parse_expression("-sinx(-pi) + 2 siny(0.5)")
    assert expr.terms[0].coefficient == -1.0
    assert expr.terms[0].params == pytest.approx((-math.pi,))
    assert expr.terms[1].coefficient == 2.0
    assert float(expr(0.5, 1.0)) == pytest.approx(1.0 + 2.0 * math.sin(0.5))


def test_parse_constants_and_gauss():
    assert parse_expression("0").is_zero
    assert float(parse_expression("1.5 + const()")(0.0, 0.0)) == pytest.approx(2.5)
    bump = parse_expression("gauss(0.5, 0.5, 0.1)")
    assert float(bump(0.5, 0.5)) == pytest.approx(1.0)
    assert float(bump(0.6, 0.5)) == pytest.approx(math.exp(-0.5))


def test_expression_broadcasts_over_arrays():
    expr = parse_expression("sinx(1)")
    x = np.linspace(0.0, 1.0, 5)
    np.testing.assert_allclose(expr(x, 0.0), np.sin(x))


@pytest.mark.parametrize(
    "text",
    ["", "   ", "foo(1)", "sin(1)", "sin(1,1) cos(1,1)", "2*", "gauss(0,0,0)", "sin(a,1)", "x"],
)
def test_parse_expression_rejects_invalid(text: str):
    with pytest.raises(ConfigError):
        parse_expression(text)


def test_parse_load_names_component_field():
    with pytest.raises(ConfigError) as excinfo:
        parse_load(["sin(1,1)", "bad(1)"])
    assert excinfo.value.field == "load.f[1]"


@pytest.mark.parametrize("value", ["sin(1,1)", ["sin(1,1)"], ["0", "0", "0"]])
def test_parse_load_requires_pair(value):
    with pytest.raises(ConfigError):
        parse_load(value)


def test_vector_load_evaluates_points():
    load = parse_load(["sinx(1)", "2"])
    points = np.array([[[0.0, 0.0], [math.pi / 2.0, 1.0]]])
    values = load(points)
    assert values.shape == (1, 2, 2)
    np.testing.assert_allclose(values[0, :, 0], [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(values[0, :, 1], [2.0, 2.0])
    assert load.text == ("sinx(1)", "2")
    assert not load.is_zero


def test_load_spec_weights():
    spec = load_spec(["1", "0"], a=(2.0, 4.0), b=(1.0, 3.0), alpha=1.0)
    assert spec.averaged(0.25) == pytest.approx((3.5, 2.5))
    a, b = spec.phase_weights()
    np.testing.assert_array_equal(a, [2.0, 4.0])
    np.testing.assert_array_equal(b, [1.0, 3.0])


def test_load_spec_rejects_weight_below_alpha():
    with pytest.raises(ConfigError) as excinfo:
        LoadSpec(f=parse_load(["1", "0"]), a=(0.5, 1.0), alpha=1.0)
    assert excinfo.value.field == "load.a[0]"
    with pytest.raises(ConfigError):
        LoadSpec(f=parse_load(["1", "0"]), alpha=0.0)

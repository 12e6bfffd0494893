"""Gauss rules against arbitrary densities and tensor-grid integration."""

import math

import numpy as np
import pytest

from pce_loops.dist import Density
from pce_loops.quad import build_rule, convergence_report, integrate


CORPUS = [
    Density.normal(0.0, 1.0),
    Density.normal(2.0, 0.1),
    Density.uniform(-1.0, 1.0),
    Density.uniform(4.0, 8.0),
    Density.trunc_normal(2.0, 0.1, 1.0, 3.0),
    Density.trunc_normal(4.0, 1.0, 3.0, 5.0),
    Density.trunc_gamma(1.0, 3.0, 0.5, 1.0),
]


@pytest.mark.parametrize("d", CORPUS)
def test_weights_positive_and_normalized(d):
    r = build_rule(d, 24)
    assert len(r) == 24
    assert (r.weights > 0).all()
    assert r.weights.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", CORPUS)
def test_nodes_inside_support(d):
    r = build_rule(d, 32)
    a, b = d.support
    if math.isfinite(a):
        assert r.nodes.min() >= a and r.nodes.max() <= b
    assert np.all(np.diff(r.nodes) > 0)


@pytest.mark.parametrize("d", CORPUS)
def test_polynomial_exactness(d):
    # an n-point rule integrates monomials up to degree 2n-1 against the pdf
    n = 12
    r = build_rule(d, n)
    for k in range(2 * n):
        got = r.expect(lambda x: x**k)
        want = d.raw_moment(k)
        # odd moments of symmetric densities cancel between huge +-terms, so
        # measure error relative to the size of the terms, not of the result
        scale = max(1.0, abs(want), d.raw_moment(k + (k % 2)))
        assert abs(got - want) <= 1e-9 * scale


def test_gauss_hermite_known_nodes():
    # for the standard normal the 3-point rule is +-sqrt(3), 0 with weights 1/6, 2/3
    r = build_rule(Density.normal(0.0, 1.0), 3)
    np.testing.assert_allclose(sorted(r.nodes), [-math.sqrt(3), 0.0, math.sqrt(3)], atol=1e-9)
    np.testing.assert_allclose(sorted(r.weights), sorted([1 / 6, 2 / 3, 1 / 6]), atol=1e-9)


def test_gauss_legendre_known_nodes():
    r = build_rule(Density.uniform(-1.0, 1.0), 2)
    np.testing.assert_allclose(sorted(r.nodes), [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-12)


def test_expect_of_smooth_function():
    d = Density.normal(0.0, 1.0)
    r = build_rule(d, 40)
    # E exp(Z) = e^{1/2}
    assert r.expect(np.exp) == pytest.approx(math.exp(0.5), rel=1e-12)


def test_integrate_tensor_grid_separable():
    dx = Density.uniform(0.0, 1.0)
    dy = Density.normal(0.0, 1.0)
    rules = [build_rule(dx, 16), build_rule(dy, 16)]
    got = integrate(lambda x, y: np.exp(x) * np.cos(y), rules)
    want = (math.e - 1.0) * math.exp(-0.5)
    assert got == pytest.approx(want, rel=1e-12)


def test_integrate_three_dimensions():
    rules = [build_rule(Density.uniform(0.0, 1.0), 8) for _ in range(3)]
    got = integrate(lambda x, y, z: x * y * z, rules)
    assert got == pytest.approx(0.125, rel=1e-12)


def test_integrate_rejects_non_finite():
    rules = [build_rule(Density.uniform(-2.0, -1.0), 8)]
    with np.errstate(invalid="ignore"), pytest.raises(ValueError, match="finite"):
        integrate(np.log, rules)


def test_convergence_report_shrinks():
    d = Density.trunc_normal(2.0, 0.1, 1.0, 3.0)
    rep = convergence_report(lambda x: np.log(1 + x * x), [d], n_nodes=24)
    assert rep["rel_change"] < 1e-10
    assert rep["nodes"] == 24


def test_rule_more_nodes_refines_hard_integrand():
    # |x| is not smooth at 0; the rule should still converge with more nodes
    d = Density.uniform(-1.0, 1.0)
    exact = 0.5
    errs = [abs(build_rule(d, n).expect(np.abs) - exact) for n in (8, 32, 128)]
    assert errs[2] < errs[0]

import math

import numpy as np
import pytest

from sabrakit import GaussPoly


def unit_variance(var):
    return 1.0


class TestRingOperations:
    def test_constant_and_variable(self):
        c = GaussPoly.constant(2.5)
        x = GaussPoly.variable(3, 1)
        assert c.degree() == 0
        assert x.degree() == 1
        assert x.max_shell() == 3
        assert (c + x).evaluate(np.ones((1, 4, 2))) == pytest.approx(3.5)

    def test_invalid_variable(self):
        with pytest.raises(ValueError):
            GaussPoly.variable(0, 1)
        with pytest.raises(ValueError):
            GaussPoly.variable(1, 3)

    def test_monomial_constructor(self):
        p = GaussPoly.monomial(2.0, [((1, 1), 2), ((2, 2), 1)])
        x = np.zeros((3, 2))
        x[0, 0] = 3.0
        x[1, 1] = 5.0
        assert p.evaluate(x) == pytest.approx(2.0 * 9.0 * 5.0)

    def test_arithmetic_matches_pointwise(self):
        rng = np.random.default_rng(7)
        x1 = GaussPoly.variable(1, 1)
        x2 = GaussPoly.variable(2, 2)
        p = (2.0 * x1 - x2) * (x1 + 3.0) + 1.0
        pts = rng.standard_normal((50, 4, 2))
        a = pts[:, 0, 0]
        b = pts[:, 1, 1]
        np.testing.assert_allclose(p.evaluate(pts), (2 * a - b) * (a + 3) + 1, rtol=1e-13)

    def test_zero_coefficients_dropped(self):
        x = GaussPoly.variable(1, 1)
        assert (x - x).terms == {}
        assert (0.0 * x).terms == {}

    def test_scalar_evaluation_on_single_state(self):
        p = GaussPoly.variable(2, 1)
        x = np.zeros((3, 2))
        x[1, 0] = -4.0
        out = p.evaluate(x)
        assert isinstance(out, float) and out == -4.0


class TestDifferentiation:
    def test_power_rule(self):
        x = GaussPoly.variable(1, 1)
        p = x * x * x
        d = p.diff((1, 1))
        pts = np.random.default_rng(0).standard_normal((20, 2, 2))
        np.testing.assert_allclose(d.evaluate(pts), 3.0 * pts[:, 0, 0] ** 2, rtol=1e-13)

    def test_unrelated_variable(self):
        p = GaussPoly.variable(1, 1) * GaussPoly.variable(2, 1)
        assert p.diff((5, 2)).terms == {}

    def test_product_rule_consistency(self):
        x = GaussPoly.variable(1, 1)
        y = GaussPoly.variable(1, 2)
        p = x * x * y
        # d/dx (x^2 y) = 2 x y
        expected = 2.0 * x * y
        assert p.diff((1, 1)).terms == expected.terms


class TestExpectation:
    def test_odd_moments_vanish(self):
        x = GaussPoly.variable(1, 1)
        assert x.expectation(unit_variance) == 0.0
        assert (x * x * x).expectation(unit_variance) == 0.0

    def test_even_moments_standard_normal(self):
        x = GaussPoly.variable(1, 1)
        p = GaussPoly.constant(1.0)
        # E[x^{2k}] = (2k-1)!!
        for k, expected in [(1, 1.0), (2, 3.0), (3, 15.0), (4, 105.0)]:
            p = p * x * x
            assert p.expectation(unit_variance) == pytest.approx(expected)

    def test_variance_scaling(self):
        x = GaussPoly.variable(4, 2)
        var = lambda v: 0.3
        assert (x * x).expectation(var) == pytest.approx(0.3)
        assert (x * x * x * x).expectation(var) == pytest.approx(3 * 0.3**2)

    def test_independent_components_factorize(self):
        x = GaussPoly.variable(1, 1)
        y = GaussPoly.variable(2, 1)
        assert (x * y).expectation(unit_variance) == 0.0
        assert (x * x * y * y).expectation(unit_variance) == pytest.approx(1.0)

    def test_mixed_polynomial_against_monte_carlo(self):
        # degree-6 mixed moment: exact pairing sum vs a large sample average
        x = GaussPoly.variable(1, 1)
        y = GaussPoly.variable(2, 2)
        p = x * x * y * y * y * y + 2.0 * x * y - 0.5
        exact = p.expectation(unit_variance)  # 1*3 + 0 - 0.5 = 2.5
        assert exact == pytest.approx(2.5)
        rng = np.random.default_rng(11)
        pts = rng.standard_normal((400_000, 2, 2))
        est = float(np.mean(p.evaluate(pts)))
        assert est == pytest.approx(exact, abs=0.05)

    def test_hermite_polynomial_is_centered(self):
        # H_4(x) = x^4 - 6x^2 + 3 has zero mean under the standard normal
        x = GaussPoly.variable(1, 1)
        h4 = x * x * x * x - 6.0 * x * x + 3.0
        assert h4.expectation(unit_variance) == pytest.approx(0.0, abs=1e-12)

    def test_degree8_pairing_count(self):
        # E[x^8] = 7!! = 105: exercises the deepest recursion used in practice
        x = GaussPoly.variable(1, 1)
        p = x * x * x * x * x * x * x * x
        assert p.expectation(unit_variance) == pytest.approx(math.prod([1, 3, 5, 7]))

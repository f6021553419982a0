import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from moconv.quadrature import (
    gauss_lobatto,
    gauss_lobatto_rule,
    panel_nodes,
    panelize,
)


class TestRule:
    @pytest.mark.parametrize("n", [3, 4, 5, 7, 9, 15])
    def test_weights_sum_to_interval_length(self, n):
        _, w = gauss_lobatto_rule(n)
        assert w.sum() == pytest.approx(2.0, abs=1e-14)

    @pytest.mark.parametrize("n", [3, 4, 5, 7, 9, 15])
    def test_endpoints_included(self, n):
        x, _ = gauss_lobatto_rule(n)
        assert x[0] == -1.0 and x[-1] == 1.0
        assert np.all(np.diff(x) > 0)

    @pytest.mark.parametrize("n", [3, 4, 5, 7, 9, 15])
    def test_exact_on_max_degree(self, n):
        # exact for polynomials up to degree 2n - 3
        x, w = gauss_lobatto_rule(n)
        for deg in range(2 * n - 2):
            estimate = np.sum(w * x**deg)
            exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
            assert estimate == pytest.approx(exact, abs=1e-13)

    def test_not_exact_beyond_max_degree(self):
        n = 5
        x, w = gauss_lobatto_rule(n)
        deg = 2 * n - 2  # even, first degree the rule misses
        assert abs(np.sum(w * x**deg) - 2.0 / (deg + 1)) > 1e-6

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            gauss_lobatto_rule(2)


class TestGaussLobatto:
    def test_polynomial_on_shifted_interval(self):
        val = gauss_lobatto(lambda x: 3 * x**2 + 1, 2.0, 5.0, 5)
        assert val == pytest.approx((5.0**3 + 5.0) - (2.0**3 + 2.0), rel=1e-14)

    def test_bad_interval_rejected(self):
        with pytest.raises(ValueError):
            gauss_lobatto(lambda x: x, 1.0, 1.0, 5)

    @given(st.floats(-5, 5), st.floats(0.1, 10))
    @settings(max_examples=25, deadline=None)
    def test_exponential_converges(self, a, width):
        b = a + width
        val = gauss_lobatto(np.exp, a, b, 15)
        assert val == pytest.approx(math.exp(b) - math.exp(a), rel=1e-12)


class TestPanelize:
    def test_contains_bounds_and_peak(self):
        b = panelize(-10.0, 10.0, [0.0], 1e-3)
        assert b[0] == -10.0 and b[-1] == 10.0
        assert np.any(b == 0.0)
        assert np.all(np.diff(b) > 0)

    def test_ladder_reaches_bounds_geometrically(self):
        width = 1e-6
        b = panelize(-1.0, 1.0, [0.0], width, factor=4.0)
        # smallest panels adjacent to the peak have the hint width
        i = int(np.argwhere(b == 0.0)[0, 0])
        assert b[i + 1] - b[i] == pytest.approx(width)
        # panel widths never jump by much more than the ladder factor
        widths = np.diff(b)
        ratios = widths[1:] / widths[:-1]
        assert ratios.max() < 4.5

    def test_out_of_range_peaks_ignored(self):
        b = panelize(0.0, 1.0, [5.0], 0.1)
        assert b[0] == 0.0 and b[-1] == 1.0

    def test_close_peaks_merged(self):
        w = 0.1
        merged = panelize(-1.0, 1.0, [0.0, w / 3], w)
        separate = panelize(-1.0, 1.0, [0.0, 5 * w], w)
        assert len(merged) < len(separate)

    def test_bad_width_rejected(self):
        with pytest.raises(ValueError):
            panelize(0.0, 1.0, [0.5], 0.0)

    def test_bad_factor_rejected(self):
        with pytest.raises(ValueError):
            panelize(0.0, 1.0, [0.5], 0.1, factor=1.0)


class TestPanelNodes:
    def test_refine_doubles_node_count(self):
        b = panelize(-1.0, 1.0, [0.0], 0.01)
        x0, w0 = panel_nodes(b, 9, refine=0)
        x1, w1 = panel_nodes(b, 9, refine=1)
        assert len(x1) == 2 * len(x0)

    def test_weights_sum_to_span(self):
        b = panelize(-3.0, 7.0, [0.0, 2.0], 1e-4)
        for refine in (0, 1, 2):
            _, w = panel_nodes(b, 9, refine=refine)
            assert w.sum() == pytest.approx(10.0, rel=1e-13)

    def test_nodes_stay_inside_interval(self):
        b = panelize(-2.0, 2.0, [1.0], 1e-5)
        x, _ = panel_nodes(b, 9, refine=1)
        assert x.min() >= -2.0 and x.max() <= 2.0


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
class TestSharpFeatures:
    def test_narrow_lorentzian_matches_closed_form(self):
        gamma = 1e-6

        def f(x):
            return gamma / (gamma**2 + (x - 0.3) ** 2)

        b = panelize(-1.0, 1.0, [0.3], gamma)
        x, w = panel_nodes(b, 9, refine=1)
        estimate = np.sum(w * f(x))
        reference = math.atan(0.7 / gamma) + math.atan(1.3 / gamma)
        assert estimate == pytest.approx(reference, rel=1e-8)

    def test_beats_unassisted_adaptive_reference(self):
        # scipy.integrate.quad cannot resolve this peak without being told
        # where it is; the panelized rule needs no extrapolation at all
        gamma = 1e-7

        def f(x):
            return gamma / (gamma**2 + (x - 0.3) ** 2)

        b = panelize(-1.0, 1.0, [0.3], gamma)
        x, w = panel_nodes(b, 9, refine=1)
        estimate = np.sum(w * f(x))
        reference = math.atan(0.7 / gamma) + math.atan(1.3 / gamma)
        assert estimate == pytest.approx(reference, rel=1e-8)

    def test_two_peaks_different_scales(self):
        g1, g2 = 1e-5, 1e-2

        def f(x):
            return g1 / (g1**2 + (x + 0.5) ** 2) + g2 / (g2**2 + (x - 0.4) ** 2)

        b = panelize(-2.0, 2.0, [-0.5, 0.4], g1)
        x, w = panel_nodes(b, 9, refine=1)
        estimate = np.sum(w * f(x))
        reference, _ = quad(f, -2.0, 2.0, points=[-0.5, 0.4], epsabs=0, epsrel=1e-12)
        assert estimate == pytest.approx(reference, rel=1e-8)

    def test_gaussian_times_lorentzian(self):
        # the actual integrand shape: broad Gaussian weight, sharp response.
        # Reference: subtract the peak value so the remainder is integrable
        # adaptively, and add the Lorentzian mass back in closed form.
        gamma, p = 1e-7, 0.2

        def f(x):
            return np.exp(-0.5 * x**2) * gamma / (gamma**2 + (x - p) ** 2)

        def smooth_part(x):
            return (np.exp(-0.5 * x**2) - np.exp(-0.5 * p**2)) * gamma / (
                gamma**2 + (x - p) ** 2
            )

        b = panelize(-6.0, 6.0, [p], gamma)
        x, w = panel_nodes(b, 9, refine=1)
        estimate = np.sum(w * f(x))
        rest, err = quad(smooth_part, -6.0, 6.0, points=[p], epsabs=1e-13, epsrel=1e-11, limit=200)
        mass = math.exp(-0.5 * p**2) * (math.atan((6 - p) / gamma) + math.atan((6 + p) / gamma))
        reference = rest + mass
        assert estimate == pytest.approx(reference, rel=1e-8)

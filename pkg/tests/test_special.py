import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from clinstat.special import chi_square_survival, gammainc_lower, gammainc_upper


def quad_survival(x, df):
    """Tail probability by numerically integrating the chi-square density."""
    k = df / 2.0
    log_norm = -k * math.log(2.0) - math.lgamma(k)

    def pdf(t):
        return math.exp(log_norm + (k - 1) * math.log(t) - t / 2.0) if t > 0 else 0.0

    head, _ = integrate.quad(pdf, 0.0, x, limit=200)
    return 1.0 - head


class TestChiSquareSurvival:
    @pytest.mark.parametrize("x,df", [(0.5, 1), (3.8416, 1), (6.312, 8), (12.0, 5), (30.0, 20), (78.919, 43)])
    def test_matches_density_integral(self, x, df):
        assert chi_square_survival(x, df) == pytest.approx(quad_survival(x, df), abs=1e-9)

    @pytest.mark.parametrize("x,df", [(1e-6, 3), (0.1, 0.5), (2.0, 2), (50.0, 10), (400.0, 300), (1000.0, 50)])
    def test_matches_scipy(self, x, df):
        assert chi_square_survival(x, df) == pytest.approx(stats.chi2.sf(x, df), rel=1e-10, abs=1e-300)

    def test_known_quantile(self):
        # 3.8416 is the 95% point of chi-square with 1 df
        assert chi_square_survival(3.8416, 1) == pytest.approx(0.05, abs=1e-4)

    def test_zero_and_negative_x(self):
        assert chi_square_survival(0.0, 4) == 1.0
        with pytest.raises(ValueError):
            chi_square_survival(-1.0, 4)

    def test_bad_df(self):
        with pytest.raises(ValueError):
            chi_square_survival(1.0, 0)

    def test_huge_statistic_underflows_to_zero(self):
        assert chi_square_survival(1e5, 3) == 0.0


class TestIncompleteGammaProperties:
    @settings(max_examples=200, deadline=None)
    @given(a=st.floats(0.05, 200.0), x=st.floats(0.0, 500.0))
    def test_parts_sum_to_one(self, a, x):
        assert gammainc_lower(a, x) + gammainc_upper(a, x) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(df=st.integers(1, 120), x=st.floats(0.0, 300.0), dx=st.floats(0.01, 50.0))
    def test_survival_decreases_in_x(self, df, x, dx):
        assert chi_square_survival(x + dx, df) <= chi_square_survival(x, df)

    @settings(max_examples=100, deadline=None)
    @given(df=st.integers(1, 120), x=st.floats(0.0, 300.0))
    def test_survival_is_a_probability(self, df, x):
        assert 0.0 <= chi_square_survival(x, df) <= 1.0

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import symbolic_term
from neargauss.errors import InvalidSpecError, RegimeError
from neargauss.oracle import oracle_gaussian_expectation, oracle_moment
from neargauss.series import (
    DensitySpec,
    MomentSet,
    approx_moments,
    bound_sequence,
    double_factorial,
    gaussian_moment,
    normalization,
    optimal_order,
    series_term,
    truncated_series,
)

SKEW = DensitySpec(1.0, ((3, 0.05), (4, -0.05)))


class TestDensitySpec:
    def test_terms_sorted_and_signed(self):
        spec = DensitySpec(2.0, ((4, -0.1), (3, 0.02)))
        assert spec.terms == ((3, 0.02), (4, -0.1))
        assert spec.coefficient(3) == 0.02
        assert spec.coefficient(6) == 0.0
        assert DensitySpec.single(4, 0.1).terms == ((4, -0.1),)
        assert DensitySpec.skewed(3, 0.02, 4, 0.01).terms == ((3, 0.02), (4, -0.01))

    @pytest.mark.parametrize(
        "sigma, terms",
        [
            (0.0, ((4, -0.1),)),
            (-1.0, ((4, -0.1),)),
            (1.0, ((2, -0.1),)),
            (1.0, ((0, 1.0), (4, -0.1))),
            (1.0, ((4, -0.1), (4, -0.2))),
            (1.0, ((4, 0.1),)),
            (1.0, ((3, -0.1),)),
            (1.0, ((4, -0.1), (5, 0.01))),
            (1.0, ((4.5, -0.1),)),
            (1.0, ((4, math.inf),)),
        ],
    )
    def test_invalid(self, sigma, terms):
        with pytest.raises(InvalidSpecError):
            DensitySpec(sigma, terms)

    def test_metrics(self):
        spec = DensitySpec(2.0, ((3, 0.01), (4, -0.001)))
        m = spec.perturbative_metrics()
        assert m[3] == pytest.approx(0.08)
        assert m[4] == pytest.approx(0.016)


class TestDoubleFactorial:
    @pytest.mark.parametrize("n, want", [(7, 105), (-1, 1), (0, 1), (9, 945), (1, 1), (2, 2), (8, 384)])
    def test_values(self, n, want):
        assert double_factorial(n) == want

    def test_rejects(self):
        with pytest.raises(ValueError):
            double_factorial(-2)

    @given(st.integers(1, 200))
    def test_recurrence(self, n):
        assert double_factorial(n) == n * double_factorial(n - 2)


class TestGaussianMoment:
    @pytest.mark.parametrize("k, sigma, want", [(4, 1, 3), (5, 2.5, 0), (6, 1, 15), (0, 3.0, 1), (2, 0.5, 0.25)])
    def test_values(self, k, sigma, want):
        assert gaussian_moment(k, sigma) == want

    @given(st.integers(0, 40), st.floats(0.1, 5.0))
    def test_scaling(self, k, sigma):
        assert gaussian_moment(k, sigma) == pytest.approx(sigma**k * gaussian_moment(k, 1.0), rel=1e-12)


class TestSeriesTerm:
    def test_examples(self):
        spec = DensitySpec(1.0, ((4, -0.1),))
        assert series_term(spec, 0, 1) == pytest.approx(-0.3, rel=1e-15)
        assert series_term(spec, 0, 0) == 1.0
        two = DensitySpec(1.0, ((3, 0.05), (4, -0.1)))
        assert series_term(two, 0, 2) == pytest.approx(0.54375, rel=1e-14)

    @pytest.mark.parametrize(
        "sigma, terms, k, n",
        [
            (1.0, ((3, 0.05), (4, -0.1)), 0, 2),
            (1.0, ((3, 0.05), (4, -0.1)), 3, 3),
            (0.7, ((1, 0.1), (3, 0.02), (4, -0.03)), 2, 4),
            (1.3, ((1, -0.2), (5, 0.001), (6, -0.002)), 4, 3),
            (0.5, ((3, 0.3), (4, -0.25), (6, -0.1)), 5, 2),
        ],
    )
    def test_against_symbolic_expansion(self, sigma, terms, k, n):
        spec = DensitySpec(sigma, terms)
        assert series_term(spec, k, n) == pytest.approx(symbolic_term(sigma, spec.terms, k, n), rel=1e-12, abs=1e-300)

    @given(
        p=st.sampled_from([4, 6, 8]),
        eps=st.floats(1e-6, 0.2),
        sigma=st.floats(0.3, 2.0),
        k=st.integers(0, 10),
        n=st.integers(0, 12),
    )
    def test_single_term_closed_form(self, p, eps, sigma, k, n):
        spec = DensitySpec.single(p, eps, sigma)
        closed = (-eps) ** n / math.factorial(n) * double_factorial(n * p + k - 1) * sigma ** (n * p + k)
        if (n * p + k) % 2:
            closed = 0.0
        assert series_term(spec, k, n) == pytest.approx(closed, rel=1e-12, abs=0)

    def test_log_space_fallback(self):
        spec = DensitySpec(1.0, ((4, -0.5),))
        v = series_term(spec, 0, 60)
        assert math.isfinite(v) and v > 0
        want = math.exp(60 * math.log(0.5) - math.lgamma(61) + sum(math.log(j) for j in range(1, 240, 2)))
        assert v == pytest.approx(want, rel=1e-9)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            series_term(SKEW, -1, 0)
        with pytest.raises(ValueError):
            series_term(SKEW, 0, -1)


class TestTruncatedSeries:
    def test_examples(self):
        spec = DensitySpec(1.0, ((4, -0.05),))
        r = truncated_series(spec, 0, 1)
        assert r.value == pytest.approx(0.85, rel=1e-15)
        assert r.bound == pytest.approx(0.13125, rel=1e-14)
        assert r.order == 1
        r2 = truncated_series(spec, 2, 1)
        assert r2.value == pytest.approx(0.25, rel=1e-14)
        assert r2.bound == pytest.approx(1.18125, rel=1e-14)
        assert truncated_series(SKEW, 0, 0).value == 1.0

    @pytest.mark.parametrize("k", [0, 2, 4])
    @pytest.mark.parametrize("order", [0, 1, 2, 3])
    def test_first_order_terms_match_quadrature(self, k, order):
        spec = DensitySpec(1.0, ((4, -0.05),))
        r = truncated_series(spec, k, order)
        exact = oracle_gaussian_expectation(spec, k)
        assert abs(exact - r.value) <= r.bound

    def test_bound_is_abs_first_omitted_term(self):
        # with a negative odd coefficient the signed cross terms would cancel at higher k
        spec = DensitySpec(1.0, ((3, -0.05), (4, -0.1)))
        r = truncated_series(spec, 3, 0)
        # |eps3| E[x^6] + |eps4| E[x^7] with absolute coefficients
        assert r.bound == pytest.approx(0.05 * 15, rel=1e-14)
        r = truncated_series(spec, 0, 1)
        assert r.bound == pytest.approx(0.5 * (0.05**2 * 15 + 0.1**2 * 105), rel=1e-14)
        r = truncated_series(spec, 3, 1)
        assert r.bound == pytest.approx(0.5 * (2 * 0.05 * 0.1 * 945), rel=1e-14)
        assert series_term(spec, 3, 2) == pytest.approx(0.5 * (2 * (-0.05) * (-0.1) * 945), rel=1e-14)


class TestOptimalOrder:
    def test_examples(self):
        assert optimal_order(DensitySpec.single(4, 0.05), 0, 10) == 1
        tiny = DensitySpec.single(4, 1e-9)
        n = optimal_order(tiny, 0, 10)
        assert n == 10
        seq = bound_sequence(tiny, 0, 10)
        assert seq[n] <= seq[0]
        assert optimal_order(DensitySpec.single(4, 0.3), 0, 10) in (0, 1)

    @given(eps=st.floats(1e-6, 0.3), k=st.integers(0, 8), max_order=st.integers(1, 25))
    def test_argmin(self, eps, k, max_order):
        spec = DensitySpec(1.0, ((3, eps / 2), (4, -eps)))
        seq = bound_sequence(spec, k, max_order)
        n = optimal_order(spec, k, max_order)
        assert seq[n] == min(seq)
        assert all(seq[j] > seq[n] for j in range(n))

    def test_floor_prefers_small_orders(self):
        spec = DensitySpec(1.0, ((4, -1e-15),))
        assert optimal_order(spec, 2, 20, floor=1e-10) == 0

    def test_rejects_bad_cap(self):
        with pytest.raises(ValueError):
            optimal_order(SKEW, 0, 0)
        with pytest.raises(ValueError):
            optimal_order(SKEW, 0, 65)


class TestNormalization:
    def test_examples(self):
        r = normalization(DensitySpec.single(4, 0.05), 1)
        assert r.value == pytest.approx(1 / 0.85, rel=1e-15)
        assert r.bound == pytest.approx(0.13125 / (0.85 * (0.85 - 0.13125)), rel=1e-14)
        assert normalization(DensitySpec.single(4, 1e-12, 2.0), 0).value == 1.0
        assert normalization(SKEW, 2).value == pytest.approx(1.0, rel=1e-14)

    def test_regime_error(self):
        with pytest.raises(RegimeError):
            normalization(DensitySpec.single(4, 0.5), 1)


class TestApproxMoments:
    def test_examples(self):
        spec = DensitySpec.single(4, 0.05)
        ms = approx_moments(spec, [1, 2], 1)
        assert ms[2] == pytest.approx(0.25 / 0.85, rel=1e-14)
        assert ms[1] == 0.0
        assert ms.source == "computed"

    def test_skewed_third_moment(self):
        # 0.75 - eps3 eps4 * E[x^10] with E[x^10] = 945
        ms = approx_moments(SKEW, [3], 2)
        assert ms[3] == pytest.approx(0.75 - 0.05 * 0.05 * 945, rel=1e-14)
        assert ms[3] == pytest.approx(-1.6125, rel=1e-14)
        assert abs(oracle_moment(SKEW, 3) - ms[3]) <= ms.bound(3)

    @given(k=st.integers(0, 8), sigma=st.floats(0.3, 3.0))
    def test_gaussian_degeneracy(self, k, sigma):
        spec = DensitySpec(sigma, ((3, 5e-324), (4, -5e-324)))
        ms = approx_moments(spec, [k], 0)
        assert abs(ms[k] - gaussian_moment(k, sigma)) <= ms.bound(k) + 1e-15 * gaussian_moment(k, sigma)

    @pytest.mark.parametrize(
        "terms",
        [((4, -0.1),), ((3, 0.02), (4, -0.03)), ((1, 0.05), (4, -0.05)), ((3, -0.03), (6, -0.01)), ((4, -0.02), (6, -0.005))],
    )
    def test_oracle_containment_to_optimal_order(self, terms):
        spec = DensitySpec(1.0, terms)
        for k in range(9):
            top = optimal_order(spec, k, 10)
            exact = oracle_moment(spec, k)
            for n in range(top + 1):
                try:
                    ms = approx_moments(spec, [k], n)
                except RegimeError:
                    continue
                assert abs(exact - ms[k]) <= ms.bound(k), (k, n)


class TestMomentSet:
    def test_access(self):
        ms = MomentSet({0: 1.0, 2: 1.5}, "empirical")
        assert 2 in ms and 3 not in ms
        assert ms.orders() == [0, 2]
        with pytest.raises(KeyError):
            ms.bound(2)

    def test_invariants(self):
        with pytest.raises(InvalidSpecError):
            MomentSet({0: 0.5})
        with pytest.raises(ValueError):
            MomentSet({2: 1.0}, "guessed")


def test_moment_vector_matches_ratio():
    from neargauss.series import moment_vector

    v = moment_vector(SKEW, [1, 2, 3], 2)
    z = truncated_series(SKEW, 0, 2).value
    want = np.array([truncated_series(SKEW, k, 2).value / z for k in (1, 2, 3)])
    np.testing.assert_allclose(v, want, rtol=1e-14)

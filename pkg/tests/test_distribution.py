from fractions import Fraction
from math import comb, factorial

import pytest
from hypothesis import given
from hypothesis import strategies as st
from sympy import Poly

from grouproulette.distribution import (
    AT_LEAST,
    AT_MOST,
    Pmf,
    ScaledProb,
    SurvivorTerms,
    empty_boxes_pmf,
    interval_exit_bound,
    pmf_decimal_frame,
    pmf_frame,
    s_pmf_exact,
    s_pmf_lower_scaled,
    stirling2,
    y_pmf,
    y_tail_exact,
    z_pmf,
)
from grouproulette.distribution.roots import (
    count_real_roots,
    y_bernoulli_decomposition,
    y_generating_poly,
    y_generating_poly_real_rooted,
    z,
)
from grouproulette.errors import DomainError
from grouproulette.tails import expected_empty

SCALE = 10**10


def as_dict(pmf: Pmf):
    return dict(pmf.items())


class TestSurvivorPmf:
    def test_two_people_always_shoot_each_other(self):
        assert as_dict(s_pmf_exact(n=2)) == {0: Fraction(1)}

    def test_three_people(self):
        assert as_dict(s_pmf_exact(n=3)) == {0: Fraction(1, 4), 1: Fraction(3, 4)}

    def test_four_people(self):
        assert as_dict(s_pmf_exact(n=4)) == {0: Fraction(9, 81), 1: Fraction(48, 81), 2: Fraction(24, 81)}

    @pytest.mark.parametrize("n", range(2, 8))
    def test_matches_enumeration(self, n, survivor_oracle):
        assert as_dict(s_pmf_exact(n=n)) == survivor_oracle(n)

    @pytest.mark.parametrize("n", [2, 3, 10, 57])
    def test_support_and_denominator(self, n):
        pmf = s_pmf_exact(n=n)
        assert pmf.total() == 1
        assert pmf.denominator == (n - 1) ** n
        assert max(pmf.support) <= n - 2

    @pytest.mark.parametrize("n", [-1, 0, 1])
    def test_rejects_small_n(self, n):
        with pytest.raises(DomainError):
            s_pmf_exact(n=n)


class TestScaledLowerBounds:
    def test_three_people(self):
        assert s_pmf_lower_scaled(n=3, k=0, scale=SCALE).m == 2500000000
        assert s_pmf_lower_scaled(n=3, k=1, scale=SCALE).m == 7500000000

    def test_two_people(self):
        assert s_pmf_lower_scaled(n=2, k=0, scale=SCALE).m == SCALE

    @given(n=st.integers(min_value=2, max_value=40), data=st.data())
    def test_within_two_units_below_exact(self, n, data):
        k = data.draw(st.integers(min_value=0, max_value=n - 2))
        exact = s_pmf_exact(n=n).mass(k)
        bound = s_pmf_lower_scaled(n=n, k=k, scale=SCALE)
        assert bound.m >= 0
        assert bound.as_fraction() <= exact < Fraction(bound.m + 2, SCALE)

    @pytest.mark.parametrize("k", [-1, 3])
    def test_rejects_k_out_of_range(self, k):
        with pytest.raises(DomainError):
            s_pmf_lower_scaled(n=4, k=k)

    def test_terms_vanish_for_small_a(self):
        terms = SurvivorTerms(6)
        # a = n - k - r = 1 and a = 0
        assert terms.term(2, 3).value == 0
        assert terms.term(2, 4).value == 0
        assert terms.term(0, 0).value == 5**6

    def test_scaled_prob_range(self):
        with pytest.raises(DomainError):
            ScaledProb(SCALE + 1, SCALE)


class TestOccupancy:
    def test_single_ball_single_box(self):
        assert as_dict(empty_boxes_pmf(balls=1, boxes=1)) == {0: Fraction(1)}

    def test_two_balls_two_boxes(self):
        assert as_dict(empty_boxes_pmf(balls=2, boxes=2)) == {0: Fraction(1, 2), 1: Fraction(1, 2)}

    def test_three_balls_two_boxes(self):
        assert as_dict(empty_boxes_pmf(balls=3, boxes=2)) == {0: Fraction(3, 4), 1: Fraction(1, 4)}

    def test_no_balls_leaves_every_box_empty(self):
        assert as_dict(empty_boxes_pmf(balls=0, boxes=3)) == {3: Fraction(1)}

    @given(balls=st.integers(min_value=0, max_value=7), boxes=st.integers(min_value=1, max_value=5))
    def test_matches_enumeration(self, balls, boxes, occupancy_oracle):
        assert as_dict(empty_boxes_pmf(balls=balls, boxes=boxes)) == occupancy_oracle(balls, boxes)

    def test_rejects_zero_boxes(self):
        with pytest.raises(DomainError):
            empty_boxes_pmf(balls=2, boxes=0)

    def test_y_and_z(self):
        assert as_dict(y_pmf(n=4)) == {0: Fraction(6, 27), 1: Fraction(18, 27), 2: Fraction(3, 27)}
        assert as_dict(z_pmf(n=3)) == {1: Fraction(3, 4), 2: Fraction(1, 4)}
        assert as_dict(z_pmf(n=2)) == {1: Fraction(1)}

    @pytest.mark.parametrize("n", range(2, 30))
    def test_y_mean_is_expected_empty(self, n):
        assert y_pmf(n=n).mean() == expected_empty(n=n)

    @pytest.mark.parametrize("boxes", range(1, 16))
    def test_stirling_form(self, boxes):
        # j empty boxes: choose them, then map the balls onto the rest surjectively
        for balls in range(boxes + 1):
            pmf = empty_boxes_pmf(balls=balls, boxes=boxes)
            for j in range(boxes + 1):
                free = boxes - j
                expected = Fraction(comb(boxes, j) * factorial(free) * stirling2(i=balls, k=free), boxes**balls)
                assert pmf.mass(j) == expected


class TestYTails:
    def test_at_least_one_empty_box(self):
        assert y_tail_exact(n=4, k=1, direction=AT_LEAST) == Fraction(7, 9)

    def test_no_empty_box(self):
        assert y_tail_exact(n=4, k=0, direction=AT_MOST) == Fraction(2, 9)

    @given(n=st.integers(min_value=2, max_value=40), data=st.data())
    def test_match_pmf_tails(self, n, data):
        pmf = y_pmf(n=n)
        k = data.draw(st.integers(min_value=1, max_value=n + 1))
        assert y_tail_exact(n=n, k=k, direction=AT_LEAST) == pmf.at_least(k)
        assert y_tail_exact(n=n, k=k - 1, direction=AT_MOST) == pmf.at_most(k - 1)

    def test_rejects_anchor_below_one(self):
        with pytest.raises(DomainError):
            y_tail_exact(n=5, k=0, direction=AT_LEAST)

    def test_rejects_unknown_direction(self):
        with pytest.raises(DomainError):
            y_tail_exact(n=5, k=1, direction="sideways")

    def test_exit_bound(self):
        bound = interval_exit_bound(a=10, b=12, alpha=2, beta=5)
        expected = y_pmf(n=10).at_most(1) + y_pmf(n=12).at_least(5)
        assert bound == expected
        assert bound >= 0

    def test_exit_bound_rejects_reversed_interval(self):
        with pytest.raises(DomainError):
            interval_exit_bound(a=12, b=10, alpha=2, beta=5)


class TestStirling:
    @pytest.mark.parametrize("i, k, expected", [(0, 0, 1), (3, 2, 3), (4, 2, 7), (5, 3, 25), (3, 5, 0), (6, 1, 1)])
    def test_values(self, i, k, expected):
        assert stirling2(i=i, k=k) == expected

    @given(i=st.integers(min_value=0, max_value=30), k=st.integers(min_value=1, max_value=30))
    def test_recurrence(self, i, k):
        assert stirling2(i=i + 1, k=k) == k * stirling2(i=i, k=k) + stirling2(i=i, k=k - 1)


class TestGeneratingPolynomial:
    @pytest.mark.parametrize("n", range(3, 13))
    def test_real_rooted(self, n):
        assert y_generating_poly_real_rooted(n=n)

    def test_degree_and_coefficients(self):
        poly = y_generating_poly(n=4)
        # 27 E z^{Y_4} = 6 + 18 z + 3 z^2
        assert poly.all_coeffs() == [3, 18, 6]
        assert count_real_roots(poly) == 2

    def test_count_real_roots(self):
        assert count_real_roots(Poly(z**2 + 1, z)) == 0
        assert count_real_roots(Poly(z**3 - z, z)) == 3
        assert count_real_roots(Poly(-z**2 + 2, z)) == 2

    @pytest.mark.parametrize("n", [2, 13])
    def test_rejects_n_outside_range(self, n):
        with pytest.raises(DomainError):
            y_generating_poly_real_rooted(n=n)

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_bernoulli_probabilities_sum_to_mean(self, n):
        probabilities = y_bernoulli_decomposition(n=n, precision=Fraction(1, 10**12))
        assert len(probabilities) == n - 2
        assert all(0 < p.lo <= p.hi <= 1 for p in probabilities)
        mean = expected_empty(n=n)
        assert sum(p.lo for p in probabilities) <= mean <= sum(p.hi for p in probabilities)


class TestFrames:
    def test_pmf_frame(self):
        frame = pmf_frame(s_pmf_exact(n=4))
        assert list(frame.columns) == ["outcome", "numerator", "denominator"]
        assert frame["numerator"].tolist() == ["9", "48", "24"]
        assert set(frame["denominator"]) == {"81"}

    def test_decimal_frame_rounds_in_the_stated_direction(self):
        pmf = s_pmf_exact(n=4)
        down = pmf_decimal_frame(pmf, places=4)
        up = pmf_decimal_frame(pmf, places=4, direction="up")
        assert down["mass"].tolist() == ["0.1111", "0.5925", "0.2962"]
        assert up["mass"].tolist() == ["0.1112", "0.5926", "0.2963"]

    def test_invalid_pmf(self):
        with pytest.raises(DomainError):
            Pmf({0: 1, 1: 1}, 3)

from fractions import Fraction

import pytest

from grouproulette import get_settings
from grouproulette.bounds import (
    WINDOW_FULL,
    BoundsTable,
    bounds_gap,
    exact_p,
    figure_data,
    interval_extrema,
    run_bounds,
    scaled_row,
    truncation_window,
)
from grouproulette.decimals import parse_rational
from grouproulette.errors import DomainError

SCALE = 10**10


@pytest.fixture(scope="module")
def table_30():
    return run_bounds(N=30, scale=SCALE, quiet=True)


class TestRunBounds:
    def test_small_rows(self):
        table = run_bounds(N=3, scale=SCALE, quiet=True)
        assert table.N == 3
        assert table.lower_p[2] == SCALE
        assert table.lower_p[3] == 2500000000
        assert table.upper(3) == Fraction(1, 4)

    def test_single_row(self):
        table = run_bounds(N=2, scale=SCALE, quiet=True)
        assert table.lower_p == [SCALE, 0, SCALE]
        assert table.lower_q == [0, SCALE, 0]

    def test_bracket_exact_values(self, table_30):
        exact = exact_p(n_max=30)
        for n in range(31):
            assert table_30.lower(n) <= exact[n] <= table_30.upper(n)

    def test_full_window_brackets_too(self):
        table = run_bounds(N=20, scale=SCALE, policy=WINDOW_FULL, quiet=True)
        exact = exact_p(n_max=20)
        assert all(table.lower(n) <= exact[n] <= table.upper(n) for n in range(21))

    def test_process_pool_gives_the_same_table(self, table_30):
        pooled = run_bounds(N=30, scale=SCALE, threads=2, quiet=True)
        assert pooled.lower_p == table_30.lower_p
        assert pooled.lower_q == table_30.lower_q

    @pytest.mark.parametrize("N, scale", [(0, SCALE), (5, 0)])
    def test_rejects_bad_arguments(self, N, scale):
        with pytest.raises(DomainError):
            run_bounds(N=N, scale=scale, quiet=True)


class TestExactP:
    def test_small_values(self):
        p = exact_p(n_max=4)
        assert p == [Fraction(1), Fraction(0), Fraction(1), Fraction(1, 4), Fraction(11, 27)]

    def test_matches_enumeration(self, extinction_oracle):
        brute = extinction_oracle(6)
        assert exact_p(n_max=6) == [brute[n] for n in range(7)]

    def test_cap(self):
        with pytest.raises(DomainError):
            exact_p(n_max=61)


class TestWindows:
    def test_full_window(self):
        window = truncation_window(n=10, policy=WINDOW_FULL)
        assert (window.k1, window.k2) == (0, 8)

    def test_narrow_window_around_n_over_e(self):
        # 100/e -+ sqrt(500) = 14.43.., 59.15..
        window = truncation_window(n=100)
        assert (window.k1, window.k2) == (15, 59)
        widened = truncation_window(n=100, margin=3)
        assert (widened.k1, widened.k2) == (12, 62)

    def test_small_n_clamps(self):
        window = truncation_window(n=3)
        assert (window.k1, window.k2) == (0, 1)

    def test_rejects_unknown_policy(self):
        with pytest.raises(DomainError):
            truncation_window(n=10, policy="wide")

    def test_scaled_row_matches_single_entries(self):
        row = scaled_row(n=3, k1=0, k2=1, scale=SCALE)
        assert row == [2500000000, 7500000000]


class TestTableQueries:
    def test_extrema_of_a_single_row(self, table_30):
        assert interval_extrema(table=table_30, a=2, b=2) == (Fraction(1), Fraction(1))

    def test_extrema_out_of_range(self, table_30):
        with pytest.raises(DomainError):
            interval_extrema(table=table_30, a=10, b=31)

    def test_gap(self, table_30):
        gap, n = bounds_gap(table=table_30)
        assert 0 <= gap < Fraction(1, 10**6)
        assert 2 <= n <= 30

    def test_figure_rows(self, table_30):
        frame = figure_data(table=table_30)
        assert list(frame.columns) == ["n", "log_n", "lower", "upper"]
        assert len(frame) == 29
        first, second = frame.iloc[0], frame.iloc[1]
        assert (first["lower"], first["upper"], first["log_n"]) == ("1.0000000000", "1.0000000000", "0.6931471805")
        assert second["lower"] == "0.2500000000"

    def test_truncation(self, table_30):
        short = table_30.truncated(10)
        assert short.N == 10
        assert short.lower_p == table_30.lower_p[:11]
        with pytest.raises(DomainError):
            short.truncated(11)

    def test_inconsistent_rows(self):
        with pytest.raises(DomainError):
            BoundsTable(SCALE, [SCALE, 0, SCALE], [0, SCALE, 1])


@pytest.mark.slow
def test_hill_and_valley_extrema():
    certificate = get_settings()["certificate"]
    table = run_bounds(N=5143, scale=SCALE, threads=8, quiet=True)
    hill_min, _ = interval_extrema(table=table, a=2479, b=3151)
    _, valley_max = interval_extrema(table=table, a=4129, b=5143)
    assert hill_min >= parse_rational(certificate["hill_min_lower"])
    assert valley_max <= parse_rational(certificate["valley_max_upper"])
    gap, _ = bounds_gap(table=table)
    assert gap <= Fraction(600, SCALE)

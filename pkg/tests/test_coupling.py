from fractions import Fraction
from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from grouproulette.coupling import (
    U_BITS,
    CouplingRealization,
    RoundOutcome,
    interval_confinement_holds,
    map_trials,
    pathwise_violations,
    set_digest,
    simulate_round,
    simulate_round_sweep,
    trial_chunks,
    zigzag,
)
from grouproulette.coupling.experiments import (
    binomial_interval,
    clopper_pearson_lower,
    clopper_pearson_upper,
    collision_experiment,
    empirical_pmf,
    round_pmfs,
    round_sweep_experiment,
    total_variation,
)
from grouproulette.coupling.multiround import (
    MultiRoundPlan,
    extinction_frequency,
    simulate_multiround,
    trajectory_frame,
)
from grouproulette.distribution import Pmf, s_pmf_exact, y_pmf, z_pmf
from grouproulette.errors import DomainError

seeds = st.integers(min_value=0, max_value=2**32)
trials = st.integers(min_value=0, max_value=10**6)


class TestRealization:
    def test_uniforms_lie_on_the_grid(self):
        realization = CouplingRealization(seed=1, block_size=16)
        values = [realization.u(j) for j in range(1, 100)]
        assert all(1 <= m <= 1 << U_BITS for m in values)

    def test_access_order_does_not_matter(self):
        forward = CouplingRealization(seed=5, trial=2, block_size=8)
        backward = CouplingRealization(seed=5, trial=2, block_size=8)
        late = backward.u(50)
        assert [forward.u(j) for j in range(1, 51)][-1] == late
        assert backward.u(3) == forward.u(3)

    def test_copies_and_trials_are_distinct_streams(self):
        base = [CouplingRealization(seed=0).u(j) for j in range(1, 6)]
        other_copy = [CouplingRealization(seed=0, copy=-1).u(j) for j in range(1, 6)]
        other_trial = [CouplingRealization(seed=0, trial=1).u(j) for j in range(1, 6)]
        assert base != other_copy
        assert base != other_trial

    def test_uniforms_start_at_one(self):
        with pytest.raises(DomainError):
            CouplingRealization(seed=0).u(0)

    def test_victim_is_another_member_and_memoized(self):
        realization = CouplingRealization(seed=3)
        members = [1, 2, 4, 7]
        digest = set_digest(members)
        chosen = realization.victim(members, digest, 2)
        assert chosen in members and chosen != 2
        assert realization.victim(members, digest, 2) == chosen
        assert realization.victim(members, digest, 9) in members

    def test_no_victim_when_alone(self):
        with pytest.raises(DomainError):
            CouplingRealization(seed=0).victim([4], set_digest([4]), 4)

    @given(elements=st.sets(st.integers(min_value=1, max_value=10**6), max_size=30))
    def test_digest_ignores_order(self, elements):
        ordered = sorted(elements)
        assert set_digest(ordered) == set_digest(reversed(ordered))

    def test_prefix_digest(self):
        realization = CouplingRealization(seed=0)
        assert realization.prefix_digest(12) == set_digest(range(1, 13))
        assert realization.prefix_digest(0) == 0

    def test_zigzag(self):
        assert [zigzag(v) for v in (0, -1, 1, -2, 2)] == [0, 1, 2, 3, 4]


class TestSingleRound:
    @given(seed=seeds, trial=trials)
    def test_two_people(self, seed, trial):
        outcome = simulate_round(CouplingRealization(seed=seed, trial=trial), n=2)
        assert (outcome.s, outcome.y, outcome.z) == (0, 0, 1)

    @given(seed=seeds, trial=trials, n=st.integers(min_value=2, max_value=60))
    def test_sandwich(self, seed, trial, n):
        outcome = simulate_round(CouplingRealization(seed=seed, trial=trial), n=n, trace=True)
        assert outcome.y <= outcome.s <= outcome.z <= outcome.y + 1
        assert not pathwise_violations([outcome])
        assert len(outcome.s_path) == n + 1

    @given(seed=seeds, trial=trials)
    def test_sweep_has_no_violations(self, seed, trial):
        outcomes = simulate_round_sweep(CouplingRealization(seed=seed, trial=trial), n_min=2, n_max=40, trace=True)
        assert not pathwise_violations(outcomes)

    @given(seed=seeds, trial=trials)
    def test_confinement(self, seed, trial):
        outcomes = simulate_round_sweep(CouplingRealization(seed=seed, trial=trial), n_min=20, n_max=30)
        assert interval_confinement_holds(outcomes, a=20, b=30, alpha=5, beta=12)

    def test_traced_sets_shrink(self):
        outcome = simulate_round(CouplingRealization(seed=9), n=6, trace_sets=True)
        sizes = [len(members) for members in outcome.sets]
        assert sizes[0] == 6 and sizes[-1] == outcome.s
        assert all(a - b in (0, 1) for a, b in zip(sizes, sizes[1:]))

    def test_deterministic(self):
        first = simulate_round(CouplingRealization(seed=11, trial=4), n=50, trace=True)
        second = simulate_round(CouplingRealization(seed=11, trial=4), n=50, trace=True)
        assert first == second

    def test_rejects_small_n(self):
        with pytest.raises(DomainError):
            simulate_round(CouplingRealization(seed=0), n=1)

    def test_violations_are_counted(self):
        broken = RoundOutcome(n=5, s=3, y=1, z=2)
        assert pathwise_violations([broken])["s<=z"] == 1


class TestMultiRound:
    def test_absorbing_starts(self):
        plan = MultiRoundPlan(seed=0)
        assert simulate_multiround(plan, start=0) == [0]
        assert simulate_multiround(plan, start=1) == [1]

    @given(seed=seeds, trial=trials, start=st.integers(min_value=2, max_value=40))
    def test_ends_absorbed(self, seed, trial, start):
        trajectory = simulate_multiround(MultiRoundPlan(seed=seed, trial=trial), start=start)
        assert trajectory[0] == start
        assert trajectory[-1] in (0, 1)
        assert all(b < a for a, b in zip(trajectory, trajectory[1:]))

    @given(seed=seeds, trial=trials, m=st.integers(min_value=2, max_value=30), n=st.integers(min_value=2, max_value=30))
    def test_shared_copies_merge_for_good(self, seed, trial, m, n):
        plan = MultiRoundPlan(seed=seed, trial=trial)
        first = simulate_multiround(plan, start=m)
        second = simulate_multiround(plan, start=n)
        for i in range(min(len(first), len(second))):
            if first[i] == second[i]:
                assert first[i:] == second[i:]
                break

    def test_copy_overrides(self):
        plan = MultiRoundPlan(seed=2, copy_overrides={10: 3})
        assert plan.copy_index_of_start(10) == 3
        assert plan.copy_index_of_start(11) == 0
        assert plan.copy(-2) is plan.copy(-2)

    def test_round_cap(self):
        assert simulate_multiround(MultiRoundPlan(seed=0), start=50, max_rounds=0) == [50]

    def test_trajectory_frame(self):
        frame = trajectory_frame([5, 2, 0])
        assert frame.to_dict("list") == {"round": [0, 1, 2], "value": [5, 2, 0]}

    def test_extinction_frequency_brackets_p3(self):
        estimate = extinction_frequency(start=3, trials=4000, seed=1, quiet=True)
        assert estimate.extinct + estimate.survivor + estimate.unfinished == 4000
        assert estimate.unfinished == 0
        assert estimate.consistent_with(Fraction(1, 4), Fraction(1, 4))


class TestExperiments:
    def test_empirical_pmf_and_distance(self):
        empirical = empirical_pmf([0, 1, 1, 1])
        assert empirical == Pmf({0: 1, 1: 3}, 4)
        assert total_variation(empirical, s_pmf_exact(n=3)) == 0
        assert total_variation(Pmf({0: 1}, 1), Pmf({1: 1}, 1)) == 1

    def test_empirical_pmf_needs_data(self):
        with pytest.raises(DomainError):
            empirical_pmf([])

    def test_round_pmfs_close_to_exact(self):
        pmfs = round_pmfs(n=3, trials=20000, seed=4, quiet=True)
        assert total_variation(pmfs["s"], s_pmf_exact(n=3)) < Fraction(2, 100)
        assert pmfs["z"].total() == 1

    def test_round_pmfs_independent_of_workers(self):
        single = round_pmfs(n=6, trials=300, seed=8, quiet=True)
        pooled = round_pmfs(n=6, trials=300, seed=8, threads=2, quiet=True)
        assert single == pooled

    def test_sweep_report(self):
        report = round_sweep_experiment(n_min=2, n_max=25, realizations=30, seed=2, quiet=True)
        assert report.total_violations == 0
        assert "violations=0" in report.as_text()

    def test_collision_with_itself(self):
        report = collision_experiment(a=12, b=12, trials=50, quiet=True)
        assert report.frequency == 1
        assert report.verdict

    @pytest.mark.parametrize("a, b", [(1, 1), (10, 9), (4, 6)])
    def test_collision_rejects_bad_pairs(self, a, b):
        with pytest.raises(DomainError):
            collision_experiment(a=a, b=b, trials=10, quiet=True)

    def test_trial_chunks_cover_range(self):
        chunks = trial_chunks(1003, 4)
        assert chunks[0][0] == 0 and chunks[-1][1] == 1003
        assert all(a[1] == b[0] for a, b in zip(chunks, chunks[1:]))

    def test_map_trials_keeps_order(self):
        assert map_trials(abs, [-3, 2, -1], threads=1) == [3, 2, 1]

    def test_round_pmfs_match_occupancy_laws(self):
        for n, seed in [(4, 12), (7, 13), (10, 14)]:
            pmfs = round_pmfs(n=n, trials=20000, seed=seed, quiet=True)
            assert total_variation(pmfs["y"], y_pmf(n=n)) < Fraction(2, 100)
            assert total_variation(pmfs["z"], z_pmf(n=n)) < Fraction(2, 100)
            assert total_variation(pmfs["s"], s_pmf_exact(n=n)) < Fraction(2, 100)


def binomial_at_least(k: int, trials: int, p: Fraction) -> Fraction:
    return sum((comb(trials, i) * p**i * (1 - p) ** (trials - i) for i in range(k, trials + 1)), Fraction(0))


def binomial_at_most(k: int, trials: int, p: Fraction) -> Fraction:
    return sum((comb(trials, i) * p**i * (1 - p) ** (trials - i) for i in range(k + 1)), Fraction(0))


class TestBinomialInterval:
    STEP = Fraction(1, 1024)
    ALPHA = Fraction(1, 10)

    @pytest.mark.parametrize("trials", [1, 2, 5, 12])
    def test_ends_match_tail_sums(self, trials):
        half = self.ALPHA / 2
        for successes in range(trials + 1):
            interval = binomial_interval(successes=successes, trials=trials, alpha=self.ALPHA, precision=self.STEP)
            assert (interval.lo / self.STEP).denominator == 1
            assert (interval.hi / self.STEP).denominator == 1
            if successes == 0:
                assert interval.lo == 0
            else:
                # the grid point just below the exact end
                assert binomial_at_least(successes, trials, interval.lo) <= half
                assert binomial_at_least(successes, trials, interval.lo + self.STEP) > half
            if successes == trials:
                assert interval.hi == 1
            else:
                assert binomial_at_most(successes, trials, interval.hi) <= half
                assert binomial_at_most(successes, trials, interval.hi - self.STEP) > half
            assert interval.contains(interval.frequency)

    def test_no_successes_in_ten(self):
        # 1 - 0.025^(1/10) = 0.30849...
        upper = clopper_pearson_upper(successes=0, trials=10, alpha=Fraction(1, 20))
        assert Fraction(3084, 10**4) < upper < Fraction(3086, 10**4)

    @given(trials=st.integers(min_value=1, max_value=60), data=st.data())
    def test_ends_mirror(self, trials, data):
        successes = data.draw(st.integers(min_value=0, max_value=trials))
        lower = clopper_pearson_lower(successes=successes, trials=trials, precision=self.STEP)
        upper = clopper_pearson_upper(successes=trials - successes, trials=trials, precision=self.STEP)
        assert lower == 1 - upper

    def test_large_sample_radius(self):
        # 91 hits in 10^5 trials, about e^-7
        interval = binomial_interval(successes=91, trials=10**5)
        assert interval.lo < Fraction(91, 10**5) < interval.hi
        assert Fraction(25, 10**5) < interval.radius < Fraction(45, 10**5)

    @pytest.mark.parametrize("successes, trials, alpha", [(3, 2, Fraction(1, 10)), (0, 0, Fraction(1, 10)),
                                                          (1, 4, 0), (1, 4, 1)])
    def test_invalid_arguments(self, successes, trials, alpha):
        with pytest.raises(DomainError):
            binomial_interval(successes=successes, trials=trials, alpha=alpha)


@pytest.mark.slow
def test_sweep_acceptance():
    report = round_sweep_experiment(n_min=2, n_max=200, realizations=10**4, seed=0, threads=8, quiet=True)
    assert report.total_violations == 0


@pytest.mark.slow
def test_survivor_distribution_acceptance():
    pmfs = round_pmfs(n=10, trials=10**6, seed=0, threads=8, quiet=True)
    assert total_variation(pmfs["s"], s_pmf_exact(n=10)) <= Fraction(5, 1000)


@pytest.mark.slow
@pytest.mark.parametrize("a, b", [(40, 41), (100, 101)])
def test_collision_acceptance(a, b):
    assert collision_experiment(a=a, b=b, trials=10**5, seed=0, threads=8, quiet=True).verdict

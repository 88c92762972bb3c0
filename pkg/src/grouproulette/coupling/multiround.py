import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import pandas as pd
from tqdm import tqdm

from grouproulette.coupling import DEFAULT_BLOCK, CouplingRealization, map_trials, simulate_round, trial_chunks
from grouproulette.coupling.experiments import BinomialInterval, binomial_interval
from grouproulette.errors import DomainError

# Set up logging
logger = logging.getLogger("grouproulette.coupling.multiround")

# Capture warnings and redirect them to the logging system
logging.captureWarnings(True)

ABSORBING = (0, 1)


@dataclass
class MultiRoundPlan:
    """Copies of the coupling indexed by the integers, and the first copy k_n used from each start

    Round i+1 of the process started at n uses copy k_n - i, so two starts with the same
    k_n share every round, and a start with k_m = k_n + l runs l independent rounds first.

    Args:
        seed (int): base seed of every copy
        trial (int): independent repetition index
        default_copy (int): k_n for starts without an override
        copy_overrides (Dict[int, int]): k_n for specific starts
    """

    seed: int
    trial: int = 0
    default_copy: int = 0
    copy_overrides: Dict[int, int] = field(default_factory=dict)
    block_size: int = DEFAULT_BLOCK
    _copies: Dict[int, CouplingRealization] = field(default_factory=dict, init=False, repr=False)

    def copy_index_of_start(self, n: int) -> int:
        return self.copy_overrides.get(n, self.default_copy)

    def copy(self, index: int) -> CouplingRealization:
        realization = self._copies.get(index)
        if realization is None:
            realization = CouplingRealization(seed=self.seed, copy=index, trial=self.trial, block_size=self.block_size)
            self._copies[index] = realization
        return realization


def simulate_multiround(plan: MultiRoundPlan, *, start: int, max_rounds: int = 1000) -> List[int]:
    """Trajectory X_0 = start, X_{i+1} = S^{(k - i)}_{X_i} until absorption in 0 or 1

    Args:
        plan (MultiRoundPlan): the copies and k_n
        start (int): number of people, >= 0
        max_rounds (int): hard cap on the number of rounds

    Raises:
        DomainError: start < 0 or max_rounds < 0

    Returns:
        List[int]: X_0, X_1, ..., ending at the first absorbing value or after max_rounds rounds
    """
    if start < 0:
        raise DomainError(f"start must be nonnegative, got {start}")
    if max_rounds < 0:
        raise DomainError(f"max_rounds must be nonnegative, got {max_rounds}")
    first_copy = plan.copy_index_of_start(start)
    trajectory = [start]
    for i in range(max_rounds):
        if trajectory[-1] in ABSORBING:
            break
        trajectory.append(simulate_round(plan.copy(first_copy - i), n=trajectory[-1]).s)
    return trajectory


def trajectory_frame(trajectory: List[int]) -> pd.DataFrame:
    return pd.DataFrame({"round": range(len(trajectory)), "value": trajectory})


@dataclass(frozen=True)
class ExtinctionEstimate:
    """Monte Carlo estimate of p_n, the probability that nobody survives"""

    start: int
    trials: int
    extinct: int
    survivor: int
    unfinished: int
    confidence: BinomialInterval
    # interval with every unfinished run counted as extinct
    pessimistic: BinomialInterval

    @property
    def frequency(self) -> Fraction:
        return Fraction(self.extinct, self.trials)

    def consistent_with(self, lower: Fraction, upper: Fraction) -> bool:
        """True when [lower, upper] meets the confidence interval, counting unfinished runs either way"""
        return self.confidence.lo <= upper and lower <= self.pessimistic.hi


def _extinction_worker(job: Tuple[int, int, int, int, int, int]) -> Tuple[int, int, int]:
    seed, start, lo, hi, max_rounds, block_size = job
    extinct = survivor = unfinished = 0
    for trial in range(lo, hi):
        plan = MultiRoundPlan(seed=seed, trial=trial, block_size=block_size)
        final = simulate_multiround(plan, start=start, max_rounds=max_rounds)[-1]
        if final == 0:
            extinct += 1
        elif final == 1:
            survivor += 1
        else:
            unfinished += 1
    return extinct, survivor, unfinished


def extinction_frequency(*, start: int, trials: int, seed: int = 0, max_rounds: int = 1000, threads: int = 1,
                         alpha: Fraction = Fraction(1, 1000), block_size: Optional[int] = None,
                         quiet: bool = False) -> ExtinctionEstimate:
    """Fraction of independent multi-round runs from start that end with nobody alive

    Raises:
        DomainError: start < 0 or trials < 1
    """
    if start < 0 or trials < 1:
        logger.warning(f"Invalid extinction experiment: start={start}, trials={trials}")
        raise DomainError(f"Need start >= 0 and trials >= 1, got start={start}, trials={trials}")
    block_size = block_size or min(DEFAULT_BLOCK, max(1, start))
    jobs = [(seed, start, lo, hi, max_rounds, block_size) for lo, hi in trial_chunks(trials, threads)]
    results = map_trials(_extinction_worker, jobs, threads=threads)
    extinct = survivor = unfinished = 0
    for e, s, u in tqdm(results, desc="Extinction", disable=quiet):
        extinct += e
        survivor += s
        unfinished += u
    if unfinished:
        logger.warning(f"{unfinished} of {trials} runs from n={start} were not absorbed within {max_rounds} rounds")
    confidence = binomial_interval(successes=extinct, trials=trials, alpha=alpha)
    pessimistic = confidence if not unfinished else binomial_interval(successes=extinct + unfinished, trials=trials,
                                                                      alpha=alpha)
    return ExtinctionEstimate(start, trials, extinct, survivor, unfinished, confidence, pessimistic)

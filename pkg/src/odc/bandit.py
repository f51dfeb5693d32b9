"""Budget-dynamic multi-armed bandit: cost-normalised UCB and knapsack selection.

A node owns four arms. Three of them (sample, receive, transmit) return VoI
rewards; the fourth (store) banks harvested energy and returns nothing. Each
slot the reward arms are packed into the energy budget by the
density-ordered greedy rule and one arm is drawn from the resulting
selection.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np


class ArmId(enum.IntEnum):
    """Arm identifiers; the integer order is the tie-break order."""

    SAMPLE = 0
    RECEIVE = 1
    TRANSMIT = 2
    STORE = 3

    @property
    def label(self) -> str:
        return self.name.lower()


REWARD_ARMS = (ArmId.SAMPLE, ArmId.RECEIVE, ArmId.TRANSMIT)

DEFAULT_E_PRIME = 2.0
INITIAL_REWARD_BOUND = 1.0


@dataclass
class ArmStats:
    cost: float
    pull_count: int = 0
    cumulative_reward: float = 0.0
    reward_upper_bound: float = INITIAL_REWARD_BOUND

    def __post_init__(self):
        if self.cost <= 0:
            raise ValueError("arm cost must be positive")


@dataclass
class BanditState:
    """Per-node statistics for the three reward arms plus the total pull count.

    ``total_pulls`` counts every action the node takes, store included.
    """

    arms: dict[ArmId, ArmStats]
    exploration_constant: float = DEFAULT_E_PRIME
    total_pulls: int = 0
    store_pulls: int = 0

    def __post_init__(self):
        if self.exploration_constant < 1.0:
            raise ValueError("exploration constant e' must be >= 1")
        missing = set(REWARD_ARMS) - set(self.arms)
        if missing:
            raise ValueError(f"missing arm statistics for {sorted(missing)}")

    @classmethod
    def from_costs(cls, costs, exploration_constant: float = DEFAULT_E_PRIME) -> "BanditState":
        """Build a fresh state from ``costs`` indexed by sample, receive, transmit."""
        arms = {arm: ArmStats(float(costs[int(arm)])) for arm in REWARD_ARMS}
        return cls(arms, exploration_constant)

    @property
    def best_estimate(self) -> float:
        """Largest reward-per-cost estimate among pulled arms (0 before any pull)."""
        pulled = [estimate_reward_per_cost(s) for s in self.arms.values() if s.pull_count]
        return max(pulled, default=0.0)

    def pull_counts(self) -> dict[ArmId, int]:
        counts = {arm: s.pull_count for arm, s in self.arms.items()}
        counts[ArmId.STORE] = self.store_pulls
        return counts


def estimate_reward_per_cost(stats: ArmStats) -> float:
    """Average reward per unit energy of an arm."""
    if stats.pull_count < 1:
        raise ValueError("arm has not been pulled; route it through the initial phase")
    return stats.cumulative_reward / (stats.cost * stats.pull_count)


def padding(stats: ArmStats, total_pulls: int, e_j: float) -> float:
    """Exploration bonus ``B_j * sqrt(e_j ln N / n_j)``."""
    if stats.pull_count < 1:
        raise ValueError("padding needs at least one pull")
    if total_pulls < 1:
        raise ValueError("total_pulls must be >= 1")
    return stats.reward_upper_bound * math.sqrt(e_j * math.log(total_pulls) / stats.pull_count)


def ucb_index(stats: ArmStats, total_pulls: int, e_prime: float) -> float:
    """Upper-confidence VoI per unit cost; ``inf`` for an unpulled arm."""
    if stats.pull_count == 0:
        return math.inf
    e_j = e_prime / stats.cost ** 2
    return estimate_reward_per_cost(stats) + padding(stats, total_pulls, e_j)


def density_ordered_knapsack(indices, costs, budget: float) -> tuple[int, ...]:
    """Greedy 0/1 knapsack over arms whose values are already per-unit-cost.

    Arms are visited by index descending (stable, so lower position wins a
    tie) and taken whenever they still fit. Arms with a NaN or ``-inf``
    index are treated as unavailable.
    """
    if len(indices) != len(costs):
        raise ValueError("indices and costs must have equal length")
    if any(c <= 0 for c in costs):
        raise ValueError("costs must be positive")
    x = [0] * len(indices)
    usable = [j for j, v in enumerate(indices) if not math.isnan(v) and v != -math.inf]
    order = sorted(usable, key=lambda j: -indices[j])
    remaining = float(budget)
    for j in order:
        if costs[j] <= remaining:
            x[j] = 1
            remaining -= costs[j]
    return tuple(x)


def knapsack_value(x, indices) -> float:
    return float(sum(v for xj, v in zip(x, indices) if xj))


def brute_force_knapsack(indices, costs, budget: float) -> tuple[tuple[int, ...], float]:
    """Exhaustive optimum over all 0/1 selections (small K only)."""
    best, best_x = -math.inf, None
    for x in itertools.product((0, 1), repeat=len(indices)):
        if sum(c for xj, c in zip(x, costs) if xj) <= budget:
            value = knapsack_value(x, indices)
            if value > best:
                best, best_x = value, x
    return best_x, best


def action_probabilities(selection) -> dict[ArmId, float]:
    """Draw probabilities for the reward arms given a knapsack selection.

    Transmit carries twice the weight of sample and receive; weights are
    normalised to a proper distribution. An all-zero selection returns an
    empty mapping, which callers treat as the store signal.
    """
    x = [int(bool(v)) for v in selection]
    if len(x) != 3:
        raise ValueError("selection must cover the three reward arms")
    total = sum(x)
    if total == 0:
        return {}
    raw = [x[0] / total, x[1] / total, 2 * x[2] / total]
    norm = sum(raw)
    return {arm: w / norm for arm, w in zip(REWARD_ARMS, raw) if w > 0}


def draw_arm(probs: dict[ArmId, float], rng: np.random.Generator) -> ArmId:
    if not probs:
        return ArmId.STORE
    u = rng.random()
    acc = 0.0
    last = None
    for arm in REWARD_ARMS:
        p = probs.get(arm, 0.0)
        if p <= 0:
            continue
        acc += p
        last = arm
        if u < acc:
            return arm
    return last


def record_pull(state: BanditState, arm: ArmId, reward: float = 0.0) -> BanditState:
    """Account one pull of ``arm``. Mutates and returns ``state``."""
    if reward < 0:
        raise ValueError("reward must be non-negative")
    state.total_pulls += 1
    if arm == ArmId.STORE:
        state.store_pulls += 1
        return state
    s = state.arms[arm]
    s.pull_count += 1
    s.cumulative_reward += reward
    s.reward_upper_bound = max(s.reward_upper_bound, reward)
    return state


def pull_count_bound(delta: float, c_max: float, c_min: float, e_prime: float,
                     horizon_prime: float, store_arm: bool = False) -> float:
    """Upper bound on the expected pulls of a suboptimal arm.

    ``(c_max/c_min)^2 e' ln|P'| / delta^2 + 2`` for a reward arm; the store
    variant adds 1 instead of 2 and expects ``delta`` to be the smallest gap.
    """
    if delta <= 0:
        raise ValueError("bound undefined for a non-positive gap")
    if horizon_prime < 1 or e_prime < 1 or c_min <= 0 or c_max < c_min:
        raise ValueError("need |P'| >= 1, e' >= 1 and c_max >= c_min > 0")
    ratio = (c_max / c_min) ** 2
    return ratio * e_prime * math.log(horizon_prime) / delta ** 2 + (1.0 if store_arm else 2.0)


def regret_bound(deltas, c_max: float, c_min: float, e_prime: float,
                 horizon_prime: float, best_mean: float) -> float:
    """Expected-regret envelope for the reward arms plus the store arm.

    ``deltas`` are the gaps of the suboptimal reward arms; the store arm's
    gap is taken as the smallest of them.
    """
    deltas = [float(d) for d in deltas]
    if not deltas or min(deltas) <= 0:
        raise ValueError("need at least one positive gap")
    ratio = (c_max / c_min) ** 2
    log_p = math.log(horizon_prime)
    reward_part = sum(ratio * e_prime * log_p / d + 2 * d for d in deltas)
    store_part = best_mean * pull_count_bound(min(deltas), c_max, c_min, e_prime,
                                              horizon_prime, store_arm=True)
    return reward_part + store_part

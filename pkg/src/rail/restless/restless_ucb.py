"""Explore-then-commit learning with an optimistic instance"""

from __future__ import annotations

import math
from typing import Any, NamedTuple, Sequence

import numpy as np
from ceci.config import StageParameter
from numpy.typing import NDArray

from .belief_mdp import PolicyTable
from .chain_core import (
    Arm,
    BirthDeathChain,
    RestlessInstance,
    shift_toward_lower,
)
from .env import Observation, RestlessEnv
from .exceptions import InsufficientDataError
from .policy import BeliefTrackingPolicy


class EmpiricalStats:
    """Counts gathered while pulling arms

    A visit of arm i to state j is completed when the next step pulls arm i
    again, so that the outgoing transition is seen; only then are the
    transition and the reward of the visit recorded.  With a single state a
    visit completes when it is made.

    Parameters
    ----------
    num_arms:
        Number of arms N

    num_states:
        Number of states M
    """

    def __init__(self, num_arms: int, num_states: int) -> None:
        self.num_arms = num_arms
        self.num_states = num_states
        self.visits = np.zeros((num_arms, num_states), dtype=np.int64)
        self.transitions = np.zeros((num_arms, num_states, num_states), dtype=np.int64)
        self.reward_sum = np.zeros((num_arms, num_states))
        self.reward_count = np.zeros((num_arms, num_states), dtype=np.int64)
        self.last_state = np.full(num_arms, -1, dtype=np.int64)
        self._pending: Observation | None = None

    def _complete(self, arm: int, state: int, next_state: int, reward: float) -> None:
        i = arm - 1
        self.visits[i, state] += 1
        self.transitions[i, state, next_state] += 1
        self.reward_sum[i, state] += reward
        self.reward_count[i, state] += 1

    def record(self, obs: Observation) -> None:
        """Add the outcome of one step"""
        if obs.arm == 0 or obs.observed_state is None:
            self._pending = None
            return
        self.last_state[obs.arm - 1] = obs.observed_state
        if self.num_states == 1:
            self._complete(obs.arm, 0, 0, obs.reward)
            return
        pending = self._pending
        if pending is not None and pending.arm == obs.arm:
            assert pending.observed_state is not None
            self._complete(
                pending.arm, pending.observed_state, obs.observed_state, pending.reward
            )
        self._pending = obs

    def completed(self, arm: int) -> NDArray[np.int64]:
        """Completed visits to every state of ``arm``"""
        return self.visits[arm - 1]


class ExplorationStep(NamedTuple):
    """Next arm of the exploration schedule, and whether the schedule is over"""

    arm: int
    finished: bool


def exploration_schedule(
    stats: EmpiricalStats, current_arm: int, m_target: int
) -> ExplorationStep:
    """Keep pulling ``current_arm`` until each of its states has ``m_target``
    completed visits, then move to the next arm; finished after arm N
    """
    if m_target < 1:
        raise ValueError(f"m_target must be >= 1, got {m_target}")
    arm = current_arm
    while arm <= stats.num_arms and int(stats.completed(arm).min()) >= m_target:
        arm += 1
    if arm > stats.num_arms:
        return ExplorationStep(stats.num_arms, True)
    return ExplorationStep(arm, False)


def empirical_estimates(
    stats: EmpiricalStats,
) -> tuple[list[BirthDeathChain], NDArray[np.float64]]:
    """Empirical chains and mean rewards

    Returns
    -------
    tuple[list[BirthDeathChain], NDArray]
        One chain per arm, with ``P(k, k+1)`` and ``P(k+1, k)`` the observed
        frequencies, and the (N, M) array of mean rewards

    Raises
    ------
    InsufficientDataError
        If some (arm, state) has no completed visit
    """
    for i in range(stats.num_arms):
        for k in range(stats.num_states):
            if stats.visits[i, k] == 0:
                raise InsufficientDataError(i + 1, k)
    chains = []
    for i in range(stats.num_arms):
        counts = stats.transitions[i]
        visits = stats.visits[i]
        up = [counts[k, k + 1] / visits[k] for k in range(stats.num_states - 1)]
        down = [counts[k + 1, k] / visits[k + 1] for k in range(stats.num_states - 1)]
        chains.append(BirthDeathChain(up, down))
    return chains, stats.reward_sum / stats.reward_count


class ConfidenceRadius:
    """Exploration target and confidence radius for a horizon

    Parameters
    ----------
    horizon:
        Number of steps T

    m_exponent:
        The exploration target is ``ceil(T ** m_exponent)``

    m_target:
        Explicit exploration target, overrides ``m_exponent`` when > 0

    log_base:
        Base of the logarithm in the radius, natural by default
    """

    def __init__(
        self,
        horizon: int,
        m_exponent: float = 2.0 / 3.0,
        m_target: int = 0,
        log_base: float = math.e,
    ) -> None:
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.horizon = horizon
        if m_target > 0:
            self.m = int(m_target)
        else:
            self.m = max(1, math.ceil(horizon**m_exponent - 1e-9))
        self.rad = math.sqrt(math.log(horizon, log_base) / (2.0 * self.m))

    def __repr__(self) -> str:
        return f"ConfidenceRadius(T={self.horizon}, m={self.m}, rad={self.rad:.6g})"


def build_optimistic_instance(
    chains: Sequence[BirthDeathChain],
    rewards: NDArray[np.float64],
    rad: float,
    initial_states: Sequence[int],
) -> RestlessInstance:
    """Shift every row of the estimates ``rad`` toward the better states
    and raise every reward by ``rad``, capped at 1
    """
    if rad < 0.0:
        raise ValueError(f"rad must be >= 0, got {rad}")
    arms = [
        Arm(shift_toward_lower(chain_, rad), np.minimum(np.asarray(rewards[i]) + rad, 1.0))
        for i, chain_ in enumerate(chains)
    ]
    return RestlessInstance(arms, initial_states)


def estimates_within(
    instance: RestlessInstance,
    chains: Sequence[BirthDeathChain],
    rewards: NDArray[np.float64],
    rad: float,
) -> bool:
    """True if every estimated transition and reward is within ``rad`` of the truth"""
    for i, arm_ in enumerate(instance.arms):
        if np.max(np.abs(chains[i].matrix - arm_.chain.matrix)) > rad:
            return False
        if np.max(np.abs(np.asarray(rewards[i]) - arm_.rewards)) > rad:
            return False
    return True


def run_exploration(
    instance: RestlessInstance, m_target: int, seed: int, max_steps: int
) -> tuple[EmpiricalStats, int]:
    """Play the exploration schedule alone on ``instance``

    Returns
    -------
    tuple[EmpiricalStats, int]
        The counts, and the number of steps taken, which is ``max_steps`` if
        the schedule did not finish
    """
    env = RestlessEnv(instance, seed)
    stats = EmpiricalStats(instance.num_arms, instance.num_states)
    arm = 1
    for t in range(max_steps):
        step = exploration_schedule(stats, arm, m_target)
        if step.finished:
            return stats, t
        arm = step.arm
        stats.record(env.step(arm))
    return stats, max_steps


class RestlessUCBPolicy(BeliefTrackingPolicy):
    """Explore each arm in turn, then commit to the oracle of an optimistic instance

    Arm i is pulled until every state of arm i has ``m`` completed visits.
    The estimates are then shifted by the confidence radius toward the
    better states, the resulting instance is solved with the configured
    oracle, and its policy is played at the tracked belief for the rest of
    the game.  The tracked belief at commit time comes from the actual
    observation history.
    """

    config_options: dict[str, StageParameter] = BeliefTrackingPolicy.config_options.copy()
    config_options.update(
        m_exponent=StageParameter(
            float, 2.0 / 3.0, fmt="%.4f", msg="Exploration target is ceil(T**m_exponent)"
        ),
        m_target=StageParameter(
            int, 0, fmt="%i", msg="Explicit exploration target, 0 to use m_exponent"
        ),
        log_base=StageParameter(
            float, math.e, fmt="%.6f", msg="Base of the logarithm in the radius"
        ),
    )

    def __init__(self, **kwargs: Any):
        BeliefTrackingPolicy.__init__(self, **kwargs)
        self._stats = EmpiricalStats(0, 0)
        self._radius: ConfidenceRadius | None = None
        self._current_arm = 1
        self._exploring = True
        self._exploration_length = 0
        self._optimistic: RestlessInstance | None = None

    @property
    def stats(self) -> EmpiricalStats:
        return self._stats

    @property
    def exploring(self) -> bool:
        return self._exploring

    @property
    def exploration_length(self) -> int:
        """Steps spent exploring, the horizon if exploration never finished"""
        return self._exploration_length

    @property
    def optimistic_instance(self) -> RestlessInstance | None:
        return self._optimistic

    @property
    def radius(self) -> ConfidenceRadius | None:
        return self._radius

    def _reset(self) -> None:
        BeliefTrackingPolicy._reset(self)
        self._stats = EmpiricalStats(self._num_arms, self._num_states)
        self._radius = ConfidenceRadius(
            self._horizon,
            m_exponent=self.config.m_exponent,
            m_target=self.config.m_target,
            log_base=self.config.log_base,
        )
        self._current_arm = 1
        self._exploring = True
        self._exploration_length = 0
        self._optimistic = None

    def choose(self, t: int) -> int:
        if self._exploring:
            return self._current_arm
        return BeliefTrackingPolicy.choose(self, t)

    def _observe(self, obs: Observation) -> None:
        BeliefTrackingPolicy._observe(self, obs)
        if not self._exploring:
            return
        self._stats.record(obs)
        assert self._radius is not None
        step = exploration_schedule(self._stats, self._current_arm, self._radius.m)
        self._current_arm = step.arm
        if step.finished:
            self._commit()
        elif self._t + 1 == self._horizon:
            self._exploration_length = self._horizon
            print(
                f"{self.config.name}: exploration ran out of horizon at T={self._horizon} "
                f"with m={self._radius.m}"
            )

    def _commit(self) -> None:
        assert self._radius is not None
        self._exploring = False
        self._exploration_length = self._t + 1
        chains, rewards = empirical_estimates(self._stats)
        self._optimistic = build_optimistic_instance(
            chains, rewards, self._radius.rad, self._stats.last_state.tolist()
        )
        self.use_oracle(self.solve(self._optimistic))

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = dict(exploration_length=int(self._exploration_length))
        if self._radius is not None:
            out.update(m=self._radius.m, rad=float(self._radius.rad))
        if isinstance(self._oracle, PolicyTable):
            out.update(optimistic_gain=float(self._oracle.gain))
        return out

"""The online game: hidden chains, one observed arm per step"""

from __future__ import annotations

import enum
from typing import NamedTuple, Sequence

import numpy as np

from .chain_core import RestlessInstance, validate_assumptions
from .exceptions import InvalidActionError, InvalidInstanceError
from . import arrow_utils

# uniforms drawn per refill of a chain's buffer
BLOCK_SIZE = 4096


class RewardMode(enum.Enum):
    """How rewards are drawn given the state of the pulled arm"""

    bernoulli = 0
    deterministic = 1


class Observation(NamedTuple):
    """What the player sees after pulling ``arm``

    ``observed_state`` is None iff ``arm`` is 0, in which case ``reward`` is 0
    """

    arm: int
    observed_state: int | None
    reward: float


class TrajectoryLog:
    """Per-step record of (t, action, observed state or -1, reward)"""

    def __init__(self) -> None:
        self.t: list[int] = []
        self.action: list[int] = []
        self.observed_state: list[int] = []
        self.reward: list[float] = []

    def __len__(self) -> int:
        return len(self.t)

    def append(self, t: int, obs: Observation) -> None:
        self.t.append(t)
        self.action.append(obs.arm)
        self.observed_state.append(-1 if obs.observed_state is None else obs.observed_state)
        self.reward.append(obs.reward)

    def write_csv(self, path: str) -> None:
        """Write the log as a csv file"""
        arrow_utils.write_csv_table(
            dict(
                t=self.t,
                action=self.action,
                observed_state=self.observed_state,
                reward=self.reward,
            ),
            path,
        )


class RestlessEnv:
    """State of one run of the game

    Parameters
    ----------
    instance:
        The problem being played

    seed:
        Root seed, split into one stream per chain plus one for rewards

    reward_mode:
        Bernoulli rewards, or the mean reward itself for debugging

    require_assumptions:
        If True, refuse instances failing A1-A4 with ``c1``

    c1:
        Lower bound used for the A4 check

    log:
        If True, keep a :py:class:`TrajectoryLog`

    Notes
    -----
    The reward and the observed state reflect the hidden state at pull time,
    then every chain makes one transition, pulled or not.
    """

    def __init__(
        self,
        instance: RestlessInstance,
        seed: int,
        reward_mode: RewardMode = RewardMode.bernoulli,
        require_assumptions: bool = True,
        c1: float = 1e-9,
        log: bool = False,
    ) -> None:
        if require_assumptions:
            report = validate_assumptions(instance, c1)
            if not report.passed:
                raise InvalidInstanceError(
                    f"Instance fails modelling assumptions: {report.to_dict()}"
                )
        self._instance = instance
        self._seed = seed
        self._reward_mode = reward_mode
        num_arms = instance.num_arms
        streams = np.random.SeedSequence(seed).spawn(num_arms + 1)
        self._chain_rngs = [np.random.default_rng(stream_) for stream_ in streams[:-1]]
        self._reward_rng = np.random.default_rng(streams[-1])
        self._p_down: list[list[float]] = []
        self._p_move: list[list[float]] = []
        for arm_ in instance.arms:
            matrix = arm_.chain.matrix
            size = arm_.num_states
            p_down = [matrix[k, k - 1] if k > 0 else 0.0 for k in range(size)]
            p_up = [matrix[k, k + 1] if k < size - 1 else 0.0 for k in range(size)]
            self._p_down.append(p_down)
            self._p_move.append([d_ + u_ for d_, u_ in zip(p_down, p_up)])
        self._rewards = [arm_.rewards.tolist() for arm_ in instance.arms]
        self._buffers: list[list[float]] = [[] for _ in range(num_arms)]
        self._positions = [0] * num_arms
        self._reward_buffer: list[float] = []
        self._reward_position = 0
        self._hidden = list(instance.initial_states)
        self._t = 0
        self._log = TrajectoryLog() if log else None

    @property
    def instance(self) -> RestlessInstance:
        return self._instance

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def t(self) -> int:
        """Number of steps played"""
        return self._t

    @property
    def hidden_states(self) -> tuple[int, ...]:
        """Current hidden state of every arm"""
        return tuple(self._hidden)

    @property
    def log(self) -> TrajectoryLog | None:
        return self._log

    def _uniform(self, arm_index: int) -> float:
        position = self._positions[arm_index]
        buffer = self._buffers[arm_index]
        if position >= len(buffer):
            buffer = self._chain_rngs[arm_index].random(BLOCK_SIZE).tolist()
            self._buffers[arm_index] = buffer
            position = 0
        self._positions[arm_index] = position + 1
        return buffer[position]

    def _reward_uniform(self) -> float:
        if self._reward_position >= len(self._reward_buffer):
            self._reward_buffer = self._reward_rng.random(BLOCK_SIZE).tolist()
            self._reward_position = 0
        value = self._reward_buffer[self._reward_position]
        self._reward_position += 1
        return value

    def step(self, action: int) -> Observation:
        """Pull ``action`` (0 is the default arm) and advance every chain"""
        if not 0 <= action <= len(self._hidden):
            raise InvalidActionError(f"Action {action} not in [0, {len(self._hidden)}]")
        if action == 0:
            obs = Observation(0, None, 0.0)
        else:
            state = self._hidden[action - 1]
            mean = self._rewards[action - 1][state]
            if self._reward_mode == RewardMode.deterministic:
                reward = mean
            else:
                reward = 1.0 if self._reward_uniform() < mean else 0.0
            obs = Observation(action, state, reward)

        for i, state in enumerate(self._hidden):
            u = self._uniform(i)
            if u < self._p_down[i][state]:
                self._hidden[i] = state - 1
            elif u < self._p_move[i][state]:
                self._hidden[i] = state + 1

        if self._log is not None:
            self._log.append(self._t, obs)
        self._t += 1
        return obs


def reset(
    instance: RestlessInstance,
    seed: int,
    reward_mode: RewardMode = RewardMode.bernoulli,
    require_assumptions: bool = True,
    log: bool = False,
) -> RestlessEnv:
    """Start a new game on ``instance`` with streams derived from ``seed``"""
    return RestlessEnv(
        instance, seed, reward_mode, require_assumptions=require_assumptions, log=log
    )


def step(env: RestlessEnv, action: int) -> Observation:
    """Play one step of ``env``"""
    return env.step(action)


def replay(
    instance: RestlessInstance,
    actions: Sequence[int],
    seed: int,
    reward_mode: RewardMode = RewardMode.bernoulli,
) -> list[Observation]:
    """Replay a logged action sequence, returning the observations"""
    env = RestlessEnv(instance, seed, reward_mode)
    return [env.step(int(action_)) for action_ in actions]

"""Thompson Sampling over a finite set of candidate chains"""

from __future__ import annotations

from typing import Any

import numpy as np
from ceci.config import StageParameter
from numpy.typing import NDArray

from .belief_mdp import BeliefPolicy
from .chain_core import Arm, BirthDeathChain, RestlessInstance
from .env import Observation
from .exceptions import EmptyGridError
from .policy import BeliefTrackingPolicy

NINE_POINT_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

FOUR_POINT_GRID = [0.2, 0.4, 0.6, 0.8]

DEFAULT_REWARD_GRID = [round(0.05 * (i + 1), 2) for i in range(19)]


def grid_chains(grid: list[float]) -> list[BirthDeathChain]:
    """Two-state candidate chains for every (P(0, 0), P(1, 1)) pair of ``grid``"""
    if not grid:
        raise EmptyGridError("Thompson Sampling grid is empty")
    return [BirthDeathChain([1.0 - p00_], [1.0 - p11_]) for p00_ in grid for p11_ in grid]


def _log_matrices(chains: list[BirthDeathChain]) -> NDArray[np.float64]:
    with np.errstate(divide="ignore"):
        return np.log(np.array([chain_.matrix for chain_ in chains]))


def _normalized(log_weights: NDArray[np.float64]) -> NDArray[np.float64]:
    top = np.max(log_weights)
    if not np.isfinite(top):
        # every candidate ruled out, fall back to the prior
        return np.full(log_weights.size, 1.0 / log_weights.size)
    weights = np.exp(log_weights - top)
    return weights / weights.sum()


class ThompsonSamplingPolicy(BeliefTrackingPolicy):
    """Episodic Thompson Sampling with an exact discrete posterior per arm

    Each arm has a uniform prior on a finite set of candidate chains.  The
    posterior of arm i is updated with the transition seen whenever arm i is
    pulled on two consecutive steps.  At the start of every episode one chain
    per arm is drawn from the posteriors, the sampled instance is solved with
    the oracle, and its policy is played at the tracked belief until the next
    episode.  Episode lengths start at ``first_episode_length`` and grow by
    ``episode_growth``.

    Candidates are the two-state chains of every pair of ``grid`` values, or
    the ``candidate_chains`` definitions, each a dict with ``up`` and ``down``
    (shared by all arms) or a list of such dicts (one list per arm).

    With ``known_rewards`` the rewards of the played instance are used,
    otherwise each (arm, state) has a discrete posterior over ``reward_grid``
    and the sampled instance uses the posterior means.
    """

    config_options: dict[str, StageParameter] = BeliefTrackingPolicy.config_options.copy()
    config_options.update(
        grid=StageParameter(
            list, list(NINE_POINT_GRID), fmt="%s", msg="Grid of stay probabilities, two states"
        ),
        candidate_chains=StageParameter(
            list, [], fmt="%s", msg="Explicit candidate chains, overrides grid"
        ),
        known_rewards=StageParameter(
            bool, True, fmt="%s", msg="Use the rewards of the played instance"
        ),
        reward_grid=StageParameter(
            list, list(DEFAULT_REWARD_GRID), fmt="%s", msg="Grid of mean rewards"
        ),
        first_episode_length=StageParameter(
            int, 100, fmt="%i", msg="Length of the first episode"
        ),
        episode_growth=StageParameter(
            float, 2.0, fmt="%.2f", msg="Ratio of successive episode lengths"
        ),
    )

    def __init__(self, **kwargs: Any):
        BeliefTrackingPolicy.__init__(self, **kwargs)
        self._candidates: list[list[BirthDeathChain]] = []
        self._log_matrices: list[NDArray[np.float64]] = []
        self._log_weights: list[NDArray[np.float64]] = []
        self._reward_grid = np.zeros(0)
        self._reward_log_weights = np.zeros((0, 0, 0))
        self._last_obs: Observation | None = None
        self._episode = 0
        self._next_episode = 0
        self._solved: dict[tuple, BeliefPolicy] = {}
        self._sampled: tuple[int, ...] = ()

    @property
    def episode(self) -> int:
        """Index of the current episode"""
        return self._episode

    @property
    def sampled(self) -> tuple[int, ...]:
        """Candidate index of every arm in the current episode"""
        return self._sampled

    def candidates(self, arm: int) -> list[BirthDeathChain]:
        """Candidate chains of ``arm``"""
        return self._candidates[arm - 1]

    def posterior(self, arm: int) -> NDArray[np.float64]:
        """Posterior probability of every candidate chain of ``arm``"""
        return _normalized(self._log_weights[arm - 1])

    def reward_posterior_means(self) -> NDArray[np.float64]:
        """(N, M) posterior mean rewards"""
        weights = np.exp(
            self._reward_log_weights
            - np.max(self._reward_log_weights, axis=2, keepdims=True)
        )
        weights /= weights.sum(axis=2, keepdims=True)
        return weights @ self._reward_grid

    def _build_candidates(self) -> list[list[BirthDeathChain]]:
        definitions = self.config.candidate_chains
        if definitions:
            if isinstance(definitions[0], dict):
                shared = [BirthDeathChain(def_["up"], def_["down"]) for def_ in definitions]
                per_arm = [shared] * self._num_arms
            else:
                if len(definitions) != self._num_arms:
                    raise ValueError(
                        f"candidate_chains has {len(definitions)} lists for "
                        f"{self._num_arms} arms"
                    )
                per_arm = [
                    [BirthDeathChain(def_["up"], def_["down"]) for def_ in arm_defs_]
                    for arm_defs_ in definitions
                ]
        else:
            if self._num_states != 2:
                raise ValueError(
                    f"grid candidates need two states, got {self._num_states}; "
                    "use candidate_chains instead"
                )
            per_arm = [grid_chains(self.config.grid)] * self._num_arms
        for i, chains_ in enumerate(per_arm):
            if not chains_:
                raise EmptyGridError(f"No candidate chains for arm {i + 1}")
            for chain_ in chains_:
                if chain_.num_states != self._num_states:
                    raise ValueError(
                        f"Candidate chain {chain_} does not have {self._num_states} states"
                    )
        return per_arm

    def _reset(self) -> None:
        BeliefTrackingPolicy._reset(self)
        if self.config.known_rewards and self._reference is None:
            raise ValueError("known_rewards needs the reference instance at reset")
        self._candidates = self._build_candidates()
        self._log_matrices = [_log_matrices(chains_) for chains_ in self._candidates]
        self._log_weights = [np.zeros(len(chains_)) for chains_ in self._candidates]
        if not self.config.reward_grid:
            raise EmptyGridError("Thompson Sampling reward grid is empty")
        self._reward_grid = np.array(self.config.reward_grid, dtype=np.float64)
        self._reward_log_weights = np.zeros(
            (self._num_arms, self._num_states, self._reward_grid.size)
        )
        self._last_obs = None
        self._episode = 0
        self._next_episode = 0
        self._solved = {}
        self._start_episode()

    def _episode_length(self, episode: int) -> int:
        length = self.config.first_episode_length * self.config.episode_growth**episode
        return max(1, int(round(length)))

    def _rewards(self) -> NDArray[np.float64]:
        if self.config.known_rewards:
            assert self._reference is not None
            return self._reference.reward_matrix()
        return self.reward_posterior_means()

    def _start_episode(self) -> None:
        self._sampled = tuple(
            int(self._rng.choice(weights_.size, p=_normalized(weights_)))
            for weights_ in self._log_weights
        )
        rewards = self._rewards()
        key = (self._sampled, tuple(np.round(rewards, 12).ravel().tolist()))
        oracle = self._solved.get(key)
        if oracle is None:
            instance = RestlessInstance(
                [
                    Arm(self._candidates[i][c_], rewards[i])
                    for i, c_ in enumerate(self._sampled)
                ],
                self._initial_states,
            )
            oracle = self.solve(instance)
            self._solved[key] = oracle
        self.use_oracle(oracle)
        self._next_episode += self._episode_length(self._episode)
        self._episode += 1

    def _observe(self, obs: Observation) -> None:
        BeliefTrackingPolicy._observe(self, obs)
        if obs.arm and obs.observed_state is not None:
            i = obs.arm - 1
            last = self._last_obs
            if last is not None and last.arm == obs.arm:
                assert last.observed_state is not None
                self._log_weights[i] = (
                    self._log_weights[i]
                    + self._log_matrices[i][:, last.observed_state, obs.observed_state]
                )
            if not self.config.known_rewards:
                if obs.reward > 0.5:
                    likelihood = self._reward_grid
                else:
                    likelihood = 1.0 - self._reward_grid
                with np.errstate(divide="ignore"):
                    self._reward_log_weights[i, obs.observed_state] += np.log(likelihood)
        self._last_obs = obs
        if self._t + 1 == self._next_episode and self._t + 1 < self._horizon:
            self._start_episode()

    def summary(self) -> dict[str, Any]:
        return dict(episodes=self._episode, distinct_solves=len(self._solved))

from __future__ import annotations

import functools
from typing import Any

import numpy as np
from ceci.config import StageParameter
from rail.core.configurable import Configurable

from .belief_mdp import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_STATE_BUDGET,
    SATURATION_CAP,
    BeliefPolicy,
    BeliefState,
    MyopicPolicy,
    PolicyTable,
    advance_belief,
    default_tau_max,
    saturate,
    solve_instance,
)
from .chain_core import RestlessInstance
from .dynamic_class import DynamicClass
from .env import Observation
from .exceptions import StateBudgetExceededError

ORACLE_NAMES = ["rvi", "myopic"]


@functools.lru_cache(maxsize=64)
def solve_oracle(
    instance: RestlessInstance,
    oracle: str = "rvi",
    tau_max: int = 0,
    epsilon: float = 1e-9,
    state_budget: int = DEFAULT_STATE_BUDGET,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> BeliefPolicy:
    """Solve ``instance`` with the named oracle

    Parameters
    ----------
    instance:
        Problem to solve

    oracle:
        "rvi" for the exact truncated-belief solution, "myopic" for the
        greedy rule

    tau_max:
        Saturation point of the taus, 0 for the instance default

    epsilon:
        Solver tolerance

    state_budget:
        Largest number of belief states enumerated

    max_iterations:
        Solver iteration cap

    Returns
    -------
    BeliefPolicy
        A PolicyTable, or a MyopicPolicy if so requested or if the belief set
        does not fit in ``state_budget``

    Raises
    ------
    NonConvergenceError
        If the exact solve does not reach ``epsilon`` in ``max_iterations``
    """
    if oracle not in ORACLE_NAMES:
        raise KeyError(f"Oracle {oracle} not in {ORACLE_NAMES}")
    if oracle == "myopic":
        return MyopicPolicy(instance)
    try:
        return solve_instance(
            instance,
            tau_max=tau_max or default_tau_max(instance),
            epsilon=epsilon,
            state_budget=state_budget,
            max_iterations=max_iterations,
        )
    except StateBudgetExceededError as msg:
        print(f"Belief set too large ({msg}), falling back to the myopic oracle")
        return MyopicPolicy(instance)


def oracle_tau_max(oracle: BeliefPolicy) -> int:
    """Saturation point to use when tracking beliefs for ``oracle``"""
    if isinstance(oracle, PolicyTable):
        return oracle.tau_max
    return SATURATION_CAP


class RestlessPolicy(Configurable, DynamicClass):
    """Base class for online policies

    The life cycle of a policy in one game is

    .. highlight:: python
    .. code-block:: python

      policy.reset(num_arms, num_states, horizon, seed, reference)
      for t in range(horizon):
          action = policy.choose(t)
          policy.observe(env.step(action))

    ``choose`` does not change the policy, ``observe`` and ``reset`` are the
    only mutators.  ``reference`` is the instance being played; policies only
    read the parts of it they are allowed to know (initial states, and the
    rewards or the chains for the baselines that are given them).

    Sub-classes should implement ``_reset``, ``choose`` and ``_observe``.
    """

    config_options: dict[str, StageParameter] = dict(
        name=StageParameter(str, None, fmt="%s", required=True, msg="Policy name"),
    )

    sub_classes: dict[str, type[DynamicClass]] = {}

    yaml_tag = "Policy"

    def __init__(self, **kwargs: Any):
        """C'tor

        Parameters
        ----------
        **kwargs
            Configuration parameters for this policy, must match
            class.config_options data members
        """
        DynamicClass.__init__(self)
        Configurable.__init__(self, **kwargs)
        self._num_arms = 0
        self._num_states = 0
        self._horizon = 0
        self._reference: RestlessInstance | None = None
        self._initial_states: tuple[int, ...] = ()
        self._rng = np.random.default_rng(0)
        self._t = 0

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.config.name})"

    @property
    def t(self) -> int:
        """Number of observations received since the last reset"""
        return self._t

    @property
    def horizon(self) -> int:
        return self._horizon

    def reset(
        self,
        num_arms: int,
        num_states: int,
        horizon: int,
        seed: int,
        reference: RestlessInstance | None = None,
    ) -> None:
        """Prepare for a new game of ``horizon`` steps

        Parameters
        ----------
        num_arms:
            Number of arms N

        num_states:
            Number of states M per arm

        horizon:
            Number of steps T

        seed:
            Seed of the policy's own random stream

        reference:
            The instance being played
        """
        self._num_arms = num_arms
        self._num_states = num_states
        self._horizon = horizon
        self._reference = reference
        if reference is not None:
            self._initial_states = reference.initial_states
        else:
            self._initial_states = (num_states - 1,) * num_arms
        self._rng = np.random.default_rng(seed)
        self._t = 0
        self._reset()

    def initial_belief(self) -> BeliefState:
        """Belief at the start of the game"""
        return tuple((state_, 1) for state_ in self._initial_states)

    def choose(self, t: int) -> int:
        """Action to play at step ``t``"""
        raise NotImplementedError()

    def observe(self, obs: Observation) -> None:
        """Record the outcome of the last action"""
        self._observe(obs)
        self._t += 1

    def summary(self) -> dict[str, Any]:
        """Per-game information worth reporting, e.g. the exploration length"""
        return {}

    def spawn(self, **overrides: Any) -> RestlessPolicy:
        """Fresh copy of this policy, with some options changed"""
        config = self.config.to_dict().copy()
        config.update(**overrides)
        return type(self)(**config)

    def to_yaml_dict(self) -> dict[str, dict[str, Any]]:
        """Create a yaml-convertable dict for this object"""
        yaml_dict = Configurable.to_yaml_dict(self)
        yaml_dict[self.yaml_tag].update(class_name=f"{self.full_class_name()}")
        return yaml_dict

    def _reset(self) -> None:
        pass

    def _observe(self, obs: Observation) -> None:
        pass


class FixedArmPolicy(RestlessPolicy):
    """Always play the same arm, 0 is allowed"""

    config_options: dict[str, StageParameter] = RestlessPolicy.config_options.copy()
    config_options.update(
        arm=StageParameter(int, 1, fmt="%i", msg="Arm to play, 0 for the default arm"),
    )

    def _reset(self) -> None:
        if not 0 <= self.config.arm <= self._num_arms:
            raise ValueError(
                f"FixedArmPolicy arm {self.config.arm} not in [0, {self._num_arms}]"
            )

    def choose(self, t: int) -> int:
        return self.config.arm


class BeliefTrackingPolicy(RestlessPolicy):
    """Policy that plays a belief-state oracle at its own tracked belief"""

    config_options: dict[str, StageParameter] = RestlessPolicy.config_options.copy()
    config_options.update(
        oracle=StageParameter(str, "rvi", fmt="%s", msg="Oracle: rvi or myopic"),
        epsilon=StageParameter(float, 1e-9, fmt="%.3e", msg="Solver tolerance"),
        tau_max=StageParameter(
            int, 0, fmt="%i", msg="Saturation point of the taus, 0 for automatic"
        ),
        state_budget=StageParameter(
            int, DEFAULT_STATE_BUDGET, fmt="%i", msg="Largest enumerated belief set"
        ),
    )

    def __init__(self, **kwargs: Any):
        RestlessPolicy.__init__(self, **kwargs)
        self._belief: BeliefState = ()
        self._oracle: BeliefPolicy | None = None
        self._tau_cap = SATURATION_CAP

    @property
    def belief(self) -> BeliefState:
        """Current tracked belief"""
        return self._belief

    @property
    def oracle(self) -> BeliefPolicy | None:
        """The oracle policy in use, None before it is solved"""
        return self._oracle

    def solve(self, instance: RestlessInstance) -> BeliefPolicy:
        """Solve ``instance`` with this policy's oracle settings"""
        return solve_oracle(
            instance,
            oracle=self.config.oracle,
            tau_max=self.config.tau_max,
            epsilon=self.config.epsilon,
            state_budget=self.config.state_budget,
        )

    def use_oracle(self, oracle: BeliefPolicy) -> None:
        """Switch to ``oracle``, re-saturating the tracked belief"""
        self._oracle = oracle
        self._tau_cap = oracle_tau_max(oracle)
        self._belief = saturate(self._belief, self._tau_cap)

    def _reset(self) -> None:
        self._belief = self.initial_belief()
        self._oracle = None
        self._tau_cap = SATURATION_CAP

    def _observe(self, obs: Observation) -> None:
        self._belief = advance_belief(
            self._belief, obs.arm, obs.observed_state, self._tau_cap
        )

    def choose(self, t: int) -> int:
        assert self._oracle is not None
        return self._oracle(self._belief)


class OracleReplayPolicy(BeliefTrackingPolicy):
    """Play the oracle of the true instance, the reference for regret"""

    def _reset(self) -> None:
        BeliefTrackingPolicy._reset(self)
        if self._reference is None:
            raise ValueError("OracleReplayPolicy needs the reference instance at reset")
        self.use_oracle(self.solve(self._reference))

    def summary(self) -> dict[str, Any]:
        if isinstance(self._oracle, PolicyTable):
            return dict(oracle_gain=float(self._oracle.gain))
        return {}

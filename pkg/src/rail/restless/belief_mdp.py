"""The offline problem: belief-state MDP, its exact and myopic solutions

A belief state is a tuple with one ``(s, tau)`` pair per arm: the last
observed state of the arm and the number of steps since that observation.
Given the belief, the state of arm i is distributed as ``e_s P_i^tau``.
"""

from __future__ import annotations

import math
import os
from typing import Any, Callable, Sequence

import numpy as np
import yaml
from numpy.typing import NDArray

from .chain_core import DEFAULT_CACHE_CAP, RestlessInstance, lambda_max
from .env import RestlessEnv, RewardMode
from .exceptions import NonConvergenceError, StateBudgetExceededError

BeliefState = tuple[tuple[int, int], ...]

BeliefPolicy = Callable[[BeliefState], int]

DEFAULT_STATE_BUDGET = 5_000_000

DEFAULT_MAX_ITERATIONS = 1_000_000

TIE_TOLERANCE = 1e-12

# taus past the row-power cache all map to the stationary distribution
SATURATION_CAP = DEFAULT_CACHE_CAP + 1


def initial_belief(instance: RestlessInstance) -> BeliefState:
    """Belief at the start of a game, every arm at ``(s_i(0), 1)``"""
    return tuple((state_, 1) for state_ in instance.initial_states)


def saturate(z: BeliefState, tau_max: int) -> BeliefState:
    """Clip every tau of ``z`` to ``tau_max``"""
    return tuple((s_, min(tau_, tau_max)) for s_, tau_ in z)


def advance_belief(
    z: BeliefState, arm: int, observed_state: int | None, tau_max: int
) -> BeliefState:
    """Belief after pulling ``arm`` and seeing ``observed_state``

    The pulled arm becomes ``(observed_state, 1)``, every other tau grows by
    one, saturating at ``tau_max``.  With ``arm == 0`` every tau grows.
    """
    return tuple(
        (observed_state, 1)  # type: ignore[misc]
        if i == arm - 1
        else (s_, tau_ + 1 if tau_ < tau_max else tau_max)
        for i, (s_, tau_) in enumerate(z)
    )


def belief_key(z: BeliefState) -> str:
    """String key used to write belief states to file"""
    return "|".join(f"{s_}:{tau_}" for s_, tau_ in z)


def parse_belief_key(key: str) -> BeliefState:
    """Inverse of :py:func:`belief_key`"""
    out = []
    for token_ in key.split("|"):
        s_, tau_ = token_.split(":")
        out.append((int(s_), int(tau_)))
    return tuple(out)


def expected_reward(instance: RestlessInstance, z: BeliefState, a: int) -> float:
    """Expected reward of pulling arm ``a`` (>= 1) at belief ``z``"""
    if a < 1:
        raise ValueError(f"expected_reward needs an arm >= 1, got {a}")
    s, tau = z[a - 1]
    if tau < 1:
        raise ValueError(f"Belief taus must be >= 1, got {tau} for arm {a}")
    arm = instance.arm(a)
    return float(np.dot(arm.chain.row_power(s, tau), arm.rewards))


def belief_transition(
    instance: RestlessInstance,
    z: BeliefState,
    a: int,
    tau_max: int = SATURATION_CAP,
) -> list[tuple[float, BeliefState]]:
    """Successor beliefs of pulling arm ``a`` at ``z`` with their probabilities

    Successors with zero probability are dropped, in increasing order of the
    observed state
    """
    if a < 1:
        raise ValueError(f"belief_transition needs an arm >= 1, got {a}")
    s, tau = z[a - 1]
    dist = instance.arm(a).chain.row_power(s, tau)
    return [
        (float(dist[k]), advance_belief(z, a, k, tau_max))
        for k in range(instance.num_states)
        if dist[k] > 0.0
    ]


def default_tau_max(
    instance: RestlessInstance,
    tolerance: float = 1e-6,
    lower: int = 16,
    upper: int = 512,
) -> int:
    """Smallest tau with ``lambda_max^tau <= tolerance``, clamped to [lower, upper]"""
    lam = lambda_max(instance)
    if lam <= 0.0:
        return lower
    if lam >= 1.0:
        return upper
    tau = math.ceil(math.log(tolerance) / math.log(lam))
    return int(min(max(tau, lower), upper))


def truncation_bound(instance: RestlessInstance, tau_max: int) -> float:
    """Bound on the gain change from truncating tau at ``tau_max``"""
    return 20.0 * instance.num_states * lambda_max(instance) ** tau_max


class TruncatedBeliefMdp:
    """Belief states reachable from the initial belief, with tau saturation

    Transitions are stored densely: ``successors[i, j, k]`` and
    ``probabilities[i, j, k]`` give the k-th successor of state i under
    ``actions[j]``.  Unused slots point back to state i with probability 0.
    """

    def __init__(
        self,
        instance: RestlessInstance,
        tau_max: int,
        states: list[BeliefState],
        actions: list[int],
        successors: NDArray[np.int64],
        probabilities: NDArray[np.float64],
        rewards: NDArray[np.float64],
    ) -> None:
        self.instance = instance
        self.tau_max = tau_max
        self.states = states
        self.index = {z_: i for i, z_ in enumerate(states)}
        self.actions = actions
        self.successors = successors
        self.probabilities = probabilities
        self.rewards = rewards

    @property
    def num_belief_states(self) -> int:
        return len(self.states)

    @property
    def initial_index(self) -> int:
        """Index of the reference state, the initial belief"""
        return 0

    def transitions(self, z: BeliefState, a: int) -> list[tuple[float, BeliefState]]:
        """Nonzero transitions of ``z`` under action ``a``"""
        i = self.index[z]
        j = self.actions.index(a)
        return [
            (float(p_), self.states[s_])
            for p_, s_ in zip(self.probabilities[i, j], self.successors[i, j])
            if p_ > 0.0
        ]


def build_truncated_mdp(
    instance: RestlessInstance,
    tau_max: int | None = None,
    state_budget: int = DEFAULT_STATE_BUDGET,
    include_idle_arm: bool = False,
) -> TruncatedBeliefMdp:
    """Enumerate the belief states reachable from the initial belief

    Parameters
    ----------
    instance:
        The problem

    tau_max:
        Saturation point of the taus, must be >= 2, defaults to
        :py:func:`default_tau_max`

    state_budget:
        Largest number of belief states allowed

    include_idle_arm:
        If True, action 0 is part of the action set

    Raises
    ------
    StateBudgetExceededError
        If more than ``state_budget`` belief states are reachable
    """
    if tau_max is None:
        tau_max = default_tau_max(instance)
    if tau_max < 2:
        raise ValueError(f"tau_max must be >= 2, got {tau_max}")
    num_states = instance.num_states
    actions = ([0] if include_idle_arm else []) + list(range(1, instance.num_arms + 1))
    chains = [arm_.chain for arm_ in instance.arms]
    rewards = [arm_.rewards for arm_ in instance.arms]

    start = initial_belief(instance)
    states: list[BeliefState] = [start]
    index: dict[BeliefState, int] = {start: 0}
    all_succ: list[NDArray[np.int64]] = []
    all_prob: list[NDArray[np.float64]] = []
    all_rew: list[NDArray[np.float64]] = []

    def lookup(z: BeliefState) -> int:
        found = index.get(z)
        if found is not None:
            return found
        if len(states) >= state_budget:
            raise StateBudgetExceededError(len(states) + 1, state_budget)
        index[z] = len(states)
        states.append(z)
        return index[z]

    head = 0
    while head < len(states):
        z = states[head]
        succ = np.full((len(actions), num_states), head, dtype=np.int64)
        prob = np.zeros((len(actions), num_states))
        rew = np.zeros(len(actions))
        for j, a in enumerate(actions):
            if a == 0:
                succ[j, 0] = lookup(advance_belief(z, 0, None, tau_max))
                prob[j, 0] = 1.0
                continue
            s, tau = z[a - 1]
            dist = chains[a - 1].row_power(s, tau)
            rew[j] = float(np.dot(dist, rewards[a - 1]))
            for k in range(num_states):
                if dist[k] > 0.0:
                    succ[j, k] = lookup(advance_belief(z, a, k, tau_max))
                    prob[j, k] = dist[k]
        all_succ.append(succ)
        all_prob.append(prob)
        all_rew.append(rew)
        head += 1

    return TruncatedBeliefMdp(
        instance,
        tau_max,
        states,
        actions,
        np.array(all_succ),
        np.array(all_prob),
        np.array(all_rew),
    )


class PolicyTable:
    """Solution of a truncated belief MDP

    Parameters
    ----------
    instance:
        Instance the table was solved for

    tau_max:
        Saturation point of the taus

    states:
        Enumerated belief states

    actions:
        Action chosen in each belief state

    gain:
        Average reward per step

    bias:
        Relative value of each belief state, 0 at the initial belief

    epsilon:
        Stopping threshold of the solver, the gain is certified to +/- epsilon/2

    gain_bounds:
        Final lower and upper bounds on the gain

    iterations:
        Number of solver iterations

    span_history:
        Span of the Bellman residual at each iteration
    """

    FORMAT_VERSION = 1

    def __init__(
        self,
        instance: RestlessInstance,
        tau_max: int,
        states: list[BeliefState],
        actions: NDArray[np.int64],
        gain: float,
        bias: NDArray[np.float64],
        epsilon: float,
        gain_bounds: tuple[float, float],
        iterations: int = 0,
        span_history: NDArray[np.float64] | None = None,
    ) -> None:
        self.instance = instance
        self.tau_max = tau_max
        self.states = states
        self.index = {z_: i for i, z_ in enumerate(states)}
        self.actions = actions
        self.gain = gain
        self.bias = bias
        self.epsilon = epsilon
        self.gain_bounds = gain_bounds
        self.iterations = iterations
        self.span_history = span_history if span_history is not None else np.zeros(0)

    def __len__(self) -> int:
        return len(self.states)

    def __call__(self, z: BeliefState) -> int:
        return self.action(z)

    def action(self, z: BeliefState) -> int:
        """Action to play at belief ``z``

        Taus are saturated at ``tau_max``.  Beliefs outside of the enumerated
        set get a one-step lookahead on the bias, unknown successors counting
        as the reference value 0.
        """
        z = saturate(z, self.tau_max)
        found = self.index.get(z)
        if found is not None:
            return int(self.actions[found])
        best_arm = 1
        best_value = -np.inf
        for a in range(1, self.instance.num_arms + 1):
            value = expected_reward(self.instance, z, a)
            for p_, z_next in belief_transition(self.instance, z, a, self.tau_max):
                next_index = self.index.get(z_next)
                if next_index is not None:
                    value += p_ * float(self.bias[next_index])
            if value > best_value + TIE_TOLERANCE:
                best_value = value
                best_arm = a
        return best_arm

    def to_yaml_dict(self) -> dict[str, Any]:
        """Flat representation used to write the table to file"""
        return dict(
            format_version=self.FORMAT_VERSION,
            gain=float(self.gain),
            gain_bounds=[float(self.gain_bounds[0]), float(self.gain_bounds[1])],
            epsilon=float(self.epsilon),
            tau_max=int(self.tau_max),
            iterations=int(self.iterations),
            instance=dict(
                num_states=self.instance.num_states,
                arms=[
                    dict(
                        up=arm_.chain.up.tolist(),
                        down=arm_.chain.down.tolist(),
                        rewards=arm_.rewards.tolist(),
                    )
                    for arm_ in self.instance.arms
                ],
                initial_states=list(self.instance.initial_states),
            ),
            actions={
                belief_key(z_): int(a_) for z_, a_ in zip(self.states, self.actions)
            },
            bias={belief_key(z_): float(b_) for z_, b_ in zip(self.states, self.bias)},
        )

    def write_yaml(self, path: str) -> None:
        """Write the table to a yaml file"""
        output_dir = os.path.dirname(path)
        if output_dir:
            os.makedirs(output_dir, exist_ok=True)
        with open(os.path.expandvars(path), mode="w", encoding="utf-8") as fout:
            yaml.safe_dump(self.to_yaml_dict(), fout, sort_keys=False)

    @classmethod
    def read_yaml(cls, path: str) -> PolicyTable:
        """Read a table written by :py:meth:`write_yaml`"""
        # pylint: disable=import-outside-toplevel
        from .instance_factory import RestlessInstanceHolder

        with open(os.path.expandvars(path), encoding="utf-8") as fin:
            data = yaml.safe_load(fin)
        version = data.get("format_version")
        if version != cls.FORMAT_VERSION:
            raise ValueError(
                f"PolicyTable file {path} has format_version {version}, "
                f"expected {cls.FORMAT_VERSION}"
            )
        instance = RestlessInstanceHolder(name="policy_table", **data["instance"]).resolve()
        states = [parse_belief_key(key_) for key_ in data["actions"]]
        return cls(
            instance=instance,
            tau_max=data["tau_max"],
            states=states,
            actions=np.array(list(data["actions"].values()), dtype=np.int64),
            gain=data["gain"],
            bias=np.array([data["bias"][belief_key(z_)] for z_ in states]),
            epsilon=data["epsilon"],
            gain_bounds=(data["gain_bounds"][0], data["gain_bounds"][1]),
            iterations=data.get("iterations", 0),
        )


def relative_value_iteration(
    mdp: TruncatedBeliefMdp,
    epsilon: float = 1e-9,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    aperiodicity: float = 0.5,
) -> PolicyTable:
    """Solve the average-reward problem by relative value iteration

    Parameters
    ----------
    mdp:
        The enumerated belief MDP

    epsilon:
        Stop when the span of ``T V - V`` is below epsilon

    max_iterations:
        Iteration cap

    aperiodicity:
        Damping ``V <- V + aperiodicity * (T V - V)``, in (0, 1]; values below 1
        make every policy aperiodic without changing gains or optimal actions

    Returns
    -------
    PolicyTable
        Greedy policy, gain at the midpoint of the final residual bounds and
        bias normalized to 0 at the initial belief

    Raises
    ------
    NonConvergenceError
        If the span is still above epsilon after ``max_iterations``
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not 0.0 < aperiodicity <= 1.0:
        raise ValueError(f"aperiodicity must be in (0, 1], got {aperiodicity}")
    ref = mdp.initial_index
    values = np.zeros(mdp.num_belief_states)
    spans: list[float] = []
    q_values = mdp.rewards
    low = high = 0.0
    converged = False
    for _ in range(max_iterations):
        q_values = mdp.rewards + np.einsum(
            "ijk,ijk->ij", mdp.probabilities, values[mdp.successors]
        )
        residual = q_values.max(axis=1) - values
        low = float(residual.min())
        high = float(residual.max())
        spans.append(high - low)
        if high - low < epsilon:
            converged = True
            break
        values = values + aperiodicity * residual
        values -= values[ref]
    if not converged:
        raise NonConvergenceError(spans[-1], max_iterations)

    best = q_values.max(axis=1, keepdims=True)
    choice = np.argmax(q_values >= best - TIE_TOLERANCE, axis=1)
    actions = np.array(mdp.actions, dtype=np.int64)[choice]
    gain = min(max(0.5 * (low + high), 0.0), 1.0)
    return PolicyTable(
        instance=mdp.instance,
        tau_max=mdp.tau_max,
        states=mdp.states,
        actions=actions,
        gain=gain,
        bias=values - values[ref],
        epsilon=epsilon,
        gain_bounds=(low, high),
        iterations=len(spans),
        span_history=np.array(spans),
    )


def solve_instance(
    instance: RestlessInstance,
    tau_max: int | None = None,
    epsilon: float = 1e-9,
    state_budget: int = DEFAULT_STATE_BUDGET,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    include_idle_arm: bool = False,
) -> PolicyTable:
    """Build the truncated MDP of ``instance`` and solve it"""
    mdp = build_truncated_mdp(
        instance, tau_max, state_budget=state_budget, include_idle_arm=include_idle_arm
    )
    return relative_value_iteration(mdp, epsilon=epsilon, max_iterations=max_iterations)


class MyopicPolicy:
    """Greedy rule on the expected immediate reward, ties to the lowest arm"""

    def __init__(self, instance: RestlessInstance) -> None:
        self.instance = instance
        self._chains = [arm_.chain for arm_ in instance.arms]
        self._rewards = [arm_.rewards for arm_ in instance.arms]

    def __call__(self, z: BeliefState) -> int:
        best_arm = 1
        best_value = -np.inf
        for i, (s_, tau_) in enumerate(z):
            value = float(np.dot(self._chains[i].row_power(s_, tau_), self._rewards[i]))
            if value > best_value + TIE_TOLERANCE:
                best_value = value
                best_arm = i + 1
        return best_arm


def myopic_policy(instance: RestlessInstance) -> MyopicPolicy:
    """Return the myopic approximate oracle for ``instance``"""
    return MyopicPolicy(instance)


class ConstantPolicy:
    """Belief policy that always plays the same action"""

    def __init__(self, action: int) -> None:
        self.action = action

    def __call__(self, z: BeliefState) -> int:
        return self.action


def policy_gain(
    instance: RestlessInstance,
    policy: BeliefPolicy,
    horizon: int,
    reps: int,
    seed: int,
    tau_max: int | None = None,
    reward_mode: RewardMode = RewardMode.bernoulli,
    num_batches: int = 20,
) -> tuple[float, float]:
    """Monte Carlo estimate of the average reward of a belief policy

    Parameters
    ----------
    instance:
        The problem

    policy:
        Maps the tracked belief to an action in {0, ..., N}

    horizon:
        Steps per replication

    reps:
        Number of replications, replication r uses seed ``seed + r``

    seed:
        Root seed

    tau_max:
        Saturation point of the tracked belief, defaults to the policy's own
        ``tau_max`` if it has one

    reward_mode:
        Reward noise of the environment

    num_batches:
        Batches used for the standard error of a single replication

    Returns
    -------
    tuple[float, float]
        Mean reward per step and its standard error, across replications or,
        with a single replication, across batches
    """
    if horizon < 1 or reps < 1:
        raise ValueError(f"horizon and reps must be >= 1, got {horizon}, {reps}")
    if tau_max is None:
        tau_max = getattr(policy, "tau_max", None) or SATURATION_CAP
    num_batches = max(1, min(num_batches, horizon))
    edges = np.linspace(0, horizon, num_batches + 1).astype(int)
    rep_means: list[float] = []
    batch_means: list[float] = []
    for rep in range(reps):
        env = RestlessEnv(instance, seed + rep, reward_mode, require_assumptions=False)
        z = initial_belief(instance)
        total = 0.0
        batch_total = 0.0
        batch = 0
        for t in range(horizon):
            action = policy(z)
            obs = env.step(action)
            total += obs.reward
            batch_total += obs.reward
            if t + 1 == edges[batch + 1]:
                batch_means.append(batch_total / (edges[batch + 1] - edges[batch]))
                batch_total = 0.0
                batch += 1
            if action:
                z = advance_belief(z, action, obs.observed_state, tau_max)
            else:
                z = advance_belief(z, 0, None, tau_max)
        rep_means.append(total / horizon)
    mean = float(np.mean(rep_means))
    if reps > 1:
        return mean, float(np.std(rep_means, ddof=1) / np.sqrt(reps))
    if num_batches > 1:
        return mean, float(np.std(batch_means, ddof=1) / np.sqrt(num_batches))
    return mean, 0.0


def policy_actions(policy: BeliefPolicy, beliefs: Sequence[BeliefState]) -> list[int]:
    """Evaluate a belief policy on several beliefs"""
    return [policy(z_) for z_ in beliefs]

"""Coupled simulations comparing a real and a virtual belief trajectory

These are used as executable checks of the dominance arguments behind the
regret analysis: a real game is played on one instance while a virtual
trajectory on another instance is kept in lock step through an
inverse-CDF coupling of the observed states.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .belief_mdp import (
    SATURATION_CAP,
    BeliefPolicy,
    BeliefState,
    PolicyTable,
    advance_belief,
    initial_belief,
)
from .chain_core import (
    COMPARISON_SLACK,
    BirthDeathChain,
    ProbVector,
    RestlessInstance,
    prefix_dominates,
    rows_dominate,
)
from .env import RestlessEnv, RewardMode
from .exceptions import CouplingPreconditionError, ZeroProbabilityError


def correspond_probabilities(
    v: Sequence[float] | ProbVector, v_prime: Sequence[float] | ProbVector, k: int
) -> NDArray[np.float64]:
    """Distribution of the state returned by :py:func:`correspond`

    The slice ``[CDF_v'(k-1), CDF_v'(k)]`` of the unit interval is mapped
    through the generalized inverse CDF of ``v``.
    """
    v_array = np.asarray(v, dtype=np.float64)
    vp_array = np.asarray(v_prime, dtype=np.float64)
    if vp_array[k] <= 0.0:
        raise ZeroProbabilityError(f"State {k} has zero probability under v_prime {vp_array}")
    cdf_vp = np.cumsum(vp_array)
    start = cdf_vp[k - 1] if k > 0 else 0.0
    end = cdf_vp[k]
    cdf_v = np.cumsum(v_array)
    lower = np.concatenate([[0.0], cdf_v[:-1]])
    overlap = np.minimum(cdf_v, end) - np.maximum(lower, start)
    overlap[overlap < COMPARISON_SLACK] = 0.0
    total = overlap.sum()
    if total <= 0.0:
        # v has no mass on the slice, only possible when CDF_v rounds below start
        overlap[-1] = 1.0
        total = 1.0
    return overlap / total


def correspond(
    v: Sequence[float] | ProbVector,
    v_prime: Sequence[float] | ProbVector,
    k: int,
    rng: np.random.Generator,
) -> int:
    """Draw a state j given a state k drawn from ``v_prime``

    If k is distributed as ``v_prime`` then j is distributed as ``v``.  If
    ``v_prime`` prefix-dominates ``v`` then ``j >= k``.

    Raises
    ------
    ZeroProbabilityError
        If ``v_prime[k]`` is zero
    """
    if np.array_equal(np.asarray(v), np.asarray(v_prime)):
        if np.asarray(v_prime)[k] <= 0.0:
            raise ZeroProbabilityError(f"State {k} has zero probability under v_prime")
        return k
    cumulative = np.cumsum(correspond_probabilities(v, v_prime, k))
    j = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(j, cumulative.size - 1)


class CoupledTrace:
    """Per-step record of a coupled run

    ``real_state`` and ``virtual_state`` are -1 on steps playing arm 0.
    Rewards are the mean rewards of the observed states.
    """

    def __init__(self, horizon: int) -> None:
        self.action = np.zeros(horizon, dtype=np.int64)
        self.real_state = np.full(horizon, -1, dtype=np.int64)
        self.virtual_state = np.full(horizon, -1, dtype=np.int64)
        self.real_reward = np.zeros(horizon)
        self.virtual_reward = np.zeros(horizon)

    def __len__(self) -> int:
        return self.action.size

    @property
    def violations(self) -> int:
        """Number of steps with the virtual state below the real state"""
        return int(np.sum(self.virtual_state < self.real_state))

    @property
    def cumulative_real(self) -> float:
        return float(self.real_reward.sum())

    @property
    def cumulative_virtual(self) -> float:
        return float(self.virtual_reward.sum())


def _belief_tau_max(policy: BeliefPolicy) -> int:
    if isinstance(policy, PolicyTable):
        return policy.tau_max
    return SATURATION_CAP


def check_coupling_preconditions(
    instance: RestlessInstance, instance_prime: RestlessInstance
) -> None:
    """Raise CouplingPreconditionError unless every row and reward of
    ``instance_prime`` dominates that of ``instance``"""
    if (instance.num_arms, instance.num_states) != (
        instance_prime.num_arms,
        instance_prime.num_states,
    ):
        raise CouplingPreconditionError("Instances have different shapes")
    for i, (arm_, arm_prime_) in enumerate(zip(instance.arms, instance_prime.arms)):
        if not rows_dominate(arm_prime_.chain, arm_.chain):
            raise CouplingPreconditionError(
                f"Rows of arm {i + 1} of the real instance do not dominate the virtual ones"
            )
        if np.any(arm_prime_.rewards < arm_.rewards - COMPARISON_SLACK):
            raise CouplingPreconditionError(
                f"Rewards of arm {i + 1} of the real instance are below the virtual ones"
            )


def simulate_dominance(
    instance: RestlessInstance,
    instance_prime: RestlessInstance,
    policy: BeliefPolicy,
    horizon: int,
    seed: int,
) -> CoupledTrace:
    """Play ``instance_prime`` for real while tracking a virtual run on ``instance``

    Parameters
    ----------
    instance:
        The virtual instance, the one ``policy`` is solved for

    instance_prime:
        The real instance, its rows must prefix-dominate those of
        ``instance`` and its rewards must be at least as large

    policy:
        Chooses actions from the virtual belief

    horizon:
        Number of steps

    seed:
        Seed of the real game, the coupling draws use a separate stream

    Returns
    -------
    CoupledTrace
        The coupled record, whose virtual stream is distributed as a run of
        ``policy`` on ``instance``

    Raises
    ------
    CouplingPreconditionError
        If the instances do not dominate, or if the real next-state
        distribution fails to dominate the virtual one at some pull
    """
    check_coupling_preconditions(instance, instance_prime)
    env = RestlessEnv(
        instance_prime, seed, RewardMode.deterministic, require_assumptions=False
    )
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    tau_max = _belief_tau_max(policy)
    virtual = initial_belief(instance)
    real = initial_belief(instance_prime)
    trace = CoupledTrace(horizon)
    for t in range(horizon):
        action = policy(virtual)
        trace.action[t] = action
        obs = env.step(action)
        if action == 0:
            virtual = advance_belief(virtual, 0, None, tau_max)
            real = advance_belief(real, 0, None, tau_max)
            continue
        assert obs.observed_state is not None
        s_virtual, tau_virtual = virtual[action - 1]
        s_real, tau_real = real[action - 1]
        v = instance.arm(action).chain.row_power(s_virtual, tau_virtual)
        v_prime = instance_prime.arm(action).chain.row_power(s_real, tau_real)
        if not prefix_dominates(v_prime, v):
            raise CouplingPreconditionError(
                f"Real next-state distribution {v_prime} does not dominate "
                f"virtual {v} at step {t}, arm {action}"
            )
        k = obs.observed_state
        j = correspond(v, v_prime, k, rng)
        trace.real_state[t] = k
        trace.virtual_state[t] = j
        trace.real_reward[t] = instance_prime.arm(action).rewards[k]
        trace.virtual_reward[t] = instance.arm(action).rewards[j]
        virtual = advance_belief(virtual, action, j, tau_max)
        real = advance_belief(real, action, k, tau_max)
    return trace


def simulate_bias_gap(
    instance_prime: RestlessInstance,
    policy: BeliefPolicy,
    z: BeliefState,
    j: int,
    k: int,
    horizon: int,
    seed: int,
) -> float:
    """Reward difference between two coupled runs started after pulling the
    arm ``policy(z)`` at ``z`` and seeing state ``j`` (real) or ``k`` (virtual)

    Both runs play ``instance_prime`` with the actions chosen at the virtual
    belief.  Pulls of arms other than the focal arm share their draws, so
    both runs see the same states and rewards there; the focal arm is coupled
    with :py:func:`correspond`.  Rewards are the mean rewards of the observed
    states.

    Returns
    -------
    float
        Cumulative real reward minus cumulative virtual reward

    Raises
    ------
    CouplingPreconditionError
        If ``j < k``, if ``policy(z)`` is the default arm, or if the virtual
        next-state distribution fails to dominate the real one
    """
    if j < k:
        raise CouplingPreconditionError(f"simulate_bias_gap needs j >= k, got {j} < {k}")
    num_states = instance_prime.num_states
    if not (0 <= k < num_states and 0 <= j < num_states):
        raise CouplingPreconditionError(f"States {j}, {k} not in [0, {num_states})")
    focal = policy(z)
    if focal == 0:
        raise CouplingPreconditionError("The policy plays the default arm at z")
    tau_max = _belief_tau_max(policy)
    real = advance_belief(z, focal, j, tau_max)
    virtual = advance_belief(z, focal, k, tau_max)
    chains: list[BirthDeathChain] = [arm_.chain for arm_ in instance_prime.arms]
    rewards = [arm_.rewards for arm_ in instance_prime.arms]
    rng = np.random.default_rng(seed)
    gap = 0.0
    for _ in range(horizon):
        if real == virtual:
            break
        action = policy(virtual)
        if action == 0:
            real = advance_belief(real, 0, None, tau_max)
            virtual = advance_belief(virtual, 0, None, tau_max)
            continue
        s_virtual, tau_virtual = virtual[action - 1]
        s_real, tau_real = real[action - 1]
        v_virtual = chains[action - 1].row_power(s_virtual, tau_virtual)
        x = int(np.searchsorted(np.cumsum(v_virtual), rng.random(), side="right"))
        x = min(x, num_states - 1)
        if (s_real, tau_real) == (s_virtual, tau_virtual):
            y = x
        else:
            v_real = chains[action - 1].row_power(s_real, tau_real)
            if not prefix_dominates(v_virtual, v_real):
                raise CouplingPreconditionError(
                    f"Virtual next-state distribution {v_virtual} does not dominate "
                    f"real {v_real} for arm {action}"
                )
            y = correspond(v_real, v_virtual, x, rng)
        gap += float(rewards[action - 1][y] - rewards[action - 1][x])
        real = advance_belief(real, action, y, tau_max)
        virtual = advance_belief(virtual, action, x, tau_max)
    return gap


def perturbed_power_gap(
    chain: BirthDeathChain,
    chain_prime: BirthDeathChain,
    v: Sequence[float] | ProbVector,
    tau: int,
) -> float:
    """Max-norm distance between ``v P^tau`` and ``v P'^tau``"""
    v_array = np.asarray(v, dtype=np.float64)
    left = v_array @ np.linalg.matrix_power(chain.matrix, tau)
    right = v_array @ np.linalg.matrix_power(chain_prime.matrix, tau)
    return float(np.max(np.abs(left - right)))

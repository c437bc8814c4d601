import math

import numpy as np
import pytest

from rail.restless import library
from rail.restless.belief_mdp import MyopicPolicy, PolicyTable, initial_belief
from rail.restless.chain_core import BirthDeathChain, RestlessInstance, rows_dominate
from rail.restless.env import Observation, RestlessEnv, RewardMode
from rail.restless.exceptions import EmptyGridError, InsufficientDataError, NonConvergenceError
from rail.restless.policy import (
    FixedArmPolicy,
    OracleReplayPolicy,
    RestlessPolicy,
    oracle_tau_max,
    solve_oracle,
)
from rail.restless.policy_factory import (
    RestlessPolicyFactory,
    builtin_policy,
    builtin_policy_names,
    resolve_policy,
)
from rail.restless.restless_ucb import (
    ConfidenceRadius,
    EmpiricalStats,
    RestlessUCBPolicy,
    build_optimistic_instance,
    empirical_estimates,
    estimates_within,
    exploration_schedule,
    run_exploration,
)
from rail.restless.thompson import NINE_POINT_GRID, ThompsonSamplingPolicy, grid_chains


def play(policy: RestlessPolicy, instance: RestlessInstance, horizon: int, seed: int) -> list[int]:
    env = RestlessEnv(instance, seed)
    policy.reset(instance.num_arms, instance.num_states, horizon, seed + 1, instance)
    actions = []
    for t in range(horizon):
        action = policy.choose(t)
        actions.append(action)
        policy.observe(env.step(action))
    return actions


def play_rewards(
    policy: RestlessPolicy, instance: RestlessInstance, horizon: int, seed: int
) -> np.ndarray:
    env = RestlessEnv(instance, seed, reward_mode=RewardMode.deterministic)
    policy.reset(instance.num_arms, instance.num_states, horizon, seed + 1, instance)
    rewards = np.zeros(horizon)
    for t in range(horizon):
        obs = env.step(policy.choose(t))
        rewards[t] = obs.reward
        policy.observe(obs)
    return rewards


def test_fixed_arm(paper_1: RestlessInstance) -> None:
    policy = FixedArmPolicy(name="fixed", arm=2)
    assert set(play(policy, paper_1, 100, 0)) == {2}
    assert policy.t == 100
    assert policy.summary() == {}

    idle = FixedArmPolicy(name="idle", arm=0)
    assert set(play(idle, paper_1, 10, 0)) == {0}

    with pytest.raises(ValueError):
        FixedArmPolicy(name="bad", arm=3).reset(2, 2, 10, 0, paper_1)


def test_solve_oracle(paper_1: RestlessInstance) -> None:
    table = solve_oracle(paper_1)
    assert isinstance(table, PolicyTable)
    assert solve_oracle(paper_1) is table
    assert oracle_tau_max(table) == table.tau_max

    assert isinstance(solve_oracle(paper_1, "myopic"), MyopicPolicy)
    assert isinstance(solve_oracle(paper_1, "rvi", state_budget=5), MyopicPolicy)

    with pytest.raises(NonConvergenceError) as capped:
        solve_oracle(paper_1, max_iterations=2)
    assert capped.value.iterations == 2
    assert capped.value.span > 1e-9

    with pytest.raises(KeyError):
        solve_oracle(paper_1, "simplex")


def test_oracle_replay(paper_1: RestlessInstance) -> None:
    policy = OracleReplayPolicy(name="replay")
    with pytest.raises(ValueError):
        policy.reset(2, 2, 10, 0)

    policy.reset(2, 2, 10, 0, paper_1)
    assert isinstance(policy.oracle, PolicyTable)
    assert policy.belief == initial_belief(paper_1)
    assert policy.choose(0) == policy.choose(0) == policy.oracle(initial_belief(paper_1))
    assert policy.summary()["oracle_gain"] == pytest.approx(policy.oracle.gain)

    myopic = policy.spawn(oracle="myopic", name="replay_myopic")
    play(myopic, paper_1, 50, 2)
    assert isinstance(myopic.oracle, MyopicPolicy)
    assert myopic.summary() == {}


def test_oracle_replay_regret(paper_1: RestlessInstance) -> None:
    horizon = 20_000
    gain = solve_oracle(paper_1).gain
    replay_regret = []
    fixed_regret = []
    for seed in range(6):
        rewards = play_rewards(OracleReplayPolicy(name="replay"), paper_1, horizon, seed)
        replay_regret.append(horizon * gain - rewards.sum())
        rewards = play_rewards(FixedArmPolicy(name="fixed", arm=1), paper_1, horizon, seed)
        fixed_regret.append(horizon * gain - rewards.sum())

    mean = np.mean(replay_regret)
    stderr = np.std(replay_regret, ddof=1) / math.sqrt(len(replay_regret))
    assert abs(mean) < 4.0 * stderr + 20.0
    # the best fixed arm loses about 0.056 per step
    assert np.mean(fixed_regret) - mean > 500.0


def test_empirical_stats() -> None:
    stats = EmpiricalStats(2, 2)
    stats.record(Observation(1, 1, 0.0))
    stats.record(Observation(1, 0, 1.0))
    assert stats.visits[0, 1] == 1
    assert stats.transitions[0, 1, 0] == 1
    assert stats.reward_sum[0, 1] == 0.0

    # switching arms breaks the pending visit
    stats.record(Observation(2, 1, 0.0))
    stats.record(Observation(1, 0, 1.0))
    assert stats.visits[0, 0] == 0
    assert stats.completed(2).sum() == 0
    assert stats.last_state.tolist() == [0, 1]

    stats.record(Observation(0, None, 0.0))
    stats.record(Observation(1, 1, 0.0))
    assert stats.visits[0, 0] == 0

    single = EmpiricalStats(1, 1)
    single.record(Observation(1, 0, 1.0))
    assert single.visits[0, 0] == 1


def test_empirical_estimates() -> None:
    stats = EmpiricalStats(1, 2)
    with pytest.raises(InsufficientDataError):
        empirical_estimates(stats)

    stats.visits[0] = [10, 10]
    stats.transitions[0] = [[7, 3], [2, 8]]
    stats.reward_sum[0] = [6.0, 1.0]
    stats.reward_count[0] = [10, 10]
    chains, rewards = empirical_estimates(stats)
    assert chains[0].matrix[0] == pytest.approx([0.7, 0.3])
    assert chains[0].matrix[1] == pytest.approx([0.2, 0.8])
    assert rewards[0] == pytest.approx([0.6, 0.1])


def test_exploration_schedule() -> None:
    stats = EmpiricalStats(2, 2)
    assert exploration_schedule(stats, 1, 3) == (1, False)
    stats.visits[0] = [3, 4]
    assert exploration_schedule(stats, 1, 3) == (2, False)
    stats.visits[1] = [5, 3]
    assert exploration_schedule(stats, 2, 3).finished

    with pytest.raises(ValueError):
        exploration_schedule(stats, 1, 0)


def test_confidence_radius() -> None:
    radius = ConfidenceRadius(1_000_000)
    assert radius.m == 10_000
    assert radius.rad == pytest.approx(0.026283, abs=1e-6)
    assert radius.rad == pytest.approx(math.sqrt(math.log(1e6) / 2e4))

    assert ConfidenceRadius(1000, m_target=5).m == 5
    assert ConfidenceRadius(1, m_exponent=0.5).m == 1
    assert ConfidenceRadius(100, log_base=10.0).rad == pytest.approx(math.sqrt(2.0 / 44.0))

    with pytest.raises(ValueError):
        ConfidenceRadius(0)


def test_build_optimistic_instance() -> None:
    rad = math.sqrt(math.log(1e6) / 2e4)
    chains = [BirthDeathChain([0.3], [0.2])]
    rewards = np.array([[0.99, 0.5]])
    optimistic = build_optimistic_instance(chains, rewards, rad, [1])
    matrix = optimistic.arm(1).chain.matrix
    assert matrix[0] == pytest.approx([0.72628, 0.27372], abs=1e-5)
    assert matrix[1] == pytest.approx([0.22628, 0.77372], abs=1e-5)
    assert optimistic.arm(1).rewards == pytest.approx([1.0, 0.5 + rad])
    assert optimistic.initial_states == (1,)
    assert rows_dominate(optimistic.arm(1).chain, chains[0])

    with pytest.raises(ValueError):
        build_optimistic_instance(chains, rewards, -0.1, [1])


def test_estimates_within(paper_1: RestlessInstance) -> None:
    chains = [arm_.chain for arm_ in paper_1.arms]
    rewards = paper_1.reward_matrix()
    assert estimates_within(paper_1, chains, rewards, 0.0)
    assert not estimates_within(paper_1, chains, rewards + 0.1, 0.05)
    shifted = [BirthDeathChain([0.4], [0.2]), chains[1]]
    assert not estimates_within(paper_1, shifted, rewards, 0.05)
    assert estimates_within(paper_1, shifted, rewards, 0.11)


def test_run_exploration(paper_1: RestlessInstance) -> None:
    stats, steps = run_exploration(paper_1, 50, 3, 100_000)
    assert steps < 100_000
    assert int(stats.visits.min()) >= 50
    assert stats.visits.sum() <= steps

    stats, steps = run_exploration(paper_1, 1_000_000, 3, 100)
    assert steps == 100


def test_exploration_length(paper_1: RestlessInstance) -> None:
    m = 2000
    stationary = [arm_.chain.stationary_distribution() for arm_ in paper_1.arms]
    # each arm runs until its rarest state has m completed visits
    expected = sum(float(np.max(m / d_)) for d_ in stationary)
    upper = sum(float(np.sum(m / d_)) for d_ in stationary)
    assert expected == pytest.approx(4.75 * m, rel=1e-3)

    lengths = [run_exploration(paper_1, m, seed, 100_000)[1] for seed in range(5)]
    assert np.mean(lengths) == pytest.approx(expected, rel=0.1)
    assert max(lengths) < upper


def test_restless_ucb(paper_1: RestlessInstance) -> None:
    policy = RestlessUCBPolicy(name="ucb", oracle="myopic", m_target=20)
    actions = play(policy, paper_1, 3000, 4)
    assert not policy.exploring
    length = policy.exploration_length
    assert 0 < length < 3000
    explore = actions[:length]
    assert explore == sorted(explore)
    assert set(explore) == {1, 2}
    assert int(policy.stats.visits.min()) >= 20

    optimistic = policy.optimistic_instance
    assert optimistic is not None
    chains, _ = empirical_estimates(policy.stats)
    for i, chain_ in enumerate(chains):
        assert rows_dominate(optimistic.arm(i + 1).chain, chain_)
    assert optimistic.initial_states == tuple(policy.stats.last_state.tolist())

    summary = policy.summary()
    assert summary["exploration_length"] == length
    assert summary["m"] == 20
    assert "optimistic_gain" not in summary
    assert policy.choose(3000) == policy.choose(3000)

    short = RestlessUCBPolicy(name="short", oracle="myopic", m_target=1000)
    play(short, paper_1, 50, 4)
    assert short.exploring
    assert short.exploration_length == 50

    exact = RestlessUCBPolicy(name="exact", m_target=10)
    play(exact, paper_1, 2000, 5)
    assert "optimistic_gain" in exact.summary()


def test_restless_ucb_exploit_reward(paper_1: RestlessInstance) -> None:
    gain = solve_oracle(paper_1).gain
    exploit_means = []
    for seed in range(3):
        policy = RestlessUCBPolicy(name="ucb", m_target=5000)
        rewards = play_rewards(policy, paper_1, 100_000, seed)
        assert not policy.exploring
        exploit_means.append(rewards[policy.exploration_length :].mean())
    assert np.mean(exploit_means) == pytest.approx(gain, abs=0.02)


def test_grid_chains() -> None:
    chains = grid_chains([0.3, 0.7])
    assert len(chains) == 4
    assert chains[1].matrix[0] == pytest.approx([0.3, 0.7])
    assert chains[1].matrix[1] == pytest.approx([0.3, 0.7])
    with pytest.raises(EmptyGridError):
        grid_chains([])


def test_thompson_posterior(paper_1: RestlessInstance) -> None:
    grid = [0.5, 0.6, 0.7, 0.8]
    policy = ThompsonSamplingPolicy(name="ts", grid=grid, oracle="myopic")
    policy.reset(2, 2, 100_000, 0, paper_1)
    assert policy.posterior(1) == pytest.approx(np.full(16, 1.0 / 16))

    rng = np.random.default_rng(11)
    matrix = paper_1.arm(1).chain.matrix
    state = 1
    for _ in range(2000):
        state = int(rng.choice(2, p=matrix[state]))
        policy.observe(Observation(1, state, 0.0))
    assert int(np.argmax(policy.posterior(1))) == 2 * len(grid) + 3
    assert policy.posterior(1).max() > 0.9
    assert policy.posterior(2) == pytest.approx(np.full(16, 1.0 / 16))


def test_thompson_nine_point_posterior(paper_1: RestlessInstance) -> None:
    policy = ThompsonSamplingPolicy(name="ts9", oracle="myopic")
    policy.reset(2, 2, 100_000, 0, paper_1)
    rng = np.random.default_rng(23)
    for arm in (1, 2):
        matrix = paper_1.arm(arm).chain.matrix
        state = 1
        for _ in range(10_000):
            state = int(rng.choice(2, p=matrix[state]))
            policy.observe(Observation(arm, state, 0.0))

    size = len(NINE_POINT_GRID)
    # arm 1 stays at (0.7, 0.8), arm 2 at (0.5, 0.6)
    assert policy.posterior(1)[6 * size + 7] > 0.99
    assert policy.posterior(2)[4 * size + 5] > 0.99


def test_thompson_episodes(paper_1: RestlessInstance) -> None:
    policy = ThompsonSamplingPolicy(
        name="ts", grid=[0.3, 0.7], oracle="myopic", first_episode_length=100
    )
    play(policy, paper_1, 1000, 6)
    summary = policy.summary()
    assert summary["episodes"] == 4
    assert 1 <= summary["distinct_solves"] <= 4
    assert len(policy.sampled) == 2
    assert len(policy.candidates(1)) == 4


def test_thompson_rewards(paper_1: RestlessInstance) -> None:
    policy = ThompsonSamplingPolicy(name="ts", grid=[0.3, 0.7], oracle="myopic", known_rewards=False)
    policy.reset(2, 2, 1000, 0)
    for _ in range(50):
        policy.observe(Observation(1, 0, 1.0))
    means = policy.reward_posterior_means()
    assert means[0, 0] > 0.9
    assert means[1, 1] == pytest.approx(0.5)

    with pytest.raises(ValueError):
        ThompsonSamplingPolicy(name="ts").reset(2, 2, 10, 0)


def test_thompson_candidates(paper_1: RestlessInstance) -> None:
    per_arm = [
        [dict(up=[0.2, 0.3], down=[0.3, 0.2])],
        [dict(up=[0.3, 0.3], down=[0.2, 0.2]), dict(up=[0.1, 0.1], down=[0.1, 0.1])],
    ]
    policy = ThompsonSamplingPolicy(name="ts", candidate_chains=per_arm, oracle="myopic")
    library.load_yaml("tests/ci_instances.yaml")
    instance = library.get_instance("ci_three_state").resolve()
    play(policy, instance, 200, 0)
    assert len(policy.candidates(2)) == 2

    grid_only = ThompsonSamplingPolicy(name="ts", oracle="myopic")
    with pytest.raises(ValueError):
        grid_only.reset(2, 3, 10, 0, instance)

    wrong_size = ThompsonSamplingPolicy(
        name="ts", candidate_chains=[dict(up=[0.2], down=[0.2])], oracle="myopic"
    )
    with pytest.raises(ValueError):
        wrong_size.reset(2, 3, 10, 0, instance)

    wrong_arms = ThompsonSamplingPolicy(name="ts", candidate_chains=[per_arm[0]], oracle="myopic")
    with pytest.raises(ValueError):
        wrong_arms.reset(2, 3, 10, 0, instance)


def test_builtin_policies() -> None:
    assert "restless-ucb" in builtin_policy_names()
    assert isinstance(builtin_policy("restless-ucb"), RestlessUCBPolicy)
    assert builtin_policy("restless-ucb-myopic").config.oracle == "myopic"
    assert builtin_policy("ts-4").config.grid == [0.2, 0.4, 0.6, 0.8]
    assert builtin_policy("fixed-arm-3").config.arm == 3

    shared = builtin_policy("ts-9")
    shared.config.grid.append(0.95)
    plain = ThompsonSamplingPolicy(name="plain")
    plain.config.grid.append(0.99)
    assert len(NINE_POINT_GRID) == 9
    assert builtin_policy("ts-9").config.grid == NINE_POINT_GRID
    with pytest.raises(KeyError):
        builtin_policy("fixed-arm-x")
    with pytest.raises(KeyError):
        resolve_policy("nope")


def test_policy_factory() -> None:
    library.load_yaml("tests/ci_policies.yaml")
    assert RestlessPolicyFactory.get_policy_names() == ["ci_ucb_short", "ci_ts_coarse", "ci_fixed_2"]
    stored = RestlessPolicyFactory.get_policy("ci_ucb_short")
    fresh = resolve_policy("ci_ucb_short")
    assert fresh is not stored
    assert isinstance(fresh, RestlessUCBPolicy)
    assert fresh.config.m_target == 5
    assert isinstance(resolve_policy("ci_ts_coarse"), ThompsonSamplingPolicy)

    yaml_dict = fresh.to_yaml_dict()
    assert yaml_dict["Policy"]["class_name"] == "rail.restless.restless_ucb.RestlessUCBPolicy"
    assert fresh.spawn(m_target=7).config.m_target == 7

    with pytest.raises(KeyError):
        RestlessPolicyFactory.get_policy("nope")

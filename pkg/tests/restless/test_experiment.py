import math
import os

import numpy as np
import pytest
import yaml

from rail.restless import arrow_utils, library
from rail.restless.benchmark import timing_benchmark
from rail.restless.chain_core import Arm, BirthDeathChain, RestlessInstance
from rail.restless.env import RewardMode
from rail.restless.exceptions import InvalidInstanceError, ReplicationError
from rail.restless.execution import RunMode, handle_replications
from rail.restless.experiment import (
    ExperimentConfig,
    ExperimentFactory,
    ExperimentResult,
    GainCertificate,
    RegretTrace,
    checkpoint_grid,
    compare_results,
    default_fit_steps,
    load_experiment_file,
    optimal_gain,
    play_replication,
    run_comparison,
    run_experiment,
)
from rail.restless.instance_factory import RestlessInstanceFactory, RestlessInstanceHolder
from rail.restless.policy import FixedArmPolicy


def test_checkpoint_grid() -> None:
    assert checkpoint_grid(1000, 1).tolist() == [0, 1, 10, 100, 1000]
    assert checkpoint_grid(1500, 1).tolist() == [0, 1, 10, 100, 1000, 1500]

    grid = checkpoint_grid(5)
    assert grid[0] == 0 and grid[1] == 1 and grid[-1] == 5
    assert np.all(np.diff(grid) > 0)

    with pytest.raises(ValueError):
        checkpoint_grid(0)
    with pytest.raises(ValueError):
        checkpoint_grid(10, 0)


def test_default_fit_steps() -> None:
    assert default_fit_steps(500_000) == [62_500, 125_000, 250_000, 500_000]
    assert default_fit_steps(1000, 2) == [500, 1000]
    assert default_fit_steps(2) == [1, 2]
    with pytest.raises(ValueError):
        default_fit_steps(0)
    with pytest.raises(ValueError):
        default_fit_steps(1000, 1)


def test_regret_exponent() -> None:
    checkpoints = np.array([0, 125, 250, 500, 1000])
    steps = checkpoints[1:].tolist()
    t = checkpoints.astype(float)

    sublinear = RegretTrace(checkpoints, (0.5 * t - 3.0 * t ** (2.0 / 3.0))[np.newaxis, :], 0.5)
    assert sublinear.regret_exponent(steps) == pytest.approx(2.0 / 3.0)
    assert sublinear.mean_regret_at([1000]) == pytest.approx([300.0])

    idle = RegretTrace(checkpoints, np.zeros((2, 5)), 0.5)
    assert idle.regret_exponent(steps) == pytest.approx(1.0)
    assert idle.regret_exponent([375, 750]) == pytest.approx(1.0)
    assert idle.regret_rate().tolist() == [0.0, 0.5, 0.5, 0.5, 0.5]

    ahead = RegretTrace(checkpoints, (0.6 * t)[np.newaxis, :], 0.5)
    assert math.isnan(ahead.regret_exponent(steps))

    with pytest.raises(ValueError):
        idle.regret_exponent([1000])
    with pytest.raises(ValueError):
        idle.regret_exponent([0, 1000])
    with pytest.raises(ValueError):
        idle.regret_exponent([500, 2000])


def test_regret_trace(tmp_path) -> None:  # type: ignore[no-untyped-def]
    checkpoints = np.array([0, 10, 20])
    trace = RegretTrace(checkpoints, np.array([[0.0, 5.0, 10.0], [0.0, 3.0, 8.0]]), 0.5)
    assert trace.num_reps == 2
    assert trace.cum_regret.tolist() == [[0.0, 0.0, 0.0], [0.0, 2.0, 2.0]]
    assert trace.mean_regret().tolist() == [0.0, 1.0, 1.0]
    assert trace.std_regret() == pytest.approx([0.0, math.sqrt(2.0), math.sqrt(2.0)])
    assert trace.mean_reward().tolist() == [0.0, 4.0, 9.0]

    # regret identity: reference minus reward
    reference = trace.checkpoints * trace.optimal_gain
    assert np.allclose(trace.cum_regret + trace.cum_reward, reference[np.newaxis, :])

    columns = trace.replication_columns()
    assert columns["t"].tolist() == [0, 0, 10, 10, 20, 20]
    assert columns["rep"].tolist() == [0, 1, 0, 1, 0, 1]
    assert columns["cum_reward"].tolist() == [0.0, 0.0, 5.0, 3.0, 10.0, 8.0]

    paths = trace.write_csvs(str(tmp_path), "toy")
    aggregate = arrow_utils.read_csv_table(paths["aggregate"])
    assert list(aggregate.keys()) == ["t", "mean_reward", "mean_regret", "std_regret", "n_reps"]
    assert aggregate["n_reps"].tolist() == [2, 2, 2]
    assert aggregate["std_regret"] == pytest.approx(trace.std_regret())
    reps = arrow_utils.read_csv_table(paths["reps"])
    assert list(reps.keys()) == ["t", "rep", "cum_reward", "cum_regret"]

    approx_trace = RegretTrace(checkpoints, np.array([[0.0, 5.0, 10.0]]), 0.5, 0.5)
    assert approx_trace.cum_regret.tolist() == [[0.0, -2.5, -5.0]]
    assert approx_trace.std_regret().tolist() == [0.0, 0.0, 0.0]


def test_play_replication(paper_1: RestlessInstance) -> None:
    policy_dict = FixedArmPolicy(name="fixed", arm=1).to_yaml_dict()["Policy"]
    checkpoints = checkpoint_grid(200, 5)
    first = play_replication(
        paper_1, policy_dict, 200, 10, checkpoints, RewardMode.deterministic, 0
    )
    again = play_replication(
        paper_1, policy_dict, 200, 10, checkpoints, RewardMode.deterministic, 0
    )
    assert first.rep == 0
    assert first.cum_reward[0] == 0.0
    assert np.all(np.diff(first.cum_reward) >= 0.0)
    assert first.cum_reward[-1] <= 200.0
    assert np.array_equal(first.cum_reward, again.cum_reward)
    assert first.wall_clock >= 0.0

    bad_dict = dict(policy_dict, arm=5)
    with pytest.raises(ReplicationError) as excinfo:
        play_replication(paper_1, bad_dict, 200, 10, checkpoints, RewardMode.bernoulli, 3)
    assert excinfo.value.rep == 3


def test_optimal_gain(paper_1: RestlessInstance) -> None:
    certificate = optimal_gain(paper_1)
    assert certificate.method == "rvi"
    assert certificate.value > 0.4
    assert certificate.tau_max == 20
    assert certificate.num_belief_states > 0
    assert certificate.to_dict()["truncation_bound"] == pytest.approx(40.0 * 0.5**20)

    fallback = optimal_gain(paper_1, state_budget=10, mc_horizon=5000, mc_reps=2, seed=1)
    assert fallback.method == "monte-carlo"
    assert fallback.stderr >= 0.0
    assert 0.35 <= fallback.value <= certificate.value + 0.05


def test_experiment_config() -> None:
    with pytest.raises(ValueError):
        ExperimentConfig(name="bad", instance="paper-1", horizon=0)
    with pytest.raises(ValueError):
        ExperimentConfig(name="bad", instance="paper-1", replications=0)
    with pytest.raises(ValueError):
        ExperimentConfig(name="bad", instance="paper-1", approximation_ratio=1.5)

    with pytest.raises(ValueError):
        ExperimentConfig(name="bad", instance="paper-1", horizon=100, fit_steps=[10])
    with pytest.raises(ValueError):
        ExperimentConfig(name="bad", instance="paper-1", horizon=100, fit_steps=[0, 10])
    with pytest.raises(ValueError):
        ExperimentConfig(name="bad", instance="paper-1", horizon=100, fit_steps=[10, 200])
    with pytest.raises(ValueError):
        ExperimentConfig(name="bad", instance="paper-1", expected_growth="quadratic")
    assert ExperimentConfig(name="fit", instance="paper-1", horizon=800).fit_steps() == [
        100,
        200,
        400,
        800,
    ]
    assert ExperimentConfig(
        name="fit", instance="paper-1", horizon=800, fit_steps=[40, 80]
    ).fit_steps() == [40, 80]

    config = ExperimentConfig(
        name="ucb", instance="paper-1", policy="restless-ucb", oracle="myopic", tau_max=30
    )
    assert repr(config) == "ucb: restless-ucb on paper-1"
    policy = config.make_policy()
    assert policy.config.oracle == "myopic"
    assert policy.config.tau_max == 30
    assert config.resolve_instance().num_arms == 2
    assert config.reward_mode() == RewardMode.bernoulli
    assert config.run_mode() == RunMode.serial

    fixed = ExperimentConfig(name="fixed", instance="paper-1", policy="fixed-arm-1", oracle="myopic")
    assert fixed.make_policy().config.arm == 1


def test_load_experiment_file(tmp_path) -> None:  # type: ignore[no-untyped-def]
    first = load_experiment_file("tests/ci_experiment.yaml")
    assert first.config.name == "ci_ucb"
    assert "ci_ucb_short" in library.get_policy_names()
    assert load_experiment_file("tests/ci_experiment.yaml", "ci_fixed").config.horizon == 1000
    with pytest.raises(KeyError):
        load_experiment_file("tests/ci_experiment.yaml", "nope")

    single = tmp_path / "single.yaml"
    single.write_text(
        yaml.safe_dump(dict(Experiment=dict(name="one", instance="paper-2", horizon=50)))
    )
    assert load_experiment_file(str(single)).config.instance == "paper-2"

    empty = tmp_path / "empty.yaml"
    empty.write_text("Experiments: []\n")
    with pytest.raises(KeyError):
        load_experiment_file(str(empty))


def test_experiment_factory() -> None:
    library.load_yaml("tests/ci_experiment.yaml")
    assert ExperimentFactory.get_experiment_names() == ["ci_ucb", "ci_fixed"]
    assert ExperimentFactory.get_experiment("ci_ucb").config.replications == 3
    ExperimentFactory.add_experiment(ExperimentConfig(name="extra", instance="paper-2"))
    assert "extra" in ExperimentFactory.get_experiments()
    with pytest.raises(KeyError):
        ExperimentFactory.get_experiment("nope")


def test_run_experiment(temp_area: str) -> None:
    config = load_experiment_file("tests/ci_experiment.yaml", "ci_fixed")
    result = run_experiment(config)
    for path_ in result.paths.values():
        assert os.path.exists(path_)
    assert result.paths["summary"].startswith(temp_area)
    assert result.certificate.method == "rvi"
    assert result.trace.num_reps == 2
    assert result.summary["final_mean_regret"] == pytest.approx(result.trace.mean_regret()[-1])

    with open(result.paths["summary"], encoding="utf-8") as fin:
        summary = yaml.safe_load(fin)
    assert summary["format_version"] == 1
    assert summary["policy"]["arm"] == 2
    assert len(summary["wall_clock"]) == 2

    aggregate = arrow_utils.read_csv_table(result.paths["aggregate"])
    assert aggregate["t"][-1] == 1000

    again = run_experiment(config)
    assert np.array_equal(result.trace.cum_reward, again.trace.cum_reward)


def test_run_experiment_ucb(temp_area: str) -> None:
    config = load_experiment_file("tests/ci_experiment.yaml", "ci_ucb")
    serial = run_experiment(config)
    assert serial.trace.checkpoints.tolist() == checkpoint_grid(2000, 5).tolist()
    assert all("exploration_length" in summary_ for summary_ in serial.summary["policy_summaries"])

    pooled_config = ExperimentConfig(**dict(config.config.to_dict(), run_mode="pool", num_workers=2))
    pooled = run_experiment(pooled_config)
    assert np.array_equal(serial.trace.cum_reward, pooled.trace.cum_reward)
    assert os.path.dirname(pooled.paths["reps"]) == os.path.join(temp_area, "experiments")


def test_run_experiment_invalid() -> None:
    broken = RestlessInstance(
        [Arm(BirthDeathChain([0.7], [0.5]), [1.0, 0.0]), Arm(BirthDeathChain([0.3], [0.2]), [0.5, 0.0])],
        [1, 1],
    )
    RestlessInstanceFactory.add_instance(RestlessInstanceHolder.from_instance("broken", broken))
    config = ExperimentConfig(name="broken", instance="broken", horizon=10, replications=1)
    with pytest.raises(InvalidInstanceError):
        run_experiment(config)


def test_handle_replications() -> None:
    assert handle_replications(RunMode.serial, abs, [-2, -1, 0]) == [2, 1, 0]
    assert handle_replications(RunMode.pool, math.factorial, [4, 0, 3], num_workers=2) == [24, 1, 6]


def test_timing_benchmark(temp_area: str) -> None:
    output = os.path.join(temp_area, "bench", "timing.csv")
    columns = timing_benchmark([2, 3], 200, policy="fixed-arm-1", reps=2, output=output)
    assert columns["num_arms"].tolist() == [2, 3]
    assert columns["n_reps"].tolist() == [2, 2]
    assert np.all(columns["mean_seconds"] > 0.0)
    table = arrow_utils.read_csv_table(output)
    assert table["num_arms"].tolist() == [2, 3]

    ucb = timing_benchmark([2], 300, policy="restless-ucb", reps=1)
    assert ucb["std_seconds"].tolist() == [0.0]


def synthetic_result(
    name: str, regret: np.ndarray, expected_growth: str = "", baseline: bool = True
) -> ExperimentResult:
    checkpoints = np.array([0, 125, 250, 500, 1000])
    trace = RegretTrace(checkpoints, (0.5 * checkpoints - regret)[np.newaxis, :], 0.5)
    steps = checkpoints[1:].tolist()
    summary = dict(
        horizon=1000,
        policy=dict(name=name),
        expected_growth=expected_growth,
        baseline=baseline,
        final_mean_regret=float(trace.mean_regret()[-1]),
        final_std_regret=0.0,
        final_regret_rate=float(trace.regret_rate()[-1]),
        regret_exponent=trace.regret_exponent(steps),
    )
    return ExperimentResult(trace, GainCertificate(0.5, "rvi"), {}, summary)


def test_compare_results() -> None:
    t = np.array([0, 125, 250, 500, 1000], dtype=float)
    results = dict(
        ucb=synthetic_result("restless-ucb", 3.0 * t ** (2.0 / 3.0), "sublinear"),
        ts9=synthetic_result("ts-9", 2.0 * np.sqrt(t), "sublinear", baseline=False),
        ts4=synthetic_result("ts-4", 0.5 * t, "linear"),
        fixed1=synthetic_result("fixed-arm-1", 0.4 * t, "linear"),
    )
    summary = compare_results(results, "ucb")
    assert summary["passed"]
    assert summary["horizon"] == 1000
    assert summary["ordering"] == ["ts9", "ucb", "fixed1", "ts4"]
    assert summary["policies"]["ucb"]["regret_exponent"] == pytest.approx(2.0 / 3.0)
    assert summary["policies"]["ucb"]["growth"] == "sublinear"
    assert summary["policies"]["ts4"]["growth"] == "linear"
    assert summary["policies"]["ts9"]["policy"] == "ts-9"
    assert summary["learner_below"] == dict(ts4=True, fixed1=True)
    assert summary["growth_as_expected"] == dict(ucb=True, ts9=True, ts4=True, fixed1=True)

    narrow = compare_results(results, "ucb", exponent_range=(0.4, 0.6))
    assert not narrow["learner_exponent_in_range"]
    assert not narrow["passed"]

    mislabelled = dict(results, ts4=synthetic_result("ts-4", 0.5 * t, "sublinear"))
    assert not compare_results(mislabelled, "ucb")["passed"]

    beaten = dict(results, fixed1=synthetic_result("fixed-arm-1", 0.1 * t, "linear"))
    below = compare_results(beaten, "ucb")
    assert below["learner_below"]["fixed1"] is False
    assert not below["passed"]

    with pytest.raises(KeyError):
        compare_results(results, "nope")
    longer = synthetic_result("fixed-arm-2", 0.3 * t)
    longer.summary["horizon"] = 2000
    with pytest.raises(ValueError):
        compare_results(dict(results, fixed2=longer), "ucb")


def test_run_comparison(temp_area: str) -> None:
    library.load_yaml("tests/ci_compare.yaml")
    configs = list(ExperimentFactory.get_experiments().values())
    comparison = run_comparison(configs, "cmp_ucb", name="ci")
    assert os.path.exists(comparison.path)
    assert comparison.path.startswith(temp_area)
    assert sorted(comparison.results) == ["cmp_idle", "cmp_ucb"]

    idle = comparison.summary["policies"]["cmp_idle"]
    assert idle["regret_exponent"] == pytest.approx(1.0)
    assert idle["growth"] == "linear"
    assert comparison.summary["growth_as_expected"] == dict(cmp_idle=True)
    assert comparison.summary["learner_below"] == dict(cmp_idle=True)
    assert comparison.summary["ordering"] == ["cmp_ucb", "cmp_idle"]

    with open(comparison.path, encoding="utf-8") as fin:
        written = yaml.safe_load(fin)
    assert written["learner"] == "cmp_ucb"
    assert written["policies"]["cmp_idle"]["policy"] == "fixed-arm-0"


def test_regret_acceptance_file() -> None:
    library.load_yaml("tests/regret_acceptance.yaml")
    experiments = ExperimentFactory.get_experiments()
    assert list(experiments) == ["ucb", "ts9", "ts4", "fixed1", "fixed2"]
    assert {config_.config.horizon for config_ in experiments.values()} == {500_000}
    assert experiments["ts9"].config.baseline is False
    assert experiments["ucb"].fit_steps() == [62_500, 125_000, 250_000, 500_000]

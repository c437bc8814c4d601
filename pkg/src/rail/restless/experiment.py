"""Regret experiments against the offline optimum"""

from __future__ import annotations

import functools
import os
import time
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np
import yaml
from ceci.config import StageParameter
from numpy.typing import NDArray
from rail.core.configurable import Configurable
from rail.core.factory_mixin import RailFactoryMixin

from . import arrow_utils
from .belief_mdp import (
    DEFAULT_STATE_BUDGET,
    ConstantPolicy,
    MyopicPolicy,
    default_tau_max,
    policy_gain,
    solve_instance,
    truncation_bound,
)
from .chain_core import RestlessInstance, validate_assumptions
from .env import RestlessEnv, RewardMode
from .exceptions import (
    InvalidInstanceError,
    ReplicationError,
    StateBudgetExceededError,
)
from .execution import RunMode, handle_replications
from .instance_factory import resolve_instance
from .policy import RestlessPolicy
from .policy_factory import resolve_policy

FORMAT_VERSION = 1

GROWTH_LABELS = ["", "linear", "sublinear"]


class GainCertificate(NamedTuple):
    """Optimal gain of an instance with its certification

    ``method`` is "rvi", with the solver ``epsilon`` and the tau truncation
    bound, or "monte-carlo", with the standard error of the best rollout
    """

    value: float
    method: str
    epsilon: float = 0.0
    truncation_bound: float = 0.0
    stderr: float = 0.0
    tau_max: int = 0
    num_belief_states: int = 0

    def to_dict(self) -> dict[str, Any]:
        return dict(
            value=float(self.value),
            method=self.method,
            epsilon=float(self.epsilon),
            truncation_bound=float(self.truncation_bound),
            stderr=float(self.stderr),
            tau_max=int(self.tau_max),
            num_belief_states=int(self.num_belief_states),
        )


def optimal_gain(
    instance: RestlessInstance,
    tau_max: int = 0,
    epsilon: float = 1e-9,
    state_budget: int = DEFAULT_STATE_BUDGET,
    mc_horizon: int = 1_000_000,
    mc_reps: int = 4,
    seed: int = 0,
) -> GainCertificate:
    """Offline optimum of ``instance``

    The exact solution is used when the belief set fits in ``state_budget``,
    otherwise the best Monte Carlo gain of the myopic rule and of every
    fixed arm
    """
    tau = tau_max or default_tau_max(instance)
    try:
        table = solve_instance(instance, tau_max=tau, epsilon=epsilon, state_budget=state_budget)
        return GainCertificate(
            value=table.gain,
            method="rvi",
            epsilon=epsilon,
            truncation_bound=truncation_bound(instance, tau),
            tau_max=tau,
            num_belief_states=len(table),
        )
    except StateBudgetExceededError as msg:
        print(f"Exact optimal gain not available ({msg}), using Monte Carlo rollouts")
    candidates = [MyopicPolicy(instance)] + [
        ConstantPolicy(arm_) for arm_ in range(1, instance.num_arms + 1)
    ]
    best = (-np.inf, 0.0)
    for policy_ in candidates:
        gain = policy_gain(instance, policy_, mc_horizon, mc_reps, seed)
        if gain[0] > best[0]:
            best = gain
    return GainCertificate(value=best[0], method="monte-carlo", stderr=best[1])


def checkpoint_grid(horizon: int, per_decade: int = 20) -> NDArray[np.int64]:
    """Geometric grid of steps ``round(10 ** (k / per_decade))``, plus 0 and ``horizon``"""
    if horizon < 1 or per_decade < 1:
        raise ValueError(f"horizon and per_decade must be >= 1, got {horizon}, {per_decade}")
    points = {0, horizon}
    k = 0
    while True:
        t = int(round(10 ** (k / per_decade)))
        if t > horizon:
            break
        points.add(t)
        k += 1
    return np.array(sorted(points), dtype=np.int64)


def default_fit_steps(horizon: int, num_points: int = 4) -> list[int]:
    """Steps ``horizon / 2**k`` for k = num_points - 1, ..., 0, the doubling
    grid of the log-log regret fit"""
    if horizon < 1 or num_points < 2:
        raise ValueError(f"horizon must be >= 1 and num_points >= 2, got {horizon}, {num_points}")
    steps = sorted({max(int(round(horizon / 2**k)), 1) for k in range(num_points)})
    return steps


class ReplicationResult(NamedTuple):
    """Outcome of one replication"""

    rep: int
    cum_reward: NDArray[np.float64]
    wall_clock: float
    policy_summary: dict[str, Any]


def play_replication(
    instance: RestlessInstance,
    policy_dict: dict[str, Any],
    horizon: int,
    root_seed: int,
    checkpoints: NDArray[np.int64],
    reward_mode: RewardMode,
    rep: int,
) -> ReplicationResult:
    """Play one game and record the cumulative reward at every checkpoint

    The game uses seed ``root_seed + rep``.  Any failure is raised as a
    ReplicationError naming ``rep``.
    """
    seed = root_seed + rep
    start = time.time()
    cum_reward = np.zeros(checkpoints.size)
    try:
        policy = RestlessPolicy.create_from_dict(policy_dict)
        env = RestlessEnv(instance, seed, reward_mode, require_assumptions=False)
        policy.reset(instance.num_arms, instance.num_states, horizon, seed, reference=instance)
        total = 0.0
        idx = int(np.searchsorted(checkpoints, 1))
        for t in range(horizon):
            obs = env.step(policy.choose(t))
            policy.observe(obs)
            total += obs.reward
            if t + 1 == checkpoints[idx]:
                cum_reward[idx] = total
                idx += 1
    except Exception as msg:
        raise ReplicationError(rep, msg) from msg
    return ReplicationResult(rep, cum_reward, time.time() - start, policy.summary())


class RegretTrace:
    """Cumulative rewards and regrets of a set of replications at checkpoints

    Parameters
    ----------
    checkpoints:
        Steps at which the totals are recorded, starting at 0

    cum_reward:
        (replications, checkpoints) cumulative rewards

    optimal_gain:
        Reference gain per step

    approximation_ratio:
        Regret is measured against ``approximation_ratio * t * optimal_gain``
    """

    def __init__(
        self,
        checkpoints: NDArray[np.int64],
        cum_reward: NDArray[np.float64],
        optimal_gain: float,
        approximation_ratio: float = 1.0,
    ) -> None:
        self.checkpoints = checkpoints
        self.cum_reward = cum_reward
        self.optimal_gain = optimal_gain
        self.approximation_ratio = approximation_ratio

    @property
    def num_reps(self) -> int:
        return self.cum_reward.shape[0]

    @property
    def cum_regret(self) -> NDArray[np.float64]:
        reference = self.approximation_ratio * self.checkpoints * self.optimal_gain
        return reference[np.newaxis, :] - self.cum_reward

    def mean_reward(self) -> NDArray[np.float64]:
        return self.cum_reward.mean(axis=0)

    def mean_regret(self) -> NDArray[np.float64]:
        return self.cum_regret.mean(axis=0)

    def std_regret(self) -> NDArray[np.float64]:
        if self.num_reps < 2:
            return np.zeros(self.checkpoints.size)
        return self.cum_regret.std(axis=0, ddof=1)

    def mean_regret_at(self, steps: Sequence[float]) -> NDArray[np.float64]:
        """Mean regret interpolated between checkpoints"""
        return np.interp(np.asarray(steps, dtype=np.float64), self.checkpoints, self.mean_regret())

    def regret_rate(self) -> NDArray[np.float64]:
        """Mean regret per step, 0 at t = 0"""
        steps = self.checkpoints.astype(np.float64)
        return np.divide(
            self.mean_regret(), steps, out=np.zeros(steps.size), where=steps > 0
        )

    def regret_exponent(self, steps: Sequence[float]) -> float:
        """Slope of the least-squares line of log mean regret against log t

        Parameters
        ----------
        steps:
            At least two steps in ``(0, horizon]`` to fit over

        Returns
        -------
        float
            The fitted exponent, nan if the mean regret is not positive at
            every step
        """
        steps_ = np.asarray(steps, dtype=np.float64)
        if steps_.size < 2 or np.any(steps_ <= 0) or np.any(steps_ > self.checkpoints[-1]):
            raise ValueError(
                f"Fit steps must be at least two values in (0, {self.checkpoints[-1]}], "
                f"got {steps_.tolist()}"
            )
        regrets = self.mean_regret_at(steps_)
        if np.any(regrets <= 0.0):
            return float("nan")
        slope, _intercept = np.polyfit(np.log(steps_), np.log(regrets), 1)
        return float(slope)

    def replication_columns(self) -> dict[str, NDArray]:
        """Columns of the per-replication table, ordered by t then rep"""
        num_reps, num_points = self.cum_reward.shape
        return dict(
            t=np.repeat(self.checkpoints, num_reps),
            rep=np.tile(np.arange(num_reps), num_points),
            cum_reward=self.cum_reward.T.ravel().astype(np.float64),
            cum_regret=self.cum_regret.T.ravel().astype(np.float64),
        )

    def aggregate_columns(self) -> dict[str, NDArray]:
        """Columns of the aggregate table"""
        return dict(
            t=self.checkpoints,
            mean_reward=self.mean_reward().astype(np.float64),
            mean_regret=self.mean_regret().astype(np.float64),
            std_regret=self.std_regret().astype(np.float64),
            n_reps=np.full(self.checkpoints.size, self.num_reps, dtype=np.int64),
        )

    def write_csvs(self, output_dir: str, name: str) -> dict[str, str]:
        """Write ``{name}_reps.csv`` and ``{name}_aggregate.csv``"""
        paths = dict(
            reps=os.path.join(output_dir, f"{name}_reps.csv"),
            aggregate=os.path.join(output_dir, f"{name}_aggregate.csv"),
        )
        arrow_utils.write_csv_table(self.replication_columns(), paths["reps"])
        arrow_utils.write_csv_table(self.aggregate_columns(), paths["aggregate"])
        return paths


class ExperimentConfig(Configurable):
    """Configuration of a regret experiment

    Expected usage is that user will define a yaml file with the following
    example syntax:

    .. highlight:: yaml
    .. code-block:: yaml

      Experiment:
        name: paper1_ucb
        Includes:
          - my_policies.yaml
        instance: paper-1
        policy: restless-ucb
        horizon: 500000
        replications: 200
        seed: 1234
        output_dir: results
        run_mode: pool
    """

    config_options: dict[str, StageParameter] = dict(
        name=StageParameter(str, None, fmt="%s", required=True, msg="Experiment name"),
        Includes=StageParameter(list, [], fmt="%s", msg="Library files to load first"),
        instance=StageParameter(
            str, None, fmt="%s", required=True, msg="Instance name or file"
        ),
        policy=StageParameter(str, "restless-ucb", fmt="%s", msg="Policy name"),
        oracle=StageParameter(
            str, "", fmt="%s", msg="Oracle used by the policy, empty for its own"
        ),
        horizon=StageParameter(int, 10000, fmt="%i", msg="Steps per replication"),
        replications=StageParameter(int, 10, fmt="%i", msg="Number of replications"),
        seed=StageParameter(int, 0, fmt="%i", msg="Root seed"),
        tau_max=StageParameter(
            int, 0, fmt="%i", msg="Saturation point of the taus, 0 for automatic"
        ),
        epsilon=StageParameter(float, 1e-9, fmt="%.3e", msg="Solver tolerance"),
        state_budget=StageParameter(
            int, DEFAULT_STATE_BUDGET, fmt="%i", msg="Largest enumerated belief set"
        ),
        output_dir=StageParameter(str, ".", fmt="%s", msg="Where to write outputs"),
        run_mode=StageParameter(str, "serial", fmt="%s", msg="serial or pool"),
        num_workers=StageParameter(int, 0, fmt="%i", msg="Pool size, 0 for all cpus"),
        reward_mode=StageParameter(
            str, "bernoulli", fmt="%s", msg="bernoulli or deterministic rewards"
        ),
        checkpoints_per_decade=StageParameter(
            int, 20, fmt="%i", msg="Density of the checkpoint grid"
        ),
        approximation_ratio=StageParameter(
            float, 1.0, fmt="%.3f", msg="Regret against this fraction of the optimum"
        ),
        gain_horizon=StageParameter(
            int, 1_000_000, fmt="%i", msg="Rollout length of the Monte Carlo optimum"
        ),
        gain_reps=StageParameter(
            int, 4, fmt="%i", msg="Rollouts of the Monte Carlo optimum"
        ),
        fit_steps=StageParameter(
            list, [], fmt="%s", msg="Steps of the log-log regret fit, empty for T/8 to T"
        ),
        expected_growth=StageParameter(
            str, "", fmt="%s", msg="linear, sublinear, or empty, checked by comparisons"
        ),
        baseline=StageParameter(
            bool, True, fmt="%s", msg="Comparisons require the learner to beat this experiment"
        ),
    )
    yaml_tag = "Experiment"

    def __init__(self, **kwargs: Any):
        """C'tor

        Parameters
        ----------
        **kwargs
            Configuration parameters for this ExperimentConfig, must match
            class.config_options data members
        """
        Configurable.__init__(self, **kwargs)
        if self.config.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.config.horizon}")
        if self.config.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.config.replications}")
        if not 0.0 < self.config.approximation_ratio <= 1.0:
            raise ValueError(
                f"approximation_ratio must be in (0, 1], got {self.config.approximation_ratio}"
            )
        if self.config.expected_growth not in GROWTH_LABELS:
            raise ValueError(
                f"expected_growth must be one of {GROWTH_LABELS}, got {self.config.expected_growth}"
            )
        fit_steps = self.config.fit_steps
        if fit_steps and (
            len(fit_steps) < 2 or not all(0 < step_ <= self.config.horizon for step_ in fit_steps)
        ):
            raise ValueError(
                f"fit_steps must be at least two steps in (0, {self.config.horizon}], "
                f"got {fit_steps}"
            )
        # pylint: disable=import-outside-toplevel
        from . import library

        for include_ in self.config.Includes:
            library.load_yaml(os.path.expandvars(include_))

    def __repr__(self) -> str:
        return f"{self.config.name}: {self.config.policy} on {self.config.instance}"

    def resolve_instance(self) -> RestlessInstance:
        """The instance to play"""
        return resolve_instance(self.config.instance)

    def make_policy(self) -> RestlessPolicy:
        """The policy to play, with the experiment's oracle settings applied"""
        policy = resolve_policy(self.config.policy)
        overrides: dict[str, Any] = {}
        if self.config.oracle:
            overrides["oracle"] = self.config.oracle
        if self.config.tau_max:
            overrides["tau_max"] = self.config.tau_max
        overrides = {
            key: val for key, val in overrides.items() if key in policy.config_options
        }
        if overrides:
            return policy.spawn(**overrides)
        return policy

    def reward_mode(self) -> RewardMode:
        return RewardMode[self.config.reward_mode]

    def run_mode(self) -> RunMode:
        return RunMode[self.config.run_mode]

    def fit_steps(self) -> list[int]:
        """Steps of the log-log regret fit"""
        if self.config.fit_steps:
            return [int(step_) for step_ in self.config.fit_steps]
        return default_fit_steps(self.config.horizon)


class ExperimentFactory(RailFactoryMixin):
    """Factory class to keep track of experiments

    Expected usage is that user will define a yaml file with the various
    experiments that they wish to run with the following example syntax:

    .. highlight:: yaml
    .. code-block:: yaml

      Experiments:
        - Experiment:
            name: paper1_ucb
            instance: paper-1
            policy: restless-ucb
            horizon: 500000
            replications: 200
    """

    yaml_tag = "Experiments"

    client_classes = [ExperimentConfig]

    _instance: ExperimentFactory | None = None

    def __init__(self) -> None:
        """C'tor, build an empty ExperimentFactory"""
        RailFactoryMixin.__init__(self)
        self._experiments = self.add_dict(ExperimentConfig)

    @classmethod
    def get_experiments(cls) -> dict[str, ExperimentConfig]:
        """Return the dict of all the experiments"""
        return cls.instance().experiments

    @classmethod
    def get_experiment_names(cls) -> list[str]:
        """Return the names of the experiments"""
        return list(cls.instance().experiments.keys())

    @classmethod
    def get_experiment(cls, name: str) -> ExperimentConfig:
        """Get an experiment by its assigned name

        Parameters
        ----------
        name: str
            Name of the experiment to return

        Returns
        -------
        ExperimentConfig
            Experiment in question
        """
        try:
            return cls.instance().experiments[name]
        except KeyError as msg:
            raise KeyError(
                f"Experiment named {name} not found in ExperimentFactory "
                f"{list(cls.instance().experiments.keys())}"
            ) from msg

    @classmethod
    def add_experiment(cls, experiment: ExperimentConfig) -> None:
        """Add a particular ExperimentConfig to the factory"""
        cls.instance().add_to_dict(experiment)

    @property
    def experiments(self) -> dict[str, ExperimentConfig]:
        """Return the dictionary of experiments"""
        return self._experiments


def load_experiment_file(path: str, name: str | None = None) -> ExperimentConfig:
    """Read an experiment config file

    The file holds a single ``Experiment`` block, or an ``Experiments`` list
    from which ``name`` selects one (default: the first).  Top level
    ``Includes`` are loaded first.
    """
    # pylint: disable=import-outside-toplevel
    from . import library

    with open(os.path.expandvars(path), encoding="utf-8") as fin:
        yaml_data = yaml.safe_load(fin)
    for include_ in yaml_data.get("Includes", []):
        library.load_yaml(os.path.expandvars(include_))
    if ExperimentConfig.yaml_tag in yaml_data:
        return ExperimentConfig(**yaml_data[ExperimentConfig.yaml_tag])
    blocks = [
        item_[ExperimentConfig.yaml_tag]
        for item_ in yaml_data.get(ExperimentFactory.yaml_tag, [])
    ]
    if not blocks:
        raise KeyError(f"No Experiment definition found in {path}")
    if name is None:
        return ExperimentConfig(**blocks[0])
    for block_ in blocks:
        if block_["name"] == name:
            return ExperimentConfig(**block_)
    raise KeyError(
        f"Experiment named {name} not found in {path} {[block_['name'] for block_ in blocks]}"
    )


class ExperimentResult(NamedTuple):
    """What run_experiment produced"""

    trace: RegretTrace
    certificate: GainCertificate
    paths: dict[str, str]
    summary: dict[str, Any]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the replications of an experiment and write its outputs

    Writes ``{name}_reps.csv`` (t, rep, cum_reward, cum_regret),
    ``{name}_aggregate.csv`` (t, mean_reward, mean_regret, std_regret,
    n_reps) and ``{name}_summary.yaml`` to the output directory.

    Raises
    ------
    InvalidInstanceError
        If the instance fails the modelling assumptions

    ReplicationError
        If a replication fails, naming the replication
    """
    instance = config.resolve_instance()
    report = validate_assumptions(instance, 1e-9)
    if not report.passed:
        raise InvalidInstanceError(
            f"Instance {config.config.instance} fails modelling assumptions: {report.to_dict()}"
        )
    policy = config.make_policy()
    certificate = optimal_gain(
        instance,
        tau_max=config.config.tau_max,
        epsilon=config.config.epsilon,
        state_budget=config.config.state_budget,
        mc_horizon=config.config.gain_horizon,
        mc_reps=config.config.gain_reps,
        seed=config.config.seed,
    )
    print(f"{config.config.name}: optimal gain {certificate.value} ({certificate.method})")
    checkpoints = checkpoint_grid(config.config.horizon, config.config.checkpoints_per_decade)
    task = functools.partial(
        play_replication,
        instance,
        policy.to_yaml_dict()[RestlessPolicy.yaml_tag],
        config.config.horizon,
        config.config.seed,
        checkpoints,
        config.reward_mode(),
    )
    results = handle_replications(
        config.run_mode(),
        task,
        list(range(config.config.replications)),
        num_workers=config.config.num_workers,
        label=f"{config.config.name} replications",
    )
    trace = RegretTrace(
        checkpoints,
        np.array([result_.cum_reward for result_ in results]),
        certificate.value,
        config.config.approximation_ratio,
    )
    fit_steps = config.fit_steps()
    output_dir = config.config.output_dir
    paths = trace.write_csvs(output_dir, config.config.name)
    summary = dict(
        format_version=FORMAT_VERSION,
        name=config.config.name,
        expected_growth=config.config.expected_growth,
        baseline=bool(config.config.baseline),
        instance=config.config.instance,
        policy=policy.to_yaml_dict()[RestlessPolicy.yaml_tag],
        horizon=config.config.horizon,
        replications=config.config.replications,
        seed=config.config.seed,
        approximation_ratio=float(config.config.approximation_ratio),
        optimal_gain=certificate.to_dict(),
        final_mean_regret=float(trace.mean_regret()[-1]),
        final_std_regret=float(trace.std_regret()[-1]),
        final_regret_rate=float(trace.regret_rate()[-1]),
        fit_steps=fit_steps,
        regret_exponent=trace.regret_exponent(fit_steps) if len(fit_steps) > 1 else float("nan"),
        wall_clock=[float(result_.wall_clock) for result_ in results],
        policy_summaries=[result_.policy_summary for result_ in results],
        note=f"means and standard deviations over {config.config.replications} replications",
    )
    paths["summary"] = os.path.join(output_dir, f"{config.config.name}_summary.yaml")
    with open(paths["summary"], mode="w", encoding="utf-8") as fout:
        yaml.safe_dump(summary, fout, sort_keys=False)
    return ExperimentResult(trace, certificate, paths, summary)


def _growth(exponent: float, linear_exponent: float) -> str:
    if np.isnan(exponent):
        return "undetermined"
    return "linear" if exponent >= linear_exponent else "sublinear"


def compare_results(
    results: Mapping[str, ExperimentResult],
    learner: str,
    exponent_range: Sequence[float] = (0.4, 0.85),
    linear_exponent: float = 0.9,
) -> dict[str, Any]:
    """Order experiments played on the same horizon by their final regret

    Parameters
    ----------
    results:
        Experiment results by experiment name

    learner:
        Name of the experiment whose regret should grow sublinearly and stay
        below every experiment flagged as a baseline

    exponent_range:
        Accepted range of the learner's fitted regret exponent

    linear_exponent:
        Fitted exponents at or above this are reported as linear growth

    Returns
    -------
    dict[str, Any]
        Per experiment statistics, the ordering, whether the learner's
        exponent is in range and its regret below each baseline, and whether
        each expected growth was observed
    """
    if learner not in results:
        raise KeyError(f"Learner {learner} not in {list(results.keys())}")
    horizons = {result_.summary["horizon"] for result_ in results.values()}
    if len(horizons) != 1:
        raise ValueError(f"Experiments have different horizons {sorted(horizons)}")
    low, high = float(exponent_range[0]), float(exponent_range[1])
    policies: dict[str, dict[str, Any]] = {}
    for name_, result_ in results.items():
        exponent = float(result_.summary["regret_exponent"])
        policies[name_] = dict(
            policy=result_.summary["policy"]["name"],
            final_mean_regret=float(result_.summary["final_mean_regret"]),
            final_std_regret=float(result_.summary["final_std_regret"]),
            final_regret_rate=float(result_.summary["final_regret_rate"]),
            regret_exponent=exponent,
            growth=_growth(exponent, linear_exponent),
            expected_growth=result_.summary.get("expected_growth", ""),
            baseline=bool(result_.summary.get("baseline", True)),
        )
    ordering = sorted(policies, key=lambda name_: policies[name_]["final_mean_regret"])
    learner_regret = policies[learner]["final_mean_regret"]
    learner_below = {
        name_: learner_regret < stats_["final_mean_regret"]
        for name_, stats_ in policies.items()
        if name_ != learner and stats_["baseline"]
    }
    in_range = bool(low <= policies[learner]["regret_exponent"] <= high)
    growth_as_expected = {
        name_: stats_["growth"] == stats_["expected_growth"]
        for name_, stats_ in policies.items()
        if stats_["expected_growth"]
    }
    return dict(
        format_version=FORMAT_VERSION,
        learner=learner,
        horizon=horizons.pop(),
        exponent_range=[low, high],
        linear_exponent=float(linear_exponent),
        policies=policies,
        ordering=ordering,
        learner_exponent_in_range=in_range,
        learner_below=learner_below,
        growth_as_expected=growth_as_expected,
        passed=in_range
        and all(learner_below.values())
        and all(growth_as_expected.values()),
    )


class ComparisonResult(NamedTuple):
    """What run_comparison produced"""

    results: dict[str, ExperimentResult]
    summary: dict[str, Any]
    path: str


def run_comparison(
    configs: Sequence[ExperimentConfig],
    learner: str,
    name: str = "comparison",
    output_dir: str | None = None,
    exponent_range: Sequence[float] = (0.4, 0.85),
    linear_exponent: float = 0.9,
) -> ComparisonResult:
    """Run several experiments and write ``{name}_comparison.yaml``

    The file goes to ``output_dir``, by default the output directory of the
    learner's experiment.  See :py:func:`compare_results` for its content.
    """
    results: dict[str, ExperimentResult] = {}
    for config_ in configs:
        results[config_.config.name] = run_experiment(config_)
    summary = compare_results(results, learner, exponent_range, linear_exponent)
    if output_dir is None:
        output_dir = next(
            config_.config.output_dir for config_ in configs if config_.config.name == learner
        )
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, f"{name}_comparison.yaml")
    with open(path, mode="w", encoding="utf-8") as fout:
        yaml.safe_dump(summary, fout, sort_keys=False)
    return ComparisonResult(results, summary, path)

"""Property suite for the dominance and concentration arguments

Every check produces a :py:class:`CheckResult`; a failing property, or a
check that raises, is recorded as a failed result, never raised.
"""

from __future__ import annotations

import os
import time
from typing import Any, Callable

import numpy as np
import yaml
from ceci.config import StageParameter
from rail.core.configurable import Configurable

from .belief_mdp import PolicyTable, solve_instance
from .chain_core import (
    ASSUMPTION_NAMES,
    Arm,
    BirthDeathChain,
    RestlessInstance,
    lambda_max,
    prefix_dominates,
    random_chain,
    random_instance,
    rows_dominate,
    shift_instance,
    shift_toward_lower,
    validate_assumptions,
)
from .coupling import (
    correspond,
    correspond_probabilities,
    perturbed_power_gap,
    simulate_bias_gap,
    simulate_dominance,
)
from .instance_factory import resolve_instance
from .restless_ucb import (
    ConfidenceRadius,
    build_optimistic_instance,
    empirical_estimates,
    estimates_within,
    run_exploration,
)

FORMAT_VERSION = 1

SUMMARY_FILE = "verification_summary.yaml"

FULL_SIZES: dict[str, int] = dict(
    random_instances=1000,
    correspond_triples=50,
    correspond_draws=1_000_000,
    dominance_trials=1_000_000,
    coupled_seeds=20,
    coupled_steps=100_000,
    event_runs=200,
    event_horizon=1_000_000,
    proximity_runs=11,
    bias_triples=100,
    bias_seeds=100,
    bias_horizon=10_000,
)

QUICK_SIZES: dict[str, int] = dict(
    random_instances=50,
    correspond_triples=10,
    correspond_draws=100_000,
    dominance_trials=10_000,
    coupled_seeds=3,
    coupled_steps=5_000,
    event_runs=20,
    event_horizon=100_000,
    proximity_runs=5,
    bias_triples=10,
    bias_seeds=20,
    bias_horizon=1_000,
)


class CheckResult:
    """Outcome of one property check

    Parameters
    ----------
    name:
        Check name, also the stem of its report file

    passed:
        Whether the property held

    statistic:
        The measured quantity, e.g. a violation count or a frequency

    bound:
        What ``statistic`` was compared to, None if not applicable

    details:
        Anything else worth recording
    """

    def __init__(
        self,
        name: str,
        passed: bool,
        statistic: float = 0.0,
        bound: float | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        self.name = name
        self.passed = bool(passed)
        self.statistic = float(statistic)
        self.bound = None if bound is None else float(bound)
        self.details = details or {}

    def __repr__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {status} ({self.statistic} vs {self.bound})"

    def to_dict(self) -> dict[str, Any]:
        return dict(
            name=self.name,
            passed=self.passed,
            statistic=self.statistic,
            bound=self.bound,
            details=self.details,
        )

    @classmethod
    def from_dict(cls, the_dict: dict[str, Any]) -> CheckResult:
        return cls(
            name=the_dict["name"],
            passed=the_dict["passed"],
            statistic=the_dict.get("statistic", 0.0),
            bound=the_dict.get("bound"),
            details=the_dict.get("details", {}),
        )


class VerificationReport:
    """All the check results of one verification run"""

    def __init__(self, checks: list[CheckResult], config: dict[str, Any]) -> None:
        self.checks = checks
        self.config = config

    def __getitem__(self, name: str) -> CheckResult:
        for check_ in self.checks:
            if check_.name == name:
                return check_
        raise KeyError(f"Check {name} not found in {self.names()}")

    def names(self) -> list[str]:
        return [check_.name for check_ in self.checks]

    @property
    def passed(self) -> bool:
        """True iff every check passed"""
        return all(check_.passed for check_ in self.checks)

    def failures(self) -> list[str]:
        return [check_.name for check_ in self.checks if not check_.passed]

    def to_dict(self) -> dict[str, Any]:
        return dict(
            format_version=FORMAT_VERSION,
            passed=self.passed,
            config=self.config,
            checks=[check_.to_dict() for check_ in self.checks],
        )

    @classmethod
    def from_dict(cls, the_dict: dict[str, Any]) -> VerificationReport:
        version = the_dict.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(
                f"Verification report has format_version {version}, expected {FORMAT_VERSION}"
            )
        return cls(
            [CheckResult.from_dict(check_) for check_ in the_dict["checks"]],
            the_dict.get("config", {}),
        )

    def write(self, output_dir: str) -> list[str]:
        """Write one yaml file per check and a summary file

        Returns
        -------
        list[str]
            Paths written, the summary last
        """
        os.makedirs(output_dir, exist_ok=True)
        paths = []
        for check_ in self.checks:
            path = os.path.join(output_dir, f"{check_.name}.yaml")
            with open(path, mode="w", encoding="utf-8") as fout:
                yaml.safe_dump(
                    dict(format_version=FORMAT_VERSION, **check_.to_dict()),
                    fout,
                    sort_keys=False,
                )
            paths.append(path)
        summary_path = os.path.join(output_dir, SUMMARY_FILE)
        with open(summary_path, mode="w", encoding="utf-8") as fout:
            yaml.safe_dump(
                dict(
                    format_version=FORMAT_VERSION,
                    passed=self.passed,
                    config=self.config,
                    checks={check_.name: check_.passed for check_ in self.checks},
                ),
                fout,
                sort_keys=False,
            )
        paths.append(summary_path)
        return paths

    @classmethod
    def read(cls, output_dir: str) -> VerificationReport:
        """Read a report written by :py:meth:`write`"""
        with open(os.path.join(output_dir, SUMMARY_FILE), encoding="utf-8") as fin:
            summary = yaml.safe_load(fin)
        checks = []
        for name_ in summary["checks"]:
            with open(os.path.join(output_dir, f"{name_}.yaml"), encoding="utf-8") as fin:
                checks.append(yaml.safe_load(fin))
        return cls.from_dict(
            dict(
                format_version=summary.get("format_version"),
                config=summary.get("config", {}),
                checks=checks,
            )
        )


class VerificationConfig(Configurable):
    """Configuration of a verification run

    Sizes left at 0 take the full values, or the reduced ones with ``quick``
    """

    config_options: dict[str, StageParameter] = dict(
        name=StageParameter(str, "verify", fmt="%s", msg="Verification name"),
        instance=StageParameter(str, "paper-1", fmt="%s", msg="Instance name or file"),
        seed=StageParameter(int, 0, fmt="%i", msg="Root seed"),
        quick=StageParameter(bool, False, fmt="%s", msg="Use the reduced sizes"),
        c1=StageParameter(float, 0.1, fmt="%.3f", msg="Constant of the A4 check"),
        sweep_c1=StageParameter(
            float, 0.05, fmt="%.3f", msg="A4 constant of the random instances"
        ),
        max_states=StageParameter(
            int, 6, fmt="%i", msg="Largest number of states of the random instances"
        ),
        max_tau=StageParameter(int, 50, fmt="%i", msg="Largest power in the sweeps"),
        shift_delta=StageParameter(
            float, 0.02, fmt="%.3f", msg="Shift of the optimistic instance in coupling checks"
        ),
        epsilon=StageParameter(float, 1e-9, fmt="%.3e", msg="Solver tolerance"),
        proximity_horizons=StageParameter(
            list, [100000, 1000000, 10000000], fmt="%s", msg="Horizons of the gain proximity check"
        ),
        inject_violation=StageParameter(
            str,
            "",
            fmt="%s",
            msg="Assumption to break in the instance given to the assumption checks",
        ),
        output_dir=StageParameter(str, "verification", fmt="%s", msg="Report directory"),
    )
    config_options.update(
        {
            key: StageParameter(int, 0, fmt="%i", msg=f"{key}, 0 for the mode default")
            for key in FULL_SIZES
        }
    )
    yaml_tag = "Verification"

    def __init__(self, **kwargs: Any):
        """C'tor

        Parameters
        ----------
        **kwargs
            Configuration parameters for this VerificationConfig, must match
            class.config_options data members
        """
        Configurable.__init__(self, **kwargs)

    def size(self, key: str) -> int:
        """Size of a check, the explicit option or the mode default"""
        explicit = self.config[key]
        if explicit:
            return int(explicit)
        return (QUICK_SIZES if self.config.quick else FULL_SIZES)[key]


def _broken_instance(instance: RestlessInstance, assumption: str) -> RestlessInstance:
    """Copy of ``instance`` whose first arm breaks ``assumption``"""
    arms = list(instance.arms)
    first = arms[0]
    num_states = instance.num_states
    if assumption == "A1":
        arms[0] = Arm(first.chain, np.linspace(0.0, 1.0, num_states))
    elif assumption == "A3":
        arms[0] = Arm(
            BirthDeathChain([0.7] + [0.3] * (num_states - 2), [0.5] + [0.3] * (num_states - 2)),
            first.rewards,
        )
    elif assumption == "A4":
        arms[0] = Arm(
            BirthDeathChain([0.0] * (num_states - 1), [0.0] * (num_states - 1)), first.rewards
        )
    else:
        raise KeyError(f"Cannot inject a violation of {assumption}, use A1, A3 or A4")
    return RestlessInstance(arms, instance.initial_states)


class CheckContext:
    """What the checks share: the configuration, the instance and the rng"""

    def __init__(self, config: VerificationConfig) -> None:
        self.config = config
        self.instance = resolve_instance(config.config.instance)
        self.rng = np.random.default_rng(config.config.seed)
        self._table: PolicyTable | None = None
        self._optimistic: RestlessInstance | None = None
        self._optimistic_table: PolicyTable | None = None

    def random_instance(self) -> RestlessInstance:
        num_states = int(self.rng.integers(2, self.config.config.max_states + 1))
        num_arms = int(self.rng.integers(1, 4))
        return random_instance(num_arms, num_states, self.config.config.sweep_c1, self.rng)

    def random_chain(self) -> BirthDeathChain:
        num_states = int(self.rng.integers(2, self.config.config.max_states + 1))
        return random_chain(num_states, self.config.config.sweep_c1, self.rng)

    def table(self) -> PolicyTable:
        """Exact solution of the configured instance"""
        if self._table is None:
            self._table = solve_instance(self.instance, epsilon=self.config.config.epsilon)
        return self._table

    def optimistic(self) -> RestlessInstance:
        """Instance shifted toward better states with raised rewards"""
        if self._optimistic is None:
            delta = self.config.config.shift_delta
            self._optimistic = shift_instance(self.instance, delta, reward_bonus=delta)
        return self._optimistic

    def optimistic_table(self) -> PolicyTable:
        if self._optimistic_table is None:
            self._optimistic_table = solve_instance(
                self.optimistic(), epsilon=self.config.config.epsilon
            )
        return self._optimistic_table


def check_assumptions(ctx: CheckContext) -> list[CheckResult]:
    """One result per modelling assumption on the configured instance"""
    instance = ctx.instance
    injected = ctx.config.config.inject_violation
    if injected:
        instance = _broken_instance(instance, injected)
    report = validate_assumptions(instance, ctx.config.config.c1)
    results = []
    for assumption_ in ASSUMPTION_NAMES:
        failures = [
            dict(arm=arm_, **check_.to_dict())
            for arm_, key_, check_ in report.failures()
            if key_ == assumption_
        ]
        results.append(
            CheckResult(
                f"assumption_{assumption_}",
                report.assumption_passed(assumption_),
                statistic=len(failures),
                bound=0,
                details=dict(c1=report.c1, failures=failures, injected=injected),
            )
        )
    return results


def check_stationary_balance(ctx: CheckContext) -> CheckResult:
    """d P = d for the stationary distribution of random chains"""
    worst = 0.0
    for _ in range(ctx.config.size("random_instances")):
        chain = ctx.random_chain()
        dist = chain.stationary_distribution()
        worst = max(worst, float(np.max(np.abs(dist @ chain.matrix - dist))))
    return CheckResult("stationary_balance", worst <= 1e-10, statistic=worst, bound=1e-10)


def check_shift_dominance(ctx: CheckContext) -> CheckResult:
    """Shifting mass toward lower states dominates row by row"""
    violations = 0
    for _ in range(ctx.config.size("random_instances")):
        chain = ctx.random_chain()
        delta = float(ctx.rng.uniform(0.0, 0.1))
        if not rows_dominate(shift_toward_lower(chain, delta), chain):
            violations += 1
    return CheckResult("shift_dominance", violations == 0, statistic=violations, bound=0)


def check_adjacent_rows(ctx: CheckContext) -> CheckResult:
    """Row k of a chain satisfying A3 dominates row k + 1"""
    violations = 0
    for _ in range(ctx.config.size("random_instances")):
        matrix = ctx.random_chain().matrix
        for k in range(matrix.shape[0] - 1):
            if not prefix_dominates(matrix[k], matrix[k + 1], slack=1e-10):
                violations += 1
    return CheckResult("adjacent_rows", violations == 0, statistic=violations, bound=0)


def check_dominance_preservation(ctx: CheckContext) -> CheckResult:
    """e_s' P'^tau dominates e_s P^tau when P' dominates P and s' <= s"""
    violations = 0
    max_tau = ctx.config.config.max_tau
    for _ in range(ctx.config.size("random_instances")):
        chain = ctx.random_chain()
        chain_prime = shift_toward_lower(chain, float(ctx.rng.uniform(0.0, 0.1)))
        s = int(ctx.rng.integers(0, chain.num_states))
        s_prime = int(ctx.rng.integers(0, s + 1))
        tau = int(ctx.rng.integers(1, max_tau + 1))
        v = chain.row_power(s, tau, use_cache=False)
        v_prime = chain_prime.row_power(s_prime, tau, use_cache=False)
        if not prefix_dominates(v_prime, v, slack=1e-10):
            violations += 1
    return CheckResult(
        "dominance_preservation", violations == 0, statistic=violations, bound=0
    )


def check_power_bound(ctx: CheckContext) -> CheckResult:
    """|v P^tau - v P'^tau| <= 2 tau delta for entrywise gap delta"""
    violations = 0
    worst_ratio = 0.0
    max_tau = ctx.config.config.max_tau
    for _ in range(ctx.config.size("random_instances")):
        chain = ctx.random_chain()
        chain_prime = shift_toward_lower(chain, float(ctx.rng.uniform(0.0, 0.1)))
        delta = float(np.max(np.abs(chain.matrix - chain_prime.matrix)))
        v = ctx.rng.dirichlet(np.ones(chain.num_states))
        tau = int(ctx.rng.integers(1, max_tau + 1))
        gap = perturbed_power_gap(chain, chain_prime, v, tau)
        bound = 2.0 * tau * delta
        if gap > bound + 1e-10:
            violations += 1
        if bound > 0.0:
            worst_ratio = max(worst_ratio, gap / bound)
    return CheckResult(
        "power_bound",
        violations == 0,
        statistic=violations,
        bound=0,
        details=dict(worst_gap_over_bound=worst_ratio),
    )


def check_correspond_marginal(ctx: CheckContext) -> CheckResult:
    """j is distributed as v when k is drawn from v'"""
    worst_tv = 0.0
    draws = ctx.config.size("correspond_draws")
    for _ in range(ctx.config.size("correspond_triples")):
        num_states = int(ctx.rng.integers(2, ctx.config.config.max_states + 1))
        v = ctx.rng.dirichlet(np.ones(num_states))
        v_prime = ctx.rng.dirichlet(np.ones(num_states))
        k_counts = ctx.rng.multinomial(draws, v_prime)
        j_counts = np.zeros(num_states)
        for k_, count_ in enumerate(k_counts):
            if count_:
                j_counts += ctx.rng.multinomial(
                    count_, correspond_probabilities(v, v_prime, k_)
                )
        worst_tv = max(worst_tv, 0.5 * float(np.sum(np.abs(j_counts / draws - v))))
    # direct draws through the sampler itself
    v = np.array([0.25, 0.75])
    v_prime = np.array([0.5, 0.5])
    direct = np.zeros(2)
    num_direct = max(draws // 100, 1000)
    for _ in range(num_direct):
        direct[correspond(v, v_prime, int(ctx.rng.random() >= 0.5), ctx.rng)] += 1
    direct_tv = 0.5 * float(np.sum(np.abs(direct / num_direct - v)))
    return CheckResult(
        "correspond_marginal",
        worst_tv <= 0.01 and direct_tv <= 0.02,
        statistic=worst_tv,
        bound=0.01,
        details=dict(direct_tv=direct_tv, direct_draws=num_direct),
    )


def check_correspond_dominance(ctx: CheckContext) -> CheckResult:
    """j >= k whenever v' dominates v"""
    violations = 0
    trials = ctx.config.size("dominance_trials")
    for _ in range(trials):
        num_states = int(ctx.rng.integers(2, ctx.config.config.max_states + 1))
        v = ctx.rng.dirichlet(np.ones(num_states))
        # moving mass down by one state gives a dominating vector
        moved = v[1:] * ctx.rng.uniform(0.0, 1.0, size=num_states - 1)
        v_prime = v.copy()
        v_prime[1:] -= moved
        v_prime[:-1] += moved
        k = int(ctx.rng.choice(num_states, p=v_prime / v_prime.sum()))
        if v_prime[k] <= 0.0:
            continue
        if correspond(v, v_prime, k, ctx.rng) < k:
            violations += 1
    return CheckResult("correspond_dominance", violations == 0, statistic=violations, bound=0)


def check_coupled_dominance(ctx: CheckContext) -> CheckResult:
    """Virtual state never below the real one, real reward never below virtual"""
    violations = 0
    reward_failures = 0
    margins = []
    for seed_ in range(ctx.config.size("coupled_seeds")):
        trace = simulate_dominance(
            ctx.instance,
            ctx.optimistic(),
            ctx.table(),
            ctx.config.size("coupled_steps"),
            ctx.config.config.seed + seed_,
        )
        violations += trace.violations
        if trace.cumulative_real < trace.cumulative_virtual:
            reward_failures += 1
        margins.append(trace.cumulative_real - trace.cumulative_virtual)
    return CheckResult(
        "coupled_dominance",
        violations == 0 and reward_failures == 0,
        statistic=violations,
        bound=0,
        details=dict(reward_failures=reward_failures, min_reward_margin=float(min(margins))),
    )


def check_optimistic_gain_order(ctx: CheckContext) -> CheckResult:
    """The optimistic instance has at least the optimal gain"""
    gain = ctx.table().gain
    gain_prime = ctx.optimistic_table().gain
    slack = 2.0 * ctx.config.config.epsilon
    return CheckResult(
        "optimistic_gain_order",
        gain_prime >= gain - slack,
        statistic=gain_prime - gain,
        bound=-slack,
        details=dict(gain=gain, optimistic_gain=gain_prime),
    )


def check_event_frequency(ctx: CheckContext) -> CheckResult:
    """Estimates leave their confidence band no more often than allowed"""
    instance = ctx.instance
    horizon = ctx.config.size("event_horizon")
    radius = ConfidenceRadius(horizon)
    runs = ctx.config.size("event_runs")
    max_steps = 100 * radius.m * instance.num_states * instance.num_arms
    failures = 0
    lengths = []
    for run_ in range(runs):
        stats, length = run_exploration(
            instance, radius.m, ctx.config.config.seed + run_, max_steps
        )
        lengths.append(length)
        chains, rewards = empirical_estimates(stats)
        if not estimates_within(instance, chains, rewards, radius.rad):
            failures += 1
    allowed = min(8.0 * instance.num_arms * instance.num_states / horizon, 1.0)
    bound = allowed + 3.0 * np.sqrt(allowed * (1.0 - allowed) / runs)
    frequency = failures / runs
    return CheckResult(
        "event_frequency",
        frequency <= bound,
        statistic=frequency,
        bound=bound,
        details=dict(
            m=radius.m,
            rad=radius.rad,
            runs=runs,
            failures=failures,
            mean_exploration_length=float(np.mean(lengths)),
        ),
    )


def check_gain_proximity(ctx: CheckContext) -> CheckResult:
    """The optimistic gain approaches the optimal gain as the horizon grows

    Only explorations whose estimates all fall within the confidence radius
    enter the medians
    """
    instance = ctx.instance
    gain = ctx.table().gain
    medians = []
    kept = []
    for horizon_ in ctx.config.config.proximity_horizons:
        radius = ConfidenceRadius(int(horizon_))
        max_steps = 100 * radius.m * instance.num_states * instance.num_arms
        gaps = []
        for _ in range(ctx.config.size("proximity_runs")):
            stats, _length = run_exploration(
                instance, radius.m, int(ctx.rng.integers(0, 2**31)), max_steps
            )
            chains, rewards = empirical_estimates(stats)
            if not estimates_within(instance, chains, rewards, radius.rad):
                continue
            optimistic = build_optimistic_instance(
                chains, rewards, radius.rad, instance.initial_states
            )
            table = solve_instance(optimistic, epsilon=ctx.config.config.epsilon)
            gaps.append(table.gain - gain)
        kept.append(len(gaps))
        medians.append(float(np.median(gaps)) if gaps else float("nan"))
    decreasing = all(kept) and all(
        later_ < earlier_ for earlier_, later_ in zip(medians, medians[1:])
    )
    return CheckResult(
        "gain_proximity",
        decreasing,
        statistic=medians[-1],
        bound=medians[0],
        details=dict(
            horizons=[int(h_) for h_ in ctx.config.config.proximity_horizons],
            median_gaps=medians,
            runs_within_radius=kept,
        ),
    )


def check_bias_gap(ctx: CheckContext) -> CheckResult:
    """Coupled reward differences stay within 2 M / (1 - lambda_max)"""
    instance = ctx.optimistic()
    table = ctx.optimistic_table()
    lam = lambda_max(instance)
    limit = 2.0 * instance.num_states / (1.0 - lam)
    if instance.num_states < 2:
        return CheckResult(
            "bias_gap", True, statistic=0, bound=0, details=dict(limit=limit, lambda_max=lam)
        )
    worst_excess = -np.inf
    failures = 0
    seeds = ctx.config.size("bias_seeds")
    for _ in range(ctx.config.size("bias_triples")):
        z = table.states[int(ctx.rng.integers(0, len(table)))]
        j = int(ctx.rng.integers(1, instance.num_states))
        k = int(ctx.rng.integers(0, j))
        base_seed = int(ctx.rng.integers(0, 2**31))
        gaps = np.array(
            [
                simulate_bias_gap(
                    instance, table, z, j, k, ctx.config.size("bias_horizon"), base_seed + s_
                )
                for s_ in range(seeds)
            ]
        )
        stderr = float(gaps.std(ddof=1) / np.sqrt(seeds)) if seeds > 1 else 0.0
        excess = abs(float(gaps.mean())) - (limit + 3.0 * stderr)
        worst_excess = max(worst_excess, excess)
        if excess > 0.0:
            failures += 1
    return CheckResult(
        "bias_gap",
        failures == 0,
        statistic=failures,
        bound=0,
        details=dict(limit=limit, lambda_max=lam, worst_excess=float(worst_excess)),
    )


CHECKS: list[Callable[[CheckContext], CheckResult | list[CheckResult]]] = [
    check_assumptions,
    check_stationary_balance,
    check_shift_dominance,
    check_adjacent_rows,
    check_dominance_preservation,
    check_power_bound,
    check_correspond_marginal,
    check_correspond_dominance,
    check_coupled_dominance,
    check_optimistic_gain_order,
    check_event_frequency,
    check_gain_proximity,
    check_bias_gap,
]


def _check_name(check: Callable) -> str:
    return check.__name__.removeprefix("check_")


def verify_lemmas(config: VerificationConfig) -> VerificationReport:
    """Run every check and collect the results

    A check that raises is recorded as failed with the error message
    """
    ctx = CheckContext(config)
    results: list[CheckResult] = []
    for check_ in CHECKS:
        name = _check_name(check_)
        _start_time = time.time()
        try:
            outcome = check_(ctx)
        except Exception as msg:
            outcome = CheckResult(name, False, details=dict(error=f"{type(msg).__name__}: {msg}"))
        outcomes = outcome if isinstance(outcome, list) else [outcome]
        _elapsed_time = time.time() - _start_time
        for outcome_ in outcomes:
            outcome_.details["seconds"] = _elapsed_time
            print(outcome_)
        results.extend(outcomes)
    return VerificationReport(results, config.config.to_dict())


def load_verification_file(path: str) -> VerificationConfig:
    """Read the ``Verification`` block of a yaml file"""
    with open(os.path.expandvars(path), encoding="utf-8") as fin:
        yaml_data = yaml.safe_load(fin)
    if VerificationConfig.yaml_tag not in yaml_data:
        raise KeyError(
            f"No {VerificationConfig.yaml_tag} block found in {path} {list(yaml_data.keys())}"
        )
    return VerificationConfig(**yaml_data[VerificationConfig.yaml_tag])

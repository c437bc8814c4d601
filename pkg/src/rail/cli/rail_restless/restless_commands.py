import os
from typing import Any

import click
import yaml
from rail.core import __version__

from rail.restless import library
from rail.restless.belief_mdp import PolicyTable, truncation_bound
from rail.restless.benchmark import timing_benchmark
from rail.restless.chain_core import validate_assumptions
from rail.restless.experiment import (
    ExperimentConfig,
    ExperimentFactory,
    load_experiment_file,
    run_comparison,
    run_experiment,
)
from rail.restless.instance_factory import (
    builtin_instance_names,
    resolve_instance,
)
from rail.restless.policy import solve_oracle
from rail.restless.policy_factory import builtin_policy_names
from rail.restless.verification import (
    VerificationConfig,
    load_verification_file,
    verify_lemmas,
)

from . import restless_options

__all__ = [
    "restless_cli",
    "inspect_command",
    "run_command",
    "compare_command",
    "solve_command",
    "verify_command",
    "bench_command",
]


def _drop_unset(**kwargs: Any) -> dict[str, Any]:
    return {key: val for key, val in kwargs.items() if val is not None}


@click.group()
@click.version_option(__version__)
def restless_cli() -> None:
    """Restless bandit learning and benchmarking

    Instances, policies and experiments can be defined in yaml files,
    which can in turn include other yaml files that define a 'library'
    of named instances and policies.  Flags given on the command line
    take precedence over values in a config file.
    """


@restless_cli.command(name="inspect")
@restless_options.library_file()
@restless_options.instance()
@restless_options.c1()
def inspect_command(library_file: str | None, instance: str | None, c1: float) -> int:
    """Print a library file and the assumption report of an instance"""
    if library_file:
        library.load_yaml(library_file)
    print("Restless Library")
    print(">>>>>>>>")
    library.print_contents()
    print(f"Builtin instances: {builtin_instance_names()}")
    print(f"Builtin policies: {builtin_policy_names()}")
    print("<<<<<<<<")
    if instance is None:
        return 0
    try:
        the_instance = resolve_instance(instance)
    except (KeyError, ValueError) as msg:
        raise click.ClickException(str(msg)) from msg
    report = validate_assumptions(the_instance, c1)
    print(f"Instance: {instance}")
    print(">>>>>>>>")
    print(the_instance)
    print(yaml.dump(report.to_dict(), indent=2))
    print("<<<<<<<<")
    return 0


@restless_cli.command(name="run")
@restless_options.config_file()
@restless_options.experiment_name()
@restless_options.instance()
@restless_options.policy()
@restless_options.oracle()
@restless_options.horizon()
@restless_options.reps()
@restless_options.seed()
@restless_options.tau_max()
@restless_options.run_mode()
@restless_options.num_workers()
@restless_options.out()
def run_command(
    config_file: str | None,
    name: str | None,
    run_mode: restless_options.RunMode | None,
    **kwargs: Any,
) -> int:
    """Run a regret experiment and write its csv and summary files"""
    overrides = _drop_unset(
        instance=kwargs["instance"],
        policy=kwargs["policy"],
        oracle=kwargs["oracle"],
        horizon=kwargs["horizon"],
        replications=kwargs["reps"],
        seed=kwargs["seed"],
        tau_max=kwargs["tau_max"],
        run_mode=None if run_mode is None else run_mode.name,
        num_workers=kwargs["num_workers"],
        output_dir=kwargs["out"],
    )
    try:
        if config_file:
            config_dict = load_experiment_file(config_file, name).config.to_dict()
            # the includes were loaded with the file
            config_dict["Includes"] = []
        else:
            config_dict = dict(name=name or "experiment")
        config_dict.update(**overrides)
        config = ExperimentConfig(**config_dict)
        result = run_experiment(config)
    except Exception as msg:
        raise click.ClickException(f"{type(msg).__name__}: {msg}") from msg
    print(f"Experiment {config.config.name}")
    print(">>>>>>>>")
    print(f"optimal gain: {result.certificate.value} ({result.certificate.method})")
    print(f"final mean regret: {result.summary['final_mean_regret']}")
    for key, val in result.paths.items():
        print(f"{key}: {val}")
    print("<<<<<<<<")
    return 0


@restless_cli.command(name="compare")
@restless_options.config_file()
@restless_options.learner()
@restless_options.horizon()
@restless_options.reps()
@restless_options.seed()
@restless_options.run_mode()
@restless_options.num_workers()
@restless_options.out()
def compare_command(
    config_file: str | None,
    learner: str | None,
    run_mode: restless_options.RunMode | None,
    **kwargs: Any,
) -> int:
    """Run every experiment of a config file and compare their regrets

    Exits with an error if the learner's regret exponent is out of range or
    its regret is not below every other experiment's
    """
    if config_file is None or learner is None:
        raise click.ClickException("compare needs --config-file and --learner")
    overrides = _drop_unset(
        horizon=kwargs["horizon"],
        replications=kwargs["reps"],
        seed=kwargs["seed"],
        run_mode=None if run_mode is None else run_mode.name,
        num_workers=kwargs["num_workers"],
        output_dir=kwargs["out"],
    )
    try:
        library.load_yaml(config_file)
        configs = [
            ExperimentConfig(**dict(config_.config.to_dict(), Includes=[], **overrides))
            for config_ in ExperimentFactory.get_experiments().values()
        ]
        result = run_comparison(
            configs,
            learner,
            name=os.path.splitext(os.path.basename(config_file))[0],
        )
    except Exception as msg:
        raise click.ClickException(f"{type(msg).__name__}: {msg}") from msg
    summary = result.summary
    print(f"Comparison against {learner}")
    print(">>>>>>>>")
    for name_ in summary["ordering"]:
        stats = summary["policies"][name_]
        print(
            f"{name_}: final mean regret {stats['final_mean_regret']:.2f}, "
            f"exponent {stats['regret_exponent']:.3f} ({stats['growth']})"
        )
    print(f"written to {result.path}")
    print("<<<<<<<<")
    if not summary["passed"]:
        raise click.ClickException(
            f"{learner} exponent in range: {summary['learner_exponent_in_range']}, "
            f"below the others: {summary['learner_below']}"
        )
    return 0


@restless_cli.command(name="solve")
@restless_options.instance()
@restless_options.oracle()
@restless_options.tau_max()
@restless_options.epsilon()
@restless_options.state_budget()
@restless_options.max_iterations()
@restless_options.out()
def solve_command(
    instance: str | None,
    oracle: str | None,
    tau_max: int | None,
    epsilon: float,
    state_budget: int,
    max_iterations: int,
    out: str | None,
) -> int:
    """Solve an instance offline and write the policy table"""
    if instance is None:
        raise click.ClickException("solve needs --instance")
    oracle = oracle or "rvi"
    try:
        the_instance = resolve_instance(instance)
        table = solve_oracle(
            the_instance,
            oracle,
            tau_max=tau_max or 0,
            epsilon=epsilon,
            state_budget=state_budget,
            max_iterations=max_iterations,
        )
    except Exception as msg:
        raise click.ClickException(f"{type(msg).__name__}: {msg}") from msg
    if not isinstance(table, PolicyTable):
        raise click.ClickException(
            f"Oracle {oracle} on {instance} did not produce a policy table"
        )
    if out is None:
        out = f"{os.path.splitext(os.path.basename(instance))[0]}_policy.yaml"
    table.write_yaml(out)
    print(f"Solved {instance}")
    print(">>>>>>>>")
    print(f"gain: {table.gain} in [{table.gain_bounds[0]}, {table.gain_bounds[1]}]")
    print(f"belief states: {len(table)}, tau_max: {table.tau_max}")
    print(f"truncation bound: {truncation_bound(the_instance, table.tau_max)}")
    print(f"written to {out}")
    print("<<<<<<<<")
    return 0


@restless_cli.command(name="verify")
@restless_options.config_file()
@restless_options.instance()
@restless_options.seed()
@restless_options.quick()
@restless_options.inject_violation()
@restless_options.out()
def verify_command(config_file: str | None, **kwargs: Any) -> int:
    """Run the property suite and write its report

    Exits with an error if any check fails
    """
    overrides = _drop_unset(
        instance=kwargs["instance"],
        seed=kwargs["seed"],
        quick=kwargs["quick"] or None,
        inject_violation=kwargs["inject_violation"],
        output_dir=kwargs["out"],
    )
    if config_file:
        config_dict = load_verification_file(config_file).config.to_dict()
    else:
        config_dict = {}
    config_dict.update(**overrides)
    config = VerificationConfig(**config_dict)
    print("Verification")
    print(">>>>>>>>")
    report = verify_lemmas(config)
    paths = report.write(config.config.output_dir)
    print("<<<<<<<<")
    print(f"Report written to {os.path.dirname(paths[-1]) or '.'}")
    if not report.passed:
        raise click.ClickException(f"Failed checks: {report.failures()}")
    return 0


@restless_cli.command(name="bench")
@restless_options.policy()
@restless_options.horizon()
@restless_options.reps()
@restless_options.seed()
@restless_options.num_arms()
@restless_options.out()
def bench_command(
    policy: str | None,
    horizon: int | None,
    reps: int | None,
    seed: int | None,
    num_arms: tuple[int, ...],
    out: str | None,
) -> int:
    """Time full games on two-state instances of growing size"""
    try:
        timing_benchmark(
            list(num_arms),
            horizon or 500_000,
            policy=policy or "restless-ucb",
            reps=reps or 50,
            seed=seed or 0,
            output=out,
        )
    except Exception as msg:
        raise click.ClickException(f"{type(msg).__name__}: {msg}") from msg
    return 0

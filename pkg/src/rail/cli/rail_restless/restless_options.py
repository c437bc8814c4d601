import click
from rail.cli.rail.options import EnumChoice, PartialArgument, PartialOption

from rail.restless.belief_mdp import DEFAULT_MAX_ITERATIONS, DEFAULT_STATE_BUDGET
from rail.restless.execution import RunMode
from rail.restless.policy import ORACLE_NAMES

__all__: list[str] = [
    "RunMode",
    "c1",
    "config_file",
    "epsilon",
    "experiment_name",
    "horizon",
    "inject_violation",
    "instance",
    "learner",
    "library_file",
    "max_iterations",
    "num_arms",
    "num_workers",
    "oracle",
    "out",
    "policy",
    "quick",
    "reps",
    "run_mode",
    "seed",
    "state_budget",
    "tau_max",
]


# Flags that override a config file default to None so that
# an explicit value can be told apart from an absent one

c1 = PartialOption(
    "--c1",
    type=float,
    default=0.1,
    help="Lower bound of the tridiagonal entries in the assumption checks",
)


config_file = PartialOption(
    "--config-file",
    type=click.Path(exists=True),
    default=None,
    help="Yaml configuration file",
)


epsilon = PartialOption(
    "--epsilon",
    type=float,
    default=1e-9,
    help="Relative value iteration tolerance",
)


experiment_name = PartialOption(
    "--name",
    type=str,
    default=None,
    help="Experiment to pick from the config file, or name of a new one",
)


horizon = PartialOption(
    "--horizon",
    type=int,
    default=None,
    help="Steps per game",
)


inject_violation = PartialOption(
    "--inject-violation",
    type=click.Choice(["A1", "A3", "A4"]),
    default=None,
    help="Break an assumption in the instance given to the assumption checks",
)


instance = PartialOption(
    "--instance",
    type=str,
    default=None,
    help="Instance name or instance yaml file",
)


learner = PartialOption(
    "--learner",
    type=str,
    default=None,
    help="Experiment whose regret should grow sublinearly and stay below the others",
)


library_file = PartialArgument(
    "library_file",
    type=click.Path(exists=True),
    required=False,
)


max_iterations = PartialOption(
    "--max-iterations",
    type=int,
    default=DEFAULT_MAX_ITERATIONS,
    help="Relative value iteration cap",
)


num_arms = PartialOption(
    "--num-arms",
    type=int,
    multiple=True,
    default=[2, 3, 4, 5],
    help="Number of arms of the benchmarked instances",
)


num_workers = PartialOption(
    "--num-workers",
    type=int,
    default=None,
    help="Size of the worker pool, 0 for one per cpu",
)


oracle = PartialOption(
    "--oracle",
    type=click.Choice(ORACLE_NAMES),
    default=None,
    help="Offline oracle",
)


out = PartialOption(
    "--out",
    type=click.Path(),
    default=None,
    help="Output directory or file",
)


policy = PartialOption(
    "--policy",
    type=str,
    default=None,
    help="Policy name",
)


quick = PartialOption(
    "--quick",
    is_flag=True,
    default=None,
    help="Use the reduced sizes",
)


reps = PartialOption(
    "--reps",
    type=int,
    default=None,
    help="Number of replications",
)


run_mode = PartialOption(
    "--run-mode",
    type=EnumChoice(RunMode),
    default=None,
    help="Run the replications serially or in a worker pool",
)


seed = PartialOption(
    "--seed",
    type=int,
    default=None,
    help="Root seed",
)


state_budget = PartialOption(
    "--state-budget",
    type=int,
    default=DEFAULT_STATE_BUDGET,
    help="Largest number of enumerated belief states",
)


tau_max = PartialOption(
    "--tau-max",
    type=int,
    default=None,
    help="Saturation point of the taus, 0 for automatic",
)

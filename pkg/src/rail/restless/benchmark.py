from __future__ import annotations

from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from . import arrow_utils
from .env import RewardMode
from .experiment import checkpoint_grid, play_replication
from .instance_factory import two_state_family
from .policy import RestlessPolicy
from .policy_factory import resolve_policy


def timing_benchmark(
    num_arms_list: Sequence[int],
    horizon: int,
    policy: str = "restless-ucb",
    reps: int = 50,
    seed: int = 0,
    output: str | None = None,
) -> dict[str, NDArray]:
    """Mean wall-clock time of full games on two-state instances

    Parameters
    ----------
    num_arms_list:
        Number of arms of each benchmarked instance, see
        :py:func:`rail.restless.instance_factory.two_state_family`

    horizon:
        Steps per game

    policy:
        Policy name, played with the myopic oracle if it takes one

    reps:
        Games per instance

    seed:
        Root seed, game r uses ``seed + r``

    output:
        If given, csv file to write the table to

    Returns
    -------
    dict[str, NDArray]
        Columns num_arms, mean_seconds, std_seconds, n_reps
    """
    prototype = resolve_policy(policy)
    if "oracle" in prototype.config_options:
        prototype = prototype.spawn(oracle="myopic")
    policy_dict: dict[str, Any] = prototype.to_yaml_dict()[RestlessPolicy.yaml_tag]
    checkpoints = checkpoint_grid(horizon, 1)
    means: list[float] = []
    stds: list[float] = []
    for num_arms_ in num_arms_list:
        instance = two_state_family(num_arms_)
        seconds = np.array(
            [
                play_replication(
                    instance, policy_dict, horizon, seed, checkpoints, RewardMode.bernoulli, rep_
                ).wall_clock
                for rep_ in range(reps)
            ]
        )
        means.append(float(seconds.mean()))
        stds.append(float(seconds.std(ddof=1)) if reps > 1 else 0.0)
        print(f"{policy} with {num_arms_} arms: {means[-1]:.4f} +- {stds[-1]:.4f} seconds")
    columns: dict[str, NDArray] = dict(
        num_arms=np.array(num_arms_list, dtype=np.int64),
        mean_seconds=np.array(means),
        std_seconds=np.array(stds),
        n_reps=np.full(len(num_arms_list), reps, dtype=np.int64),
    )
    if output is not None:
        arrow_utils.write_csv_table(columns, output)
    return columns

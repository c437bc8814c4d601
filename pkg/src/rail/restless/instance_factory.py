from __future__ import annotations

import os
from typing import Any

import yaml
from ceci.config import StageParameter
from rail.core.configurable import Configurable
from rail.core.factory_mixin import RailFactoryMixin

from .chain_core import Arm, BirthDeathChain, RestlessInstance
from .exceptions import InvalidInstanceError


BUILTIN_INSTANCES: dict[str, dict[str, Any]] = {
    "paper-1": dict(
        num_states=2,
        arms=[
            dict(up=[0.3], down=[0.2], rewards=[1.0, 0.0]),
            dict(up=[0.5], down=[0.4], rewards=[0.8, 0.0]),
        ],
        initial_states=[1, 1],
    ),
    "paper-2": dict(
        num_states=2,
        arms=[
            dict(up=[0.3], down=[0.1], rewards=[0.8, 0.0]),
            dict(up=[0.3], down=[0.5], rewards=[0.4, 0.0]),
        ],
        initial_states=[1, 1],
    ),
}


class RestlessInstanceHolder(Configurable):
    """Named definition of a restless bandit instance

    States are 0-based, each arm gives its ``up``, ``down`` and ``rewards``
    lists, see :py:class:`rail.restless.chain_core.BirthDeathChain`
    """

    config_options: dict[str, StageParameter] = dict(
        name=StageParameter(str, None, fmt="%s", required=True, msg="Instance name"),
        num_states=StageParameter(
            int, None, fmt="%i", required=True, msg="Number of states per arm"
        ),
        arms=StageParameter(
            list,
            [],
            fmt="%s",
            msg="Arm definitions, each a dict with up, down and rewards",
        ),
        initial_states=StageParameter(
            list, [], fmt="%s", msg="Initial state of each arm"
        ),
        cache_cap=StageParameter(
            int, 4096, fmt="%i", msg="Largest cached power of the transition matrices"
        ),
    )
    yaml_tag = "Instance"

    def __init__(self, **kwargs: Any):
        """C'tor

        Parameters
        ----------
        **kwargs
            Configuration parameters for this RestlessInstanceHolder, must match
            class.config_options data members
        """
        Configurable.__init__(self, **kwargs)
        self._instance: RestlessInstance | None = None

    def __repr__(self) -> str:
        return (
            f"{self.config.name}: {len(self.config.arms)} arms, "
            f"{self.config.num_states} states"
        )

    def resolve(self) -> RestlessInstance:
        """Build (once) and return the RestlessInstance"""
        if self._instance is not None:
            return self._instance
        arms: list[Arm] = []
        for i, arm_def in enumerate(self.config.arms):
            try:
                chain = BirthDeathChain(
                    arm_def.get("up", []),
                    arm_def.get("down", []),
                    cache_cap=self.config.cache_cap,
                )
                arm = Arm(chain, arm_def["rewards"])
            except (KeyError, ValueError) as msg:
                raise InvalidInstanceError(
                    f"Arm {i + 1} of instance {self.config.name} is invalid: {msg}"
                ) from msg
            if chain.num_states != self.config.num_states:
                raise InvalidInstanceError(
                    f"Arm {i + 1} of instance {self.config.name} has {chain.num_states} "
                    f"states, expected {self.config.num_states}"
                )
            arms.append(arm)
        self._instance = RestlessInstance(arms, self.config.initial_states)
        return self._instance

    @classmethod
    def from_instance(cls, name: str, instance: RestlessInstance) -> RestlessInstanceHolder:
        """Wrap an existing RestlessInstance so that it can be written to yaml"""
        holder = cls(
            name=name,
            num_states=instance.num_states,
            arms=[
                dict(
                    up=arm_.chain.up.tolist(),
                    down=arm_.chain.down.tolist(),
                    rewards=arm_.rewards.tolist(),
                )
                for arm_ in instance.arms
            ],
            initial_states=list(instance.initial_states),
        )
        holder._instance = instance
        return holder


class RestlessInstanceFactory(RailFactoryMixin):
    """Factory class to keep track of instances

    Expected usage is that user will define a yaml file with the various
    instances that they wish to use with the following example syntax:

    .. highlight:: yaml
    .. code-block:: yaml

      Instances:
        - Instance:
            name: paper-1
            num_states: 2
            arms:
              - {up: [0.3], down: [0.2], rewards: [1.0, 0.0]}
              - {up: [0.5], down: [0.4], rewards: [0.8, 0.0]}
            initial_states: [1, 1]
    """

    yaml_tag = "Instances"

    client_classes = [RestlessInstanceHolder]

    _instance: RestlessInstanceFactory | None = None

    def __init__(self) -> None:
        """C'tor, build an empty RestlessInstanceFactory"""
        RailFactoryMixin.__init__(self)
        self._instances = self.add_dict(RestlessInstanceHolder)

    @classmethod
    def get_instances(cls) -> dict[str, RestlessInstanceHolder]:
        """Return the dict of all the instances"""
        return cls.instance().instances

    @classmethod
    def get_instance_names(cls) -> list[str]:
        """Return the names of the instances"""
        return list(cls.instance().instances.keys())

    @classmethod
    def get_instance(cls, name: str) -> RestlessInstanceHolder:
        """Get an instance by its assigned name

        Parameters
        ----------
        name: str
            Name of the instance to return

        Returns
        -------
        RestlessInstanceHolder
            Instance in question
        """
        try:
            return cls.instance().instances[name]
        except KeyError as msg:
            raise KeyError(
                f"Instance named {name} not found in RestlessInstanceFactory "
                f"{list(cls.instance().instances.keys())}"
            ) from msg

    @classmethod
    def add_instance(cls, holder: RestlessInstanceHolder) -> None:
        cls.instance().add_to_dict(holder)

    @property
    def instances(self) -> dict[str, RestlessInstanceHolder]:
        """Return the dictionary of instances"""
        return self._instances


def builtin_instance_names() -> list[str]:
    """Return the names of the builtin instances"""
    return list(BUILTIN_INSTANCES.keys())


def builtin_instance(name: str) -> RestlessInstance:
    """Return one of the two constructed instances

    ``paper-1``: rewards (1, 0) and (0.8, 0); P1(0,0)=0.7, P1(1,1)=0.8,
    P2(0,0)=0.5, P2(1,1)=0.6.

    ``paper-2``: rewards (0.8, 0) and (0.4, 0); P1(0,0)=0.7, P1(1,1)=0.9,
    P2(0,0)=0.7, P2(1,1)=0.5.

    Both start with every arm in state 1, the zero-reward state.
    """
    try:
        definition = BUILTIN_INSTANCES[name]
    except KeyError as msg:
        raise KeyError(
            f"Builtin instance {name} not found in {builtin_instance_names()}"
        ) from msg
    return RestlessInstanceHolder(name=name, **definition).resolve()


def two_state_family(num_arms: int) -> RestlessInstance:
    """Deterministic family of two-state instances with ``num_arms`` arms

    Arm i has stay probabilities interpolating between (0.7, 0.8) and
    (0.5, 0.6) and a good-state reward decreasing from 1.0 by 0.1 per arm,
    floored at 0.3.  Every member satisfies A1-A4 with c1 = 0.2.
    """
    if num_arms < 1:
        raise ValueError(f"num_arms must be >= 1, got {num_arms}")
    arms = []
    for i in range(num_arms):
        frac = i / max(num_arms - 1, 1)
        stay_good = 0.7 - 0.2 * frac
        stay_bad = 0.8 - 0.2 * frac
        chain = BirthDeathChain([1.0 - stay_good], [1.0 - stay_bad])
        arms.append(Arm(chain, [max(1.0 - 0.1 * i, 0.3), 0.0]))
    return RestlessInstance(arms, [1] * num_arms)


def load_instance_file(path: str, name: str | None = None) -> RestlessInstance:
    """Read an instance from a yaml file

    The file either holds a single ``Instance`` block or an ``Instances`` list,
    in which case ``name`` selects one (default: the first)
    """
    with open(os.path.expandvars(path), encoding="utf-8") as fin:
        yaml_data = yaml.safe_load(fin)
    if RestlessInstanceHolder.yaml_tag in yaml_data:
        return RestlessInstanceHolder(**yaml_data[RestlessInstanceHolder.yaml_tag]).resolve()
    blocks = [
        item_[RestlessInstanceHolder.yaml_tag]
        for item_ in yaml_data.get(RestlessInstanceFactory.yaml_tag, [])
    ]
    if not blocks:
        raise InvalidInstanceError(f"No instance definition found in {path}")
    if name is None:
        return RestlessInstanceHolder(**blocks[0]).resolve()
    for block_ in blocks:
        if block_["name"] == name:
            return RestlessInstanceHolder(**block_).resolve()
    raise KeyError(
        f"Instance named {name} not found in {path} {[block_['name'] for block_ in blocks]}"
    )


def resolve_instance(ref: str) -> RestlessInstance:
    """Turn an instance reference into a RestlessInstance

    ``ref`` is looked up, in order, as the name of an instance loaded in the
    RestlessInstanceFactory, as a builtin instance name and as a path to an
    instance yaml file
    """
    if ref in RestlessInstanceFactory.get_instance_names():
        return RestlessInstanceFactory.get_instance(ref).resolve()
    if ref in BUILTIN_INSTANCES:
        return builtin_instance(ref)
    if os.path.exists(os.path.expandvars(ref)):
        return load_instance_file(ref)
    raise KeyError(
        f"Instance {ref} is not a loaded instance "
        f"{RestlessInstanceFactory.get_instance_names()}, a builtin instance "
        f"{builtin_instance_names()} or an existing file"
    )


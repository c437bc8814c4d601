from __future__ import annotations

import copy
from typing import TYPE_CHECKING, Any, TypeVar

from rail.core.factory_mixin import RailFactoryMixin

from .policy import FixedArmPolicy, OracleReplayPolicy, RestlessPolicy
from .restless_ucb import RestlessUCBPolicy
from .thompson import FOUR_POINT_GRID, NINE_POINT_GRID, ThompsonSamplingPolicy

if TYPE_CHECKING:
    from rail.core.configurable import Configurable

    C = TypeVar("C", bound="Configurable")


BUILTIN_POLICIES: dict[str, dict[str, Any]] = {
    "restless-ucb": dict(class_name="RestlessUCBPolicy", oracle="rvi"),
    "restless-ucb-myopic": dict(class_name="RestlessUCBPolicy", oracle="myopic"),
    "ts-9": dict(class_name="ThompsonSamplingPolicy", grid=NINE_POINT_GRID),
    "ts-4": dict(class_name="ThompsonSamplingPolicy", grid=FOUR_POINT_GRID),
    "fixed-arm-1": dict(class_name="FixedArmPolicy", arm=1),
    "fixed-arm-2": dict(class_name="FixedArmPolicy", arm=2),
    "oracle-replay": dict(class_name="OracleReplayPolicy"),
}

FIXED_ARM_PREFIX = "fixed-arm-"


class RestlessPolicyFactory(RailFactoryMixin):
    """Factory class to keep track of configured policies

    Expected usage is that user will define a yaml file with the various
    policies that they wish to use with the following example syntax:

    .. highlight:: yaml
    .. code-block:: yaml

      Policies:
        - Policy:
            name: ucb_short_explore
            class_name: rail.restless.restless_ucb.RestlessUCBPolicy
            oracle: rvi
            m_exponent: 0.5
        - Policy:
            name: ts_coarse
            class_name: ThompsonSamplingPolicy
            grid: [0.2, 0.4, 0.6, 0.8]
    """

    yaml_tag = "Policies"

    client_classes = [RestlessPolicy]

    _instance: RestlessPolicyFactory | None = None

    def __init__(self) -> None:
        """C'tor, build an empty RestlessPolicyFactory"""
        RailFactoryMixin.__init__(self)
        self._policies = self.add_dict(RestlessPolicy)

    @classmethod
    def get_policies(cls) -> dict[str, RestlessPolicy]:
        """Return the dict of all the policies"""
        return cls.instance().policies

    @classmethod
    def get_policy_names(cls) -> list[str]:
        """Return the names of the policies"""
        return list(cls.instance().policies.keys())

    @classmethod
    def get_policy(cls, name: str) -> RestlessPolicy:
        """Get a policy by its assigned name

        Parameters
        ----------
        name: str
            Name of the policy to return

        Returns
        -------
        RestlessPolicy
            Policy in question
        """
        try:
            return cls.instance().policies[name]
        except KeyError as msg:
            raise KeyError(
                f"Policy named {name} not found in RestlessPolicyFactory "
                f"{list(cls.instance().policies.keys())}"
            ) from msg

    @classmethod
    def add_policy(cls, policy: RestlessPolicy) -> None:
        """Add a particular RestlessPolicy to the factory"""
        cls.instance().add_to_dict(policy)

    @property
    def policies(self) -> dict[str, RestlessPolicy]:
        """Return the dictionary of policies"""
        return self._policies

    def load_object_from_yaml_tag(
        self, configurable_class: type[C], yaml_tag: dict[str, Any]
    ) -> None:
        if configurable_class == RestlessPolicy:
            the_object = RestlessPolicy.create_from_dict(yaml_tag)
            self.add_to_dict(the_object)
            return
        RailFactoryMixin.load_object_from_yaml_tag(self, configurable_class, yaml_tag)


def builtin_policy_names() -> list[str]:
    """Return the names of the builtin policies"""
    return list(BUILTIN_POLICIES.keys())


def builtin_policy(name: str) -> RestlessPolicy:
    """Build one of the named baseline configurations

    Any ``fixed-arm-<i>`` name is accepted, ``fixed-arm-0`` plays the
    default arm
    """
    if name in BUILTIN_POLICIES:
        return RestlessPolicy.create_from_dict(
            dict(name=name, **copy.deepcopy(BUILTIN_POLICIES[name]))
        )
    if name.startswith(FIXED_ARM_PREFIX) and name[len(FIXED_ARM_PREFIX) :].isdigit():
        return FixedArmPolicy(name=name, arm=int(name[len(FIXED_ARM_PREFIX) :]))
    raise KeyError(f"Builtin policy {name} not found in {builtin_policy_names()}")


def resolve_policy(ref: str) -> RestlessPolicy:
    """Turn a policy reference into a fresh RestlessPolicy

    ``ref`` is looked up as the name of a policy loaded in the
    RestlessPolicyFactory, then as a builtin policy name
    """
    if ref in RestlessPolicyFactory.get_policy_names():
        return RestlessPolicyFactory.get_policy(ref).spawn()
    try:
        return builtin_policy(ref)
    except KeyError as msg:
        raise KeyError(
            f"Policy {ref} is not a loaded policy "
            f"{RestlessPolicyFactory.get_policy_names()} or a builtin policy "
            f"{builtin_policy_names()}"
        ) from msg


__all__ = [
    "BUILTIN_POLICIES",
    "RestlessPolicyFactory",
    "builtin_policy",
    "builtin_policy_names",
    "resolve_policy",
    "FixedArmPolicy",
    "OracleReplayPolicy",
    "RestlessUCBPolicy",
    "ThompsonSamplingPolicy",
]

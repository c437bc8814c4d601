"""Functions to manage the named instances, policies and experiments"""

from __future__ import annotations

import os

import yaml
from rail.core.factory_mixin import RailFactoryMixin

from .experiment import ExperimentFactory
from .instance_factory import RestlessInstanceFactory
from .policy import RestlessPolicy
from .policy_factory import RestlessPolicyFactory

THE_FACTORIES: list[type[RailFactoryMixin]] = [
    RestlessInstanceFactory,
    RestlessPolicyFactory,
    ExperimentFactory,
]

YAML_HANDLERS: dict[str, type[RailFactoryMixin]] = {
    factory.yaml_tag: factory for factory in THE_FACTORIES
}


# Lift the RestlessInstanceFactory class methods

load_instance_yaml = RestlessInstanceFactory.load_yaml

load_instance_yaml_tag = RestlessInstanceFactory.load_yaml_tag

print_instance_contents = RestlessInstanceFactory.print_contents

clear_instances = RestlessInstanceFactory.clear

get_instances = RestlessInstanceFactory.get_instances

get_instance_names = RestlessInstanceFactory.get_instance_names

get_instance = RestlessInstanceFactory.get_instance

add_instance = RestlessInstanceFactory.add_instance


# Lift the RestlessPolicyFactory class methods

load_policy_yaml = RestlessPolicyFactory.load_yaml

load_policy_yaml_tag = RestlessPolicyFactory.load_yaml_tag

print_policy_contents = RestlessPolicyFactory.print_contents

clear_policies = RestlessPolicyFactory.clear

get_policies = RestlessPolicyFactory.get_policies

get_policy_names = RestlessPolicyFactory.get_policy_names

get_policy = RestlessPolicyFactory.get_policy

add_policy = RestlessPolicyFactory.add_policy


# Lift the ExperimentFactory class methods

load_experiment_yaml = ExperimentFactory.load_yaml

load_experiment_yaml_tag = ExperimentFactory.load_yaml_tag

print_experiment_contents = ExperimentFactory.print_contents

clear_experiments = ExperimentFactory.clear

get_experiments = ExperimentFactory.get_experiments

get_experiment_names = ExperimentFactory.get_experiment_names

get_experiment = ExperimentFactory.get_experiment

add_experiment = ExperimentFactory.add_experiment


# Lift methods from RestlessPolicy

print_policy_classes = RestlessPolicy.print_classes

get_policy_class = RestlessPolicy.get_sub_class

load_policy_class = RestlessPolicy.load_sub_class

create_policy_from_dict = RestlessPolicy.create_from_dict


# Define a few additional functions
def clear() -> None:
    """Clean all the factories"""
    for factory_ in THE_FACTORIES:
        factory_.clear()


def print_contents() -> None:
    """Print the contents of the factories"""
    for factory_ in THE_FACTORIES:
        factory_.print_contents()
        print("----------------")
        print("")


def load_yaml(yaml_file: str) -> None:
    """Read a yaml file and load the factories accordingly

    Parameters
    ----------
    yaml_file: str
        File to read

    Notes
    -----
    Files listed under a top level ``Includes`` are loaded first.  The
    factories are not cleared, so several files can be combined.
    """
    with open(os.path.expandvars(yaml_file), encoding="utf-8") as fin:
        yaml_data = yaml.safe_load(fin)

    includes = yaml_data.pop("Includes", [])
    for include_ in includes:
        load_yaml(os.path.expandvars(include_))

    for yaml_key, yaml_item in yaml_data.items():
        if yaml_key == RestlessInstanceFactory.yaml_tag:
            load_instance_yaml_tag(yaml_item, yaml_file)
        elif yaml_key == RestlessPolicyFactory.yaml_tag:
            load_policy_yaml_tag(yaml_item, yaml_file)
        elif yaml_key == ExperimentFactory.yaml_tag:
            load_experiment_yaml_tag(yaml_item, yaml_file)
        else:
            good_tags = list(YAML_HANDLERS.keys())
            raise KeyError(f"Yaml Tag {yaml_key} not in expected keys {good_tags}")


def write_yaml(yaml_file: str) -> None:
    """Write the current contents for the factories to a yaml file

    Parameters
    ----------
    yaml_file: str
        File to write
    """
    yaml_dict: dict[str, dict] = {}
    for a_factory in THE_FACTORIES:
        yaml_dict.update(**a_factory.to_yaml_dict())
    with open(os.path.expandvars(yaml_file), mode="w", encoding="utf-8") as fout:
        yaml.dump(yaml_dict, fout)

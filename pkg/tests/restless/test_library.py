import os

import pytest

from rail.restless import library


def test_library_yaml() -> None:
    library.load_yaml("tests/ci_library.yaml")
    library.print_contents()

    assert "ci_two_arm" in library.get_instance_names()
    assert library.get_policy_names() == ["ci_ucb_short", "ci_ts_coarse", "ci_fixed_2"]
    assert library.get_policy("ci_fixed_2").config.arm == 2

    library.write_yaml("tests/temp.yaml")
    library.clear()
    assert not library.get_policy_names()

    library.load_yaml("tests/temp.yaml")
    os.unlink("tests/temp.yaml")
    assert library.get_policy_names() == ["ci_ucb_short", "ci_ts_coarse", "ci_fixed_2"]
    assert library.get_instance("ci_three_state").resolve().num_states == 3


def test_library_experiments() -> None:
    library.load_yaml("tests/ci_experiment.yaml")
    assert library.get_experiment_names() == ["ci_ucb", "ci_fixed"]
    assert library.get_experiment("ci_fixed").config.horizon == 1000

    with pytest.raises(KeyError):
        library.get_experiment("nope")


def test_library_bad_tag(tmp_path) -> None:  # type: ignore[no-untyped-def]
    bad_file = tmp_path / "bad.yaml"
    bad_file.write_text("Bananas: []\n")
    with pytest.raises(KeyError):
        library.load_yaml(str(bad_file))


def test_policy_classes() -> None:
    library.print_policy_classes()
    the_class = library.get_policy_class("FixedArmPolicy")
    assert the_class.__name__ == "FixedArmPolicy"
    policy = library.create_policy_from_dict(
        dict(name="fixed", class_name="FixedArmPolicy", arm=1)
    )
    assert isinstance(policy, the_class)

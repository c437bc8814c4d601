import os

import pytest
import yaml

from rail.restless import verification
from rail.restless.verification import (
    FULL_SIZES,
    QUICK_SIZES,
    SUMMARY_FILE,
    CheckContext,
    CheckResult,
    VerificationConfig,
    VerificationReport,
    check_assumptions,
    check_bias_gap,
    check_gain_proximity,
    load_verification_file,
    verify_lemmas,
)


def test_verification_config(tmp_path) -> None:  # type: ignore[no-untyped-def]
    config = load_verification_file("tests/ci_verify.yaml")
    assert config.config.name == "ci_verify"
    assert config.size("correspond_triples") == 3

    full = VerificationConfig()
    assert full.size("correspond_draws") == FULL_SIZES["correspond_draws"] == 1_000_000
    quick = VerificationConfig(quick=True)
    assert quick.size("correspond_draws") == QUICK_SIZES["correspond_draws"]

    no_block = tmp_path / "no_block.yaml"
    no_block.write_text("Experiments: []\n")
    with pytest.raises(KeyError):
        load_verification_file(str(no_block))


def test_report_round_trip(tmp_path) -> None:  # type: ignore[no-untyped-def]
    report = VerificationReport(
        [
            CheckResult("one", True, 0, 0, dict(seconds=0.5)),
            CheckResult("two", False, 3, 1e-6),
        ],
        dict(name="toy"),
    )
    assert not report.passed
    assert report.failures() == ["two"]
    assert report["one"].passed
    with pytest.raises(KeyError):
        _ = report["three"]

    paths = report.write(str(tmp_path))
    assert [os.path.basename(path_) for path_ in paths] == ["one.yaml", "two.yaml", SUMMARY_FILE]
    copy = VerificationReport.read(str(tmp_path))
    assert copy.names() == ["one", "two"]
    assert copy["two"].statistic == 3.0
    assert copy["two"].bound == 1e-6
    assert copy["one"].details == dict(seconds=0.5)
    assert copy.config == dict(name="toy")

    bad = report.to_dict()
    bad["format_version"] = 99
    with pytest.raises(ValueError):
        VerificationReport.from_dict(bad)


def test_verify_lemmas(temp_area: str) -> None:
    config = load_verification_file("tests/ci_verify.yaml")
    report = verify_lemmas(config)
    assert report.passed, report.failures()
    assert report.names()[:4] == [f"assumption_A{i}" for i in range(1, 5)]
    for name_ in [
        "stationary_balance",
        "shift_dominance",
        "adjacent_rows",
        "dominance_preservation",
        "power_bound",
        "correspond_marginal",
        "correspond_dominance",
        "coupled_dominance",
        "optimistic_gain_order",
        "event_frequency",
        "gain_proximity",
        "bias_gap",
    ]:
        assert name_ in report.names()
        assert "seconds" in report[name_].details

    paths = report.write(config.config.output_dir)
    assert paths[-1].startswith(temp_area)
    with open(paths[-1], encoding="utf-8") as fin:
        summary = yaml.safe_load(fin)
    assert summary["passed"]
    assert summary["config"]["seed"] == 7


@pytest.mark.parametrize("assumption", ["A1", "A4"])
def test_inject_violation(assumption: str) -> None:
    config = VerificationConfig(inject_violation=assumption)
    results = check_assumptions(CheckContext(config))
    failed = [result_.name for result_ in results if not result_.passed]
    assert f"assumption_{assumption}" in failed
    details = results[int(assumption[1]) - 1].details
    assert details["injected"] == assumption
    assert details["failures"][0]["arm"] == 1

    with pytest.raises(KeyError):
        check_assumptions(CheckContext(VerificationConfig(inject_violation="A2")))


def test_inject_violation_report() -> None:
    config = VerificationConfig(
        **dict(
            load_verification_file("tests/ci_verify.yaml").config.to_dict(),
            inject_violation="A3",
        )
    )
    report = verify_lemmas(config)
    assert report.failures() == ["assumption_A3"]
    assert not report.passed


def test_failing_check_is_recorded(monkeypatch: pytest.MonkeyPatch) -> None:
    def check_explodes(ctx: CheckContext) -> CheckResult:
        raise RuntimeError(f"no luck with {ctx.instance}")

    monkeypatch.setattr(verification, "CHECKS", [check_assumptions, check_explodes])
    report = verify_lemmas(VerificationConfig())
    assert report.names()[-1] == "explodes"
    assert report.failures() == ["explodes"]
    assert report["explodes"].details["error"].startswith("RuntimeError: no luck")

    with pytest.raises(KeyError):
        verify_lemmas(VerificationConfig(instance="no_such_instance"))


def test_gain_proximity_keeps_runs_within_radius(monkeypatch: pytest.MonkeyPatch) -> None:
    config = VerificationConfig(proximity_horizons=[1000, 10000], proximity_runs=3, seed=5)
    result = check_gain_proximity(CheckContext(config))
    kept = result.details["runs_within_radius"]
    assert len(kept) == 2
    assert all(0 < kept_ <= 3 for kept_ in kept)
    assert all(gap_ >= -1e-6 for gap_ in result.details["median_gaps"])

    monkeypatch.setattr(verification, "estimates_within", lambda *args: False)
    rejected = check_gain_proximity(CheckContext(config))
    assert not rejected.passed
    assert rejected.details["runs_within_radius"] == [0, 0]


def test_bias_gap_pairs(monkeypatch: pytest.MonkeyPatch) -> None:
    pairs = []

    def record_pair(instance, table, z, j, k, horizon, seed):  # type: ignore[no-untyped-def]
        pairs.append((j, k))
        return 0.0

    monkeypatch.setattr(verification, "simulate_bias_gap", record_pair)
    result = check_bias_gap(CheckContext(VerificationConfig(quick=True)))
    assert result.passed
    assert len(pairs) == QUICK_SIZES["bias_triples"] * QUICK_SIZES["bias_seeds"]
    assert all(j_ > k_ for j_, k_ in pairs)
    assert all(j_ >= 1 for j_, _ in pairs)

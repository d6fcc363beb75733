import json

import pytest

from dgpe.cli import _compare_expected

from conftest import SCENARIOS

CHEAP = ["at_i", "at_ii", "at_iii", "bc_below", "bc_prime", "sc_prime", "cubic_sanity",
         "growup_demo", "sr_gaussian"]


@pytest.mark.slow
@pytest.mark.parametrize("name", CHEAP)
def test_expected_verdict(scenario_runner, name):
    summary, out = scenario_runner(name)
    expected = json.loads((SCENARIOS / f"{name}.json").read_text())
    assert _compare_expected(summary.to_json(), expected) == []
    assert not (out / ".partial").exists()
    assert sorted(p.name for p in out.iterdir()) == summary.manifest


@pytest.mark.slow
def test_growup_monitor_within_bound(scenario_runner):
    _, out = scenario_runner("growup_demo")
    traj = json.loads((out / "trajectory.json").read_text())
    g = traj["growup"]
    assert g["within_bound"]
    assert sorted(float(r) for r in g["fits"]) == [2.0, 4.0, 8.0]


@pytest.mark.slow
def test_above_threshold_conditions(scenario_runner):
    for name, key in (("sc_prime", "conditions_SC_prime"), ("bc_prime", "conditions_BC_prime")):
        summary, _ = scenario_runner(name)
        assert all(summary.verdict["witnesses"][key])

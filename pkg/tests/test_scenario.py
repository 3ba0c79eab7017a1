from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from nrbwp.bwp import Direction
from nrbwp.errors import ScenarioError, ScenarioSyntaxError
from nrbwp.scenario import (ForcedNack, GroupCommonConfig, SwitchCommand, dump_scenario, parse_scenario,
                            parse_scenario_text, validate_scenario)
from nrbwp.scheduler import SwitchPolicy
from nrbwp.traffic import TrafficSource
from nrbwp.ue import EnergyModel, MeasGapConfig

from helpers import bundled, load, single_ue, with_profile

BUNDLED = ["coexistence.scn", "energy_saving.scn", "harq_across_switch.scn"]


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_parse_and_validate(name):
    scn = load(name)
    assert validate_scenario(scn) == []
    assert parse_scenario_text(dump_scenario(scn)) == scn


def test_coexistence_shape():
    scn = load("coexistence.scn")
    assert [(u.profile.num_chains, u.profile.per_chain_bw_khz) for u in scn.ues] == \
        [(1, 100_000), (2, 50_000), (1, 20_000)]
    assert scn.carrier.cbw_khz == 100_000 and scn.duration_slots == 1000


def test_empty_file_is_line_one_syntax_error():
    with pytest.raises(ScenarioSyntaxError) as exc:
        parse_scenario_text("")
    assert exc.value.line == 1


def test_unknown_key_rejected_with_line():
    text = bundled("harq_across_switch.scn").read_text().replace("  seed = 0\n", "  seed = 0\n  colour = red\n")
    with pytest.raises(ScenarioSyntaxError) as exc:
        parse_scenario_text(text)
    assert "colour" in str(exc.value)
    assert exc.value.line == text.splitlines().index("  colour = red") + 1


def test_unterminated_section():
    with pytest.raises(ScenarioSyntaxError):
        parse_scenario_text("scenario\n  name = x\n")


def _five_dl_text():
    text = bundled("harq_across_switch.scn").read_text()
    extra = "".join(f"    bwp DL {i}\n      first_prb = 0\n      num_prbs = 40\n      mu = 1\n    end\n"
                    for i in range(2, 5))
    return text.replace("    bwp UL 0\n", extra + "    bwp UL 0\n")


def test_five_dl_bwps_rejected(tmp_path):
    path = tmp_path / "five.scn"
    path.write_text(_five_dl_text())
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(path)
    assert any(v.rule == "bwp.max_dl" and "max 4 DL BWPs" in v.message for v in exc.value.violations)


def test_semantic_errors_aggregate():
    scn = single_ue(traffic=(TrafficSource(9, "constant", 10),),
                    commands=(SwitchCommand(0, 0, 5),), duration=0)
    rules = {v.rule for v in validate_scenario(scn)}
    assert {"scenario.duration", "scenario.refs"} <= rules


@settings(max_examples=40, deadline=None)
@given(loss=st.floats(0, 1), nack=st.floats(0, 1), timer=st.integers(1, 50), seed=st.integers(0, 2 ** 32),
       duration=st.integers(1, 5000), period=st.integers(2, 40), baseline=st.floats(0, 100),
       up=st.integers(2, 10 ** 6), hyst=st.integers(1, 9), enabled=st.booleans(),
       traffic=st.lists(st.tuples(st.sampled_from(["constant", "onoff"]), st.integers(0, 10 ** 5),
                                  st.integers(1, 50), st.integers(0, 50)), max_size=3))
def test_dump_parse_round_trip(loss, nack, timer, seed, duration, period, baseline, up, hyst, enabled, traffic):
    scn = single_ue(loss=loss, nack=nack, timer=timer, seed=seed, duration=duration,
                    energy=EnergyModel(baseline, 2.5, 0.125),
                    policy=SwitchPolicy(up, up // 2, hyst, enabled),
                    traffic=tuple(TrafficSource(0, m, b, on, off, seed=i) for i, (m, b, on, off) in enumerate(traffic)),
                    commands=(SwitchCommand(3, 0, 1, 0, Direction.UL, "rrc"),),
                    forced_nacks=(ForcedNack(0, 2),),
                    group_common=(GroupCommonConfig(period, 60, 10, (0,), 1),))
    scn = with_profile(scn, meas_gap=MeasGapConfig(period, 1, 0))
    assert parse_scenario_text(dump_scenario(scn)) == scn


def test_round_trip_preserves_name():
    scn = replace(load("coexistence.scn"), name="renamed")
    assert parse_scenario_text(dump_scenario(scn)).name == "renamed"

import io
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from nrbwp.bwp import BwpSet, Direction, Spectrum
from nrbwp.errors import ScenarioError
from nrbwp.scenario import Scenario, SwitchCommand
from nrbwp.scheduler import SwitchPolicy, payload_bytes
from nrbwp.sim import REPORT_COLUMNS, EventKind, build_report, run
from nrbwp.trace import read_trace, trace_to_csv, verify_trace
from nrbwp.traffic import TrafficSource
from nrbwp.ue import MeasGapConfig

from helpers import bwp, fr1_carrier, load, single_ue, two_bwp_set, with_profile

FULL_SLOT = payload_bytes(272, 12)


def wide_only():
    dl = (bwp(0, 0, 272, Direction.DL, has_css=True, is_initial=True),)
    ul = (bwp(0, 0, 272, Direction.UL, is_initial=True),)
    return BwpSet(Spectrum.PAIRED, dl, ul)


def events(trace, name, ue=None):
    return [r for r in trace if r.event == name and (ue is None or r.ue_id == ue)]


def test_event_priority_order():
    assert EventKind.SWITCH_DONE < EventKind.HARQ_FEEDBACK < EventKind.TRAFFIC_ARRIVAL < EventKind.SLOT_BOUNDARY
    assert EventKind.SLOT_BOUNDARY < EventKind.DCI_TX < EventKind.PDSCH_START


def test_empty_scenario():
    trace, rep = run(Scenario(fr1_carrier()))
    assert trace == [] and rep.ues == [] and rep.prb_utilization == 0.0


def test_invalid_scenario_aborts_with_all_violations():
    bad = single_ue(duration=0, traffic=(TrafficSource(4, "constant", 1),))
    with pytest.raises(ScenarioError) as exc:
        run(bad)
    assert {v.rule for v in exc.value.violations} >= {"scenario.duration", "scenario.refs"}


@pytest.mark.parametrize("demand", [1000, 5000, FULL_SLOT, 30_000])
def test_utilization_closed_form(demand):
    scn = single_ue(wide_only(), traffic=(TrafficSource(0, "constant", demand),), duration=50)
    trace, rep = run(scn)
    assert rep.prb_utilization == pytest.approx(min(1.0, demand / FULL_SLOT), abs=1e-12)
    assert rep.ue(0).switch_count == 0
    assert verify_trace(trace) == []


def test_latency_is_one_slot_when_unloaded():
    trace, rep = run(single_ue(wide_only(), duration=30))
    assert rep.ue(0).mean_latency_slots == 1.0
    assert rep.ue(0).bytes_served == 30 * 1000


def test_seed_irrelevant_without_randomness():
    scn = single_ue(traffic=(TrafficSource(0, "onoff", 9000, 10, 20, seed=4),), duration=300)
    a, _ = run(scn, 1)
    b, _ = run(scn, 2)
    assert trace_to_csv(a) == trace_to_csv(b)


def test_lossy_runs_are_seed_deterministic():
    scn = single_ue(loss=0.3, nack=0.2, traffic=(TrafficSource(0, "onoff", 9000, 10, 20, seed=4),), duration=300)
    assert trace_to_csv(run(scn, 7)[0]) == trace_to_csv(run(scn, 7)[0])
    assert trace_to_csv(run(scn, 7)[0]) != trace_to_csv(run(scn, 8)[0])


@pytest.mark.parametrize("name", ["coexistence.scn", "energy_saving.scn", "harq_across_switch.scn"])
def test_bundled_runs_are_self_consistent(name):
    trace, rep = run(load(name))
    assert verify_trace(trace) == []
    assert rep.overlap_violations == 0
    assert build_report(read_trace(io.StringIO(trace_to_csv(trace)))) == rep
    assert rep.to_csv().splitlines()[0] == ",".join(REPORT_COLUMNS)
    for u in rep.ues:
        assert u.bytes_served + u.backlog_bytes <= u.bytes_offered


def test_lost_switch_recovers_by_timer():
    scn = single_ue(loss=1.0, timer=4, duration=40, policy=SwitchPolicy(enabled=False),
                    commands=(SwitchCommand(2, 0, 1),))
    trace, rep = run(scn)
    assert [r.info["cause"] for r in events(trace, "DCI_TX") if r.info["kind"] == "BwpSwitch"] == ["command"]
    assert [r.info["cause"] for r in events(trace, "GNB_SWITCH_DONE")] == ["dci", "timer"]
    assert events(trace, "SWITCH_START") == []
    assert len(events(trace, "GNB_TIMER_EXPIRY")) == 1
    grants_on_1 = [r for r in events(trace, "PDSCH") if r.bwp_id == 1]
    assert grants_on_1 and all(r.info["rx"] == "miss" for r in grants_on_1)
    assert verify_trace(trace) == []


def test_rrc_switch_is_lossless_on_both_sides():
    scn = single_ue(loss=1.0, duration=20, policy=SwitchPolicy(enabled=False),
                    commands=(SwitchCommand(3, 0, 1, via="rrc"),))
    trace, _ = run(scn)
    assert [r.info["cause"] for r in events(trace, "SWITCH_DONE")][:1] == ["rrc"]
    assert [r.info["cause"] for r in events(trace, "GNB_SWITCH_DONE")][:1] == ["rrc"]


def test_measurement_gap_silences_the_ue():
    scn = with_profile(single_ue(wide_only(), duration=100), meas_gap=MeasGapConfig(20, 3, 5))
    trace, rep = run(scn)
    gap_slots = {s for s in range(100) if (s - 5) % 20 < 3}
    assert not [r for r in events(trace, "PDSCH") if int(r.info["slot"]) in gap_slots]
    assert len(events(trace, "MEAS_GAP_START")) == 5
    assert rep.ue(0).bytes_served == 100 * 1000


def test_group_common_common_indices():
    trace, _ = run(replace(load("coexistence.scn"), duration_slots=200))
    rx = [r for r in events(trace, "GC_RX") if r.info["rx"] == "ok"]
    assert rx and {r.info["common"] for r in rx} == {"60"}
    assert len({r.prb_start for r in rx}) > 1


def test_energy_drops_with_narrow_default():
    base = single_ue(traffic=(TrafficSource(0, "onoff", 8000, 5, 95, seed=1, stop_slot=400),), duration=500)
    _, switching = run(base)
    pinned = single_ue(two_bwp_set(narrow=(0, 272), wide=(0, 272)), traffic=base.traffic, duration=500)
    _, wide = run(pinned)
    assert switching.ue(0).energy_mj < wide.ue(0).energy_mj


@settings(max_examples=15, deadline=None)
@given(loss=st.sampled_from([0.0, 0.2, 1.0]), nack=st.sampled_from([0.0, 0.3]), seed=st.integers(0, 1000),
       cmds=st.lists(st.tuples(st.integers(0, 299), st.integers(0, 1), st.sampled_from(["dci", "rrc"])),
                     max_size=12))
def test_random_runs_keep_invariants(loss, nack, seed, cmds):
    scn = single_ue(loss=loss, nack=nack, duration=300, timer=3,
                    traffic=(TrafficSource(0, "onoff", 7000, 7, 13, seed=seed),),
                    commands=tuple(SwitchCommand(s, 0, b, via=v) for s, b, v in cmds))
    trace, rep = run(scn, seed)
    assert verify_trace(trace) == []
    u = rep.ue(0)
    assert u.bytes_served <= u.bytes_offered

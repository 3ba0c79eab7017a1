from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from nrbwp.bwp import common_to_bwp_prb
from nrbwp.errors import EmptyGroup, UeOutOfSpan
from nrbwp.carrier import CommonPrbGrid
from nrbwp.numerology import Numerology
from nrbwp.scheduler import (AllocKind, CcRequest, HarqVerdict, Occupancy, Scheduler, SwitchPolicy,
                             decide_switch, enforce_k_gap, handle_harq_feedback, issue_group_common,
                             payload_bytes, prbs_needed)
from nrbwp.ue import HarqProcess, HarqState

from helpers import bwp, two_bwp_set

GRID = CommonPrbGrid(Numerology(1), 0, 272)


def scheduler(ue_ids):
    return Scheduler(ue_ids, Occupancy(1, 1, 272))


def request(ue, b, slot, cc=0):
    return CcRequest(ue, cc, b, slot * 14, 1, [], list(range(8)))


def test_payload_closed_form():
    assert payload_bytes(272, 12) == 272 * 12 * 4 * 12 // 8 == 19_584
    assert prbs_needed(19_584, 12) == 272
    assert prbs_needed(19_585, 12) == 273


def test_disjoint_bwps_served_together():
    s = scheduler([0, 1])
    a, b = bwp(0, 0, 100), bwp(0, 150, 100)
    allocs = s.schedule_slot(0, {0: 5000, 1: 5000}, [request(0, a, 0), request(1, b, 0)])
    assert sorted(x.ue_id for x in allocs) == [0, 1]
    assert all(x.kind is AllocKind.UE_SPECIFIC and x.symbols == (2, 14) for x in allocs)


def test_round_robin_alternates_on_shared_span():
    s = scheduler([0, 1])
    b = bwp(0, 0, 272)
    demands = {0: 50_000, 1: 50_000}
    served = []
    for slot in range(4):
        allocs = s.schedule_slot(slot, demands, [request(0, b, slot), request(1, b, slot)])
        assert len(allocs) == 1 and allocs[0].common_prbs == (0, 272)
        served.append(allocs[0].ue_id)
    assert served == [0, 1, 0, 1]
    assert demands == {0: 50_000 - 2 * 19_584, 1: 50_000 - 2 * 19_584}


def test_case_b_grants_stay_per_cc():
    s = scheduler([0])
    cc0, cc1 = bwp(0, 0, 136), bwp(0, 136, 136)
    allocs = s.schedule_slot(0, {0: 100_000}, [request(0, cc0, 0, 0), request(0, cc1, 0, 1)])
    assert [(a.cc_index, a.common_prbs) for a in allocs] == [(0, (0, 136)), (1, (136, 136))]


def test_retransmission_needs_whole_block():
    s = scheduler([0, 1])
    b = bwp(0, 0, 272)
    proc = HarqProcess(3, HarqState.NEEDS_RETX, 0, 1, tb_bytes=10_000)
    s.schedule_slot(0, {1: 15_000}, [request(1, b, 0)])
    req = CcRequest(0, 0, b, 0, 1, [proc], [])
    assert s.place(req, 0, 2, proc=proc) is None
    a = s.place(CcRequest(0, 0, b, 14, 1, [proc], []), 1, 2, proc=proc)
    assert a.retx and a.harq_pid == 3 and a.bytes == 10_000


def test_decide_switch_examples():
    pol = SwitchPolicy(4000, 1, 2)
    s = two_bwp_set()
    assert decide_switch(pol, [0] * 50, active_dl=0, bwp_set=s) is None
    assert decide_switch(pol, [9000, 9000], active_dl=0, bwp_set=s) == 1
    assert decide_switch(pol, [9000, 9000], active_dl=0, bwp_set=s, switch_pending=True) is None
    assert decide_switch(pol, [9000, 9000], active_dl=1, bwp_set=s) is None
    assert decide_switch(pol, [0, 0], active_dl=1, bwp_set=s) == 0
    assert decide_switch(pol, [9000, 0, 9000, 0], active_dl=0, bwp_set=s) is None
    assert decide_switch(SwitchPolicy(enabled=False), [9000] * 3, active_dl=0, bwp_set=s) is None


def test_heavy_backlog_switches_up_once():
    pol = SwitchPolicy(4000, 1, 2)
    s = two_bwp_set()
    history = deque(maxlen=2)
    active, pending, issued = 0, None, []
    for slot in range(20):
        history.append(10_000)
        if pending is not None and slot >= pending:
            active, pending = 1, None
        t = decide_switch(pol, history, active_dl=active, bwp_set=s, switch_pending=pending is not None)
        if t is not None:
            issued.append((slot, t))
            pending = slot + 1
    assert issued == [(1, 1)]


def test_enforce_k_gap_examples():
    assert enforce_k_gap(2, 6) == (0, 8, True)
    assert enforce_k_gap(2, 0) == (0, 2, False)
    assert enforce_k_gap(2, 20) == (1, 8, True)
    assert enforce_k_gap(2, 11) == (0, 13, True)
    assert enforce_k_gap(2, 12) == (1, 2, True)


@given(end=st.integers(0, 13), k=st.integers(0, 60))
def test_k_gap_never_early(end, k):
    off, sym, _ = enforce_k_gap(end, k)
    assert off * 14 + sym >= end + k
    assert 2 <= sym < 14


def test_group_common():
    a, b = bwp(0, 90, 30), bwp(0, 100, 50)
    alloc = issue_group_common(GRID, (100, 10), {0: a, 1: b})
    assert alloc.kind is AllocKind.GROUP_COMMON and alloc.common_prbs == (100, 10)
    assert alloc.addressees == (0, 1)
    assert common_to_bwp_prb(a, 100) == 10 and common_to_bwp_prb(b, 100) == 0
    with pytest.raises(UeOutOfSpan) as exc:
        issue_group_common(GRID, (100, 10), {0: a, 2: bwp(0, 0, 50)})
    assert exc.value.offenders == (2,)
    with pytest.raises(EmptyGroup):
        issue_group_common(GRID, (100, 10), {})


def test_harq_feedback():
    p = HarqProcess(0, HarqState.AWAITING_ACK, 0, tb_bytes=100)
    assert handle_harq_feedback(p, True) is HarqVerdict.DONE and p.state is HarqState.IDLE
    verdicts = [handle_harq_feedback(p, False) for _ in range(4)]
    assert verdicts == [HarqVerdict.RETX] * 3 + [HarqVerdict.FAILED]


@settings(max_examples=60)
@given(spans=st.lists(st.tuples(st.integers(0, 250), st.integers(20, 272)), min_size=1, max_size=5),
       demand=st.lists(st.integers(1, 40_000), min_size=5, max_size=5), slot=st.integers(0, 50))
def test_slot_allocations_disjoint_and_work_conserving(spans, demand, slot):
    ues = list(range(len(spans)))
    s = scheduler(ues)
    reqs = [request(u, bwp(0, f, min(n, 272 - f)), slot) for u, (f, n) in zip(ues, spans)]
    demands = {u: demand[u] for u in ues}
    allocs = s.schedule_slot(slot, demands, reqs)
    assert allocs, "a backlogged UE with a free BWP must be served"
    used = set()
    for a in allocs:
        first, n = a.common_prbs
        req = reqs[a.ue_id]
        assert req.bwp.contains(first) and req.bwp.contains(first + n - 1)
        prbs = set(range(first, first + n))
        assert used.isdisjoint(prbs)
        used |= prbs

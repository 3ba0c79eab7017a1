"""Discrete-event engine: drives the scheduler, UEs and BWP state machines at
OFDM-symbol granularity and emits the trace and the summary report."""
import heapq
from collections import deque
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .bwp import (BwpStateMachine, Direction, Spectrum, common_to_bwp_prb, k_symbol_gap, switch_delay)
from .errors import NotMonitored, ScenarioError, UeOutOfSpan
from .numerology import SYMBOLS_PER_SLOT, Numerology, symbol_timing
from .scenario import Scenario, carrier_grids, validate_scenario
from .scheduler import (FIRST_DATA_SYMBOL, PDCCH_SYMBOLS, CcRequest, Dci, DciKind, HarqVerdict,
                        Occupancy, Scheduler, decide_switch, enforce_k_gap, handle_harq_feedback,
                        issue_group_common, payload_bytes)
from .trace import TraceRecord, find_overlaps, fmt_detail, pdsch_rectangles
from .ue import DciOutcome, HarqState, classify, configure, harq_on_switch, new_context, receive_dci


class EventKind(IntEnum):
    """Event kinds; the value orders simultaneous events."""
    SWITCH_DONE = 0
    HARQ_FEEDBACK = 1
    MEAS_GAP_END = 2
    MEAS_GAP_START = 3
    TRAFFIC_ARRIVAL = 4
    SLOT_BOUNDARY = 5
    DCI_TX = 6
    PDSCH_START = 7


@dataclass(order=True)
class Event:
    time_ns: int
    kind: EventKind
    seq: int
    payload: object = field(compare=False, default=None)


@dataclass
class UeReport:
    ue_id: int
    bytes_served: int = 0
    mean_latency_slots: float = 0.0
    energy_mj: float = 0.0
    switch_count: int = 0
    timer_fallbacks: int = 0
    harq_failures: int = 0
    dci_lost: int = 0
    bytes_offered: int = 0
    backlog_bytes: int = 0


REPORT_COLUMNS = ("ue_id", "bytes_served", "mean_latency_slots", "energy_mj", "switch_count",
                  "timer_fallbacks", "harq_failures", "dci_lost")


@dataclass
class Report:
    ues: list = field(default_factory=list)
    prb_utilization: float = 0.0
    overlap_violations: int = 0
    duration_slots: int = 0

    def ue(self, ue_id) -> UeReport:
        for r in self.ues:
            if r.ue_id == ue_id:
                return r
        raise KeyError(ue_id)

    def to_csv(self) -> str:
        rows = [",".join(REPORT_COLUMNS)]
        for r in self.ues:
            rows.append(f"{r.ue_id},{r.bytes_served},{r.mean_latency_slots:.6f},{r.energy_mj:.9f},"
                        f"{r.switch_count},{r.timer_fallbacks},{r.harq_failures},{r.dci_lost}")
        return "\n".join(rows) + "\n"

    def to_text(self, title="run") -> str:
        head = ("UE", "bytes_served", "latency_slots", "energy_mJ", "switches", "fallbacks",
                "harq_fail", "dci_lost", "offered", "backlog")
        body = [(str(r.ue_id), str(r.bytes_served), f"{r.mean_latency_slots:.3f}", f"{r.energy_mj:.6f}",
                 str(r.switch_count), str(r.timer_fallbacks), str(r.harq_failures), str(r.dci_lost),
                 str(r.bytes_offered), str(r.backlog_bytes)) for r in self.ues]
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        fmt = lambda row: "  ".join(c.rjust(w) for c, w in zip(row, widths))
        lines = [f"report: {title}", f"duration_slots      {self.duration_slots}",
                 f"prb_utilization     {self.prb_utilization:.6f}",
                 f"overlap_violations  {self.overlap_violations}", "", fmt(head)]
        lines += [fmt(row) for row in body]
        return "\n".join(lines) + "\n"


def build_report(trace) -> Report:
    """Aggregate a trace into the summary report (the report is a pure function of the trace)."""
    rep = Report()
    capacity = 0
    per = {}
    lat = {}
    carried = 0
    for r in trace:
        if r.event == "CONFIG" and r.ue_id < 0:
            info = r.info
            rep.duration_slots = int(info["duration"])
            capacity = int(info["capacity_bytes"])
            continue
        if r.ue_id >= 0 and r.ue_id not in per:
            per[r.ue_id] = UeReport(r.ue_id)
            lat[r.ue_id] = 0
        u = per.get(r.ue_id)
        if r.event == "PDSCH":
            carried += r.bytes
        if u is None:
            continue
        if r.energy_mj_cum is not None:
            u.energy_mj = r.energy_mj_cum
        ev = r.event
        if ev == "HARQ_ACK":
            u.bytes_served += r.bytes
            lat[r.ue_id] += int(r.info["lat"])
        elif ev == "SWITCH_DONE":
            u.switch_count += 1
        elif ev == "TIMER_EXPIRY":
            u.timer_fallbacks += 1
        elif ev == "HARQ_FAIL":
            u.harq_failures += 1
        elif ev == "DCI_LOST":
            u.dci_lost += 1
        elif ev == "END":
            info = r.info
            u.bytes_offered = int(info["offered"])
            u.backlog_bytes = int(info["backlog"])
    for ue_id, u in per.items():
        u.mean_latency_slots = lat[ue_id] / u.bytes_served if u.bytes_served else 0.0
    rep.ues = [per[k] for k in sorted(per)]
    if per and capacity:
        rep.prb_utilization = carried / capacity
    rep.overlap_violations = len(find_overlaps(pdsch_rectangles(trace)))
    return rep


@dataclass
class _Pdsch:
    alloc: object
    decoded: bool = False
    pdcch_bwp: int = None
    pdcch_end_ns: int = None
    k: int = 0


@dataclass
class _UeState:
    spec: object
    ctx: object
    belief: list
    view: object
    dci_rng: np.random.Generator
    harq_rng: np.random.Generator
    queue: deque = field(default_factory=deque)     # [arrival_slot, bytes]
    backlog: int = 0
    offered: int = 0
    history: list = None
    rx_flag: list = None
    fb_flag: list = None
    planned: list = None
    commands: list = None
    energy_t: int = 0
    in_gap: bool = False

    @property
    def uid(self):
        return self.spec.profile.id


class Simulation:
    """One run of one scenario. Use :func:`run` unless stepping manually."""

    def __init__(self, scenario: Scenario, seed=None):
        violations = validate_scenario(scenario)
        if violations:
            raise ScenarioError(violations)
        self.scn = scenario
        self.seed = scenario.seed if seed is None else seed
        carrier = scenario.carrier
        self.grids = carrier_grids(carrier)
        self.anchor = carrier.grid()
        mus = {n.mu for n in carrier.data_numerologies}
        for spec in scenario.ues:
            for s in spec.ccs:
                mus |= {n.mu for n in s.numerologies}
        self.mu_max = max(mus)
        self.base_mu = min(mus)
        # one tick is one symbol of the finest numerology; a global slot is 14 ticks
        self.tick_ns = symbol_timing(Numerology(self.mu_max)).total_ns
        self.slot_ns = SYMBOLS_PER_SLOT * self.tick_ns
        self.end_ns = scenario.duration_slots * self.slot_ns
        width = max(g.num_prbs * 2 ** (g.numerology.mu - self.base_mu) for g in self.grids.values())
        self.occupancy = Occupancy(self.base_mu, self.mu_max, width)
        self.scheduler = Scheduler([u.profile.id for u in scenario.ues], self.occupancy, scenario.bits_per_re)
        self.trace = []
        self._heap = []
        self._seq = 0
        self.forced = {(n.ue_id, n.slot) for n in scenario.forced_nacks}
        root = np.random.SeedSequence(self.seed)
        children = root.spawn(len(scenario.ues))
        self.ues = {}
        for spec, ss in zip(scenario.ues, children):
            dci_ss, harq_ss = ss.spawn(2)
            profile = replace(spec.profile, rf_case=classify(spec.profile, carrier))
            view = configure(profile, carrier, self.anchor)
            ctx = new_context(profile, view, spec.ccs, np.random.default_rng(dci_ss))
            belief = [BwpStateMachine(s, profile.retune, profile.timer_slots) for s in spec.ccs]
            n = len(spec.ccs)
            st = _UeState(spec, ctx, belief, view, ctx.rng_stream, np.random.default_rng(harq_ss),
                          history=[deque(maxlen=scenario.policy.hysteresis_slots) for _ in range(n)],
                          rx_flag=[False] * n, fb_flag=[False] * n, planned=[-1] * n,
                          commands=[deque() for _ in range(n)])
            self.ues[profile.id] = st
        for cmd in sorted(scenario.commands, key=lambda c: c.slot):
            self.ues[cmd.ue_id].commands[cmd.cc_index].append(cmd)

    # ------------------------------------------------------------ plumbing
    def _push(self, t, kind, payload=None):
        self._seq += 1
        heapq.heappush(self._heap, Event(t, kind, self._seq, payload))

    def _sym_ticks(self, mu):
        return 2 ** (self.mu_max - mu)

    def _ratio(self, mu):
        """Global slots per slot of numerology ``mu``."""
        return 2 ** (self.mu_max - mu)

    def _emit(self, t, ue_id, event, bwp_id=None, prb_start=None, prb_len=None, nbytes=None, **detail):
        energy = None
        if ue_id >= 0:
            self._sync_energy(self.ues[ue_id], t)
            # rounded to what trace.csv keeps, so a report rebuilt from the file is identical
            energy = round(self.ues[ue_id].ctx.energy_mj, 9)
        self.trace.append(TraceRecord(t, ue_id, event, bwp_id, prb_start, prb_len, nbytes, energy,
                                      fmt_detail(**detail)))

    def _sync_energy(self, st, t):
        if t <= st.energy_t:
            return
        bw = 0
        for sm in st.ctx.bwp_sm:
            p = sm.pending_switch
            if p is None or not p.affects_dl:
                bw += sm.active(Direction.DL).bandwidth_khz
        e = st.ctx.profile.energy
        st.ctx.energy_mj += (e.baseline_mw + e.per_mhz_mw * bw / 1000) * (t - st.energy_t) * 1e-9
        st.energy_t = t

    # ------------------------------------------------------------ run
    def run(self):
        if not self.ues:
            return [], build_report([])
        self._start()
        while self._heap and self._heap[0].time_ns <= self.end_ns:
            ev = heapq.heappop(self._heap)
            getattr(self, "_on_" + ev.kind.name.lower())(ev.time_ns, ev.payload)
        self._finish()
        return self.trace, build_report(self.trace)

    def _start(self):
        scn = self.scn
        anchor_ratio = self._ratio(self.anchor.numerology.mu)
        capacity = payload_bytes(self.anchor.num_prbs, SYMBOLS_PER_SLOT - FIRST_DATA_SYMBOL, scn.bits_per_re)
        self._emit(0, -1, "CONFIG", duration=scn.duration_slots, slot_ns=self.slot_ns, tick_ns=self.tick_ns,
                   mu_max=self.mu_max, capacity_bytes=capacity * scn.duration_slots // anchor_ratio)
        w = self.anchor.numerology.prb_width_khz
        for uid, st in sorted(self.ues.items()):
            for cc, (sm, (first, n)) in enumerate(zip(st.ctx.bwp_sm, st.view.cc_spans)):
                s = sm.bwp_set
                pairs = "|".join(f"{a}:{b}" for a, b in s.pairs) if s.spectrum is Spectrum.UNPAIRED else None
                self._emit(0, uid, "CONFIG", cc=cc, case=st.ctx.rf_case.value, spectrum=s.spectrum.value,
                           pairs=pairs, span=f"{first * w}:{(first + n) * w}")
                self._emit(0, uid, "ACTIVE", sm.active_dl, cc=cc, dl=sm.active_dl, ul=sm.active_ul)
        for t in scn.traffic:
            gen = t.schedule(scn.duration_slots, np.random.default_rng(t.seed))
            self._next_arrival(gen, t.ue_id)
        for uid, st in self.ues.items():
            g = st.ctx.profile.meas_gap
            if g is not None:
                first = next((s for s in range(scn.duration_slots) if g.in_gap(s)), None)
                if first is not None:
                    self._push(first * self.slot_ns, EventKind.MEAS_GAP_START, uid)
        self._push(0, EventKind.SLOT_BOUNDARY, 0)

    def _finish(self):
        for uid, st in sorted(self.ues.items()):
            self._emit(self.end_ns, uid, "END", offered=st.offered, backlog=st.backlog)

    # ------------------------------------------------------------ traffic and gaps
    def _next_arrival(self, gen, ue_id):
        item = next(gen, None)
        if item is not None:
            self._push(item[0] * self.slot_ns, EventKind.TRAFFIC_ARRIVAL, (gen, ue_id, item))

    def _on_traffic_arrival(self, t, payload):
        gen, ue_id, (slot, nbytes) = payload
        st = self.ues[ue_id]
        st.queue.append([slot, nbytes])
        st.backlog += nbytes
        st.offered += nbytes
        self._next_arrival(gen, ue_id)

    def _on_meas_gap_start(self, t, uid):
        st = self.ues[uid]
        g = st.ctx.profile.meas_gap
        st.in_gap = True
        self._emit(t, uid, "MEAS_GAP_START")
        self._push(t + g.length_slots * self.slot_ns, EventKind.MEAS_GAP_END, uid)

    def _on_meas_gap_end(self, t, uid):
        st = self.ues[uid]
        g = st.ctx.profile.meas_gap
        st.in_gap = False
        self._emit(t, uid, "MEAS_GAP_END")
        nxt = t + (g.period_slots - g.length_slots) * self.slot_ns
        if nxt < self.end_ns:
            self._push(nxt, EventKind.MEAS_GAP_START, uid)

    # ------------------------------------------------------------ switching
    def _ue_switch_started(self, st, cc, p, t):
        self._emit(t, st.uid, "SWITCH_START", cc=cc, dl=p.dl, ul=p.ul, ready_ns=p.ready_ns, cause=p.cause)
        pen = st.ctx.profile.energy.retune_penalty_mj
        if pen:
            st.ctx.energy_mj += pen
        self._push(p.ready_ns, EventKind.SWITCH_DONE, ("ue", st.uid, cc))

    def _gnb_switch_started(self, st, cc, p, t):
        self._emit(t, st.uid, "GNB_SWITCH_START", cc=cc, dl=p.dl, ul=p.ul, ready_ns=p.ready_ns, cause=p.cause)
        self._push(p.ready_ns, EventKind.SWITCH_DONE, ("gnb", st.uid, cc))

    def _on_switch_done(self, t, payload):
        side, uid, cc = payload
        st = self.ues[uid]
        if side == "ue":
            self._sync_energy(st, t)
            sm = st.ctx.bwp_sm[cc]
            p = sm.complete_switch()
            self._emit(t, uid, "SWITCH_DONE", sm.active_dl, cc=cc, dl=sm.active_dl, ul=sm.active_ul,
                       cause=p.cause)
        else:
            sm = st.belief[cc]
            p = sm.complete_switch()
            self._emit(t, uid, "GNB_SWITCH_DONE", sm.active_dl, cc=cc, dl=sm.active_dl, ul=sm.active_ul,
                       cause=p.cause)
            for pid in harq_on_switch(st.ctx, cc, sm.active_dl):
                self._emit(t, uid, "HARQ_FAIL", sm.active_dl, cc=cc, pid=pid, reason="switch")

    # ------------------------------------------------------------ slot boundary
    def _on_slot_boundary(self, t, g):
        if g % 64 == 0:
            self.occupancy.drop_before(g - 1)
        for uid in sorted(self.ues):
            self._tick_timers(self.ues[uid], g, t)
        for gc in self.scn.group_common:
            if g >= gc.offset_slots and (g - gc.offset_slots) % gc.period_slots == 0:
                self._group_common(gc, g, t)
        requests = []
        for uid in sorted(self.ues):
            requests.extend(self._prepare_ue(self.ues[uid], g, t))
        demands = {uid: st.backlog for uid, st in self.ues.items()}
        for alloc in self.scheduler.schedule_slot(g, demands, requests):
            st = self.ues[alloc.ue_id]
            bwp = st.belief[alloc.cc_index].active(Direction.DL)
            self._commit(st, alloc, bwp)
            dci = Dci(st.uid, DciKind.GRANT, bwp.id, alloc.cc_index,
                      common_to_bwp_prb(bwp, alloc.common_prbs[0]), alloc.common_prbs[1])
            pd = _Pdsch(alloc)
            # the grant's PDCCH ends exactly where its PDSCH begins
            self._push(alloc.start_tick * self.tick_ns, EventKind.DCI_TX, (st.uid, dci, pd))
            self._push(alloc.start_tick * self.tick_ns, EventKind.PDSCH_START, (st.uid, pd))
        if g + 1 < self.scn.duration_slots:
            self._push(t + self.slot_ns, EventKind.SLOT_BOUNDARY, g + 1)

    def _tick_timers(self, st, g, t):
        self._sync_energy(st, t)
        for cc in range(len(st.belief)):
            sm = st.ctx.bwp_sm[cc]
            if g % self._ratio(sm.active(Direction.DL).numerology.mu) == 0:
                flag, st.rx_flag[cc] = st.rx_flag[cc], False
                p = sm.on_slot_boundary(flag, t)
                if p is not None:
                    self._emit(t, st.uid, "TIMER_EXPIRY", sm.active_dl, cc=cc, target=p.dl)
                    self._ue_switch_started(st, cc, p, t)
            b = st.belief[cc]
            if g % self._ratio(b.active(Direction.DL).numerology.mu) == 0:
                flag, st.fb_flag[cc] = st.fb_flag[cc], False
                p = b.on_slot_boundary(flag, t)
                if p is not None:
                    self._emit(t, st.uid, "GNB_TIMER_EXPIRY", b.active_dl, cc=cc, target=p.dl)
                    self._gnb_switch_started(st, cc, p, t)

    def _prepare_ue(self, st, g, t):
        """Commands, policy and scheduling requests for one UE at global slot ``g``."""
        out = []
        for cc, b in enumerate(st.belief):
            bwp = b.active(Direction.DL)
            mu = bwp.numerology.mu
            if g % self._ratio(mu):
                continue
            start_tick = g * SYMBOLS_PER_SLOT
            st.history[cc].append(st.backlog)
            if st.planned[cc] >= start_tick or st.in_gap:
                continue
            if g + self._ratio(mu) > self.scn.duration_slots:
                continue
            p = b.pending_switch
            if p is not None and p.affects_dl:
                continue
            if p is None and self._handle_command(st, cc, g, t):
                continue
            if p is None:
                target = decide_switch(self.scn.policy, st.history[cc], active_dl=b.active_dl,
                                       bwp_set=b.bwp_set, switch_pending=False)
                if target is not None:
                    self._issue_switch(st, cc, target, Direction.DL, g, t, "policy")
                    continue
            procs = st.ctx.harq[cc]
            out.append(CcRequest(st.uid, cc, bwp, start_tick, self._sym_ticks(mu),
                                 [q for q in procs if q.state is HarqState.NEEDS_RETX],
                                 [q.pid for q in procs if q.state is HarqState.IDLE]))
        return out

    def _handle_command(self, st, cc, g, t):
        """Apply the next due command; True when it consumed this slot."""
        q = st.commands[cc]
        if not q or q[0].slot > g:
            return False
        cmd = q[0]
        b, sm = st.belief[cc], st.ctx.bwp_sm[cc]
        self._sync_energy(st, t)
        if cmd.via == "rrc":
            if sm.pending_switch is not None:
                return False    # wait until the UE has settled
            q.popleft()
            pb = b.apply_rrc_switch(cmd.bwp_id, t, cmd.direction)
            if pb is not None:
                self._gnb_switch_started(st, cc, pb, t)
            pu = sm.apply_rrc_switch(cmd.bwp_id, t, cmd.direction)
            if pu is not None:
                self._ue_switch_started(st, cc, pu, t)
            return pb is not None
        q.popleft()
        current = b.active_dl if cmd.direction is Direction.DL else b.active_ul
        if cmd.bwp_id == current:
            return False
        self._issue_switch(st, cc, cmd.bwp_id, cmd.direction, g, t, "command")
        return True

    def _issue_switch(self, st, cc, target, direction, g, t, cause):
        b = st.belief[cc]
        old = b.active(Direction.DL)
        sym = self._sym_ticks(old.numerology.mu)
        start_tick = g * SYMBOLS_PER_SLOT
        pdcch_end_tick = start_tick + PDCCH_SYMBOLS * sym
        dci = Dci(st.uid, DciKind.BWP_SWITCH, target, cc, coreset_bwp_id=old.id, direction=direction)
        pd = self._plan_first_grant(st, cc, target, direction, g, pdcch_end_tick)
        self._push(pdcch_end_tick * self.tick_ns, EventKind.DCI_TX, (st.uid, dci, pd, cause))

    def _plan_first_grant(self, st, cc, target, direction, g, pdcch_end_tick):
        """Reserve the first PDSCH in the new DL BWP no earlier than PDCCH end + K symbols."""
        b = st.belief[cc]
        probe = BwpStateMachine(b.bwp_set, b.retune, b.timer_duration, b.active_dl, b.active_ul)
        p = probe.apply_dci_switch(target, pdcch_end_tick * self.tick_ns, direction)
        if p is None or p.dl is None:
            return None
        old = b.active(Direction.DL)
        new = b.bwp_set.get(Direction.DL, p.dl)
        k = k_symbol_gap(switch_delay(old, new, b.retune), new.numerology)
        nst = self._sym_ticks(new.numerology.mu)
        slot_ticks = SYMBOLS_PER_SLOT * nst
        ready_tick = -(-p.ready_ns // self.tick_ns)
        earliest = max(pdcch_end_tick + k * nst, ready_tick)
        base = (g * SYMBOLS_PER_SLOT // slot_ticks) * slot_ticks
        end_sym = -(-(pdcch_end_tick - base) // nst)
        k_eff = -(-(earliest - base) // nst) - end_sym
        kg = enforce_k_gap(end_sym, k_eff)
        slot_start = base + kg.slot_offset * slot_ticks
        gslot = slot_start // SYMBOLS_PER_SLOT
        if gslot + self._ratio(new.numerology.mu) > self.scn.duration_slots:
            return None
        procs = st.ctx.harq[cc]
        retx = [q for q in procs if q.state is HarqState.NEEDS_RETX]
        idle = [q.pid for q in procs if q.state is HarqState.IDLE]
        req = CcRequest(st.uid, cc, new, slot_start, nst, retx, idle)
        if retx:
            alloc = self.scheduler.place(req, gslot, kg.symbol, proc=retx[0])
        elif st.backlog > 0 and idle:
            alloc = self.scheduler.place(req, gslot, kg.symbol, nbytes=st.backlog)
        else:
            return None
        if alloc is None:
            return None
        self._commit(st, alloc, new)
        st.planned[cc] = alloc.start_tick
        pd = _Pdsch(alloc, pdcch_bwp=old.id, pdcch_end_ns=pdcch_end_tick * self.tick_ns, k=k)
        self._push(alloc.start_tick * self.tick_ns, EventKind.PDSCH_START, (st.uid, pd))
        return pd

    def _commit(self, st, alloc, bwp):
        """Bind an allocation to its HARQ process and, for new data, to queued bytes."""
        proc = st.ctx.harq[alloc.cc_index][alloc.harq_pid]
        if not alloc.retx:
            pieces, need = [], alloc.bytes
            while need > 0:
                head = st.queue[0]
                take = min(need, head[1])
                pieces.append((head[0], take))
                head[1] -= take
                need -= take
                if head[1] == 0:
                    st.queue.popleft()
            st.backlog -= alloc.bytes
            proc.tb_bytes = alloc.bytes
            proc.pieces = pieces
            proc.retx_count = 0
        proc.state = HarqState.AWAITING_ACK
        proc.tx_bwp_id = bwp.id

    # ------------------------------------------------------------ group common
    def _group_common(self, gc, g, t):
        grid = self.anchor
        mu = grid.numerology.mu
        if g % self._ratio(mu) or g + self._ratio(mu) > self.scn.duration_slots:
            return
        ue_set, offenders = {}, []
        for uid in gc.ue_ids:
            b = self.ues[uid].belief[0]
            if b.pending_switch is not None and b.pending_switch.affects_dl:
                offenders.append(uid)
            else:
                ue_set[uid] = b.active(Direction.DL)
        span = (gc.first_prb, gc.num_prbs)
        try:
            if offenders:
                raise UeOutOfSpan(offenders)
            alloc = issue_group_common(grid, span, ue_set, g, self.scn.bits_per_re)
        except UeOutOfSpan as exc:
            self._emit(t, -1, "GC_SKIP", None, gc.first_prb, gc.num_prbs,
                       reason="out_of_span", ues="|".join(str(u) for u in sorted(set(exc.offenders))))
            return
        st_ticks = self._sym_ticks(mu)
        lo = g * SYMBOLS_PER_SLOT + FIRST_DATA_SYMBOL * st_ticks
        hi = g * SYMBOLS_PER_SLOT + SYMBOLS_PER_SLOT * st_ticks
        if not self.occupancy.free_prbs(lo, hi, mu, gc.first_prb, gc.num_prbs).all():
            self._emit(t, -1, "GC_SKIP", None, gc.first_prb, gc.num_prbs, reason="busy", ues="")
            return
        self.occupancy.reserve(lo, hi, mu, gc.first_prb, gc.num_prbs)
        alloc = replace(alloc, start_tick=lo, end_tick=hi)
        self._push(lo * self.tick_ns, EventKind.PDSCH_START, (-1, _Pdsch(alloc, decoded=True)))

    # ------------------------------------------------------------ control and data
    def _on_dci_tx(self, t, payload):
        uid, dci, pd = payload[:3]
        st = self.ues[uid]
        cc = dci.cc_index
        self._emit(t, uid, "DCI_TX", dci.bwp_id, dci.prb_start_ue_indexed if not dci.is_switch else None,
                   dci.prb_len if not dci.is_switch else None, cc=cc, kind=dci.kind.value,
                   coreset=dci.coreset_bwp_id, dir=dci.direction.value,
                   cause=payload[3] if dci.is_switch else None)
        if dci.is_switch:
            pb = st.belief[cc].apply_dci_switch(dci.bwp_id, t, dci.direction)
            if pb is not None:
                self._gnb_switch_started(st, cc, pb, t)
        sm = st.ctx.bwp_sm[cc]
        before = sm.pending_switch
        self._sync_energy(st, t)
        try:
            outcome = receive_dci(st.ctx, dci, t)
        except NotMonitored:
            self._emit(t, uid, "DCI_NOMON", dci.coreset_bwp_id, cc=cc, kind=dci.kind.value)
            return
        if outcome is DciOutcome.LOST:
            self._emit(t, uid, "DCI_LOST", dci.coreset_bwp_id, cc=cc, kind=dci.kind.value)
            return
        self._emit(t, uid, "DCI_OK", dci.coreset_bwp_id, cc=cc, kind=dci.kind.value)
        if pd is not None:
            pd.decoded = True
        if dci.is_switch and sm.pending_switch is not None and sm.pending_switch is not before:
            self._ue_switch_started(st, cc, sm.pending_switch, t)

    def _on_pdsch_start(self, t, payload):
        uid, pd = payload
        a = pd.alloc
        end_ns = a.end_tick * self.tick_ns
        sym_ns = self._sym_ticks(a.mu) * self.tick_ns
        if uid < 0:
            self._emit(t, -1, "PDSCH", None, a.common_prbs[0], a.common_prbs[1], a.bytes, cc=0, mu=a.mu,
                       kind="gc", end_ns=end_ns, slot=a.slot)
            for u in a.addressees:
                self._gc_rx(self.ues[u], a, t)
            return
        st = self.ues[uid]
        sm = st.ctx.bwp_sm[a.cc_index]
        ok = (pd.decoded and sm.active_dl == a.bwp_id and not sm.in_blackout(t) and not st.in_gap)
        self._emit(t, uid, "PDSCH", a.bwp_id, a.common_prbs[0], a.common_prbs[1], a.bytes, cc=a.cc_index,
                   mu=a.mu, pid=a.harq_pid, retx=int(a.retx), kind="ue", rx="ok" if ok else "miss",
                   end_ns=end_ns, pdcch_bwp=pd.pdcch_bwp, pdcch_end_ns=pd.pdcch_end_ns,
                   k=pd.k if pd.pdcch_bwp is not None else None,
                   sym_ns=sym_ns if pd.pdcch_bwp is not None else None, slot=a.slot)
        self._push(end_ns, EventKind.HARQ_FEEDBACK, (uid, a, ok))

    def _gc_rx(self, st, a, t):
        sm = st.ctx.bwp_sm[0]
        bwp = sm.active(Direction.DL)
        first, n = a.common_prbs
        ok = (bwp.numerology.mu == a.mu and bwp.contains(first) and bwp.contains(first + n - 1)
              and not sm.in_blackout(t) and not st.in_gap)
        local = common_to_bwp_prb(bwp, first) if ok else None
        self._emit(t, st.uid, "GC_RX", bwp.id, local, n, a.bytes, cc=0, rx="ok" if ok else "miss", common=first)

    def _on_harq_feedback(self, t, payload):
        uid, a, ok = payload
        st = self.ues[uid]
        cc = a.cc_index
        proc = st.ctx.harq[cc][a.harq_pid]
        if ok:
            st.rx_flag[cc] = True
            st.fb_flag[cc] = True
            p = st.ctx.profile.harq_nack_prob
            forced = (uid, a.slot) in self.forced
            ack = not forced and not (p >= 1 or (p > 0 and st.harq_rng.random() < p))
        else:
            ack = False
        pieces, tb = proc.pieces, proc.tb_bytes
        verdict = handle_harq_feedback(proc, ack, st.ctx.profile.max_retx)
        if verdict is HarqVerdict.DONE:
            lat = sum(b * (a.slot - arr + 1) for arr, b in pieces)
            self._emit(t, uid, "HARQ_ACK", a.bwp_id, nbytes=tb, cc=cc, pid=a.harq_pid, lat=lat)
        elif verdict is HarqVerdict.RETX:
            self._emit(t, uid, "HARQ_NACK", a.bwp_id, nbytes=tb, cc=cc, pid=a.harq_pid, dtx=int(not ok),
                       retx_count=proc.retx_count)
        else:
            self._emit(t, uid, "HARQ_FAIL", a.bwp_id, nbytes=tb, cc=cc, pid=a.harq_pid, dtx=int(not ok),
                       reason="max_retx")
            proc.reset()


def run(scenario: Scenario, seed=None):
    """Simulate ``scenario``; returns ``(trace, report)``.

    ``seed`` overrides the scenario's own seed. Raises :class:`ScenarioError`
    with every violation before any event is processed.
    """
    return Simulation(scenario, seed).run()

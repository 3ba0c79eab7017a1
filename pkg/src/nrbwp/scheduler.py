"""gNB MAC: round-robin PRB allocation on the common grid, DCIs, the
bandwidth-adaptation policy and the cross-BWP K-symbol gap."""
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .bwp import BwpConfig, Direction
from .errors import EmptyGroup, UeOutOfSpan
from .numerology import SUBCARRIERS_PER_PRB, SYMBOLS_PER_SLOT
from .ue import HarqProcess, HarqState

PDCCH_SYMBOLS = 2
FIRST_DATA_SYMBOL = PDCCH_SYMBOLS
DEFAULT_BITS_PER_RE = 4


class DciKind(Enum):
    GRANT = "Grant"
    BWP_SWITCH = "BwpSwitch"


class AllocKind(Enum):
    UE_SPECIFIC = "UeSpecific"
    GROUP_COMMON = "GroupCommon"


@dataclass(frozen=True)
class Dci:
    """Downlink control message.

    ``bwp_id`` is the BWP the DCI refers to (grant BWP or switch target);
    ``coreset_bwp_id`` is where it is transmitted, which differs from
    ``bwp_id`` only for switch commands.
    """
    target_ue: int
    kind: DciKind
    bwp_id: int
    cc_index: int = 0
    prb_start_ue_indexed: int = 0
    prb_len: int = 0
    sent_symbol: int = 0
    coreset_bwp_id: Optional[int] = None
    search_space: str = "USS"
    direction: Direction = Direction.DL

    def __post_init__(self):
        if self.coreset_bwp_id is None:
            object.__setattr__(self, "coreset_bwp_id", self.bwp_id)

    @property
    def is_switch(self):
        return self.kind is DciKind.BWP_SWITCH


@dataclass(frozen=True)
class Allocation:
    ue_id: int
    slot: int
    cc_index: int
    bwp_id: int
    common_prbs: tuple          # (first common PRB, count)
    symbols: tuple              # (first symbol, stop symbol) within the slot
    kind: AllocKind
    harq_pid: Optional[int]
    mu: int
    bytes: int
    retx: bool = False
    start_tick: int = 0
    end_tick: int = 0
    addressees: tuple = ()

    @property
    def num_symbols(self):
        return self.symbols[1] - self.symbols[0]


@dataclass(frozen=True)
class SwitchPolicy:
    up_threshold_bytes: int = 4000
    down_threshold_bytes: int = 0
    hysteresis_slots: int = 2
    enabled: bool = True

    def __post_init__(self):
        if not self.up_threshold_bytes > self.down_threshold_bytes >= 0:
            raise ValueError("need up_threshold > down_threshold >= 0")
        if self.hysteresis_slots < 1:
            raise ValueError("hysteresis_slots must be >= 1")


class KGap(NamedTuple):
    slot_offset: int
    symbol: int
    deferred: bool


def payload_bytes(prbs, symbols, bits_per_re=DEFAULT_BITS_PER_RE):
    return prbs * SUBCARRIERS_PER_PRB * bits_per_re * symbols // 8


def prbs_needed(nbytes, symbols, bits_per_re=DEFAULT_BITS_PER_RE):
    per_prb = SUBCARRIERS_PER_PRB * bits_per_re * symbols
    return -(-nbytes * 8 // per_prb)


def enforce_k_gap(pdcch_end_symbol, k, requested_symbol=FIRST_DATA_SYMBOL,
                  symbols_per_slot=SYMBOLS_PER_SLOT, first_data_symbol=FIRST_DATA_SYMBOL) -> KGap:
    """Earliest legal PDSCH position after a cross-BWP PDCCH.

    Symbols are counted from the start of the PDCCH's slot; a position past
    the slot end rolls over into a later slot's data region.
    """
    earliest = pdcch_end_symbol + k
    target = max(requested_symbol, earliest)
    offset, symbol = divmod(target, symbols_per_slot)
    if symbol < first_data_symbol:
        symbol = first_data_symbol
    return KGap(offset, symbol, target != requested_symbol or offset > 0)


def decide_switch(policy: SwitchPolicy, history, *, active_dl, bwp_set, switch_pending=False):
    """Target DL BWP id for a bandwidth-adaptation switch, or None.

    ``history`` is the UE's backlog (bytes) per slot, most recent last.
    """
    if not policy.enabled or switch_pending:
        return None
    window = list(history)[-policy.hysteresis_slots:]
    if len(window) < policy.hysteresis_slots:
        return None
    if all(b > policy.up_threshold_bytes for b in window):
        target = bwp_set.widest(Direction.DL).id
    elif all(b < policy.down_threshold_bytes for b in window):
        target = bwp_set.default(Direction.DL).id
    else:
        return None
    return None if target == active_dl else target


class HarqVerdict(Enum):
    DONE = "done"
    RETX = "retx"
    FAILED = "failed"


def handle_harq_feedback(proc: HarqProcess, ack: bool, max_retx=4) -> HarqVerdict:
    if ack:
        proc.reset()
        return HarqVerdict.DONE
    proc.retx_count += 1
    if proc.retx_count >= max_retx:
        return HarqVerdict.FAILED
    proc.state = HarqState.NEEDS_RETX
    return HarqVerdict.RETX


def issue_group_common(grid, common_prbs, ue_set, slot=0, bits_per_re=DEFAULT_BITS_PER_RE) -> Allocation:
    """Group-common allocation addressed by common PRB indices.

    ``ue_set`` maps UE id to that UE's active DL :class:`BwpConfig`.
    """
    if not ue_set:
        raise EmptyGroup("group-common allocation needs at least one UE")
    first, count = common_prbs
    if first < 0 or first + count > grid.num_prbs:
        raise ValueError("group-common span exceeds the grid")
    offenders = sorted(u for u, b in ue_set.items()
                       if b.numerology != grid.numerology
                       or not (b.contains(first) and b.contains(first + count - 1)))
    if offenders:
        raise UeOutOfSpan(offenders)
    nsym = SYMBOLS_PER_SLOT - FIRST_DATA_SYMBOL
    return Allocation(-1, slot, 0, -1, (first, count), (FIRST_DATA_SYMBOL, SYMBOLS_PER_SLOT),
                      AllocKind.GROUP_COMMON, None, grid.numerology.mu,
                      payload_bytes(count, nsym, bits_per_re), addressees=tuple(sorted(ue_set)))


class Occupancy:
    """Booleans over (finest-symbol tick, base-PRB unit) for every global slot.

    A PRB of numerology ``mu`` spans ``2**(mu - base_mu)`` units; a symbol of
    numerology ``mu`` spans ``2**(mu_max - mu)`` ticks.
    """

    def __init__(self, base_mu, mu_max, width_units):
        self.base_mu = base_mu
        self.mu_max = mu_max
        self.width_units = width_units
        self._slots = {}

    def _slot(self, g):
        arr = self._slots.get(g)
        if arr is None:
            arr = self._slots[g] = np.zeros((SYMBOLS_PER_SLOT, self.width_units), dtype=bool)
        return arr

    def _units(self, mu, first, num):
        f = 2 ** (mu - self.base_mu)
        return first * f, (first + num) * f, f

    def _chunks(self, tick_lo, tick_hi):
        t = tick_lo
        while t < tick_hi:
            g, off = divmod(t, SYMBOLS_PER_SLOT)
            stop = min(SYMBOLS_PER_SLOT, off + tick_hi - t)
            yield g, off, stop
            t += stop - off

    def free_prbs(self, tick_lo, tick_hi, mu, first, num):
        u0, u1, f = self._units(mu, first, num)
        busy = np.zeros(u1 - u0, dtype=bool)
        for g, a, b in self._chunks(tick_lo, tick_hi):
            arr = self._slots.get(g)
            if arr is not None:
                busy |= arr[a:b, u0:u1].any(axis=0)
        return ~busy.reshape(num, f).any(axis=1)

    def reserve(self, tick_lo, tick_hi, mu, first, num):
        u0, u1, _ = self._units(mu, first, num)
        for g, a, b in self._chunks(tick_lo, tick_hi):
            arr = self._slot(g)
            if arr[a:b, u0:u1].any():
                raise RuntimeError("resource already allocated")
            arr[a:b, u0:u1] = True

    def drop_before(self, g):
        for k in [k for k in self._slots if k < g]:
            del self._slots[k]


def free_runs(free):
    """``(start, length)`` runs of True in a boolean vector."""
    if not len(free):
        return []
    padded = np.concatenate(([False], free, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b - a)) for a, b in zip(edges[::2], edges[1::2])]


def pick_run(free, need):
    """First run long enough for ``need`` PRBs, else the longest run."""
    runs = free_runs(free)
    if not runs:
        return None
    for start, length in runs:
        if length >= need:
            return start, need
    start, length = max(runs, key=lambda r: (r[1], -r[0]))
    return start, length


@dataclass
class CcRequest:
    """What the gNB believes about one UE's serving cell this slot."""
    ue_id: int
    cc_index: int
    bwp: BwpConfig
    start_tick: int
    sym_ticks: int
    retx: list = field(default_factory=list)        # HarqProcess needing retransmission
    idle_pids: list = field(default_factory=list)


class Scheduler:
    """Per-slot round-robin over UEs with per-slot rotation of the start UE."""

    def __init__(self, ue_ids, occupancy: Occupancy, bits_per_re=DEFAULT_BITS_PER_RE):
        self.ue_ids = sorted(ue_ids)
        self.occupancy = occupancy
        self.bits_per_re = bits_per_re

    def rotation(self, slot):
        if not self.ue_ids:
            return []
        k = slot % len(self.ue_ids)
        return self.ue_ids[k:] + self.ue_ids[:k]

    def place(self, req: CcRequest, slot, first_symbol, nbytes=None, proc=None):
        """Try to place one PDSCH for ``req`` from ``first_symbol`` to slot end.

        Retransmissions (``proc`` given) need room for the whole transport
        block; new data takes what fits, up to ``nbytes``.
        """
        nsym = SYMBOLS_PER_SLOT - first_symbol
        if nsym <= 0:
            return None
        lo = req.start_tick + first_symbol * req.sym_ticks
        hi = req.start_tick + SYMBOLS_PER_SLOT * req.sym_ticks
        b = req.bwp
        free = self.occupancy.free_prbs(lo, hi, b.numerology.mu, b.first_common_prb, b.num_prbs)
        tb = proc.tb_bytes if proc is not None else nbytes
        need = prbs_needed(tb, nsym, self.bits_per_re)
        run = pick_run(free, need)
        if run is None:
            return None
        start, count = run
        cap = payload_bytes(count, nsym, self.bits_per_re)
        if proc is not None:
            if cap < tb:
                return None
            size, pid, retx = tb, proc.pid, True
        else:
            size, pid, retx = min(tb, cap), req.idle_pids[0], False
        first = b.first_common_prb + start
        self.occupancy.reserve(lo, hi, b.numerology.mu, first, count)
        return Allocation(req.ue_id, slot, req.cc_index, b.id, (first, count), (first_symbol, SYMBOLS_PER_SLOT),
                          AllocKind.UE_SPECIFIC, pid, b.numerology.mu, size, retx, lo, hi)

    def schedule_slot(self, slot, demands, requests):
        """Allocate one slot.

        ``demands`` maps UE id to new-data backlog (bytes); ``requests`` lists
        the UE/CC pairs eligible this slot. Returns the allocations; served new
        bytes are deducted from ``demands`` in place.
        """
        by_ue = {}
        for r in requests:
            by_ue.setdefault(r.ue_id, []).append(r)
        out = []
        for ue in self.rotation(slot):
            for req in sorted(by_ue.get(ue, ()), key=lambda r: r.cc_index):
                if req.retx:
                    alloc = self.place(req, slot, FIRST_DATA_SYMBOL, proc=req.retx[0])
                elif demands.get(ue, 0) > 0 and req.idle_pids:
                    alloc = self.place(req, slot, FIRST_DATA_SYMBOL, nbytes=demands[ue])
                    if alloc is not None:
                        demands[ue] -= alloc.bytes
                else:
                    alloc = None
                if alloc is not None:
                    out.append(alloc)
        return out

"""UE-side model: RF capability, carrier view, DCI reception, HARQ and energy."""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from .bwp import BwpStateMachine, Direction, RetuneProfile
from .carrier import CarrierConfig, CommonPrbGrid, partition_for_ca
from .errors import CannotAcquireSsBlock, CarrierTooNarrow, InvalidProfile, NotMonitored, SwitchInProgress
from .numerology import max_prbs

DEFAULT_MAX_RETX = 4
DEFAULT_HARQ_PROCESSES = 8


class RfCase(Enum):
    CASE_A = "CaseA"
    CASE_B = "CaseB"
    NARROWBAND = "Narrowband"


@dataclass(frozen=True)
class EnergyModel:
    baseline_mw: float = 10.0
    per_mhz_mw: float = 2.0
    retune_penalty_mj: float = 0.0

    def __post_init__(self):
        if min(self.baseline_mw, self.per_mhz_mw, self.retune_penalty_mj) < 0:
            raise ValueError("energy model parameters must be non-negative")


@dataclass(frozen=True)
class MeasGapConfig:
    period_slots: int
    length_slots: int
    offset_slots: int = 0

    def __post_init__(self):
        if not 0 < self.length_slots < self.period_slots:
            raise ValueError("measurement gap needs 0 < length < period")

    def in_gap(self, slot):
        return (slot - self.offset_slots) % self.period_slots < self.length_slots


@dataclass(frozen=True)
class UeProfile:
    id: int
    num_chains: int
    per_chain_bw_khz: int
    retune: RetuneProfile = field(default_factory=RetuneProfile)
    dci_loss_prob: float = 0.0
    energy: EnergyModel = field(default_factory=EnergyModel)
    rf_case: Optional[RfCase] = None
    harq_nack_prob: float = 0.0
    max_retx: int = DEFAULT_MAX_RETX
    harq_processes: int = DEFAULT_HARQ_PROCESSES
    timer_slots: int = 8
    meas_gap: Optional[MeasGapConfig] = None


@dataclass(frozen=True)
class WidebandCc:
    first_prb: int
    num_prbs: int

    @property
    def cc_spans(self):
        return ((self.first_prb, self.num_prbs),)


@dataclass(frozen=True)
class PartialSpan:
    first_prb: int
    num_prbs: int

    @property
    def cc_spans(self):
        return ((self.first_prb, self.num_prbs),)


class HarqState(Enum):
    IDLE = "Idle"
    AWAITING_ACK = "AwaitingAck"
    NEEDS_RETX = "NeedsRetx"


@dataclass
class HarqProcess:
    pid: int
    state: HarqState = HarqState.IDLE
    tx_bwp_id: Optional[int] = None
    retx_count: int = 0
    tb_bytes: int = 0
    # (arrival_slot, bytes) pieces carried by the transport block
    pieces: list = field(default_factory=list)

    def reset(self):
        self.state = HarqState.IDLE
        self.retx_count = 0
        self.tb_bytes = 0
        self.pieces = []


class DciOutcome(Enum):
    DECODED = "decoded"
    LOST = "lost"


@dataclass
class UeContext:
    profile: UeProfile
    carrier_view: object
    bwp_sm: list
    harq: list
    rng_stream: np.random.Generator
    energy_mj: float = 0.0

    @property
    def rf_case(self):
        return self.profile.rf_case


def classify(profile: UeProfile, carrier: CarrierConfig) -> RfCase:
    if profile.num_chains < 1 or profile.per_chain_bw_khz <= 0:
        raise InvalidProfile(f"UE {profile.id}: needs at least one chain of positive width")
    cbw = carrier.cbw_khz
    if profile.num_chains == 1:
        return RfCase.CASE_A if profile.per_chain_bw_khz >= cbw else RfCase.NARROWBAND
    if profile.num_chains * profile.per_chain_bw_khz >= cbw:
        return RfCase.CASE_B
    raise InvalidProfile(f"UE {profile.id}: {profile.num_chains} chains x {profile.per_chain_bw_khz} kHz "
                         f"cannot cover the {cbw} kHz carrier")


def chain_prbs(profile: UeProfile, carrier: CarrierConfig, grid: CommonPrbGrid) -> int:
    return max_prbs(Fraction(profile.per_chain_bw_khz, 1000), grid.numerology, carrier.guard_ratio)


def configure(profile: UeProfile, carrier: CarrierConfig, grid: CommonPrbGrid):
    """UE-specific view of the wideband carrier, in PRBs of ``grid``."""
    case = classify(profile, carrier)
    if case is RfCase.CASE_A:
        return WidebandCc(0, grid.num_prbs)
    try:
        per_chain = chain_prbs(profile, carrier, grid)
    except CarrierTooNarrow as exc:
        if case is RfCase.CASE_B:
            raise InvalidProfile(str(exc)) from exc
        raise CannotAcquireSsBlock(str(exc)) from exc
    if case is RfCase.CASE_B:
        return partition_for_ca(grid, per_chain, profile.num_chains)
    ss = carrier.ss_block
    ss_first, ss_n = grid.covering_prbs(ss.lowest_subcarrier_freq_khz, ss.highest_freq_khz)
    width = min(per_chain, grid.num_prbs)
    if ss_n > width:
        raise CannotAcquireSsBlock(f"UE {profile.id}: SS block ({ss.width_khz} kHz) wider than the "
                                   f"{width}-PRB narrowband span")
    start = max(0, min(ss_first, grid.num_prbs - width))
    if ss_first < start or ss_first + ss_n > start + width:
        raise CannotAcquireSsBlock(f"UE {profile.id}: SS block falls outside the carrier grid")
    return PartialSpan(start, width)


def new_context(profile, carrier_view, bwp_sets, rng):
    sms = [BwpStateMachine(s, profile.retune, profile.timer_slots) for s in bwp_sets]
    harq = [[HarqProcess(pid) for pid in range(profile.harq_processes)] for _ in bwp_sets]
    return UeContext(profile, carrier_view, sms, harq, rng)


def receive_dci(ctx: UeContext, dci, now_ns) -> DciOutcome:
    """UE-side reception of one DCI at the end of its PDCCH.

    Raises :class:`NotMonitored` when the DCI sits in a CORESET the UE is not
    watching. A decoded BWP-switch DCI starts the switch on the UE's state
    machine.
    """
    sm = ctx.bwp_sm[dci.cc_index]
    if sm.in_blackout(now_ns):
        return DciOutcome.LOST
    if dci.coreset_bwp_id != sm.active_dl:
        raise NotMonitored(f"UE {ctx.profile.id} is not on DL BWP {dci.coreset_bwp_id}")
    if dci.search_space == "CSS" and not sm.active(Direction.DL).has_css:
        raise NotMonitored(f"DL BWP {sm.active_dl} carries no CSS")
    p = ctx.profile.dci_loss_prob
    if p >= 1 or (p > 0 and ctx.rng_stream.random() < p):
        return DciOutcome.LOST
    if dci.is_switch:
        try:
            sm.apply_dci_switch(dci.bwp_id, now_ns, dci.direction)
        except SwitchInProgress:
            return DciOutcome.LOST
    return DciOutcome.DECODED


def harq_on_switch(ctx: UeContext, cc_index: int, new_bwp_id: int) -> list:
    """Carry HARQ processes across a completed BWP switch.

    Pending processes survive unchanged; their next retransmission may use
    ``new_bwp_id``. Processes already at ``max_retx`` are dropped and their
    pids returned.
    """
    dropped = []
    for proc in ctx.harq[cc_index]:
        if proc.state is not HarqState.IDLE and proc.retx_count >= ctx.profile.max_retx:
            dropped.append(proc.pid)
            proc.reset()
    return dropped


def accumulate_energy(ctx: UeContext, active_bw_khz, dt_ns, retunes=0) -> float:
    """Add modeled energy (mJ) for ``dt_ns`` at ``active_bw_khz`` plus retune penalties."""
    if dt_ns < 0:
        raise ValueError("dt_ns must be non-negative")
    e = ctx.profile.energy
    delta = (e.baseline_mw + e.per_mhz_mw * active_bw_khz / 1000) * dt_ns * 1e-9
    delta += retunes * e.retune_penalty_mj
    ctx.energy_mj += delta
    return delta

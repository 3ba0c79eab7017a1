"""Bandwidth parts: static configuration rules, the per-UE activation state
machine, retuning delay and PRB index conversion."""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional
import math

from .carrier import CommonPrbGrid, SS_BLOCK_WIDTH_PRBS, SsBlockInfo
from .errors import PrbOutOfBwp, SwitchInProgress, UnknownBwp, Violation
from .numerology import Numerology, symbol_timing

MAX_BWPS_PER_DIRECTION = 4
DEFAULT_TIMER_SLOTS = 8


class Direction(Enum):
    DL = "DL"
    UL = "UL"


class Spectrum(Enum):
    PAIRED = "paired"
    UNPAIRED = "unpaired"


@dataclass(frozen=True)
class BwpConfig:
    id: int
    direction: Direction
    first_common_prb: int
    num_prbs: int
    numerology: Numerology
    has_uss: bool = True
    has_css: bool = False
    is_default: bool = False
    is_initial: bool = False

    @property
    def last_common_prb(self):
        return self.first_common_prb + self.num_prbs - 1

    @property
    def bandwidth_khz(self):
        return self.num_prbs * self.numerology.prb_width_khz

    @property
    def span_khz(self):
        """Frequency span relative to the reference point, ``[lo, hi)``."""
        w = self.numerology.prb_width_khz
        return self.first_common_prb * w, (self.first_common_prb + self.num_prbs) * w

    @property
    def center_khz(self) -> Fraction:
        lo, hi = self.span_khz
        return Fraction(lo + hi, 2)

    def contains(self, common_prb):
        return self.first_common_prb <= common_prb < self.first_common_prb + self.num_prbs


@dataclass(frozen=True)
class BwpSet:
    spectrum: Spectrum
    dl: tuple
    ul: tuple
    pairs: tuple = ()
    single_pucch_group: bool = True

    def bwps(self, direction):
        return self.dl if direction is Direction.DL else self.ul

    def get(self, direction, bwp_id) -> BwpConfig:
        for b in self.bwps(direction):
            if b.id == bwp_id:
                return b
        raise UnknownBwp(f"no {direction.value} BWP with id {bwp_id}")

    def default(self, direction) -> BwpConfig:
        bwps = self.bwps(direction)
        for b in bwps:
            if b.is_default:
                return b
        return self.initial(direction)

    def initial(self, direction) -> BwpConfig:
        for b in self.bwps(direction):
            if b.is_initial:
                return b
        raise UnknownBwp(f"no initial {direction.value} BWP")

    def paired(self, direction, bwp_id):
        """Id of the opposite-direction BWP paired with ``bwp_id`` (unpaired spectrum)."""
        for dl_id, ul_id in self.pairs:
            if direction is Direction.DL and dl_id == bwp_id:
                return ul_id
            if direction is Direction.UL and ul_id == bwp_id:
                return dl_id
        raise UnknownBwp(f"{direction.value} BWP {bwp_id} has no pair")

    def widest(self, direction=Direction.DL) -> BwpConfig:
        return max(self.bwps(direction), key=lambda b: (b.bandwidth_khz, -b.id))

    @property
    def numerologies(self):
        return {b.numerology for b in self.dl + self.ul}


@dataclass(frozen=True)
class RetuneProfile:
    same_center_ns: int = 20_000
    diff_center_ns: int = 200_000

    def __post_init__(self):
        if not 50_000 <= self.diff_center_ns <= 200_000:
            raise ValueError(f"diff_center_ns={self.diff_center_ns} outside 50000..200000")
        if not 0 <= self.same_center_ns <= self.diff_center_ns:
            raise ValueError("same_center_ns must be in [0, diff_center_ns]")


def ss_block_width_in(numerology: Numerology, ss_block: Optional[SsBlockInfo] = None) -> int:
    """SS block bandwidth expressed in PRBs of ``numerology`` (rounded up)."""
    if ss_block is None:
        return SS_BLOCK_WIDTH_PRBS
    return math.ceil(Fraction(ss_block.width_khz, numerology.prb_width_khz))


def _grid_for(grids, numerology):
    if isinstance(grids, CommonPrbGrid):
        return grids if grids.numerology == numerology else None
    return grids.get(numerology)


def validate_bwp_set(bwp_set: BwpSet, grid, is_primary: bool, *, ss_block=None,
                     span_khz=None, single_pucch_group=None) -> list:
    """Check every BWP-set and per-BWP rule; returns all violations.

    ``grid`` is a :class:`CommonPrbGrid` or a mapping from numerology to grid.
    ``span_khz`` optionally narrows the allowed frequency range (relative to
    the reference point) to the UE's component carrier. The one-numerology
    rule follows the set's ``single_pucch_group`` flag unless overridden.
    """
    if single_pucch_group is None:
        single_pucch_group = bwp_set.single_pucch_group
    out = []
    for direction in Direction:
        bwps = bwp_set.bwps(direction)
        d = direction.value
        if len(bwps) > MAX_BWPS_PER_DIRECTION:
            out.append(Violation(f"bwp.max_{d.lower()}", f"max {MAX_BWPS_PER_DIRECTION} {d} BWPs, got {len(bwps)}"))
        if not bwps:
            out.append(Violation(f"bwp.max_{d.lower()}", f"no {d} BWP configured"))
            continue
        ids = [b.id for b in bwps]
        if len(set(ids)) != len(ids):
            out.append(Violation("bwp.ids", f"duplicate {d} BWP ids {ids}"))
        n_default = sum(b.is_default for b in bwps)
        n_initial = sum(b.is_initial for b in bwps)
        if n_initial != 1:
            out.append(Violation("bwp.initial", f"exactly one initial {d} BWP required, got {n_initial}"))
        if n_default > 1:
            out.append(Violation("bwp.default", f"at most one default {d} BWP, got {n_default}"))
        for b in bwps:
            out.extend(_validate_bwp(b, direction, grid, ss_block, span_khz))

    if is_primary and not any(b.has_css for b in bwp_set.dl):
        out.append(Violation("bwp.primary_css", "primary carrier requires a DL BWP with a CSS CORESET"))
    if single_pucch_group and len(bwp_set.numerologies) > 1:
        mus = sorted(n.mu for n in bwp_set.numerologies)
        out.append(Violation("bwp.pucch_numerology", f"one PUCCH group needs one numerology, got mu {mus}"))
    if bwp_set.spectrum is Spectrum.UNPAIRED:
        out.extend(_validate_pairs(bwp_set))
    elif bwp_set.pairs:
        out.append(Violation("bwp.pairs", "pairs are only configured on unpaired spectrum"))
    return out


def _validate_bwp(b, direction, grid, ss_block, span_khz):
    out = []
    tag = f"{direction.value} BWP {b.id}"
    if b.direction is not direction:
        out.append(Violation("bwp.direction", f"{tag} declared as {b.direction.value}"))
    floor = ss_block_width_in(b.numerology, ss_block)
    if b.num_prbs < floor:
        out.append(Violation("bwp.ssb_floor", f"{tag}: {b.num_prbs} PRBs is below SS block BW ({floor} PRBs)"))
    g = _grid_for(grid, b.numerology)
    if g is None:
        out.append(Violation("bwp.numerology", f"{tag}: {b.numerology.scs_khz} kHz not configured on carrier"))
    elif b.first_common_prb < 0 or b.first_common_prb + b.num_prbs > g.num_prbs:
        out.append(Violation("bwp.within_carrier",
                             f"{tag}: PRBs [{b.first_common_prb}, {b.first_common_prb + b.num_prbs}) "
                             f"exceed the {g.num_prbs}-PRB grid"))
    if span_khz is not None:
        lo, hi = b.span_khz
        if lo < span_khz[0] or hi > span_khz[1]:
            out.append(Violation("bwp.within_cc", f"{tag} exceeds the UE's configured CC bandwidth"))
    if direction is Direction.DL and not b.has_uss:
        out.append(Violation("bwp.dl_uss", f"{tag} has no CORESET with UE-specific search space"))
    return out


def _validate_pairs(bwp_set):
    out = []
    if len(bwp_set.pairs) > MAX_BWPS_PER_DIRECTION:
        out.append(Violation("bwp.unpaired_pairs", f"max {MAX_BWPS_PER_DIRECTION} DL/UL pairs"))
    dl_ids = sorted(b.id for b in bwp_set.dl)
    ul_ids = sorted(b.id for b in bwp_set.ul)
    if sorted(p[0] for p in bwp_set.pairs) != dl_ids or sorted(p[1] for p in bwp_set.pairs) != ul_ids:
        out.append(Violation("bwp.unpaired_pairs", "pairs must be a bijection between DL and UL BWPs"))
        return out
    for dl_id, ul_id in bwp_set.pairs:
        dl, ul = bwp_set.get(Direction.DL, dl_id), bwp_set.get(Direction.UL, ul_id)
        if dl.center_khz != ul.center_khz:
            out.append(Violation("bwp.unpaired_center",
                                 f"pair ({dl_id}, {ul_id}) would retune the center between DL and UL"))
    try:
        if bwp_set.paired(Direction.DL, bwp_set.default(Direction.DL).id) != bwp_set.default(Direction.UL).id:
            out.append(Violation("bwp.unpaired_pairs", "default DL and UL BWPs must form a pair"))
        if bwp_set.paired(Direction.DL, bwp_set.initial(Direction.DL).id) != bwp_set.initial(Direction.UL).id:
            out.append(Violation("bwp.unpaired_pairs", "initial DL and UL BWPs must form a pair"))
    except UnknownBwp:
        pass  # already reported as a missing initial BWP
    return out


def switch_delay(from_bwp: BwpConfig, to_bwp: BwpConfig, profile: RetuneProfile) -> int:
    """RF retuning time in ns for moving the active BWP ``from_bwp -> to_bwp``."""
    if from_bwp == to_bwp:
        return 0
    if from_bwp.center_khz == to_bwp.center_khz:
        return profile.same_center_ns
    return profile.diff_center_ns


def k_symbol_gap(delay_ns: int, new_numerology: Numerology) -> int:
    if delay_ns < 0:
        raise ValueError("delay_ns must be non-negative")
    return -(-delay_ns // symbol_timing(new_numerology).total_ns)


@dataclass
class PendingSwitch:
    dl: Optional[int]
    ul: Optional[int]
    start_ns: int
    ready_ns: int
    cause: str

    @property
    def affects_dl(self):
        return self.dl is not None


@dataclass
class BwpStateMachine:
    """Active-BWP state of one UE on one serving cell.

    The same class models both the UE's real state and the gNB's belief of it;
    the two copies only diverge when a switch DCI is lost.
    """
    bwp_set: BwpSet
    retune: RetuneProfile = field(default_factory=RetuneProfile)
    timer_duration: int = DEFAULT_TIMER_SLOTS
    active_dl: int = None
    active_ul: int = None
    inactivity_timer_remaining: Optional[int] = None
    pending_switch: Optional[PendingSwitch] = None

    def __post_init__(self):
        if self.timer_duration < 1:
            raise ValueError("timer_duration must be >= 1 slot")
        if self.active_dl is None:
            self.active_dl = self.bwp_set.initial(Direction.DL).id
        if self.active_ul is None:
            self.active_ul = self.bwp_set.initial(Direction.UL).id
        self._rearm(self.active_dl)

    @property
    def default_dl(self):
        return self.bwp_set.default(Direction.DL).id

    def active(self, direction=Direction.DL) -> BwpConfig:
        bwp_id = self.active_dl if direction is Direction.DL else self.active_ul
        return self.bwp_set.get(direction, bwp_id)

    def in_blackout(self, t_ns, direction=Direction.DL):
        p = self.pending_switch
        if p is None or not p.start_ns <= t_ns < p.ready_ns:
            return False
        return (p.dl if direction is Direction.DL else p.ul) is not None

    def _rearm(self, dl_id):
        # the timer only runs while a non-default DL BWP is (or is becoming) active
        self.inactivity_timer_remaining = None if dl_id == self.default_dl else self.timer_duration

    def _start(self, direction, target, now_ns, cause):
        self.bwp_set.get(direction, target)
        if self.pending_switch is not None:
            raise SwitchInProgress(f"switch to {self.pending_switch} still in progress")
        current = self.active_dl if direction is Direction.DL else self.active_ul
        if target == current:
            self._rearm(self.active_dl)
            return None
        dl = ul = None
        if direction is Direction.DL:
            dl = target
        else:
            ul = target
        if self.bwp_set.spectrum is Spectrum.UNPAIRED:
            if dl is None:
                dl = self.bwp_set.paired(Direction.UL, ul)
            else:
                ul = self.bwp_set.paired(Direction.DL, dl)
        delay = 0
        if dl is not None:
            delay = switch_delay(self.active(Direction.DL), self.bwp_set.get(Direction.DL, dl), self.retune)
        if ul is not None:
            delay = max(delay, switch_delay(self.active(Direction.UL),
                                            self.bwp_set.get(Direction.UL, ul), self.retune))
        self.pending_switch = PendingSwitch(dl, ul, now_ns, now_ns + delay, cause)
        self._rearm(self.active_dl if dl is None else dl)
        return self.pending_switch

    def apply_rrc_switch(self, target, now_ns, direction=Direction.DL):
        """Start an RRC-commanded switch; returns the pending switch or None for a no-op."""
        return self._start(direction, target, now_ns, "rrc")

    def apply_dci_switch(self, target, now_ns, direction=Direction.DL):
        return self._start(direction, target, now_ns, "dci")

    def complete_switch(self):
        p = self.pending_switch
        if p is None:
            return None
        if p.dl is not None:
            self.active_dl = p.dl
        if p.ul is not None:
            self.active_ul = p.ul
        self.pending_switch = None
        return p

    def on_slot_boundary(self, was_scheduled, now_ns=0):
        """Advance the inactivity timer by one slot.

        Returns the fallback :class:`PendingSwitch` when the timer expires.
        The timer keeps counting through a retune but cannot expire before
        the switch completes.
        """
        if self.inactivity_timer_remaining is None:
            return None
        if was_scheduled:
            self.inactivity_timer_remaining = self.timer_duration
            return None
        if self.pending_switch is not None:
            self.inactivity_timer_remaining = max(1, self.inactivity_timer_remaining - 1)
            return None
        self.inactivity_timer_remaining -= 1
        if self.inactivity_timer_remaining > 0:
            return None
        return self._start(Direction.DL, self.default_dl, now_ns, "timer")



def common_to_bwp_prb(bwp: BwpConfig, common_prb: int) -> int:
    if not bwp.contains(common_prb):
        raise PrbOutOfBwp(f"common PRB {common_prb} outside BWP {bwp.id} "
                          f"[{bwp.first_common_prb}, {bwp.first_common_prb + bwp.num_prbs})")
    return common_prb - bwp.first_common_prb


def bwp_to_common_prb(bwp: BwpConfig, ue_prb: int) -> int:
    if not 0 <= ue_prb < bwp.num_prbs:
        raise PrbOutOfBwp(f"UE PRB {ue_prb} outside BWP {bwp.id} of {bwp.num_prbs} PRBs")
    return bwp.first_common_prb + ue_prb


_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def rs_tag(common_index: int, seed: int) -> int:
    return _splitmix64(_splitmix64(seed & _MASK64) ^ common_index)


def rs_sequence_slice(grid: CommonPrbGrid, bwp: BwpConfig, seed: int) -> list:
    """Reference-signal tags for each PRB of ``bwp``, keyed by common PRB index.

    Tags are a function of the carrier-wide index only, so any two UEs see the
    same sequence portion on PRBs they share.
    """
    if bwp.numerology != grid.numerology:
        raise ValueError("BWP numerology differs from the grid numerology")
    if bwp.first_common_prb < 0 or bwp.first_common_prb + bwp.num_prbs > grid.num_prbs:
        raise PrbOutOfBwp(f"BWP {bwp.id} does not fit in the common grid")
    return [rs_tag(bwp.first_common_prb + i, seed) for i in range(bwp.num_prbs)]

"""Network-side wideband carrier: common PRB grid and CA partitioning."""
from dataclasses import dataclass, field
from fractions import Fraction
import math

from .errors import NumerologyNotConfigured, OffsetOutOfBand, Violation
from .numerology import (ChannelRole, FrequencyRange, Numerology, SUBCARRIERS_PER_PRB,
                         max_prbs, validate_scs)

SS_BLOCK_WIDTH_PRBS = 20
MAX_CCS = 16
CBW_LIMIT_KHZ = {FrequencyRange.FR1: 100_000, FrequencyRange.FR2: 400_000}
DEFAULT_GUARD_RATIO = Fraction(1, 50)


@dataclass(frozen=True)
class SsBlockInfo:
    lowest_subcarrier_freq_khz: int
    scs: Numerology
    width_prbs: int = SS_BLOCK_WIDTH_PRBS

    @property
    def width_khz(self) -> int:
        return self.width_prbs * self.scs.prb_width_khz

    @property
    def highest_freq_khz(self) -> int:
        return self.lowest_subcarrier_freq_khz + self.width_khz


@dataclass(frozen=True)
class CommonPrbGrid:
    numerology: Numerology
    ref_point_freq_khz: int
    num_prbs: int

    def prb_freq_khz(self, index):
        """Frequency span ``[lo, hi)`` of common PRB ``index``."""
        if not 0 <= index < self.num_prbs:
            raise IndexError(f"PRB {index} outside grid of {self.num_prbs}")
        w = self.numerology.prb_width_khz
        lo = self.ref_point_freq_khz + index * w
        return lo, lo + w

    def prb_at(self, freq_khz):
        w = self.numerology.prb_width_khz
        index = (freq_khz - self.ref_point_freq_khz) // w
        if not 0 <= index < self.num_prbs:
            raise IndexError(f"{freq_khz} kHz is outside the grid")
        return int(index)

    @property
    def high_freq_khz(self):
        return self.ref_point_freq_khz + self.num_prbs * self.numerology.prb_width_khz

    def covering_prbs(self, lo_khz, hi_khz):
        """Smallest ``(first, count)`` PRB span of this grid covering ``[lo, hi)``."""
        w = self.numerology.prb_width_khz
        first = math.floor(Fraction(lo_khz - self.ref_point_freq_khz, w))
        last = math.ceil(Fraction(hi_khz - self.ref_point_freq_khz, w))
        return first, last - first


@dataclass(frozen=True)
class CarrierConfig:
    fr: FrequencyRange
    center_freq_khz: int
    cbw_khz: int
    data_numerologies: tuple
    ss_block: SsBlockInfo
    ref_offset_prbs: int = 0
    guard_ratio: Fraction = DEFAULT_GUARD_RATIO

    @property
    def low_edge_khz(self):
        return self.center_freq_khz - self.cbw_khz // 2

    @property
    def high_edge_khz(self):
        return self.low_edge_khz + self.cbw_khz

    @property
    def anchor_numerology(self) -> Numerology:
        """Numerology used for UE carrier views (the first configured one)."""
        return self.data_numerologies[0]

    def reference_point(self):
        return reference_point(self.ss_block, self.ref_offset_prbs, self.fr)

    def grid(self, numerology=None):
        return build_common_grid(self, numerology or self.anchor_numerology,
                                 self.reference_point())


@dataclass(frozen=True)
class CaPartition:
    cc_spans: tuple = field(default_factory=tuple)

    @property
    def covered_prbs(self):
        return sum(n for _, n in self.cc_spans)


def validate_carrier(cfg: CarrierConfig) -> list:
    """Every violated carrier invariant (empty list when valid)."""
    out = []
    limit = CBW_LIMIT_KHZ[cfg.fr]
    if cfg.cbw_khz > limit:
        out.append(Violation("carrier.cbw_limit",
                             f"CBW exceeds {cfg.fr.value} limit ({cfg.cbw_khz} kHz > {limit} kHz)"))
    if cfg.cbw_khz <= 0:
        out.append(Violation("carrier.cbw_limit", "CBW must be positive"))
    lo, hi = cfg.fr.bounds_khz
    if cfg.low_edge_khz < lo or cfg.high_edge_khz > hi:
        out.append(Violation("carrier.in_fr",
                             f"carrier span [{cfg.low_edge_khz}, {cfg.high_edge_khz}) kHz "
                             f"leaves {cfg.fr.value} bounds [{lo}, {hi}]"))
    if not 0 <= cfg.guard_ratio < 1:
        out.append(Violation("carrier.guard", f"guard_ratio {cfg.guard_ratio} not in [0, 1)"))
    if not cfg.data_numerologies:
        out.append(Violation("scs.data", "no data numerology configured"))
    for num in cfg.data_numerologies:
        out.extend(validate_scs(num, cfg.fr, ChannelRole.DATA))
    ss = cfg.ss_block
    out.extend(validate_scs(ss.scs, cfg.fr, ChannelRole.SS_BLOCK))
    if ss.lowest_subcarrier_freq_khz < cfg.low_edge_khz or ss.highest_freq_khz > cfg.high_edge_khz:
        out.append(Violation("carrier.ssb_in_carrier",
                             f"SS block [{ss.lowest_subcarrier_freq_khz}, {ss.highest_freq_khz}) kHz "
                             "is not inside the carrier"))
    if cfg.ref_offset_prbs < 0:
        out.append(Violation("carrier.ref_offset", "reference offset must be non-negative"))
        return out
    ref = ss.lowest_subcarrier_freq_khz - cfg.ref_offset_prbs * SUBCARRIERS_PER_PRB * cfg.fr.ref_scs_khz
    if ref < cfg.low_edge_khz:
        out.append(Violation("carrier.ref_offset",
                             f"reference PRB at {ref} kHz lies below the carrier edge {cfg.low_edge_khz} kHz"))
    elif not any(v.rule in ("carrier.cbw_limit", "carrier.guard") for v in out):
        for num in cfg.data_numerologies:
            try:
                n = max_prbs(Fraction(cfg.cbw_khz, 1000), num, cfg.guard_ratio)
            except Exception as exc:
                out.append(Violation("carrier.grid_in_carrier", str(exc)))
                continue
            top = ref + n * num.prb_width_khz
            if top > cfg.high_edge_khz:
                out.append(Violation("carrier.grid_in_carrier",
                                     f"{n}-PRB grid at {num.scs_khz} kHz ends at {top} kHz, "
                                     f"beyond the carrier edge {cfg.high_edge_khz} kHz"))
    return out


def reference_point(ss: SsBlockInfo, offset_prbs: int, fr: FrequencyRange) -> int:
    """Lowest subcarrier of the reference PRB, in kHz.

    The offset counts downwards from the SS block's lowest subcarrier, in PRBs of
    15 kHz (FR1) or 60 kHz (FR2).
    """
    if offset_prbs < 0:
        raise ValueError("offset_prbs must be non-negative")
    ref = ss.lowest_subcarrier_freq_khz - offset_prbs * SUBCARRIERS_PER_PRB * fr.ref_scs_khz
    if ref < fr.bounds_khz[0]:
        raise OffsetOutOfBand(f"reference point {ref} kHz is below {fr.value}")
    return ref


def build_common_grid(cfg: CarrierConfig, numerology: Numerology, ref_point_khz: int) -> CommonPrbGrid:
    if numerology not in cfg.data_numerologies:
        raise NumerologyNotConfigured(f"{numerology.scs_khz} kHz is not configured on this carrier")
    n = max_prbs(Fraction(cfg.cbw_khz, 1000), numerology, cfg.guard_ratio)
    return CommonPrbGrid(numerology, ref_point_khz, n)


def partition_for_ca(grid: CommonPrbGrid, per_cc_max_prbs: int, num_chains: int) -> CaPartition:
    """Split the grid into contiguous, zero-guard CCs filled greedily from PRB 0."""
    if per_cc_max_prbs < 1:
        raise ValueError("per_cc_max_prbs must be >= 1")
    if not 1 <= num_chains <= MAX_CCS:
        raise ValueError(f"num_chains must be in 1..{MAX_CCS}")
    spans = []
    start = 0
    for _ in range(num_chains):
        if start >= grid.num_prbs:
            break
        n = min(per_cc_max_prbs, grid.num_prbs - start)
        spans.append((start, n))
        start += n
    return CaPartition(tuple(spans))

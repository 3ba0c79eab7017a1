"""OFDM numerology: subcarrier spacing scaling, symbol timing and PRB capacity.

All durations are integer nanoseconds, rounded half-up from exact rationals.
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
import math

from .errors import (CarrierTooNarrow, InvalidNesting, UnsupportedNumerology,
                     Violation)

MAX_MU = 5
BASE_SCS_KHZ = 15
SUBCARRIERS_PER_PRB = 12
MAX_SUBCARRIERS = 3300
SYMBOLS_PER_SLOT = 14
CP_RATIO = Fraction(144, 2048)


class CpType(Enum):
    NORMAL = "Normal"


class FrequencyRange(Enum):
    FR1 = "FR1"
    FR2 = "FR2"

    @property
    def bounds_mhz(self):
        return {"FR1": (450, 6000), "FR2": (24250, 52600)}[self.value]

    @property
    def bounds_khz(self):
        lo, hi = self.bounds_mhz
        return lo * 1000, hi * 1000

    @property
    def ref_scs_khz(self):
        """SCS in which the reference-PRB offset is counted."""
        return 15 if self is FrequencyRange.FR1 else 60


class ChannelRole(Enum):
    DATA = "Data"
    SS_BLOCK = "SsBlock"
    PRACH_LONG = "PrachLong"
    PRACH_SHORT = "PrachShort"


# allowed SCS in kHz per (role, FR); long PRACH values are not powers of two
ALLOWED_SCS = {
    (ChannelRole.DATA, FrequencyRange.FR1): (15, 30, 60),
    (ChannelRole.DATA, FrequencyRange.FR2): (60, 120),
    (ChannelRole.SS_BLOCK, FrequencyRange.FR1): (15, 30),
    (ChannelRole.SS_BLOCK, FrequencyRange.FR2): (120, 240),
    (ChannelRole.PRACH_LONG, FrequencyRange.FR1): (Fraction(5, 4), 5),
    (ChannelRole.PRACH_LONG, FrequencyRange.FR2): (),
    (ChannelRole.PRACH_SHORT, FrequencyRange.FR1): (15, 30),
    (ChannelRole.PRACH_SHORT, FrequencyRange.FR2): (60, 120),
}


def scs_from_mu(mu: int) -> int:
    """Subcarrier spacing in kHz for exponent ``mu`` (15 * 2**mu)."""
    if mu < 0:
        raise UnsupportedNumerology(f"mu must be non-negative, got {mu}")
    if mu > MAX_MU:
        raise UnsupportedNumerology(f"mu={mu} exceeds the 480 kHz maximum")
    return BASE_SCS_KHZ * 2 ** mu


@dataclass(frozen=True, order=True)
class Numerology:
    mu: int
    cp_type: CpType = CpType.NORMAL

    def __post_init__(self):
        scs_from_mu(self.mu)

    @property
    def scs_khz(self) -> int:
        return scs_from_mu(self.mu)

    @property
    def prb_width_khz(self) -> int:
        return SUBCARRIERS_PER_PRB * self.scs_khz

    @classmethod
    def from_scs(cls, scs_khz):
        for mu in range(MAX_MU + 1):
            if scs_from_mu(mu) == scs_khz:
                return cls(mu)
        raise UnsupportedNumerology(f"{scs_khz} kHz is not 15*2^mu for mu in 0..{MAX_MU}")


@dataclass(frozen=True)
class SymbolTiming:
    useful_ns: int
    cp_ns: int

    @property
    def total_ns(self) -> int:
        return self.useful_ns + self.cp_ns


def round_half_up(x) -> int:
    return math.floor(Fraction(x) + Fraction(1, 2))


def validate_scs(scs, fr: FrequencyRange, role: ChannelRole) -> list:
    """Check an SCS against the per-frequency-range table for ``role``.

    ``scs`` is either a :class:`Numerology` or a plain kHz value (needed for
    the 1.25/5 kHz long PRACH entries). Returns a list of violations, empty
    when the value is allowed.
    """
    value = scs.scs_khz if isinstance(scs, Numerology) else Fraction(str(scs))
    allowed = ALLOWED_SCS[(role, fr)]
    if value in allowed:
        return []
    shown = ", ".join(str(float(a)) if isinstance(a, Fraction) else str(a) for a in allowed)
    rule = "scs.ssb" if role is ChannelRole.SS_BLOCK else f"scs.{role.value.lower()}"
    return [Violation(rule, f"{float(value):g} kHz not allowed for {role.value} in {fr.value} "
                            f"(allowed: {shown or 'none'})")]


def symbol_timing(numerology: Numerology) -> SymbolTiming:
    useful = round_half_up(Fraction(10 ** 6, numerology.scs_khz))
    cp = round_half_up(useful * CP_RATIO)
    return SymbolTiming(useful, cp)


def nesting_count(outer: Numerology, inner: Numerology) -> int:
    """Number of ``inner`` symbols contained in one ``outer`` symbol."""
    if inner.mu < outer.mu:
        raise InvalidNesting(f"inner mu={inner.mu} is coarser than outer mu={outer.mu}")
    return 2 ** (inner.mu - outer.mu)


def max_prbs(cbw_mhz, numerology: Numerology, guard_ratio=0) -> int:
    """PRBs that fit in ``cbw_mhz`` after guard bands, capped at 3300 subcarriers."""
    guard = Fraction(str(guard_ratio))
    if not 0 <= guard < 1:
        raise ValueError(f"guard_ratio must be in [0, 1), got {guard_ratio}")
    usable_khz = Fraction(str(cbw_mhz)) * 1000 * (1 - guard)
    n = min(math.floor(usable_khz / numerology.prb_width_khz),
            MAX_SUBCARRIERS // SUBCARRIERS_PER_PRB)
    if n <= 0:
        raise CarrierTooNarrow(f"{cbw_mhz} MHz holds no {numerology.scs_khz} kHz PRB")
    return n

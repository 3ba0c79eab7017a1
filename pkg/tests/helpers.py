"""Independent oracles and scenario builders shared by the test modules."""
from dataclasses import replace
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from importlib import resources

from nrbwp.bwp import BwpConfig, BwpSet, Direction, RetuneProfile, Spectrum
from nrbwp.carrier import CarrierConfig, SsBlockInfo
from nrbwp.numerology import FrequencyRange, Numerology
from nrbwp.scenario import Scenario, UeSpec, parse_scenario
from nrbwp.scheduler import SwitchPolicy
from nrbwp.traffic import TrafficSource
from nrbwp.ue import EnergyModel, UeProfile

MU1 = Numerology(1)


def oracle_timing(mu):
    """(useful, cp) ns via decimal arithmetic, independent of the library's Fraction path."""
    scs = Decimal(15 * 2 ** mu)
    useful = (Decimal(10 ** 6) / scs).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    cp = (useful * Decimal(144) / Decimal(2048)).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return int(useful), int(cp)


def oracle_max_prbs(cbw_khz, mu, guard: Fraction):
    """Integer-only PRB capacity: floor(cbw * (1 - guard) / prb_width), capped at 275."""
    prb_khz = 12 * 15 * 2 ** mu
    n = (cbw_khz * (guard.denominator - guard.numerator)) // (guard.denominator * prb_khz)
    return min(n, 275)


def bundled(name):
    return resources.files("nrbwp") / "scenarios" / name


def load(name):
    return parse_scenario(bundled(name))


def fr1_carrier(**kw):
    """100 MHz FR1 carrier at 3.5 GHz, 30 kHz data, 272-PRB grid starting 100 PRBs below the SS block."""
    base = dict(fr=FrequencyRange.FR1, center_freq_khz=3_500_000, cbw_khz=100_000,
                data_numerologies=(MU1,), ss_block=SsBlockInfo(3_469_080, MU1),
                ref_offset_prbs=100, guard_ratio=Fraction(1, 50))
    base.update(kw)
    return CarrierConfig(**base)


def bwp(id, first, n, direction=Direction.DL, mu=1, **kw):
    return BwpConfig(id, direction, first, n, Numerology(mu), **kw)


def two_bwp_set(narrow=(50, 56), wide=(0, 272), default_narrow=True, css_on=0):
    """Paired set with a narrow (id 0) and a wide (id 1) DL BWP; UL mirrors DL."""
    def side(direction):
        return (bwp(0, *narrow, direction, has_css=(css_on == 0 and direction is Direction.DL),
                    is_default=default_narrow, is_initial=True),
                bwp(1, *wide, direction, has_css=(css_on == 1 and direction is Direction.DL),
                    is_default=not default_narrow))
    return BwpSet(Spectrum.PAIRED, side(Direction.DL), side(Direction.UL))


def single_ue(bwp_set=None, *, traffic=None, duration=200, loss=0.0, nack=0.0, timer=8,
              policy=None, energy=None, retune=None, seed=0, **kw):
    bwp_set = bwp_set or two_bwp_set()
    profile = UeProfile(0, 1, 100_000, retune=retune or RetuneProfile(), dci_loss_prob=loss,
                        energy=energy or EnergyModel(), harq_nack_prob=nack, timer_slots=timer)
    traffic = (TrafficSource(0, "constant", 1000),) if traffic is None else traffic
    return Scenario(fr1_carrier(), (UeSpec(profile, (bwp_set,)),), traffic,
                    policy or SwitchPolicy(), duration, seed, **kw)


def with_profile(scn, **changes):
    ues = tuple(replace(u, profile=replace(u.profile, **changes)) for u in scn.ues)
    return replace(scn, ues=ues)

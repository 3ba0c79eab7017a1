from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from nrbwp.carrier import (CarrierConfig, CommonPrbGrid, SsBlockInfo, build_common_grid, partition_for_ca,
                           reference_point, validate_carrier)
from nrbwp.errors import NumerologyNotConfigured, OffsetOutOfBand
from nrbwp.numerology import FrequencyRange, Numerology

from helpers import fr1_carrier


def test_reference_point_examples():
    assert reference_point(SsBlockInfo(3_500_000, Numerology(1)), 100, FrequencyRange.FR1) == 3_482_000
    assert reference_point(SsBlockInfo(3_500_000, Numerology(1)), 0, FrequencyRange.FR1) == 3_500_000
    assert reference_point(SsBlockInfo(28_000_000, Numerology(3)), 50, FrequencyRange.FR2) == 27_964_000


def test_reference_point_below_band():
    with pytest.raises(OffsetOutOfBand):
        reference_point(SsBlockInfo(460_000, Numerology(0)), 100, FrequencyRange.FR1)
    with pytest.raises(ValueError):
        reference_point(SsBlockInfo(3_500_000, Numerology(0)), -1, FrequencyRange.FR1)


@given(offset=st.integers(0, 500), fr=st.sampled_from(list(FrequencyRange)))
def test_reference_point_steps_exactly(offset, fr):
    ss = SsBlockInfo(3_500_000 if fr is FrequencyRange.FR1 else 28_000_000, Numerology(1))
    step = 12 * (15 if fr is FrequencyRange.FR1 else 60)
    assert reference_point(ss, offset, fr) - reference_point(ss, offset + 1, fr) == step


def test_valid_fr1_carrier():
    assert validate_carrier(fr1_carrier()) == []
    multi = fr1_carrier(data_numerologies=(Numerology(0), Numerology(1), Numerology(2)))
    assert validate_carrier(multi) == []


def test_fr1_200mhz_rejected():
    rules = {v.rule for v in validate_carrier(fr1_carrier(cbw_khz=200_000))}
    assert "carrier.cbw_limit" in rules


def test_valid_fr2_carrier():
    mu3 = Numerology(3)
    cfg = CarrierConfig(FrequencyRange.FR2, 28_000_000, 400_000, (mu3,), SsBlockInfo(27_800_000, mu3),
                        ref_offset_prbs=0, guard_ratio=Fraction(0))
    assert validate_carrier(cfg) == []


def test_every_violation_reported():
    cfg = fr1_carrier(cbw_khz=200_000, data_numerologies=(Numerology(3),), ss_block=SsBlockInfo(1, Numerology(2)))
    rules = {v.rule for v in validate_carrier(cfg)}
    assert {"carrier.cbw_limit", "scs.data", "scs.ssb", "carrier.ssb_in_carrier"} <= rules


def test_grid_sizes():
    cfg = fr1_carrier()
    grid = cfg.grid()
    assert grid.num_prbs == 272 and grid.ref_point_freq_khz == 3_451_080
    wide = fr1_carrier(data_numerologies=(Numerology(0),), guard_ratio=Fraction(0))
    assert build_common_grid(wide, Numerology(0), 0).num_prbs == 275
    with pytest.raises(NumerologyNotConfigured):
        build_common_grid(cfg, Numerology(3), 0)


def test_partition_examples():
    g272 = CommonPrbGrid(Numerology(1), 0, 272)
    g275 = CommonPrbGrid(Numerology(0), 0, 275)
    assert partition_for_ca(g272, 136, 2).cc_spans == ((0, 136), (136, 136))
    assert partition_for_ca(g272, 272, 1).cc_spans == ((0, 272),)
    p = partition_for_ca(g275, 100, 2)
    assert p.cc_spans == ((0, 100), (100, 100)) and p.covered_prbs == 200


@given(n=st.integers(1, 275), per=st.integers(1, 300), chains=st.integers(1, 16))
def test_partition_properties(n, per, chains):
    p = partition_for_ca(CommonPrbGrid(Numerology(1), 0, n), per, chains)
    assert len(p.cc_spans) <= 16
    assert p.covered_prbs == min(n, chains * per)
    pos = 0
    for first, size in p.cc_spans:
        assert first == pos and 1 <= size <= per
        pos += size


@given(n=st.integers(1, 275), mu=st.integers(0, 3), ref=st.integers(450_000, 6_000_000))
def test_prb_frequency_bijection(n, mu, ref):
    grid = CommonPrbGrid(Numerology(mu), ref, n)
    for i in {0, n // 2, n - 1}:
        lo, hi = grid.prb_freq_khz(i)
        assert grid.prb_at(lo) == i and grid.prb_at(hi - 1) == i
    with pytest.raises(IndexError):
        grid.prb_freq_khz(n)

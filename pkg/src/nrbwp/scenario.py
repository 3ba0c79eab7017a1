"""Scenario description: dataclasses, the line-oriented text format and validation.

The format is a tree of ``name [args]`` ... ``end`` sections holding
``key = value`` lines. Indentation is ignored and ``#`` starts a comment.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .bwp import (BwpConfig, BwpSet, Direction, RetuneProfile, Spectrum, validate_bwp_set)
from .carrier import CarrierConfig, SsBlockInfo, validate_carrier
from .errors import (NrError, ScenarioError, ScenarioSyntaxError, Violation)
from .numerology import FrequencyRange, Numerology
from .scheduler import DEFAULT_BITS_PER_RE, SwitchPolicy
from .traffic import TrafficSource
from .ue import EnergyModel, MeasGapConfig, RfCase, UeProfile, classify, configure


@dataclass(frozen=True)
class UeSpec:
    """A UE profile plus one BWP set per serving cell (CC)."""
    profile: UeProfile
    ccs: tuple


@dataclass(frozen=True)
class SwitchCommand:
    slot: int
    ue_id: int
    bwp_id: int
    cc_index: int = 0
    direction: Direction = Direction.DL
    via: str = "dci"        # "dci" (lossy, gNB-issued) or "rrc" (reliable)


@dataclass(frozen=True)
class ForcedNack:
    """NACK the PDSCH that UE ``ue_id`` receives starting in global slot ``slot``."""
    ue_id: int
    slot: int


@dataclass(frozen=True)
class GroupCommonConfig:
    period_slots: int
    first_prb: int
    num_prbs: int
    ue_ids: tuple
    offset_slots: int = 0


@dataclass(frozen=True)
class Scenario:
    carrier: CarrierConfig
    ues: tuple = ()
    traffic: tuple = ()
    policy: SwitchPolicy = field(default_factory=SwitchPolicy)
    duration_slots: int = 100
    seed: int = 0
    name: str = "scenario"
    bits_per_re: int = DEFAULT_BITS_PER_RE
    commands: tuple = ()
    forced_nacks: tuple = ()
    group_common: tuple = ()

    @property
    def bwp_sets(self):
        return {u.profile.id: u.ccs for u in self.ues}

    @property
    def profiles(self):
        return [u.profile for u in self.ues]


# ---------------------------------------------------------------- validation

def cc_spans_khz(scn: Scenario, spec: UeSpec):
    """Per-CC ``(lo, hi)`` frequency spans of the UE relative to the reference point."""
    grid = scn.carrier.grid()
    view = configure(spec.profile, scn.carrier, grid)
    w = grid.numerology.prb_width_khz
    return [(first * w, (first + n) * w) for first, n in view.cc_spans]


def carrier_grids(carrier: CarrierConfig):
    return {num: carrier.grid(num) for num in carrier.data_numerologies}


def validate_scenario(scn: Scenario) -> list:
    """Run every module validator plus cross-reference checks; returns all violations."""
    out = list(validate_carrier(scn.carrier))
    if out:
        return out  # the grid cannot be built on a broken carrier
    if scn.duration_slots < 1:
        out.append(Violation("scenario.duration", "duration_slots must be positive"))
    if scn.bits_per_re < 1:
        out.append(Violation("scenario.bits_per_re", "bits_per_re must be positive"))
    grids = carrier_grids(scn.carrier)
    ids = [u.profile.id for u in scn.ues]
    if len(set(ids)) != len(ids):
        out.append(Violation("scenario.ue_ids", f"duplicate UE ids {ids}"))
    if any(i < 0 for i in ids):
        out.append(Violation("scenario.ue_ids", "UE ids must be non-negative"))
    for spec in scn.ues:
        out.extend(_validate_ue(scn, spec, grids))
    known = set(ids)
    by_id = {u.profile.id: u for u in scn.ues}
    for t in scn.traffic:
        if t.ue_id not in known:
            out.append(Violation("scenario.refs", f"traffic for unknown UE {t.ue_id}"))
    for c in scn.commands:
        spec = by_id.get(c.ue_id)
        if spec is None:
            out.append(Violation("scenario.refs", f"command for unknown UE {c.ue_id}"))
        elif not 0 <= c.cc_index < len(spec.ccs):
            out.append(Violation("scenario.refs", f"command for UE {c.ue_id} names unknown cc {c.cc_index}"))
        elif c.bwp_id not in [b.id for b in spec.ccs[c.cc_index].bwps(c.direction)]:
            out.append(Violation("scenario.refs",
                                 f"command for UE {c.ue_id} names unknown {c.direction.value} BWP {c.bwp_id}"))
        if c.via not in ("dci", "rrc"):
            out.append(Violation("scenario.refs", f"command via must be dci or rrc, got {c.via!r}"))
        if c.slot < 0:
            out.append(Violation("scenario.refs", f"command slot {c.slot} is negative"))
    for n in scn.forced_nacks:
        if n.ue_id not in known:
            out.append(Violation("scenario.refs", f"harq_nack for unknown UE {n.ue_id}"))
    anchor = grids[scn.carrier.anchor_numerology]
    for gc in scn.group_common:
        if not gc.ue_ids:
            out.append(Violation("scenario.group_common", "group_common needs at least one UE"))
        for u in gc.ue_ids:
            if u not in known:
                out.append(Violation("scenario.refs", f"group_common names unknown UE {u}"))
        if gc.num_prbs < 1 or gc.first_prb < 0 or gc.first_prb + gc.num_prbs > anchor.num_prbs:
            out.append(Violation("scenario.group_common",
                                 f"span [{gc.first_prb}, {gc.first_prb + gc.num_prbs}) outside the grid"))
        if gc.period_slots < 1 or gc.offset_slots < 0:
            out.append(Violation("scenario.group_common", "period must be >= 1 and offset >= 0"))
    return out


def _validate_ue(scn, spec, grids):
    out = []
    p = spec.profile
    tag = f"UE {p.id}"
    for name in ("dci_loss_prob", "harq_nack_prob"):
        v = getattr(p, name)
        if not 0 <= v <= 1:
            out.append(Violation("ue.probability", f"{tag}: {name}={v} not in [0, 1]"))
    if p.max_retx < 1 or p.harq_processes < 1 or p.timer_slots < 1:
        out.append(Violation("ue.harq", f"{tag}: max_retx, harq_processes and timer_slots must be >= 1"))
    try:
        case = classify(p, scn.carrier)
        spans = cc_spans_khz(scn, spec)
    except NrError as exc:
        return out + [Violation("ue.rf", f"{tag}: {exc}")]
    if p.rf_case is not None and p.rf_case is not case:
        out.append(Violation("ue.rf", f"{tag}: declared {p.rf_case.value} but capability gives {case.value}"))
    if len(spec.ccs) != len(spans):
        out.append(Violation("ue.cc_count",
                             f"{tag}: {len(spec.ccs)} BWP sets for {len(spans)} component carrier(s)"))
        return out
    for cc, (bwp_set, span) in enumerate(zip(spec.ccs, spans)):
        for v in validate_bwp_set(bwp_set, grids, cc == 0, ss_block=scn.carrier.ss_block, span_khz=span):
            out.append(Violation(v.rule, f"{tag} cc {cc}: {v.message}"))
    return out


def check_scenario(scn: Scenario):
    """Raise :class:`ScenarioError` listing every violation, if any."""
    violations = validate_scenario(scn)
    if violations:
        raise ScenarioError(violations)
    return scn


# ---------------------------------------------------------------- text format

@dataclass
class _Section:
    name: str
    args: list
    line: int
    entries: list = field(default_factory=list)    # (key, value, line)
    children: list = field(default_factory=list)


def _tokenize(text):
    root = _Section("<root>", [], 0)
    stack = [root]
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not key or " " in key:
                raise ScenarioSyntaxError(lineno, f"malformed key in {raw.strip()!r}")
            if len(stack) == 1:
                raise ScenarioSyntaxError(lineno, f"key {key!r} outside any section")
            stack[-1].entries.append((key, value, lineno))
        elif line == "end":
            if len(stack) == 1:
                raise ScenarioSyntaxError(lineno, "'end' without an open section")
            stack.pop()
        else:
            name, *args = line.split()
            sec = _Section(name, args, lineno)
            stack[-1].children.append(sec)
            stack.append(sec)
    if len(stack) > 1:
        raise ScenarioSyntaxError(stack[-1].line, f"section {stack[-1].name!r} is never closed")
    if not root.children:
        raise ScenarioSyntaxError(1, "no sections found")
    return root


def _to_bool(s):
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _to_int_list(s):
    return tuple(int(x) for x in s.replace(",", " ").split())


def _to_pairs(s):
    out = []
    for item in s.replace(",", " ").split():
        a, sep, b = item.partition(":")
        if not sep:
            raise ValueError(f"pair {item!r} must look like dl:ul")
        out.append((int(a), int(b)))
    return tuple(out)


class _Fields:
    """Typed access to one section's ``key = value`` lines."""

    def __init__(self, sec: _Section, schema: dict):
        self.sec = sec
        self.values = {}
        for key, value, line in sec.entries:
            if key not in schema:
                raise ScenarioSyntaxError(line, f"unknown key {key!r} in section {sec.name!r}")
            if key in self.values:
                raise ScenarioSyntaxError(line, f"duplicate key {key!r}")
            try:
                self.values[key] = schema[key](value)
            except (ValueError, KeyError, ZeroDivisionError) as exc:
                raise ScenarioSyntaxError(line, f"bad value for {key!r}: {exc}") from None

    def get(self, key, default=None):
        return self.values.get(key, default)

    def need(self, key):
        if key not in self.values:
            raise ScenarioSyntaxError(self.sec.line, f"section {self.sec.name!r} is missing {key!r}")
        return self.values[key]


def _children(sec, allowed):
    for c in sec.children:
        if c.name not in allowed:
            raise ScenarioSyntaxError(c.line, f"unexpected section {c.name!r} inside {sec.name!r}")
    return sec.children


def _one_arg(sec, conv=int):
    if len(sec.args) != 1:
        raise ScenarioSyntaxError(sec.line, f"section {sec.name!r} takes exactly one argument")
    try:
        return conv(sec.args[0])
    except ValueError as exc:
        raise ScenarioSyntaxError(sec.line, str(exc)) from None


def _no_args(sec):
    if sec.args:
        raise ScenarioSyntaxError(sec.line, f"section {sec.name!r} takes no arguments")


_CARRIER_KEYS = {"fr": FrequencyRange, "center_khz": int, "cbw_khz": int, "data_mu": _to_int_list,
                 "guard_ratio": Fraction, "ref_offset_prbs": int}
_SSB_KEYS = {"lowest_khz": int, "mu": int, "width_prbs": int}
_POLICY_KEYS = {"up_threshold_bytes": int, "down_threshold_bytes": int, "hysteresis_slots": int,
                "enabled": _to_bool}
_UE_KEYS = {"chains": int, "chain_bw_khz": int, "dci_loss_prob": float, "harq_nack_prob": float,
            "max_retx": int, "harq_processes": int, "timer_slots": int, "rf_case": RfCase}
_CC_KEYS = {"spectrum": Spectrum, "pairs": _to_pairs, "single_pucch_group": _to_bool}
_BWP_KEYS = {"first_prb": int, "num_prbs": int, "mu": int, "uss": _to_bool, "css": _to_bool,
             "default": _to_bool, "initial": _to_bool}
_TRAFFIC_KEYS = {"model": str, "bytes_per_slot": int, "on_slots": int, "off_slots": int, "seed": int,
                 "stop_slot": int}
_COMMAND_KEYS = {"slot": int, "ue": int, "cc": int, "bwp": int, "direction": Direction, "via": str}
_NACK_KEYS = {"ue": int, "slot": int}
_GC_KEYS = {"period_slots": int, "offset_slots": int, "first_prb": int, "num_prbs": int, "ues": _to_int_list}
_SCENARIO_KEYS = {"name": str, "duration_slots": int, "seed": int, "bits_per_re": int}


def _wrap(sec, fn, *args):
    """Turn constructor-level ValueErrors into syntax errors pointing at ``sec``."""
    try:
        return fn(*args)
    except (ValueError, NrError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioSyntaxError(sec.line, f"{sec.name}: {exc}") from None


def _build_carrier(sec):
    _no_args(sec)
    f = _Fields(sec, _CARRIER_KEYS)
    ss = None
    for c in _children(sec, {"ss_block"}):
        _no_args(c)
        sf = _Fields(c, _SSB_KEYS)
        ss = _wrap(c, lambda: SsBlockInfo(sf.need("lowest_khz"), Numerology(sf.need("mu")),
                                          sf.get("width_prbs", 20)))
    if ss is None:
        raise ScenarioSyntaxError(sec.line, "carrier needs an ss_block section")
    mus = f.need("data_mu")
    return _wrap(sec, lambda: CarrierConfig(f.need("fr"), f.need("center_khz"), f.need("cbw_khz"),
                                            tuple(Numerology(m) for m in mus), ss,
                                            f.get("ref_offset_prbs", 0), f.get("guard_ratio", Fraction(1, 50))))


def _build_bwp(sec):
    if len(sec.args) != 2:
        raise ScenarioSyntaxError(sec.line, "bwp section needs a direction and an id, e.g. 'bwp DL 0'")
    try:
        direction, bwp_id = Direction(sec.args[0]), int(sec.args[1])
    except ValueError as exc:
        raise ScenarioSyntaxError(sec.line, str(exc)) from None
    f = _Fields(sec, _BWP_KEYS)
    return _wrap(sec, lambda: BwpConfig(bwp_id, direction, f.need("first_prb"), f.need("num_prbs"),
                                        Numerology(f.need("mu")), f.get("uss", True), f.get("css", False),
                                        f.get("default", False), f.get("initial", False)))


def _build_cc(sec):
    _one_arg(sec)
    f = _Fields(sec, _CC_KEYS)
    bwps = [_build_bwp(c) for c in _children(sec, {"bwp"})]
    dl = tuple(b for b in bwps if b.direction is Direction.DL)
    ul = tuple(b for b in bwps if b.direction is Direction.UL)
    return BwpSet(f.get("spectrum", Spectrum.PAIRED), dl, ul, f.get("pairs", ()),
                  f.get("single_pucch_group", True))


def _build_ue(sec):
    ue_id = _one_arg(sec)
    f = _Fields(sec, _UE_KEYS)
    extra = {}
    ccs = []
    for c in _children(sec, {"retune", "energy", "meas_gap", "cc"}):
        if c.name == "cc":
            if _one_arg(c) != len(ccs):
                raise ScenarioSyntaxError(c.line, "cc sections must be numbered 0, 1, ... in order")
            ccs.append(_build_cc(c))
            continue
        _no_args(c)
        if c.name == "retune":
            rf = _Fields(c, {"same_center_ns": int, "diff_center_ns": int})
            extra["retune"] = _wrap(c, RetuneProfile, rf.get("same_center_ns", 20_000),
                                    rf.get("diff_center_ns", 200_000))
        elif c.name == "energy":
            ef = _Fields(c, {"baseline_mw": float, "per_mhz_mw": float, "retune_penalty_mj": float})
            extra["energy"] = _wrap(c, EnergyModel, ef.get("baseline_mw", 10.0), ef.get("per_mhz_mw", 2.0),
                                    ef.get("retune_penalty_mj", 0.0))
        else:
            mf = _Fields(c, {"period_slots": int, "length_slots": int, "offset_slots": int})
            extra["meas_gap"] = _wrap(c, MeasGapConfig, mf.need("period_slots"), mf.need("length_slots"),
                                      mf.get("offset_slots", 0))
    profile = UeProfile(ue_id, f.need("chains"), f.need("chain_bw_khz"),
                        dci_loss_prob=f.get("dci_loss_prob", 0.0), rf_case=f.get("rf_case"),
                        harq_nack_prob=f.get("harq_nack_prob", 0.0), max_retx=f.get("max_retx", 4),
                        harq_processes=f.get("harq_processes", 8), timer_slots=f.get("timer_slots", 8),
                        **extra)
    if not ccs:
        raise ScenarioSyntaxError(sec.line, f"UE {ue_id} has no cc section")
    return UeSpec(profile, tuple(ccs))


def parse_scenario_text(text: str) -> Scenario:
    """Parse scenario text; raises :class:`ScenarioSyntaxError` on malformed input."""
    root = _tokenize(text)
    top = {"scenario", "carrier", "policy", "ue", "traffic", "command", "harq_nack", "group_common"}
    meta, carrier, policy = {}, None, SwitchPolicy()
    ues, traffic, commands, nacks, gcs = [], [], [], [], []
    for sec in _children(root, top):
        if sec.name != "ue" and sec.name != "traffic":
            _no_args(sec)
        if sec.name in ("scenario", "policy", "command", "harq_nack", "group_common", "traffic"):
            _children(sec, set())
        if sec.name == "scenario":
            meta = _Fields(sec, _SCENARIO_KEYS).values
        elif sec.name == "carrier":
            if carrier is not None:
                raise ScenarioSyntaxError(sec.line, "only one carrier section is allowed")
            carrier = _build_carrier(sec)
        elif sec.name == "policy":
            pf = _Fields(sec, _POLICY_KEYS)
            d = SwitchPolicy()
            policy = _wrap(sec, SwitchPolicy, pf.get("up_threshold_bytes", d.up_threshold_bytes),
                           pf.get("down_threshold_bytes", d.down_threshold_bytes),
                           pf.get("hysteresis_slots", d.hysteresis_slots), pf.get("enabled", True))
        elif sec.name == "ue":
            ues.append(_build_ue(sec))
        elif sec.name == "traffic":
            ue_id = _one_arg(sec)
            tf = _Fields(sec, _TRAFFIC_KEYS)
            traffic.append(_wrap(sec, TrafficSource, ue_id, tf.get("model", "constant"),
                                 tf.get("bytes_per_slot", 0), tf.get("on_slots", 0), tf.get("off_slots", 0),
                                 tf.get("seed", 0), tf.get("stop_slot")))
        elif sec.name == "command":
            cf = _Fields(sec, _COMMAND_KEYS)
            commands.append(SwitchCommand(cf.need("slot"), cf.need("ue"), cf.need("bwp"), cf.get("cc", 0),
                                          cf.get("direction", Direction.DL), cf.get("via", "dci")))
        elif sec.name == "harq_nack":
            nf = _Fields(sec, _NACK_KEYS)
            nacks.append(ForcedNack(nf.need("ue"), nf.need("slot")))
        else:
            gf = _Fields(sec, _GC_KEYS)
            gcs.append(GroupCommonConfig(gf.need("period_slots"), gf.need("first_prb"), gf.need("num_prbs"),
                                         gf.need("ues"), gf.get("offset_slots", 0)))
    if carrier is None:
        raise ScenarioSyntaxError(1, "scenario has no carrier section")
    return Scenario(carrier, tuple(ues), tuple(traffic), policy, meta.get("duration_slots", 100),
                    meta.get("seed", 0), meta.get("name", "scenario"), meta.get("bits_per_re", DEFAULT_BITS_PER_RE),
                    tuple(commands), tuple(nacks), tuple(gcs))


def parse_scenario(path) -> Scenario:
    """Parse and validate a scenario file.

    Raises :class:`ScenarioSyntaxError` for malformed text and
    :class:`ScenarioError` with every semantic violation otherwise.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioSyntaxError(1, f"not UTF-8 text: {exc}") from None
    return check_scenario(parse_scenario_text(text))


# ---------------------------------------------------------------- serializer

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v)
    if hasattr(v, "value") and not isinstance(v, (int, float)):
        return v.value
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_scenario(scn: Scenario) -> str:
    """Text form of ``scn``; ``parse_scenario_text(dump_scenario(s)) == s``."""
    lines = []

    def sec(header, items, indent=0, children=()):
        pad = "  " * indent
        lines.append(pad + header)
        for k, v in items:
            if v is not None:
                lines.append(f"{pad}  {k} = {_fmt(v)}")
        for child in children:
            child(indent + 1)
        lines.append(pad + "end")

    sec("scenario", [("name", scn.name), ("duration_slots", scn.duration_slots), ("seed", scn.seed),
                     ("bits_per_re", scn.bits_per_re)])
    c = scn.carrier
    ss = c.ss_block
    sec("carrier", [("fr", c.fr), ("center_khz", c.center_freq_khz), ("cbw_khz", c.cbw_khz),
                    ("data_mu", ", ".join(str(n.mu) for n in c.data_numerologies)),
                    ("guard_ratio", Fraction(c.guard_ratio)), ("ref_offset_prbs", c.ref_offset_prbs)],
        children=[lambda i: sec("ss_block", [("lowest_khz", ss.lowest_subcarrier_freq_khz), ("mu", ss.scs.mu),
                                             ("width_prbs", ss.width_prbs)], i)])
    p = scn.policy
    sec("policy", [("up_threshold_bytes", p.up_threshold_bytes), ("down_threshold_bytes", p.down_threshold_bytes),
                   ("hysteresis_slots", p.hysteresis_slots), ("enabled", p.enabled)])
    for spec in scn.ues:
        _dump_ue(sec, spec)
    for t in scn.traffic:
        sec(f"traffic {t.ue_id}", [("model", t.model), ("bytes_per_slot", t.bytes_per_slot),
                                   ("on_slots", t.on_slots), ("off_slots", t.off_slots), ("seed", t.seed),
                                   ("stop_slot", t.stop_slot)])
    for cmd in scn.commands:
        sec("command", [("slot", cmd.slot), ("ue", cmd.ue_id), ("cc", cmd.cc_index), ("bwp", cmd.bwp_id),
                        ("direction", cmd.direction), ("via", cmd.via)])
    for n in scn.forced_nacks:
        sec("harq_nack", [("ue", n.ue_id), ("slot", n.slot)])
    for gc in scn.group_common:
        sec("group_common", [("period_slots", gc.period_slots), ("offset_slots", gc.offset_slots),
                             ("first_prb", gc.first_prb), ("num_prbs", gc.num_prbs),
                             ("ues", ", ".join(str(u) for u in gc.ue_ids))])
    return "\n".join(lines) + "\n"


def _dump_ue(sec, spec):
    p = spec.profile
    kids = [
        lambda i: sec("retune", [("same_center_ns", p.retune.same_center_ns),
                                 ("diff_center_ns", p.retune.diff_center_ns)], i),
        lambda i: sec("energy", [("baseline_mw", float(p.energy.baseline_mw)),
                                 ("per_mhz_mw", float(p.energy.per_mhz_mw)),
                                 ("retune_penalty_mj", float(p.energy.retune_penalty_mj))], i),
    ]
    if p.meas_gap is not None:
        g = p.meas_gap
        kids.append(lambda i: sec("meas_gap", [("period_slots", g.period_slots), ("length_slots", g.length_slots),
                                               ("offset_slots", g.offset_slots)], i))
    for idx, bwp_set in enumerate(spec.ccs):
        kids.append(lambda i, idx=idx, s=bwp_set: _dump_cc(sec, idx, s, i))
    sec(f"ue {p.id}", [("chains", p.num_chains), ("chain_bw_khz", p.per_chain_bw_khz),
                       ("dci_loss_prob", float(p.dci_loss_prob)), ("harq_nack_prob", float(p.harq_nack_prob)),
                       ("max_retx", p.max_retx), ("harq_processes", p.harq_processes),
                       ("timer_slots", p.timer_slots), ("rf_case", p.rf_case)], children=kids)


def _dump_cc(sec, idx, s, indent):
    pairs = ", ".join(f"{a}:{b}" for a, b in s.pairs) if s.pairs else None
    kids = [lambda i, b=b: sec(f"bwp {b.direction.value} {b.id}",
                               [("first_prb", b.first_common_prb), ("num_prbs", b.num_prbs),
                                ("mu", b.numerology.mu), ("uss", b.has_uss), ("css", b.has_css),
                                ("default", b.is_default), ("initial", b.is_initial)], i)
            for b in s.dl + s.ul]
    sec(f"cc {idx}", [("spectrum", s.spectrum), ("pairs", pairs), ("single_pucch_group", s.single_pucch_group)],
        indent, kids)

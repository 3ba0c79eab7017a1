"""Command-line driver: ``run`` simulates a scenario, ``check`` audits it statically."""
import argparse
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from .bwp import k_symbol_gap, switch_delay
from .errors import NrError, ScenarioError, ScenarioSyntaxError
from .numerology import max_prbs
from .scenario import parse_scenario_text, validate_scenario
from .sim import run
from .trace import write_trace

log = logging.getLogger("nrbwp")

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID = 0, 1, 2

RULES = (
    ("carrier.cbw_limit", "CBW <= 100 MHz in FR1, <= 400 MHz in FR2"),
    ("carrier.in_fr", "carrier lies inside its frequency range"),
    ("carrier.guard", "guard ratio in [0, 1)"),
    ("scs.data", "data SCS allowed for the frequency range"),
    ("scs.ssb", "SS-block SCS allowed for the frequency range"),
    ("carrier.ssb_in_carrier", "SS block inside the carrier"),
    ("carrier.ref_offset", "reference PRB inside the carrier"),
    ("carrier.grid_in_carrier", "common PRB grid fits in the carrier"),
    ("bwp.max_dl", "1 to 4 DL BWPs per serving cell"),
    ("bwp.max_ul", "1 to 4 UL BWPs per serving cell"),
    ("bwp.ids", "BWP ids unique per direction"),
    ("bwp.initial", "exactly one initial BWP per direction"),
    ("bwp.default", "at most one default BWP per direction"),
    ("bwp.direction", "BWP declared in its own direction"),
    ("bwp.ssb_floor", "BWP at least as wide as the SS block"),
    ("bwp.numerology", "BWP numerology configured on the carrier"),
    ("bwp.within_carrier", "BWP inside the common PRB grid"),
    ("bwp.within_cc", "BWP inside the UE's component carrier"),
    ("bwp.dl_uss", "every DL BWP has a UE-specific search space"),
    ("bwp.primary_css", "primary carrier has a common search space"),
    ("bwp.pucch_numerology", "one numerology per PUCCH group"),
    ("bwp.pairs", "DL/UL pairs only on unpaired spectrum"),
    ("bwp.unpaired_pairs", "unpaired DL/UL BWPs form a bijection incl. default and initial"),
    ("bwp.unpaired_center", "paired DL/UL BWPs share a center frequency"),
    ("ue.rf", "UE RF capability can serve the carrier"),
    ("ue.cc_count", "one BWP set per component carrier"),
    ("ue.probability", "loss probabilities in [0, 1]"),
    ("ue.harq", "HARQ and timer parameters positive"),
    ("scenario.duration", "duration is positive"),
    ("scenario.bits_per_re", "spectral efficiency is positive"),
    ("scenario.ue_ids", "UE ids unique and non-negative"),
    ("scenario.refs", "traffic, commands and NACKs name existing entities"),
    ("scenario.group_common", "group-common spans fit the grid"),
)


def _read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioSyntaxError(1, f"not UTF-8 text: {exc}") from None


def _print_violations(violations, stream):
    for v in violations:
        print(f"error: {v}", file=stream)


def cmd_run(args) -> int:
    try:
        scn = parse_scenario_text(_read(args.scenario))
        if args.duration_slots is not None:
            scn = replace(scn, duration_slots=args.duration_slots)
        violations = validate_scenario(scn)
        if violations:
            raise ScenarioError(violations)
    except ScenarioError as exc:
        _print_violations(exc.violations, sys.stderr)
        return EXIT_INVALID
    seed = scn.seed if args.seed is None else args.seed
    log.info("running %s: %d UE(s), %d slots, seed %d", scn.name, len(scn.ues), scn.duration_slots, seed)
    try:
        trace, report = run(scn, seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trace.csv", "w", encoding="utf-8", newline="") as fh:
            write_trace(trace, fh)
        (out / "report.txt").write_text(report.to_text(scn.name), encoding="utf-8")
        (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    except Exception as exc:  # noqa: BLE001 - the exit code is the contract
        log.debug("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    log.info("wrote %d trace records to %s", len(trace), out)
    if args.log_level != "quiet":
        sys.stdout.write(report.to_text(scn.name))
    return EXIT_OK


def _derived(scn):
    """Lines of derived quantities: PRB counts, reference point and the K table."""
    c = scn.carrier
    lines = [f"reference point: {c.reference_point()} kHz "
             f"(SS block at {c.ss_block.lowest_subcarrier_freq_khz} kHz, offset {c.ref_offset_prbs} PRBs)"]
    for num in c.data_numerologies:
        n = max_prbs(Fraction(c.cbw_khz, 1000), num, c.guard_ratio)
        lines.append(f"max PRBs at {num.scs_khz} kHz: {n}")
    lines.append("K table (UE, cc, from -> to, delay ns, K symbols):")
    for spec in scn.ues:
        p = spec.profile
        for cc, s in enumerate(spec.ccs):
            for a in s.dl:
                for b in s.dl:
                    if a.id == b.id:
                        continue
                    d = switch_delay(a, b, p.retune)
                    lines.append(f"  UE {p.id} cc {cc} DL {a.id} -> {b.id}: delay {d} ns, "
                                 f"K={k_symbol_gap(d, b.numerology)} at mu={b.numerology.mu}")
    return lines


def cmd_check(args) -> int:
    try:
        scn = parse_scenario_text(_read(args.scenario))
    except ScenarioError as exc:
        _print_violations(exc.violations, sys.stdout)
        print("FAIL syntax")
        return EXIT_INVALID
    violations = validate_scenario(scn)
    by_rule = {}
    for v in violations:
        by_rule.setdefault(v.rule, []).append(v.message)
    known = {r for r, _ in RULES}
    for rule, text in RULES:
        msgs = by_rule.get(rule)
        print(f"{'FAIL' if msgs else 'PASS'} {rule:<24} {text}")
        for m in msgs or ():
            print(f"     {m}")
    for rule in sorted(set(by_rule) - known):
        print(f"FAIL {rule}")
        for m in by_rule[rule]:
            print(f"     {m}")
    if not any(v.rule.startswith(("carrier.", "scs.")) for v in violations):
        try:
            for line in _derived(scn):
                print(line)
        except NrError as exc:
            print(f"derived quantities unavailable: {exc}")
    return EXIT_INVALID if violations else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="nrbwp", description="Bandwidth-part simulator and conformance checker")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, text in (("run", cmd_run, "simulate a scenario"), ("check", cmd_check, "static conformance")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--scenario", required=True, help="scenario file")
        p.add_argument("--log-level", choices=("quiet", "info", "debug"), default="info")
        p.set_defaults(func=fn)
        if name == "run":
            p.add_argument("--out", default="./out", help="output directory (default ./out)")
            p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
            p.add_argument("--duration-slots", type=int, default=None, help="override the run length")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}[args.log_level]
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

"""Trace records, CSV I/O and the post-hoc invariant checker."""
import csv
import io
from dataclasses import dataclass
from typing import Optional

from .errors import Violation

TRACE_COLUMNS = ("time_ns", "ue_id", "event", "bwp_id", "prb_start", "prb_len", "bytes",
                 "energy_mj_cum", "detail")


@dataclass(frozen=True)
class TraceRecord:
    time_ns: int
    ue_id: int
    event: str
    bwp_id: Optional[int] = None
    prb_start: Optional[int] = None
    prb_len: Optional[int] = None
    bytes: Optional[int] = None
    energy_mj_cum: Optional[float] = None
    detail: str = ""

    @property
    def info(self):
        return parse_detail(self.detail)


def fmt_detail(**kw):
    return ";".join(f"{k}={'' if v is None else v}" for k, v in kw.items())


def parse_detail(detail):
    out = {}
    if not detail:
        return out
    for item in detail.split(";"):
        k, _, v = item.partition("=")
        out[k] = v
    return out


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9f}"
    return str(v)


def write_trace(records, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in records:
        w.writerow([_cell(getattr(r, c)) for c in TRACE_COLUMNS])


def trace_to_csv(records) -> str:
    buf = io.StringIO()
    write_trace(records, buf)
    return buf.getvalue()


def read_trace(fh):
    rows = csv.reader(fh)
    header = next(rows)
    if tuple(header) != TRACE_COLUMNS:
        raise ValueError(f"unexpected trace header {header}")
    out = []
    for row in rows:
        t, ue, ev, bwp, ps, pl, nb, e, detail = row
        opt = lambda s: int(s) if s != "" else None
        out.append(TraceRecord(int(t), int(ue), ev, opt(bwp), opt(ps), opt(pl), opt(nb),
                               float(e) if e else None, detail))
    return out


def _pairs(text):
    if not text:
        return set()
    return {tuple(int(x) for x in p.split(":")) for p in text.split("|")}


def _intervals_overlap(a, b):
    return a[0] < b[1] and b[0] < a[1]


def pdsch_rectangles(records):
    """``(t0, t1, f0, f1, record)`` for each PDSCH, frequency in kHz from the reference point."""
    out = []
    for r in records:
        if r.event != "PDSCH":
            continue
        d = r.info
        w = 12 * 15 * 2 ** int(d["mu"])
        out.append((r.time_ns, int(d["end_ns"]), r.prb_start * w, (r.prb_start + r.prb_len) * w, r))
    return out


def find_overlaps(rects):
    """Pairs of PDSCH rectangles that intersect in time and frequency."""
    rects = sorted(rects, key=lambda x: (x[0], x[2]))
    live = []
    hits = []
    for rect in rects:
        live = [o for o in live if o[1] > rect[0]]
        for o in live:
            if _intervals_overlap((o[2], o[3]), (rect[2], rect[3])):
                hits.append((o, rect))
        live.append(rect)
    return hits


def verify_trace(records) -> list:
    """Check cross-module invariants on a finished trace; returns every violation.

    Covered: monotone time, per-UE monotone energy, single active DL/UL BWP per
    serving cell, unpaired DL/UL pairing, blackout silence, the cross-BWP
    K-symbol gap, CC-boundary containment and global PDSCH non-overlap.
    """
    out = []
    last_t = None
    energy = {}
    active = {}       # (ue, cc) -> {"DL": id, "UL": id}
    pending = {}      # (ue, cc) -> (start, ready, affects_dl, dl, ul)
    blackouts = {}    # (ue, cc) -> list of (start, ready)
    pairs = {}
    cc_span = {}
    rx_events = []
    for r in records:
        if last_t is not None and r.time_ns < last_t:
            out.append(Violation("trace.time", f"time goes backwards at {r.time_ns} ns ({r.event})"))
        last_t = r.time_ns
        if r.energy_mj_cum is not None and r.ue_id >= 0:
            prev = energy.get(r.ue_id)
            if prev is not None and r.energy_mj_cum < prev - 1e-12:
                out.append(Violation("trace.energy", f"UE {r.ue_id} energy decreases at {r.time_ns} ns"))
            energy[r.ue_id] = r.energy_mj_cum
        d = r.info if r.detail else {}
        key = (r.ue_id, int(d.get("cc", 0) or 0))
        ev = r.event
        if ev == "CONFIG":
            if d.get("spectrum") == "unpaired":
                pairs[key] = _pairs(d.get("pairs"))
            if d.get("span"):
                lo, hi = d["span"].split(":")
                cc_span[key] = (int(lo), int(hi))
        elif ev == "ACTIVE":
            if key in active:
                out.append(Violation("trace.single_active",
                                     f"UE {key[0]} cc {key[1]}: second active DL/UL declaration at {r.time_ns} ns"))
            active[key] = {"DL": int(d["dl"]), "UL": int(d["ul"])}
            _check_pair(out, pairs, key, active[key], r.time_ns)
        elif ev == "SWITCH_START":
            if key in pending:
                out.append(Violation("trace.single_active",
                                     f"UE {key[0]} cc {key[1]}: overlapping switches at {r.time_ns} ns"))
            dl = int(d["dl"]) if d.get("dl") else None
            ul = int(d["ul"]) if d.get("ul") else None
            ready = int(d["ready_ns"])
            pending[key] = (r.time_ns, ready, dl, ul)
            if dl is not None:
                blackouts.setdefault(key, []).append((r.time_ns, ready))
        elif ev == "SWITCH_DONE":
            p = pending.pop(key, None)
            if p is None or key not in active:
                out.append(Violation("trace.single_active",
                                     f"UE {key[0]} cc {key[1]}: switch completes without a start at {r.time_ns} ns"))
                continue
            if r.time_ns < p[1]:
                out.append(Violation("trace.blackout", f"UE {key[0]} switch done before its ready time"))
            if p[2] is not None:
                active[key]["DL"] = p[2]
            if p[3] is not None:
                active[key]["UL"] = p[3]
            if d.get("dl") and int(d["dl"]) != active[key]["DL"]:
                out.append(Violation("trace.single_active", f"UE {key[0]} reports DL {d['dl']} after switch"))
            _check_pair(out, pairs, key, active[key], r.time_ns)
        elif ev == "PDSCH":
            _check_k_gap(out, r, d)
            if key in cc_span and r.ue_id >= 0:
                w = 12 * 15 * 2 ** int(d["mu"])
                lo, hi = r.prb_start * w, (r.prb_start + r.prb_len) * w
                if lo < cc_span[key][0] or hi > cc_span[key][1]:
                    out.append(Violation("trace.cc_boundary",
                                         f"UE {r.ue_id} grant at {r.time_ns} ns leaves its CC {key[1]}"))
            if d.get("rx") == "ok" and r.ue_id >= 0:
                cur = active.get(key)
                if cur is None or cur["DL"] != r.bwp_id:
                    out.append(Violation("trace.single_active",
                                         f"UE {r.ue_id} received PDSCH on inactive BWP {r.bwp_id} at {r.time_ns} ns"))
                rx_events.append((key, r.time_ns, ev))
        elif ev in ("DCI_OK", "GC_RX"):
            if ev == "DCI_OK" or d.get("rx") == "ok":
                rx_events.append((key, r.time_ns, ev))
    # the DCI that triggers a switch is decoded at the instant the retune starts
    for key, t, ev in rx_events:
        for start, ready in blackouts.get(key, ()):
            if start < t < ready:
                out.append(Violation("trace.blackout",
                                     f"UE {key[0]} cc {key[1]}: {ev} accepted at {t} ns during retune [{start}, {ready})"))
    for a, b in find_overlaps(pdsch_rectangles(records)):
        out.append(Violation("trace.overlap",
                             f"PDSCH of UE {a[4].ue_id} and UE {b[4].ue_id} overlap at {b[0]} ns"))
    return out


def _check_pair(out, pairs, key, cur, t):
    if key in pairs and (cur["DL"], cur["UL"]) not in pairs[key]:
        out.append(Violation("trace.unpaired_pairs",
                             f"UE {key[0]} cc {key[1]}: active (DL {cur['DL']}, UL {cur['UL']}) is not a pair at {t} ns"))


def _check_k_gap(out, r, d):
    if not d.get("pdcch_bwp") or int(d["pdcch_bwp"]) == r.bwp_id:
        return
    earliest = int(d["pdcch_end_ns"]) + int(d["k"]) * int(d["sym_ns"])
    if r.time_ns < earliest:
        out.append(Violation("trace.k_gap",
                             f"UE {r.ue_id} PDSCH at {r.time_ns} ns precedes PDCCH end + K symbols ({earliest} ns)"))

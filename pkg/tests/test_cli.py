import subprocess
import sys
from dataclasses import replace

from hypothesis import HealthCheck, given, settings, strategies as st

from nrbwp.cli import main
from nrbwp.scenario import dump_scenario, validate_scenario
from nrbwp.sim import REPORT_COLUMNS

from helpers import bundled, fr1_carrier, single_ue, two_bwp_set


def write(tmp_path, scn, name="s.scn"):
    path = tmp_path / name
    path.write_text(dump_scenario(scn))
    return path


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--scenario", str(bundled("coexistence.scn")), "--out", str(out),
               "--duration-slots", "100"])
    assert rc == 0
    assert (out / "trace.csv").read_text().startswith("time_ns,ue_id,event,bwp_id,prb_start,prb_len,bytes,"
                                                       "energy_mj_cum,detail\n")
    assert (out / "report.csv").read_text().splitlines()[0] == ",".join(REPORT_COLUMNS)
    text = (out / "report.txt").read_text()
    assert "duration_slots      100" in text
    assert "prb_utilization" in capsys.readouterr().out


def test_quiet_prints_nothing(tmp_path, capsys):
    rc = main(["run", "--scenario", str(bundled("harq_across_switch.scn")), "--out", str(tmp_path),
               "--log-level", "quiet"])
    assert rc == 0
    captured = capsys.readouterr()
    assert captured.out == "" and captured.err == ""


def test_invalid_scenario_exit_2(tmp_path, capsys):
    path = write(tmp_path, single_ue())
    path.write_text(path.read_text().replace("cbw_khz = 100000", "cbw_khz = 200000"))
    assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "carrier.cbw_limit" in err and "FR1" in err
    assert not (tmp_path / "o").exists()


def test_syntax_error_exit_2(tmp_path, capsys):
    path = tmp_path / "empty.scn"
    path.write_text("")
    assert main(["run", "--scenario", str(path)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["run", "--scenario", str(tmp_path / "missing.scn")]) == 2


def test_internal_error_exit_1(tmp_path, monkeypatch, capsys):
    import nrbwp.cli as cli

    def boom(*a, **k):
        raise RuntimeError("kaboom")
    monkeypatch.setattr(cli, "run", boom)
    assert main(["run", "--scenario", str(bundled("harq_across_switch.scn")), "--out", str(tmp_path)]) == 1
    assert "kaboom" in capsys.readouterr().err


def test_seed_flag_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    scn = single_ue(loss=0.4, nack=0.2, duration=200)
    path = write(tmp_path, scn)
    for out in (a, b):
        assert main(["run", "--scenario", str(path), "--out", str(out), "--seed", "7",
                     "--log-level", "quiet"]) == 0
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    c = tmp_path / "c"
    main(["run", "--scenario", str(path), "--out", str(c), "--seed", "8", "--log-level", "quiet"])
    assert (a / "trace.csv").read_bytes() != (c / "trace.csv").read_bytes()


def test_check_valid_scenario(capsys):
    assert main(["check", "--scenario", str(bundled("coexistence.scn"))]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "reference point: 3451080 kHz" in out
    assert "max PRBs at 30 kHz: 272" in out
    assert "UE 0 cc 0 DL 0 -> 1: delay 200000 ns, K=6 at mu=1" in out


def test_check_fr1_200mhz(tmp_path, capsys):
    path = write(tmp_path, single_ue())
    path.write_text(path.read_text().replace("cbw_khz = 100000", "cbw_khz = 200000"))
    assert main(["check", "--scenario", str(path)]) == 2
    out = capsys.readouterr().out
    line = next(l for l in out.splitlines() if "carrier.cbw_limit" in l)
    assert line.startswith("FAIL") and "CBW <= 100 MHz in FR1" in line


def test_check_lists_every_rule(capsys):
    from nrbwp.cli import RULES
    main(["check", "--scenario", str(bundled("energy_saving.scn"))])
    out = capsys.readouterr().out
    for rule, _ in RULES:
        assert f"PASS {rule}" in out


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(first=st.integers(-5, 280), n=st.integers(1, 280), cbw=st.sampled_from([50_000, 100_000]))
def test_check_accepts_whatever_run_accepts(tmp_path, first, n, cbw):
    scn = replace(single_ue(two_bwp_set(wide=(first, n)), duration=5), carrier=fr1_carrier(cbw_khz=cbw))
    path = write(tmp_path, scn)
    valid = not validate_scenario(scn)
    assert (main(["check", "--scenario", str(path)]) == 0) == valid
    if valid:
        assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "o"), "--log-level", "quiet"]) == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nrbwp", "check", "--scenario",
                           str(bundled("harq_across_switch.scn"))], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "K table" in proc.stdout

import json
import subprocess
import sys

import numpy as np
import pytest

from remotetraffic import __version__
from remotetraffic import io as fio
from remotetraffic.cli import child_seed, main
from remotetraffic.traffic import Server, SiteProfile

NEWS = SiteProfile("news", (Server(40.0, (30000, 9000)), Server(90.0, (12000,))), jitter=0.1)
SHOP = SiteProfile("shop", (Server(25.0, (4000, 4000, 4000)),), initial_window=1, jitter=0.1)


@pytest.fixture
def work(tmp_path):
    fio.write_site_profile(tmp_path / "news.ini", NEWS)
    fio.write_site_profile(tmp_path / "shop.ini", SHOP)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["recover", "--bogus"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["nosuch"])
    assert e.value.code == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_validation_error_exit_2(work, capsys):
    (work / "t.csv").write_text("time_ms,size_bytes\n1,0\n")
    assert run("simulate", "--traffic", work / "t.csv", "--out", work / "r.csv") == 2
    assert "t.csv:2:" in capsys.readouterr().err
    assert run("deanon", "--session", 0) == 2
    assert run("deanon") == 2


def test_io_error_exit_3(work):
    assert run("recover", "--rtt", work / "missing.csv", "--out", work / "s.csv") == 3


def test_pipeline(work, capsys):
    assert run("gen", "--profile", work / "news.ini", "--seed", 4, "--out", work / "t.csv") == 0
    head = (work / "t.csv").read_text().splitlines()[:3]
    assert head[0] == f"# remotetraffic {__version__} gen"
    assert head[1].startswith("# flags: ") and head[2] == "# seed: 4"
    assert run("simulate", "--traffic", work / "t.csv", "--probe-period", 2, "--probe-count", 400,
               "--noise-kind", "uniform", "--noise-magnitude", 0.3, "--lost", 3, "--out", work / "r.csv") == 0
    trace = fio.read_rtt_trace(work / "r.csv")
    assert len(trace) == 400 and trace.probe_period == 2.0 and trace.lost == {3}
    assert run("recover", "--rtt", work / "r.csv", "--eta", 1.0, "--out", work / "s.csv") == 0
    s = fio.read_series(work / "s.csv")
    assert s.eta == 1.0 and s.values.sum() > 0
    assert run("recover", "--rtt", work / "r.csv", "--bytes", 3e6, "--out", work / "b.csv") == 0
    assert fio.read_series(work / "b.csv").units == "bytes"


def test_seed_threads_through(work):
    run("gen", "--profile", work / "news.ini", "--seed", 1, "--out", work / "a.csv")
    run("gen", "--profile", work / "news.ini", "--seed", 1, "--out", work / "b.csv")
    run("gen", "--profile", work / "news.ini", "--seed", 2, "--out", work / "c.csv")
    assert (work / "a.csv").read_bytes() == (work / "b.csv").read_bytes()
    assert fio.load_trace(work / "a.csv") != fio.load_trace(work / "c.csv")
    assert child_seed(1, 0) != child_seed(1, 1) != child_seed(2, 1)
    assert child_seed(1, 0, 2, 3) == int(np.random.SeedSequence([1, 0, 2, 3]).generate_state(1)[0])


def test_flags_override_config(work):
    (work / "link.ini").write_text("[link]\nprobe_period = 5\nprobe_count = 50\n")
    (work / "t.csv").write_text("time_ms,size_bytes\n1,1500\n")
    run("simulate", "--config", work / "link.ini", "--traffic", work / "t.csv", "--out", work / "r1.csv")
    assert fio.read_rtt_trace(work / "r1.csv").probe_period == 5.0
    run("simulate", "--config", work / "link.ini", "--probe-period", 2, "--traffic", work / "t.csv",
        "--out", work / "r2.csv")
    r2 = fio.read_rtt_trace(work / "r2.csv")
    assert r2.probe_period == 2.0 and len(r2) == 50


def _corpus(work, sites=("news", "shop"), samples=4):
    entries = []
    (work / "series").mkdir(exist_ok=True)
    for name in sites:
        for k in range(samples):
            t, r, s = (work / f"{name}{k}.{x}.csv" for x in "trs")
            run("gen", "--profile", work / f"{name}.ini", "--seed", k, "--out", t)
            run("simulate", "--traffic", t, "--probe-count", 150, "--noise-kind", "uniform",
                "--noise-magnitude", 0.5, "--seed", k, "--out", r)
            run("recover", "--rtt", r, "--out", work / "series" / f"{name}{k}.csv")
            entries.append((name, k, f"series/{name}{k}.csv"))
    fio.write_manifest(work / "manifest.csv", entries)
    return work / "manifest.csv"


def test_dtw_calibrate_detect_curve(work, capsys):
    manifest = _corpus(work)
    assert run("dtw", "--manifest", manifest, "--jobs", 2, "--out", work / "d.csv") == 0
    ids, m = fio.read_distance_matrix(work / "d.csv")
    assert ids[0] == "news#0" and m.shape == (8, 8) and np.allclose(m, m.T)
    assert run("calibrate", "--manifest", manifest, "--distances", work / "d.csv", "--target-fp", 0.4,
               "--out", work / "cal.csv") == 0
    cal = fio.read_calibration(work / "cal.csv")
    assert set(cal) == {"news", "shop"}
    # recomputing the matrix gives the same calibration
    assert run("calibrate", "--manifest", manifest, "--target-fp", 0.4, "--out", work / "cal2.csv") == 0
    assert fio.read_calibration(work / "cal2.csv") == cal
    assert run("calibrate", "--manifest", manifest, "--target-fp", 0.005, "--out", work / "cal3.csv") == 0
    assert all(v["fn_hat"] == 1.0 for v in fio.read_calibration(work / "cal3.csv").values())

    capsys.readouterr()
    assert run("detect", "--manifest", manifest, "--site", "news", "--threshold", 1e9,
               "--series", work / "series" / "shop0.csv") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["results"][0]["detected"] is True
    assert run("detect", "--manifest", manifest, "--site", "news", "--calibration", work / "cal.csv",
               "--series", work / "series" / "news0.csv", "--out", work / "det.json") == 0
    assert json.loads((work / "det.json").read_text())["results"][0]["threshold"] == cal["news"]["threshold"]
    assert run("detect", "--manifest", manifest, "--site", "news", "--series", work / "series" / "news0.csv") == 2

    assert run("curve", "--manifest", manifest, "--site", "shop", "--out-dir", work / "curves") == 0
    for fp in ("0.005", "0.01", "0.05"):
        rows = (work / "curves" / f"curve_fp{fp}.csv").read_text().splitlines()
        rows = [r for r in rows if not r.startswith("#")]
        assert rows[0] == "fn_bin_upper,count" and len(rows) == 22


def test_bwest(work, capsys):
    assert run("bwest", "--downstream-bandwidth", 6e6, "--out", work / "bw.json") == 0
    out = json.loads((work / "bw.json").read_text())
    assert out["estimated_bandwidth_bps"] == 6e6
    assert out["recommended_probe_period_ms"] == pytest.approx(2.0)
    (work / "resp.txt").write_text("40\n42.6666666667\n45.3333333333\n")
    assert run("bwest", "--responses", work / "resp.txt") == 0
    assert json.loads(capsys.readouterr().out)["estimated_bandwidth_bps"] == 3e6


def test_deanon(work, capsys):
    (work / "ev.csv").write_text("post_time_iso8601,detected\n2024-03-01T19:00:00,true\n")
    assert run("deanon", "--events", work / "ev.csv", "--session", 10, "--window", 180) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["posterior"] == pytest.approx(166 / 167)
    assert out["session_overlap_fp"] == pytest.approx(0.0556, abs=1e-4)


def _e2e(work, out, seed, jobs=1):
    (work / "profiles.csv").write_text("profile_file\nnews.ini\nshop.ini\n")
    return run("e2e", "--profiles", work / "profiles.csv", "--samples", 3, "--probe-count", 120,
               "--noise-kind", "truncated-gaussian", "--noise-magnitude", 0.5, "--target-fp", 0.4,
               "--seed", seed, "--jobs", jobs, "--out-dir", out)


def test_e2e_reproducible(work):
    assert _e2e(work, work / "a", 7) == 0
    assert _e2e(work, work / "b", 7, jobs=2) == 0
    assert _e2e(work, work / "c", 8) == 0
    a = (work / "a" / "summary.json").read_bytes()
    assert a == (work / "b" / "summary.json").read_bytes()
    assert a != (work / "c" / "summary.json").read_bytes()
    summary = json.loads(a)
    assert summary["provenance"]["seed"] == 7
    assert set(summary["sites"]) == {"news", "shop"}
    cal = summary["sites"]["news"]["calibrations"][0]
    assert set(cal) == {"target_fp", "threshold", "fp_hat", "fp_ci_upper", "fn_hat", "degenerate"}
    timing = json.loads((work / "a" / "timing.json").read_text())
    assert {"news", "shop", "distance_matrix", "total"} <= set(timing)
    assert len(fio.read_manifest(work / "a" / "manifest.csv")) == 6
    assert (work / "a" / "calibration_fp0.4.csv").exists()


def test_e2e_rejects_duplicate_sites(work):
    (work / "profiles.csv").write_text("profile_file\nnews.ini\nnews.ini\n")
    assert run("e2e", "--profiles", work / "profiles.csv", "--out-dir", work / "o") == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "remotetraffic", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "e2e" in r.stdout

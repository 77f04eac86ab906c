import csv
import json
import os
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conewalk.cli import run
from conewalk.cones import parse_cone
from conewalk.harmonic import build_v_exact
from conewalk.increments import parse_steps
from conewalk.io import read_table, write_table


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_usage_errors_exit_2(capsys):
    assert run([]) == 2
    assert run(["simulate", "--cone", "half-line"]) == 2
    assert run(["simulate", "--cone", "wedge:-1", "--steps", "gaussian", "--start", "1,1", "--n", "5",
                "--replicas", "10", "--seed", "0"]) == 2
    assert run(["simulate", "--cone", "orthant:2", "--steps", "gaussian", "--start", "1,-1", "--n", "5",
                "--replicas", "10", "--seed", "0"]) == 2
    assert run(["suite", "--manifest", "no-such-manifest.json"]) == 2
    assert run(["sample", "--law", "bridge", "--cone", "half-line", "--steps", "lattice:srw", "--start", "1",
                "--end", "2", "--n", "4", "--count", "5", "--seed", "0", "--out", "/nonexistent/dir/x.csv"]) == 2


def test_simulate_report_and_paths(tmp_path):
    rep, paths = tmp_path / "r.json", tmp_path / "p.csv"
    assert run(["simulate", "--cone", "half-line", "--steps", "lattice:srw", "--start", "1", "--n", "3",
                "--replicas", "20000", "--seed", "1", "--report", str(rep), "--record-paths", str(paths)]) == 0
    doc = json.loads(rep.read_text())
    assert abs(doc["probability"] - 0.375) < 4 * doc["std_error"]
    rows = _rows(paths)
    assert rows[0] == ["replica", "k", "coord_1", "exited"] and len(rows) == 1 + 20000 * 4


def test_survival_exponent_csv_and_plot(tmp_path):
    out, plot = tmp_path / "s.csv", tmp_path / "s.svg"
    code = run(["survival-exponent", "--cone", "half-line", "--steps", "lattice:srw", "--start", "1",
                "--horizons", "100:10000:log10", "--method", "exact", "--out", str(out), "--plot", str(plot),
                "--report", str(tmp_path / "r.json")])
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["n", "probability", "std_error"] and len(rows) == 22
    n = np.array([float(r[0]) for r in rows[1:]])
    p = np.array([float(r[1]) for r in rows[1:]])
    slope = np.polyfit(np.log(n[10:]), np.log(p[10:]), 1)[0]
    assert abs(slope + 0.5) < 0.02
    assert ET.parse(plot).getroot().tag.endswith("svg")


def test_table_round_trip(tmp_path):
    tab = build_v_exact(parse_cone("orthant:2"), parse_steps("rademacher", 2), 15, 1e-12)
    write_table(tmp_path / "v.csv", tab)
    back = read_table(tmp_path / "v.csv")
    assert np.allclose(back.values, tab.values, rtol=0, atol=0) or np.allclose(back.values, tab.values, rtol=1e-15)
    assert back.value([2, 3]) == pytest.approx(6.0, abs=1e-8)


def test_estimate_v_then_sample(tmp_path):
    v = tmp_path / "v.csv"
    assert run(["estimate-v", "--cone", "half-line", "--steps", "lattice:srw", "--window", "60",
                "--out", str(v)]) == 0
    out = tmp_path / "h.csv"
    assert run(["sample", "--law", "htransform", "--cone", "half-line", "--steps", "lattice:srw", "--start", "1",
                "--n", "10", "--count", "50", "--seed", "2", "--vtable", str(v), "--record", "full",
                "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 1 + 50 * 11
    side = json.loads((tmp_path / "h.csv.json").read_text())
    assert side["law"] == "htransform"


def test_sample_bridge_parity_error(tmp_path):
    assert run(["sample", "--law", "bridge", "--cone", "half-line", "--steps", "lattice:srw", "--start", "1",
                "--end", "2", "--n", "4", "--count", "5", "--seed", "0", "--out", str(tmp_path / "b.csv")]) == 2


def test_reference_outputs(tmp_path):
    dens = tmp_path / "d.csv"
    assert run(["reference", "--object", "entrance-density", "--cone", "half-line", "--grid", "0:4:9",
                "--out", str(dens)]) == 0
    rows = _rows(dens)
    assert rows[0] == ["r", "density", "cdf"] and len(rows) == 10
    assert float(rows[3][1]) == pytest.approx(0.4839414490382867, rel=1e-12)
    assert run(["reference", "--object", "bessel", "--degrees", "3", "--count", "10", "--out",
                str(tmp_path / "b.csv")]) == 0
    assert run(["reference", "--object", "h-bm", "--cone", "half-line", "--start", "0.1", "--m", "64",
                "--count", "20", "--out", str(tmp_path / "h.csv")]) == 0
    assert run(["reference", "--object", "kernel", "--degrees", "3", "--grid", "0:3:7", "--out",
                str(tmp_path / "k.csv")]) == 2


def test_test_subcommands(tmp_path):
    smp, plot = tmp_path / "s.csv", tmp_path / "p.svg"
    code = run(["test-meander", "--cone", "half-line", "--steps", "lattice:srw", "--start", "1", "--n", "200",
                "--count", "2000", "--seed", "3", "--m", "256", "--samples", str(smp), "--plot", str(plot),
                "--report", str(tmp_path / "r.json")])
    assert code == 0
    rows = _rows(smp)
    assert rows[0] == ["functional", "source", "value"] and len(rows) > 2000
    ET.parse(plot)
    code = run(["test-htransform", "--cone", "half-line", "--steps", "lattice:srw", "--start", "1", "--n", "100",
                "--count", "2000", "--seed", "4", "--window", "100", "--plot", str(tmp_path / "h.svg"),
                "--report", str(tmp_path / "h.json")])
    assert code == 0
    ET.parse(tmp_path / "h.svg")


def test_statistical_failure_exit_3(tmp_path):
    man = {"schema": 1, "experiments": [{"id": "neg", "kind": "meander-negative-control", "cone": "half-line",
                                        "steps": "lattice:srw", "start": [1], "n": 100, "count": 2000, "seed": 1}]}
    p = tmp_path / "m.json"
    p.write_text(json.dumps(man))
    assert run(["suite", "--manifest", str(p), "--outdir", str(tmp_path / "o")]) == 3
    man["experiments"][0]["expect"] = "fail"
    p.write_text(json.dumps(man))
    assert run(["suite", "--manifest", str(p), "--outdir", str(tmp_path / "o")]) == 0


def test_smoke_suite_thread_independent(tmp_path):
    env = dict(os.environ, NUMBA_NUM_THREADS="2")
    outs = []
    for k in ("1", "2"):
        out = tmp_path / f"t{k}"
        r = subprocess.run([sys.executable, "-m", "conewalk", "suite", "--manifest", "smoke.json", "--outdir",
                            str(out), "--threads", k], env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir()) and "summary.json" in names
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n

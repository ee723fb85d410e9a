import hashlib
import os
import subprocess
import sys

import numpy as np
import pytest

from glmbkit import textio
from glmbkit.cli import main, parse_region, UsageError
from glmbkit.oracles import random_glmb
from glmbkit.regions import Disc

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DESK = os.path.join(ROOT, "scenarios", "scenario1_desk.yaml")
FAST = ["--override", "duration=200.0", "--override", "control.first_decision=100.0",
        "--override", "control.sample_count=3", "--override", "control.horizon=1",
        "--override", "sensor.clutter_rate=2.0", "--runs", "1"]


def digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def test_validate_ok(capsys):
    assert main(["validate", DESK]) == 0
    assert "valid" in capsys.readouterr().out


def test_usage_errors_exit_one(capsys):
    assert main([]) == 1
    assert main(["oracle", "nonexistent"]) == 1
    err = capsys.readouterr().err
    assert "top-level keys" in err and "sensor:" in err


def test_bad_config_exits_one(capsys, tmp_path):
    assert main(["validate", DESK, "--override", "sensor.bogus=3"]) == 1
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: [unclosed\n")
    assert main(["validate", str(bad)]) == 1


def test_oracle_summary(capsys):
    assert main(["oracle", "ospa", "--cases", "5"]) == 0
    out = capsys.readouterr().out.strip().splitlines()[0]
    assert out.startswith("ospa: 7/7 agreements (need 7), worst discrepancy")


def test_inspect(capsys, tmp_path):
    rng = np.random.default_rng(4)
    a, b = random_glmb(rng, 2), random_glmb(rng, 2)
    pa, pb = tmp_path / "a.txt", tmp_path / "b.txt"
    for d, p in ((a, pa), (b, pb)):
        with open(p, "w") as fh:
            textio.dump(d, fh)
    before = digest(pa)
    assert main(["inspect", str(pa), "--region", "disc:0,0,1", "--divergence", str(pb)]) == 0
    out = capsys.readouterr().out
    assert "mean cardinality" in out and "cs divergence" in out
    assert "void probability disc:0,0,1" in out
    assert digest(pa) == before
    assert main(["inspect", str(pa), "--region", "ellipse:1"]) == 1


def test_parse_region():
    r = parse_region("disc:1,2,3")
    assert isinstance(r, Disc) and r.radius == 3.0
    with pytest.raises(UsageError):
        parse_region("box:1,2")


def test_run_is_reproducible_and_leaves_input_alone(tmp_path, capsys):
    before = digest(DESK)
    for name in ("one", "two"):
        assert main(["run", DESK, *FAST, "--out", str(tmp_path / name)]) == 0
    out = capsys.readouterr().out
    assert "constraint audit: 0 violation(s)" in out
    for f in ("ospa.csv", "control_log.csv", "summary.csv", "sensor_tracks.csv"):
        assert digest(tmp_path / "one" / f) == digest(tmp_path / "two" / f)
    assert digest(DESK) == before
    with open(tmp_path / "one" / "overrides.txt") as fh:
        assert "sensor.clutter_rate=2.0" in fh.read()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "glmbkit", "validate", DESK],
                         capture_output=True, text=True)
    assert res.returncode == 0

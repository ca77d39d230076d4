"""Full-scale acceptance run: one numbered check per test, one line each.

Run `pytest tests/test_acceptance.py -v -s` to see the per-check lines.
Checks 1-10 call the suite's own runner at full scale with the default seed;
check 11 invokes the suite subcommand twice in subprocesses and compares the
report files byte for byte.
"""

import json
import subprocess
import sys

from coarselab.suite import run_one

SEED = 20260822


def _report(number):
    res = run_one(number, seed=SEED, scale="full")
    print(f"criterion {res.number:>2} {res.name}: {'PASS' if res.passed else 'FAIL'}")
    assert res.passed, f"{res.name} failed: {json.dumps(res.detail, default=str)}"


def test_criterion_01_laplacian_bounds():
    _report(1)


def test_criterion_02_kernel_components():
    _report(2)


def test_criterion_03_block_domination():
    _report(3)


def test_criterion_04_cycle_closed_form():
    _report(4)


def test_criterion_05_folner_oracle():
    _report(5)


def test_criterion_06_warped_distance_oracle():
    _report(6)


def test_criterion_07_decomposition_coverage():
    _report(7)


def test_criterion_08_rotation_gap_trend():
    _report(8)


def test_criterion_09_scaling_law():
    _report(9)


def test_criterion_10_heat_map():
    _report(10)


def test_criterion_11_determinism(tmp_path):
    blobs = []
    for sub in ("first", "second"):
        out = tmp_path / sub
        out.mkdir()
        proc = subprocess.run(
            [sys.executable, "-m", "coarselab.cli", "suite", "--scale", "smoke",
             "--seed", str(SEED), "--out-dir", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        blobs.append((out / "suite-report.json").read_bytes())
    same = blobs[0] == blobs[1]
    print(f"criterion 11 determinism: {'PASS' if same else 'FAIL'}")
    assert same, "suite reports differ between identical runs"

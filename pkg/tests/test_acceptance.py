"""Acceptance suite: one [PASS]/[FAIL] line per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal summary)
or ``python tests/test_acceptance.py`` (lines go to stdout).
"""

import filecmp
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import pytest

from slicelab import cli, verify

LINES: list[str] = []


def record(cid: int, title: str, passed: bool, tolerance: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {cid}. {title} ({tolerance})"
    LINES.append(line)
    print(line)


def criterion(cid: int) -> verify.Criterion:
    c = verify.run_criterion(cid, seed=0)
    record(c.id, c.title, c.passed, c.tolerance)
    return c


def test_1_coarsening():
    c = criterion(1)
    d = c.details
    assert d["violations"] == 0 and d["scale_checks"] == 1600
    assert d["converse_witness"]["converse_fails"]
    assert c.passed


def test_2_counting():
    c = criterion(2)
    d = c.details
    assert d["mismatches"] == 0
    assert d["benchmark"]["counts_agree"] and d["benchmark"]["speedup_ok"]
    assert c.passed


def test_3_decomposition():
    c = criterion(3)
    d = c.details
    assert Fraction(d["worst_constant"]) <= 2
    assert d["partition_failures"] == d["constant_failures"] == d["count_failures"] == 0
    assert c.passed


def test_4_progressions():
    c = criterion(4)
    d = c.details
    assert d["step"] == 16 and d["min_length"] >= d["required_length"] >= 8
    assert d["fiber_constant"] <= verify.LOCKS["p1_fiber_constant"] * (1 + 1e-12)
    assert c.passed


def test_5_projections():
    c = criterion(5)
    d = c.details["delta_2^-8"]
    assert d["kernel_ok"]
    assert d["max_count"] <= verify.LOCKS["p2_constant"] * d["bound"] * (1 + 1e-12)
    assert c.passed


def test_6_directions():
    c = criterion(6)
    for sc in c.details["scales"]:
        assert Fraction(sc["min_gap"]) >= Fraction(sc["separation"])
        assert sc["c"] >= verify.LOCKS["farey_c"]
    assert c.passed


def test_7_frostman():
    c = criterion(7)
    d = c.details
    assert d["uniform_tree"]["masses_exact"] and Fraction(str(d["uniform_tree"]["total_mass"])) == 1
    for t, lock in zip(d["built_trees"], verify.LOCKS["frostman_max_ratio"]):
        assert Fraction(str(t["total_mass"])) == 1 and t["reproducible"]
        assert t["max_ratio"] == pytest.approx(lock, abs=1e-12)
    assert c.passed


def test_8_exponents():
    c = criterion(8)
    d = c.details
    assert all(p["max_error"] <= 1e-12 for p in d["points"])
    assert d["grid_points"] == 100 and d["grid_all_zero"]
    assert c.passed


def test_9_heavy_content():
    c = criterion(9)
    avg = c.details["product_cantor"]["average_content"]
    assert all(a > b for a, b in zip(avg, avg[1:]))
    assert c.details["product_cantor"]["covers_contain_heavy"]
    assert all(f == 1.0 for f in c.details["axis_aligned"]["covered_fraction"])
    assert c.passed


def test_10_reproducible_reports():
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        codes = [cli.main(["verify-all", "--out", d, "--seed", "0"]) for d in (a, b)]
        names = sorted(p.name for p in Path(a).iterdir())
        match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        same = codes == [0, 0] and not mismatch and not errors and len(match) == len(names) >= 2
    record(10, "identical config and seed give byte-identical reports", same,
           "byte equality of every output file")
    assert same


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

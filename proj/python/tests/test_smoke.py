# SPDX-License-Identifier: Apache-2.0
import json
import math

import numpy as np
import pytest

import certrom


def test_reference_output_positive():
    b = certrom.Benchmark(mesh_level=1)
    assert b.dofs > 0
    e90 = b.output([19.0, 7.0, 7.0], 90.0)
    e80 = b.output([19.0, 7.0, 7.0], 80.0)
    assert e90 > 0.0
    # the angle only scales the output
    assert e80 == pytest.approx(e90 * math.sin(math.radians(80.0)), rel=1e-10)


def test_inadmissible_design_raises():
    b = certrom.Benchmark(mesh_level=0)
    assert not b.admissible([50.0, 7.0, 7.0])
    with pytest.raises(certrom.InvalidInput):
        b.output([50.0, 7.0, 7.0], 90.0)


def test_dual_norm():
    assert certrom.dual_norm(np.array([3.0, -4.0]), np.ones(2), "2") == pytest.approx(5.0)
    assert certrom.dual_norm(np.array([1.0, 1.0]), np.array([2.0, 3.0]), "inf") == pytest.approx(5.0)


def test_trust_region_against_sampling():
    rng = np.random.default_rng(7)
    h = rng.normal(size=(2, 2))
    h = 0.5 * (h + h.T)
    g = rng.normal(size=2)
    d = np.array([0.5, 2.0])
    r = certrom.trust_region(0.3, g, h, d)
    t = np.linspace(0.0, 2.0 * np.pi, 20001)
    a = rng.uniform(0.0, 2.0 * np.pi, size=40000)
    s = np.sqrt(rng.uniform(size=(40000, 1)))
    pts = np.vstack([np.c_[np.cos(t), np.sin(t)], s * np.c_[np.cos(a), np.sin(a)]]) * d
    vals = 0.3 + pts @ g + 0.5 * np.einsum("ij,jk,ik->i", pts, h, pts)
    assert r["value"] >= vals.max() - 1e-9
    assert r["kkt"] <= 1e-8


def test_config_roundtrip_and_hash():
    text = certrom.default_config()
    again = certrom.normalize_config(text)
    assert again == text
    cfg = json.loads(text)
    cfg["optimization"]["rho"] = 50.0
    assert certrom.config_hash(json.dumps(cfg)) != certrom.config_hash(text)
    with pytest.raises(certrom.InvalidInput):
        certrom.normalize_config('{"geometry": {"colour": 1}}')


def test_solve_command(tmp_path):
    cfg = json.loads(certrom.default_config())
    cfg["geometry"]["mesh_level"] = 1
    report, files = certrom.solve(json.dumps(cfg), tmp_path)
    assert "E0:" in report
    names = sorted(p.split("/")[-1] for p in files)
    assert names == ["output.csv", "report.txt", "solution.csv"]
    lines = (tmp_path / "output.csv").read_text().splitlines()
    assert lines[1].startswith("# config_hash: ")
    exact = certrom.Benchmark(mesh_level=1).output([19.0, 7.0, 7.0], 90.0)
    assert float(lines[-1].split(",")[4]) == pytest.approx(exact, rel=1e-14)
    reported = next(l for l in report.splitlines() if l.startswith("E0: "))
    assert float(reported[4:]) == exact


def test_nominal_full_optimization_reduces_volume(tmp_path):
    cfg = json.loads(certrom.default_config())
    cfg["geometry"]["mesh_level"] = 1
    cfg["optimization"]["backend"] = "full"
    report, _ = certrom.optimize(json.dumps(cfg), tmp_path)
    rows = (tmp_path / "summary.csv").read_text().splitlines()
    header = rows[3].split(",")
    values = dict(zip(header, rows[4].split(",")))
    assert float(values["V"]) < 19.0 * 7.0
    assert values["converged"] == "1"

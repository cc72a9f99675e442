import json

import numpy as np
import pytest

from skle.harness import Result, default_config, ks_two_sample
from skle.report import (ArtifactError, dumps, emit_report, load_run, read_samples_csv, read_trace_csv,
                         write_artifacts, write_samples_csv, write_trace_csv)


def _result(samples, traces=None, ks=(), controls=()):
    return Result(default_config("locality-sle6", n_paths=100), list(ks), list(controls), {}, samples,
                  traces or {})


def test_empty_or_missing_directory(tmp_path):
    with pytest.raises(ArtifactError):
        emit_report(tmp_path)
    with pytest.raises(ArtifactError):
        emit_report(tmp_path / "nope")


def test_missing_artifacts_are_named(tmp_path):
    d = write_artifacts(_result({"A_x": np.arange(3.0), "B_x": np.arange(3.0)}), tmp_path)
    (d / "samples_B_x.csv").unlink()
    with pytest.raises(ArtifactError, match="samples_B_x.csv"):
        load_run(d)
    (d / "manifest.json").unlink()
    with pytest.raises(ArtifactError, match="manifest"):
        load_run(d)


def test_csv_roundtrip(tmp_path):
    v = np.random.default_rng(0).standard_normal(50)
    write_samples_csv(tmp_path / "s.csv", v)
    assert np.array_equal(read_samples_csv(tmp_path / "s.csv"), v)
    z = v[:10] + 1j * np.abs(v[10:20])
    write_trace_csv(tmp_path / "t.csv", np.arange(10) * 0.1, v[20:30], z)
    t, d, zz = read_trace_csv(tmp_path / "t.csv")
    assert np.array_equal(zz, z) and np.array_equal(d, v[20:30])
    with pytest.raises(ArtifactError):
        read_trace_csv(tmp_path / "s.csv")


def test_single_trace_svg(tmp_path):
    z = np.array([0, 0.1 + 0.2j, 0.15 + 0.5j])
    d = write_artifacts(_result({}, {"A": (np.arange(3) * 0.1, np.zeros(3), z)}), tmp_path)
    pj, ps = emit_report(d)
    svg = ps.read_text()
    assert svg.count("<polyline") == 1
    assert "Re z" in svg and "Im z" in svg
    assert json.loads(pj.read_text())["traces"] == ["A"]


def test_cdf_overlay_matches_ks(tmp_path):
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal(300), rng.standard_normal(250) + 0.2
    ref = ks_two_sample(x, y, "A/B:f")
    d = write_artifacts(_result({"A_f": x, "B_f": y}, ks=[ref]), tmp_path)
    pj, ps = emit_report(d)
    rep = json.loads(pj.read_text())
    assert rep["sample_ks"]["A/B:f"] == json.loads(dumps(ref.to_dict()))
    svg = ps.read_text()
    assert svg.count("<polyline") == 2
    assert f"KS D={ref.statistic:.4f} p={ref.p_value:.4g} (n=300,250)" in svg


def test_verdict(tmp_path):
    good = ks_two_sample([1.0, 2, 3], [1.0, 2, 3], "f")
    bad = ks_two_sample(np.arange(100.0), np.arange(100.0) + 1000, "c")
    r = _result({"A_f": np.arange(3.0), "B_f": np.arange(3.0)}, ks=[good], controls=[bad])
    pj, _ = emit_report(write_artifacts(r, tmp_path / "a"))
    assert json.loads(pj.read_text())["verdict"] == "pass"
    r = _result({"A_f": np.arange(3.0), "B_f": np.arange(3.0)}, ks=[good], controls=[good])
    pj, _ = emit_report(write_artifacts(r, tmp_path / "b"))
    assert json.loads(pj.read_text())["verdict"] == "fail"


def test_report_is_byte_stable(tmp_path):
    rng = np.random.default_rng(2)
    r = _result({"A_f": rng.standard_normal(40), "B_f": rng.standard_normal(40)},
                {"A": (np.arange(4.0), np.zeros(4), np.array([0, 1j, 1 + 1j, 2j]))})
    p1, s1 = emit_report(write_artifacts(r, tmp_path / "1"))
    p2, s2 = emit_report(write_artifacts(r, tmp_path / "2"))
    assert p1.read_bytes() == p2.read_bytes() and s1.read_bytes() == s2.read_bytes()


def test_dumps_handles_numpy_and_nonfinite():
    out = json.loads(dumps({"a": np.float64(np.inf), "b": np.arange(2), "c": (np.int64(3),)}))
    assert out == {"a": "inf", "b": [0, 1], "c": [3]}

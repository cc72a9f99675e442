"""Run artifacts on disk and the JSON/SVG report built from them.

A run directory holds ``manifest.json`` (preset summary plus the list of
artifact files), one CSV per functional sample and one CSV per trace.
``emit_report`` reads only what is on disk, so a report can be rebuilt from
an old run without rerunning anything.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from skle.harness import Result, ks_two_sample, weighted_ks

MANIFEST = "manifest.json"
TRACE_HEADER = ("t", "driver", "tip_re", "tip_im")


class ArtifactError(FileNotFoundError):
    pass


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    return x


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, repr floats."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


# ------------------------------------------------------------------ writing

def write_samples_csv(path, values) -> None:
    v = np.asarray(values, float).ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "value"])
        for i, x in enumerate(v):
            w.writerow([i, repr(float(x))])


def write_trace_csv(path, t, driver, tips) -> None:
    t, d = np.asarray(t, float), np.asarray(driver)
    z = np.asarray(tips, complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for a, b, c in zip(t, d, z):
            w.writerow([repr(float(a)), repr(float(np.real(b))), repr(float(c.real)), repr(float(c.imag))])


def write_artifacts(result: Result, out) -> Path:
    """Write manifest, sample CSVs and trace CSVs of a finished preset; returns the directory."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"samples": {}, "traces": {}}
    for name, v in sorted(result.samples.items()):
        fn = f"samples_{name}.csv"
        write_samples_csv(out / fn, v)
        files["samples"][name] = fn
    for name, (t, d, z) in sorted(result.traces.items()):
        fn = f"trace_{name}.csv"
        write_trace_csv(out / fn, t, d, z)
        files["traces"][name] = fn
    (out / MANIFEST).write_text(dumps({"summary": result.summary(), "files": files}))
    return out


# ------------------------------------------------------------------ reading

def read_samples_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([float(r[1]) for r in rows])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise ArtifactError(f"{path}: not a trace file")
    a = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, 4)
    return a[:, 0], a[:, 1], a[:, 2] + 1j * a[:, 3]


def load_run(run_dir):
    run_dir = Path(run_dir)
    if not run_dir.is_dir() or not any(run_dir.iterdir()):
        raise ArtifactError(f"{run_dir}: empty or missing run directory")
    man = run_dir / MANIFEST
    if not man.exists():
        raise ArtifactError(f"{run_dir}: missing {MANIFEST}")
    m = json.loads(man.read_text())
    listed = list(m["files"]["samples"].values()) + list(m["files"]["traces"].values())
    absent = sorted(f for f in listed if not (run_dir / f).exists())
    if absent:
        raise ArtifactError(f"{run_dir}: missing artifacts: {', '.join(absent)}")
    samples = {k: read_samples_csv(run_dir / f) for k, f in m["files"]["samples"].items()}
    traces = {k: read_trace_csv(run_dir / f) for k, f in m["files"]["traces"].items()}
    return m, samples, traces


def _pairs(samples: dict):
    """(label, xs, ys) for every A_<f>/B_<f> and CA_<f>/CB_<f> sample pair."""
    out = []
    for pa, pb in (("A_", "B_"), ("CA_", "CB_")):
        for k in sorted(samples):
            if k.startswith(pa) and (pb + k[len(pa):]) in samples and not k.endswith("_weight"):
                out.append((pa[:-1] + "/" + pb[:-1] + ":" + k[len(pa):], samples[k], samples[pb + k[len(pa):]]))
    return out


# ------------------------------------------------------------------ svg

def _fmt(v: float) -> str:
    return f"{v:.4g}"


class _Panel:
    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        lo, hi = xlim
        if hi <= lo:
            lo, hi = lo - 1, hi + 1
        self.xlim = (lo, hi)
        lo, hi = ylim
        if hi <= lo:
            lo, hi = lo - 1, hi + 1
        self.ylim = (lo, hi)

    def xy(self, x, y):
        X = self.x0 + (np.asarray(x) - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * self.w
        Y = self.y0 + self.h - (np.asarray(y) - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * self.h
        return X, Y

    def frame(self, title, xlabel, ylabel) -> list[str]:
        x0, y0, w, h = self.x0, self.y0, self.w, self.h
        s = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>',
             f'<text x="{x0 + w / 2}" y="{y0 - 8}" text-anchor="middle" font-size="13">{title}</text>',
             f'<text x="{x0 + w / 2}" y="{y0 + h + 34}" text-anchor="middle" font-size="11">{xlabel}</text>',
             f'<text x="{x0 - 40}" y="{y0 + h / 2}" text-anchor="middle" font-size="11" '
             f'transform="rotate(-90 {x0 - 40} {y0 + h / 2})">{ylabel}</text>']
        for f in (0.0, 0.5, 1.0):
            xv = self.xlim[0] + f * (self.xlim[1] - self.xlim[0])
            yv = self.ylim[0] + f * (self.ylim[1] - self.ylim[0])
            s.append(f'<text x="{x0 + f * w:.1f}" y="{y0 + h + 16}" text-anchor="middle" font-size="10">{_fmt(xv)}</text>')
            s.append(f'<text x="{x0 - 6}" y="{y0 + h - f * h + 4:.1f}" text-anchor="end" font-size="10">{_fmt(yv)}</text>')
        return s

    def polyline(self, x, y, color) -> str:
        X, Y = self.xy(x, y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(X, Y))
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>'


COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_svg(traces: dict, pairs: list, ks: dict) -> str:
    """Trace polylines in plane coordinates and one CDF overlay per sample pair."""
    W, ph = 520, 320
    n_panels = (1 if traces else 0) + len(pairs)
    H = max(1, n_panels) * (ph + 90) + 20
    body = []
    y = 40
    if traces:
        zs = np.concatenate([np.asarray(z)[np.isfinite(z)] for _, _, z in traces.values()] + [np.zeros(1)])
        pad = 0.05 * max(np.ptp(zs.real), np.ptp(zs.imag), 1e-9)
        P = _Panel(70, y, W - 100, ph, (zs.real.min() - pad, zs.real.max() + pad), (0.0, zs.imag.max() + pad))
        body += P.frame("traces", "Re z", "Im z")
        for i, (name, (_, _, z)) in enumerate(sorted(traces.items())):
            z = np.asarray(z)[np.isfinite(z)]
            if z.size:
                body.append(P.polyline(z.real, z.imag, COLORS[i % len(COLORS)]))
                body.append(f'<text x="{P.x0 + 8}" y="{P.y0 + 16 + 14 * i}" font-size="11" '
                            f'fill="{COLORS[i % len(COLORS)]}">{name}</text>')
        y += ph + 90
    for label, xs, ys in pairs:
        both = np.concatenate([xs, ys])
        P = _Panel(70, y, W - 100, ph, (float(both.min()), float(both.max())), (0.0, 1.0))
        body += P.frame(label, "value", "empirical CDF")
        for i, v in enumerate((xs, ys)):
            v = np.sort(v)
            F = np.arange(1, v.size + 1) / v.size
            body.append(P.polyline(np.repeat(v, 2)[1:], np.repeat(F, 2)[:-1], COLORS[i]))
        r = ks[label]
        body.append(f'<text x="{P.x0 + 8}" y="{P.y0 + 16}" font-size="11">'
                    f'KS D={r["statistic"]:.4f} p={r["p_value"]:.4g} (n={r["n1"]},{r["n2"]})</text>')
        y += ph + 90
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">'
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def emit_report(run_dir, out=None) -> tuple[Path, Path]:
    """Build report.json and report.svg from the artifacts of a run directory."""
    run_dir = Path(run_dir)
    out = Path(out) if out is not None else run_dir
    m, samples, traces = load_run(run_dir)
    pairs = _pairs(samples)
    w = samples.get("A_weight")
    ks = {lab: (weighted_ks(xs, w, ys, functional=lab) if w is not None and lab.startswith("A/B")
                else ks_two_sample(xs, ys, lab)).to_dict() for lab, xs, ys in pairs}
    summary = m["summary"]
    ok = all(r["p_value"] > 0.01 for r in summary.get("ks", [])) and \
        all(r["p_value"] < 0.01 for r in summary.get("controls", []))
    report = {"summary": summary, "sample_ks": ks, "n_samples": {k: int(v.size) for k, v in samples.items()},
              "traces": sorted(traces), "verdict": "pass" if ok else "fail"}
    out.mkdir(parents=True, exist_ok=True)
    pj, ps = out / "report.json", out / "report.svg"
    pj.write_text(dumps(report))
    ps.write_text(render_svg(traces, pairs, ks))
    return pj, ps

"""Command line entry point: ``skle <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from skle.geometry import SlitVector


def _slits(text: str | None) -> SlitVector:
    if not text:
        return SlitVector.empty()
    p = Path(text)
    if p.exists():
        text = p.read_text()
    return SlitVector.from_json(text)


def _points(text: str | None, s: SlitVector, xi: float) -> np.ndarray:
    if text:
        pts = []
        for item in text.split(";"):
            re, im = (float(v) for v in item.split(","))
            pts.append(complex(re, im))
        return np.array(pts)
    scale = s.scale() if s.n else 1.0
    return xi + scale * np.array([0.3 + 0.5j, -0.7 + 0.4j, 1.1 + 1.5j, 0.2 + 3.0j])


def _emit(obj, out: str | None) -> None:
    from skle.report import dumps

    text = dumps(obj)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_kernel(a) -> int:
    from skle.bmd import bmd_complex_poisson, slit_constants
    from skle.fdgrid import GridSpec, grid_psi, kernel_field
    from skle.neumann import im_psi_mc

    s = _slits(a.slits)
    z = _points(a.points, s, a.xi)
    res = {"slits": s.to_dict(), "xi": a.xi, "backend": a.backend, "points": [[p.real, p.imag] for p in z],
           "spectral": {"psi": [[v.real, v.imag] for v in bmd_complex_poisson(s, z, a.xi)],
                        "slit_values": list(slit_constants(s, a.xi))}}
    grid = mc = None
    if a.backend in ("grid", "both"):
        if s.n == 0:
            psi = bmd_complex_poisson(s, z, a.xi)
            res["grid"] = {"psi": [[v.real, v.imag] for v in psi], "slit_values": [], "flux": [],
                           "relative_flux": []}
            grid = psi.imag
        else:
            fld = kernel_field(s, a.xi, GridSpec(h=a.grid_h, box_scale=a.box_scale))
            psi = grid_psi(fld, z, a.xi)
            res["grid"] = {"psi": [[v.real, v.imag] for v in psi], "slit_values": list(fld.slit_values),
                           "flux": list(fld.flux), "relative_flux": list(fld.relative_flux)}
            grid = psi.imag
    if a.backend in ("mc", "both"):
        est = im_psi_mc(s, z, slit_constants(s, a.xi), a.xi, a.n_walkers, a.seed)
        res["mc"] = {"im_psi": [e.to_dict() for e in est]}
        mc = est
    if grid is not None and mc is not None:
        zs = [abs(g - e.value) / max(e.std_error, 1e-300) for g, e in zip(grid, mc)]
        res["discrepancy"] = {"abs": [abs(g - e.value) for g, e in zip(grid, mc)], "z_scores": zs,
                              "max_z": max(zs) if zs else 0.0, "within_3_sigma": bool(all(v <= 3 for v in zs))}
    _emit(res, a.out)
    return 0


def cmd_bbmd(a) -> int:
    from skle.bmd import b_bmd

    kv = b_bmd(_slits(a.slits), with_error=True)
    print(f"b_BMD = {kv.value!r} +/- {kv.error:.3g} (order {kv.order})")
    return 0


def cmd_skle_run(a) -> int:
    from skle.engine import SkleConfig, SkleRun, simulate

    s = _slits(a.slits)
    probes = tuple(_points(a.probes, s, a.xi0)) if a.probes else (complex(a.xi0, 0.5),)
    cfg = SkleConfig(s, a.xi0, a.alpha, a.b, a.dt, a.t_max, probes=probes, phi2_every=a.phi2_every)
    run = SkleRun(simulate(cfg, 1, seed=a.seed), 0)
    out = Path(a.out)
    run.to_csv(out)
    man = run.manifest() | {"seed": a.seed, "csv": out.name}
    _emit(man, str(out.with_suffix(".json")))
    print(f"{out}: stopped {man['stopped_reason']} at node {man['stop_index']}")
    return 0


def cmd_annulus_trace(a) -> int:
    from skle.annulus import annulus_sle_trace, write_annulus_csv

    tr = annulus_sle_trace(a.q, a.kappa, a.ds, a.t_max, rng=a.seed)
    write_annulus_csv(tr, a.out)
    print(f"{a.out}: {len(tr)} samples")
    return 0


def _run_experiment(cfg, out) -> int:
    from skle.harness import run_preset
    from skle.report import emit_report, write_artifacts

    res = run_preset(cfg)
    d = write_artifacts(res, out)
    pj, ps = emit_report(d)
    for r in res.ks:
        print(f"{r.functional}: D={r.statistic:.4f} p={r.p_value:.4g}")
    for r in res.controls:
        print(f"control {r.functional}: D={r.statistic:.4f} p={r.p_value:.4g}")
    print(f"wrote {pj} and {ps}")
    return 0


def _config(preset, path, overrides) -> "object":
    from skle.harness import ExperimentConfig, default_config

    cfg = default_config(preset)
    if path:
        d = cfg.to_dict() | json.loads(Path(path).read_text())
        d["preset"] = preset
        d["params"] = cfg.params | d.get("params", {})
        cfg = ExperimentConfig.from_dict(d)
    kw = {k: v for k, v in overrides.items() if v is not None}
    if kw:
        cfg = ExperimentConfig.from_dict(cfg.to_dict() | kw)
    return cfg


def cmd_radial_compare(a) -> int:
    return _run_experiment(_config("radial-compare", a.config, {"n_paths": a.n_paths, "seed": a.seed, "dt": a.dt}),
                           a.out)


def cmd_experiment(a) -> int:
    return _run_experiment(_config(a.preset, a.config, {"n_paths": a.n_paths, "seed": a.seed, "dt": a.dt}), a.out)


def cmd_report(a) -> int:
    from skle.report import emit_report

    pj, ps = emit_report(a.run_dir, a.out)
    print(f"wrote {pj} and {ps}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    from skle.harness import PRESETS

    ap = argparse.ArgumentParser(prog="skle", description="Loewner, SKLE and annulus SLE simulations.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("kernel", help="BMD complex Poisson kernel samples")
    p.add_argument("--slits", help='JSON {"y":[..],"x":[..],"xr":[..]} or a file holding it')
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--points", help='sample points "re,im;re,im;..."')
    p.add_argument("--grid-h", type=float, default=1.0 / 64)
    p.add_argument("--box-scale", type=float, default=100.0)
    p.add_argument("--backend", choices=("grid", "mc", "both"), default="grid")
    p.add_argument("--n-walkers", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_kernel)

    p = sub.add_parser("bbmd", help="BMD domain constant with error estimate")
    p.add_argument("--slits", required=True)
    p.set_defaults(fn=cmd_bbmd)

    p = sub.add_parser("skle-run", help="one SKLE path: run CSV plus JSON manifest")
    p.add_argument("--slits")
    p.add_argument("--xi0", type=float, default=0.0)
    p.add_argument("--alpha", default=str(math.sqrt(6)), help='number or "const:<v>"')
    p.add_argument("--b", default="neg-bmd", help='"zero", "neg-bmd" or "const:<v>"')
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", help='hull probe points "re,im;..." (default xi0 + 0.5i)')
    p.add_argument("--phi2-every", type=int, default=10, help="Phi'' at every n-th node (0: never)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_skle_run)

    p = sub.add_parser("annulus-trace", help="annulus SLE trace CSV")
    p.add_argument("--q", type=float, required=True, help="modulus of the annulus {q < |z| < 1}")
    p.add_argument("--kappa", type=float, default=6.0)
    p.add_argument("--ds", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_annulus_trace)

    for name, fn in (("radial-compare", cmd_radial_compare), ("experiment", cmd_experiment)):
        p = sub.add_parser(name, help="statistical preset: report.json, report.svg and per-path CSVs")
        if name == "experiment":
            p.add_argument("--preset", choices=PRESETS, required=True)
        p.add_argument("--config", help="ExperimentConfig JSON; keys override the preset defaults")
        p.add_argument("--n-paths", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True)
        p.set_defaults(fn=fn)

    p = sub.add_parser("report", help="rebuild report.json and report.svg from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    return a.fn(a)


if __name__ == "__main__":
    raise SystemExit(main())

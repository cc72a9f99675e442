"""Run every statistical preset at its default scale and write run directories with reports.

usage: python3 scripts/run_presets.py OUT_DIR [--preset NAME ...] [--n-paths N] [--seed S]
"""

import argparse
import time
from pathlib import Path

from skle.harness import PRESETS, default_config, run_preset
from skle.report import emit_report, write_artifacts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--preset", action="append", choices=PRESETS)
    ap.add_argument("--n-paths", type=int)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    for name in a.preset or PRESETS:
        kw = {"seed": a.seed} | ({"n_paths": a.n_paths} if a.n_paths else {})
        t0 = time.perf_counter()
        res = run_preset(default_config(name, **kw))
        pj, _ = emit_report(write_artifacts(res, Path(a.out) / name))
        print(f"{name}: {time.perf_counter() - t0:.0f}s -> {pj}")
        for r in res.ks + res.controls:
            print(f"  {r.functional}: D={r.statistic:.4f} p={r.p_value:.4g} (n={r.n1},{r.n2})")


if __name__ == "__main__":
    main()

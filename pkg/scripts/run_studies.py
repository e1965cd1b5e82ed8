"""Run the with/without-DG comparisons on the sample feeders and one GA search.

Each study writes into its own subdirectory of --out (default ./studies).

    python scripts/run_studies.py
"""
from __future__ import annotations

import argparse
from pathlib import Path

from dgplace.cli import main as dgplace
from dgplace.network import sample_path

PLANS = {
    "ieee30": "7:1.75:1,23:1.75:1",
    "ieee30_radial": "7:1.75:1,23:1.75:1",
    "ieee9": "7:6:2",
    "ieee34": "27:2.75:1.65",
}

GA_CONFIG = """\
n_dg = 2
candidate_buses = 2-12
p_grid = 0.25, 0.5, 0.75, 1.0
q_grid = 0.3
stall_generations = 30
"""


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("studies"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    codes = {}
    for name, plan in PLANS.items():
        codes[name] = dgplace(["compare", "--feeder", str(sample_path(name)), "--plan", plan,
                               "--out", str(args.out / name)])
    args.out.mkdir(parents=True, exist_ok=True)
    cfg = args.out / "fixture12_ga.cfg"
    cfg.write_text(f"feeder = {sample_path('fixture12')}\n{GA_CONFIG}", encoding="utf-8")
    codes["fixture12_ga"] = dgplace(["optimize", "--config", str(cfg), "--seed", str(args.seed),
                                     "--out", str(args.out / "fixture12_ga")])
    codes["fixture12_sweep"] = dgplace(["sweep", "--config", str(cfg), "--out", str(args.out / "fixture12_sweep")])
    for name, code in codes.items():
        print(f"{name:18s} exit {code}")
    return max(codes.values())


if __name__ == "__main__":
    raise SystemExit(main())

"""Regenerate the reconstructed sample feeders in src/dgplace/data/.

The benchmark feeders' line data is not reproduced here. Each sample keeps
the published bus count, load totals and bases (6.5 kV, 10 MVA); topology
and load split are reconstructions. Resistance and reactance scale factors
are fitted so the no-DG active loss and voltage regulation match the
published base-case figures.

    python scripts/build_sample_feeders.py
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from dgplace.network import Branch, Bus, Network, serialize
from dgplace.powerflow import solve

V_BASE, S_BASE = 6.5, 10.0
Z_BASE = V_BASE**2 / S_BASE  # ohm
DATA = Path(__file__).resolve().parents[1] / "src" / "dgplace" / "data"


def build(loads, lines, p_total=None, q_total=None, ties=(), v_min=0.90, v_max=1.05):
    """loads: {bus: (p, q)} in MW/MVAr; lines: [(from, to, r_ohm_km, x_ohm_km, km)]."""
    ids = sorted({1} | set(loads) | {b for ln in lines for b in ln[:2]})
    p = np.array([loads.get(b, (0, 0))[0] for b in ids], float)
    q = np.array([loads.get(b, (0, 0))[1] for b in ids], float)
    if p_total is not None:
        p *= p_total / p.sum()
    if q_total is not None:
        q *= q_total / q.sum()
    buses = [Bus(b, "slack" if b == 1 else "load", round(float(pp), 6), round(float(qq), 6),
                 v_min, v_max) for b, pp, qq in zip(ids, p, q)]
    branches = [Branch(k, f, t, r / Z_BASE, x / Z_BASE, km)
                for k, (f, t, r, x, km) in enumerate(list(lines) + list(ties), 1)]
    return Network(V_BASE, S_BASE, tuple(buses), tuple(branches))


def scale_impedance(net: Network, c: float, cx: float | None = None, digits: int = 6) -> Network:
    cx = c if cx is None else cx

    def rnd(x):
        return float(f"{x:.{digits}g}")
    return Network(net.v_base, net.s_base, net.buses, tuple(
        Branch(br.id, br.from_bus, br.to_bus, rnd(br.r_per_km * c), rnd(br.x_per_km * cx),
               br.length_km, br.p_flow_max) for br in net.branches))


def _bracket_root(fn, start=1e-3):
    lo = hi = start
    while fn(hi) < 0:
        lo, hi = hi, hi * 1.5
    return brentq(fn, lo, hi, xtol=1e-12)


def fit_loss(net: Network, loss_kw: float, regulation_pct: float | None = None) -> Network:
    """Scale R (and X independently, when a regulation target is given) to hit the base-case figures."""
    target = loss_kw / 1000 / net.s_base

    def r_scale(cx):
        return _bracket_root(lambda c: solve(scale_impedance(net, c, cx, 15)).p_loss - target)

    if regulation_pct is None:
        return scale_impedance(net, r_scale(None))

    def reg_err(cx):
        sol = solve(scale_impedance(net, r_scale(cx), cx, 15))
        return 100 * (1 - sol.v_mag.min()) - regulation_pct

    if reg_err(1e-3) > 0:
        raise ValueError("regulation target unreachable at this loss; resistance alone sags too far")
    cx = _bracket_root(reg_err)
    return scale_impedance(net, r_scale(cx), cx)


# -- 9-bus: classic 9-section feeder loads, its line impedances in ohm as shape -------------

def feeder9() -> Network:
    p = [1840, 980, 1790, 1598, 1610, 780, 1150, 980, 1640]
    q = [460, 340, 446, 1840, 600, 110, 60, 130, 200]
    z = [(0.1233, 0.4127), (0.0140, 0.6051), (0.7463, 1.2050), (0.6984, 0.6084),
         (1.9831, 1.7276), (0.9053, 0.7886), (2.0552, 1.1640), (4.7953, 2.7160),
         (5.3434, 4.5880)]
    loads = {k + 2: (p[k] / 1000, q[k] / 1000) for k in range(9)}
    lines = [(k + 1, k + 2, z[k][0], z[k][1], 1.0) for k in range(9)]
    return fit_loss(build(loads, lines), 438.2, 14.65)


# -- 13-bus ---------------------------------------------------------------------------

def feeder13() -> Network:
    lines = [(1, 2, 0.18, 0.36, 0.6), (2, 3, 0.18, 0.36, 0.5), (3, 4, 0.18, 0.36, 0.5),
             (4, 5, 0.18, 0.36, 0.5), (5, 6, 0.60, 0.45, 0.4), (5, 7, 0.18, 0.36, 0.6),
             (7, 8, 0.35, 0.40, 0.5), (8, 9, 0.35, 0.40, 0.4), (9, 10, 0.60, 0.45, 0.3),
             (7, 11, 0.35, 0.40, 0.5), (11, 12, 0.60, 0.45, 0.4), (9, 13, 0.60, 0.45, 0.4),
             (13, 14, 0.60, 0.45, 0.3)]
    w = {2: 0.6, 3: 0.5, 4: 0.9, 5: 0.6, 6: 0.45, 7: 1.2, 8: 0.9, 9: 1.0, 10: 0.7,
         11: 1.1, 12: 0.8, 13: 0.9, 14: 0.9}
    loads = {b: (v, v * 0.57) for b, v in w.items()}
    return fit_loss(build(loads, lines, 10.536, 5.962), 229.2, 7.45)


# -- 30-node / 32-segment looped feeder --------------------------------------------------

def feeder30(looped: bool = True) -> Network:
    trunk = [(1, 2, 0.20, 0.30, 0.8), (2, 3, 0.20, 0.30, 0.7), (3, 4, 0.20, 0.30, 0.7)]
    lat = lambda seq, r, x, km: [(a, b, r, x, km) for a, b in zip(seq, seq[1:])]  # noqa: E731
    lines = (trunk
             + lat([2, 25, 26, 27], 0.45, 0.35, 0.5)
             + lat([3, 28, 29, 30], 0.45, 0.35, 0.5)
             + lat([4, 5, 6, 7, 8, 9, 10, 11], 0.32, 0.33, 0.5)
             + lat([6, 12, 13, 14, 15], 0.45, 0.35, 0.4)
             + lat([4, 16, 17, 18, 19, 20, 21, 22, 23, 24], 0.32, 0.33, 0.5))
    ties = [(11, 24, 0.45, 0.35, 1.2), (15, 20, 0.45, 0.35, 1.2), (27, 30, 0.45, 0.35, 1.0)]
    up = {2: 0.03, 25: 0.04, 26: 0.03, 27: 0.03,
          3: 0.20, 28: 0.20, 29: 0.20, 30: 0.20}
    a = {5: 0.10, 6: 0.12, 7: 0.25, 8: 0.20, 9: 0.15, 10: 0.12, 11: 0.10,
         12: 0.18, 13: 0.18, 14: 0.18, 15: 0.17}
    b = {16: 0.10, 17: 0.10, 18: 0.12, 19: 0.14, 20: 0.16, 21: 0.22, 22: 0.26, 23: 0.35, 24: 0.30}
    p = {}
    for group, total in ((up, 0.93), (a, 1.75), (b, 1.75)):
        s = sum(group.values())
        p.update({k: v * total / s for k, v in group.items()})
    loads = {k: (v, v) for k, v in p.items()}
    base = build(loads, lines, 4.43, 2.72, ties=ties)
    fitted = fit_loss(base, 380.0, 9.86)
    if looped:
        return fitted
    return Network(fitted.v_base, fitted.s_base, fitted.buses, fitted.branches[: len(lines)])


# -- 34-bus ---------------------------------------------------------------------------

def feeder34() -> Network:
    lat = lambda seq, r, x, km: [(a, b, r, x, km) for a, b in zip(seq, seq[1:])]  # noqa: E731
    lines = (lat(list(range(1, 18)), 0.20, 0.30, 0.6)
             + lat([3, 18, 19, 20, 21, 22], 0.45, 0.35, 0.5)
             + lat([6, 23, 24, 25, 26], 0.45, 0.35, 0.5)
             + lat([9, 27, 28, 29, 30, 31, 32, 33, 34], 0.32, 0.33, 0.5))
    w = {k: 0.23 for k in range(2, 18)}
    w.update({k: 0.137 for k in range(18, 23)})
    w.update({k: 0.072 for k in range(23, 27)})
    w.update({27: 0.23, 28: 0.23, 29: 0.23, 30: 0.23, 31: 0.23, 32: 0.137, 33: 0.072, 34: 0.057})
    loads = {k: (v, v) for k, v in w.items()}
    return fit_loss(build(loads, lines, 4.613, 2.873), 213.8, 5.95)


# -- small fixtures for GA / oracle tests ------------------------------------------------

def fixture10() -> Network:
    lines = [(1, 2, 0.3, 0.4, 0.6), (2, 3, 0.3, 0.4, 0.6), (3, 4, 0.4, 0.4, 0.5),
             (4, 5, 0.5, 0.4, 0.5), (5, 6, 0.5, 0.4, 0.5), (3, 7, 0.5, 0.4, 0.6),
             (7, 8, 0.6, 0.4, 0.5), (8, 9, 0.6, 0.4, 0.5), (4, 10, 0.6, 0.4, 0.4)]
    loads = {2: (0.20, 0.10), 3: (0.25, 0.15), 4: (0.30, 0.20), 5: (0.35, 0.20), 6: (0.40, 0.25),
             7: (0.15, 0.10), 8: (0.25, 0.15), 9: (0.30, 0.20), 10: (0.20, 0.10)}
    return build(loads, lines)


def fixture12() -> Network:
    lines = [(1, 2, 0.3, 0.4, 0.7), (2, 3, 0.3, 0.4, 0.6), (3, 4, 0.4, 0.4, 0.6),
             (4, 5, 0.5, 0.4, 0.5), (5, 6, 0.5, 0.4, 0.5), (6, 7, 0.6, 0.4, 0.5),
             (3, 8, 0.5, 0.4, 0.6), (8, 9, 0.6, 0.4, 0.6), (9, 10, 0.6, 0.4, 0.5),
             (5, 11, 0.6, 0.4, 0.5), (11, 12, 0.6, 0.4, 0.5)]
    loads = {2: (0.15, 0.08), 3: (0.20, 0.12), 4: (0.25, 0.15), 5: (0.30, 0.18),
             6: (0.30, 0.20), 7: (0.35, 0.20), 8: (0.20, 0.10), 9: (0.25, 0.15),
             10: (0.30, 0.18), 11: (0.20, 0.12), 12: (0.25, 0.15)}
    return build(loads, lines)


def fixture_vlimit() -> Network:
    """Heavy short lateral (loss dominant) next to a long light lateral that sags below 0.95 pu."""
    lines = [(1, 2, 0.1, 0.2, 0.3),
             (2, 3, 0.3, 0.35, 0.6), (3, 4, 0.3, 0.35, 0.6), (4, 5, 0.3, 0.35, 0.6),
             (2, 6, 1.6, 0.6, 1.5), (6, 7, 1.6, 0.6, 1.5), (7, 8, 1.6, 0.6, 1.5), (8, 9, 1.6, 0.6, 1.5)]
    loads = {3: (0.8, 0.5), 4: (0.9, 0.5), 5: (1.0, 0.6),
             6: (0.08, 0.04), 7: (0.08, 0.04), 8: (0.10, 0.05), 9: (0.10, 0.05)}
    net = build(loads, lines)
    buses = tuple(Bus(b.id, b.kind, b.p_load, b.q_load, 0.95 if b.id >= 6 else 0.90, b.v_max)
                  for b in net.buses)
    return Network(net.v_base, net.s_base, buses, net.branches)


SAMPLES = {
    "ieee9": (feeder9, "9 load buses, 12.368 MW / 4.186 MVAr; loads of the classic 9-section feeder"),
    "ieee13": (feeder13, "13 load buses, 10.536 MW / 5.962 MVAr"),
    "ieee30": (feeder30, "30 nodes, 32 segments (3 tie lines closed), 4.43 MW / 2.72 MVAr"),
    "ieee30_radial": (lambda: feeder30(False), "ieee30 with the 3 tie lines open"),
    "ieee34": (feeder34, "33 load buses, 4.613 MW / 2.873 MVAr"),
    "fixture10": (fixture10, "10-bus GA/oracle test fixture"),
    "fixture12": (fixture12, "12-bus GA/oracle test fixture"),
    "fixture_vlimit": (fixture_vlimit, "voltage-limit pressure fixture; buses 6-9 have v_min 0.95"),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, (fn, note) in SAMPLES.items():
        net = fn()
        sol = solve(net)
        head = (f"# {name}: reconstructed sample feeder; {note}\n"
                f"# regenerate with scripts/build_sample_feeders.py\n"
                f"# no-DG: loss {sol.p_loss * net.s_base * 1000:.1f} kW, "
                f"min V {sol.v_mag.min():.4f} pu\n")
        (args.out / f"{name}.feeder").write_text(head + serialize(net), encoding="utf-8")
        print(f"{name:16s} loss {sol.p_loss * net.s_base * 1000:8.1f} kW   "
              f"vmin {sol.v_mag.min():.4f}   loops {net.loop_count}")


if __name__ == "__main__":
    main()

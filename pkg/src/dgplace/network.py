"""Feeder data model, feeder-file I/O and DG injection.

Bus loads and DG injections are stored in MW / MVAr; branch impedances are
already per-unit (per km) on the network bases. Per-unit load vectors are
derived on demand from ``s_base``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

DEFAULT_V_MIN = 0.90
DEFAULT_V_MAX = 1.05
WEIGHT_TOL = 1e-9


class NetworkError(ValueError):
    """Invalid network data or a plan that cannot be applied to it."""


class FeederParseError(NetworkError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = "load"  # "slack" | "load"
    p_load: float = 0.0  # MW
    q_load: float = 0.0  # MVAr
    v_min: float = DEFAULT_V_MIN
    v_max: float = DEFAULT_V_MAX
    weight_k: float | None = None  # None -> resolved by Network.weights
    p_gen: float = 0.0  # MW, set by apply_dg
    q_gen: float = 0.0  # MVAr

    @property
    def has_load(self) -> bool:
        return self.p_load != 0.0 or self.q_load != 0.0


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r_per_km: float  # pu/km
    x_per_km: float  # pu/km
    length_km: float = 1.0
    p_flow_max: float = math.inf  # pu

    @property
    def r(self) -> float:
        return self.r_per_km * self.length_km

    @property
    def x(self) -> float:
        return self.x_per_km * self.length_km

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)


@dataclass(frozen=True)
class DGUnit:
    bus: int
    p_gen: float  # MW
    q_gen: float = 0.0  # MVAr
    p_min: float = 0.0
    p_max: float = math.inf
    q_min: float = -math.inf
    q_max: float = math.inf


@dataclass(frozen=True)
class DGPlan:
    units: tuple[DGUnit, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))

    def merged(self) -> DGPlan:
        """Combine units sharing a bus by summing injections and limits."""
        by_bus: dict[int, DGUnit] = {}
        for u in self.units:
            if u.bus in by_bus:
                o = by_bus[u.bus]
                u = DGUnit(u.bus, o.p_gen + u.p_gen, o.q_gen + u.q_gen,
                           o.p_min + u.p_min, o.p_max + u.p_max,
                           o.q_min + u.q_min, o.q_max + u.q_max)
            by_bus[u.bus] = u
        return DGPlan(tuple(by_bus[b] for b in sorted(by_bus)))

    def __or__(self, other: DGPlan) -> DGPlan:
        return DGPlan(self.units + other.units).merged()

    def describe(self) -> str:
        if not self.units:
            return "none"
        return "|".join(f"{u.bus}:{u.p_gen:g}:{u.q_gen:g}" for u in self.units)


def parse_plan(text: str) -> DGPlan:
    """Parse ``bus:MW:MVAr`` items separated by commas, ``|`` or whitespace."""
    units = []
    for item in text.replace("|", ",").replace(";", ",").split():
        for tok in item.split(","):
            tok = tok.strip()
            if not tok:
                continue
            parts = tok.split(":")
            if len(parts) not in (2, 3):
                raise NetworkError(f"bad DG item {tok!r}; expected bus:MW[:MVAr]")
            try:
                bus = int(parts[0])
                p = float(parts[1])
                q = float(parts[2]) if len(parts) == 3 else 0.0
            except ValueError as exc:
                raise NetworkError(f"bad DG item {tok!r}: {exc}") from None
            units.append(DGUnit(bus, p, q))
    return DGPlan(tuple(units))


@dataclass(frozen=True)
class Network:
    v_base: float  # kV line-to-line
    s_base: float  # MVA three-phase
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))

    # -- lookups ---------------------------------------------------------
    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @cached_property
    def slack_index(self) -> int:
        slacks = [k for k, b in enumerate(self.buses) if b.kind == "slack"]
        if len(slacks) != 1:
            raise NetworkError(f"expected exactly one slack bus, found {len(slacks)}")
        return slacks[0]

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def loop_count(self) -> int:
        return self.n_branch - self.n_bus + 1

    @property
    def is_radial(self) -> bool:
        return self.loop_count == 0

    @cached_property
    def branch_ends(self) -> tuple[np.ndarray, np.ndarray]:
        idx = self.bus_index
        f = np.array([idx[br.from_bus] for br in self.branches], dtype=int)
        t = np.array([idx[br.to_bus] for br in self.branches], dtype=int)
        return f, t

    @cached_property
    def z_branch(self) -> np.ndarray:
        return np.array([br.z for br in self.branches], dtype=complex)

    @cached_property
    def r_branch(self) -> np.ndarray:
        return np.array([br.r for br in self.branches], dtype=float)

    # -- per-unit vectors ------------------------------------------------
    @cached_property
    def s_load_pu(self) -> np.ndarray:
        return np.array([complex(b.p_load, b.q_load) for b in self.buses]) / self.s_base

    @cached_property
    def s_gen_pu(self) -> np.ndarray:
        return np.array([complex(b.p_gen, b.q_gen) for b in self.buses]) / self.s_base

    @cached_property
    def s_demand_pu(self) -> np.ndarray:
        """Net complex demand per bus (load minus DG), pu."""
        return self.s_load_pu - self.s_gen_pu

    @cached_property
    def weights(self) -> np.ndarray:
        """Voltage-profile weights K_i; unset weights share the remaining budget over load buses."""
        explicit = [b.weight_k for b in self.buses]
        if all(w is not None for w in explicit):
            return np.array(explicit, dtype=float)
        fixed = sum(w for w in explicit if w is not None)
        free = [k for k, b in enumerate(self.buses) if b.weight_k is None and b.has_load]
        out = np.array([0.0 if w is None else w for w in explicit])
        if free:
            out[free] = (1.0 - fixed) / len(free)
        return out

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    def with_buses(self, buses) -> Network:
        return replace(self, buses=tuple(buses))

    def scaled_lengths(self, c: float) -> Network:
        return replace(self, branches=tuple(replace(br, length_km=br.length_km * c)
                                            for br in self.branches))


def to_pu(value_mw: float, s_base: float) -> float:
    return value_mw / s_base


def from_pu(value_pu: float, s_base: float) -> float:
    return value_pu * s_base


def i_base_amps(net: Network) -> float:
    """Base current in A for the network's three-phase bases."""
    return net.s_base * 1e6 / (math.sqrt(3.0) * net.v_base * 1e3)


# -- validation ------------------------------------------------------------

def validate(net: Network) -> list[str]:
    """Describe every violated network invariant; empty when the network is sound."""
    out: list[str] = []
    seen: set[int] = set()
    for b in net.buses:
        if b.id in seen:
            out.append(f"bus {b.id}: duplicate id")
        seen.add(b.id)
        if b.kind not in ("slack", "load"):
            out.append(f"bus {b.id}: unknown kind {b.kind!r}")
        if b.p_load < 0:
            out.append(f"bus {b.id}: negative active load {b.p_load}")
        if not (0 < b.v_min < b.v_max):
            out.append(f"bus {b.id}: voltage bounds must satisfy 0 < v_min < v_max")
        if b.weight_k is not None and b.weight_k < 0:
            out.append(f"bus {b.id}: negative voltage-profile weight {b.weight_k}")
    slacks = [b.id for b in net.buses if b.kind == "slack"]
    if len(slacks) != 1:
        out.append(f"network: expected exactly one slack bus, found {len(slacks)}")
    elif slacks[0] != 1:
        out.append(f"bus {slacks[0]}: slack must be bus 1")

    seen_br: set[int] = set()
    adj: dict[int, list[int]] = {b.id: [] for b in net.buses}
    for br in net.branches:
        if br.id in seen_br:
            out.append(f"branch {br.id}: duplicate id")
        seen_br.add(br.id)
        bad_end = False
        for end in (br.from_bus, br.to_bus):
            if end not in adj:
                out.append(f"branch {br.id}: unknown bus {end}")
                bad_end = True
        if br.from_bus == br.to_bus:
            out.append(f"branch {br.id}: from_bus equals to_bus ({br.from_bus})")
            bad_end = True
        if br.r_per_km < 0:
            out.append(f"branch {br.id}: negative resistance {br.r_per_km}")
        if not br.length_km > 0:
            out.append(f"branch {br.id}: length must be positive, got {br.length_km}")
        if not bad_end:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)

    if net.buses:
        root = slacks[0] if slacks else net.buses[0].id
        reached = {root}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in reached:
                    reached.add(v)
                    queue.append(v)
        for b in net.buses:
            if b.id not in reached:
                out.append(f"bus {b.id}: not connected to slack bus {root}")

    if any(b.has_load for b in net.buses):
        total = float(net.weights[[k for k, b in enumerate(net.buses) if b.has_load]].sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            out.append(f"network: voltage-profile weights over load buses sum to {total:.12g}, "
                       "must sum to 1")
    return out


def check(net: Network) -> Network:
    problems = validate(net)
    if problems:
        raise NetworkError("; ".join(problems))
    return net


# -- DG application ----------------------------------------------------------

def apply_dg(net: Network, plan: DGPlan) -> Network:
    """Return a copy of ``net`` with the plan's injections added at their buses."""
    if not plan.units:
        return net
    merged = plan.merged()
    idx = net.bus_index
    buses = list(net.buses)
    for u in merged.units:
        if u.bus not in idx:
            raise NetworkError(f"DG unit on unknown bus {u.bus}")
        k = idx[u.bus]
        if buses[k].kind == "slack":
            raise NetworkError(f"DG unit on slack bus {u.bus}")
        b = buses[k]
        buses[k] = replace(b, p_gen=b.p_gen + u.p_gen, q_gen=b.q_gen + u.q_gen)
    return net.with_buses(buses)


# -- feeder file I/O -------------------------------------------------------

_SECTIONS = ("bases", "buses", "branches")


def _num(tok: str, lineno: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FeederParseError(lineno, f"{what}: cannot parse {tok!r} as a number") from None


def _int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FeederParseError(lineno, f"{what}: cannot parse {tok!r} as an integer") from None


def parse_feeder(text: str, name: str = "") -> Network:
    section = None
    bases = None
    buses: list[Bus] = []
    branches: list[Branch] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise FeederParseError(lineno, f"unknown section [{section}]")
            continue
        f = [t.strip() for t in line.split(",")]
        if section is None:
            raise FeederParseError(lineno, "data before any section header")
        if section == "bases":
            if len(f) != 2:
                raise FeederParseError(lineno, "[bases] expects v_base_kv,s_base_mva")
            if bases is not None:
                raise FeederParseError(lineno, "duplicate [bases] entry")
            bases = (_num(f[0], lineno, "v_base_kv"), _num(f[1], lineno, "s_base_mva"))
            if bases[0] <= 0 or bases[1] <= 0:
                raise FeederParseError(lineno, "bases must be positive")
        elif section == "buses":
            if not 2 <= len(f) <= 7:
                raise FeederParseError(lineno, "[buses] expects id,kind[,p,q,v_min,v_max,weight_k]")
            f += [""] * (7 - len(f))
            kind = f[1].lower()
            if kind not in ("slack", "load"):
                raise FeederParseError(lineno, f"bus kind must be slack or load, got {f[1]!r}")
            buses.append(Bus(
                id=_int(f[0], lineno, "bus id"),
                kind=kind,
                p_load=_num(f[2], lineno, "p_load_mw") if f[2] else 0.0,
                q_load=_num(f[3], lineno, "q_load_mvar") if f[3] else 0.0,
                v_min=_num(f[4], lineno, "v_min_pu") if f[4] else DEFAULT_V_MIN,
                v_max=_num(f[5], lineno, "v_max_pu") if f[5] else DEFAULT_V_MAX,
                weight_k=_num(f[6], lineno, "weight_k") if f[6] else None,
            ))
        else:
            if not 5 <= len(f) <= 7:
                raise FeederParseError(
                    lineno, "[branches] expects id,from,to,r_pu_per_km,x_pu_per_km[,length_km,p_flow_max_pu]")
            f += [""] * (7 - len(f))
            branches.append(Branch(
                id=_int(f[0], lineno, "branch id"),
                from_bus=_int(f[1], lineno, "from"),
                to_bus=_int(f[2], lineno, "to"),
                r_per_km=_num(f[3], lineno, "r_pu_per_km"),
                x_per_km=_num(f[4], lineno, "x_pu_per_km"),
                length_km=_num(f[5], lineno, "length_km") if f[5] else 1.0,
                p_flow_max=_num(f[6], lineno, "p_flow_max_pu") if f[6] else math.inf,
            ))
    if bases is None:
        raise FeederParseError(0, "missing [bases] section")
    return Network(bases[0], bases[1], tuple(buses), tuple(branches), name=name)


def load_network(source: str | Path) -> Network:
    """Parse feeder text (or a path to a feeder file) and validate it.

    Raises FeederParseError for malformed lines and NetworkError naming the
    offending buses/branches for invariant violations.
    """
    if isinstance(source, Path):
        text, name = source.read_text(encoding="utf-8"), source.stem
    else:
        text, name = source, ""
    return check(parse_feeder(text, name=name))


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def serialize(net: Network) -> str:
    lines = ["[bases]", f"{_fmt(net.v_base)},{_fmt(net.s_base)}", "",
             "[buses]", "# id,kind,p_load_mw,q_load_mvar,v_min_pu,v_max_pu,weight_k"]
    for b in net.buses:
        lines.append(",".join([str(b.id), b.kind, _fmt(b.p_load), _fmt(b.q_load),
                               _fmt(b.v_min), _fmt(b.v_max), _fmt(b.weight_k)]).rstrip(","))
    lines += ["", "[branches]", "# id,from,to,r_pu_per_km,x_pu_per_km,length_km,p_flow_max_pu"]
    for br in net.branches:
        lines.append(",".join([str(br.id), str(br.from_bus), str(br.to_bus), _fmt(br.r_per_km),
                               _fmt(br.x_per_km), _fmt(br.length_km), _fmt(br.p_flow_max)]))
    return "\n".join(lines) + "\n"


def sample_path(name: str) -> Path:
    """Path of a feeder shipped in ``dgplace/data`` (``.feeder`` suffix optional)."""
    p = Path(__file__).parent / "data" / name
    return p if p.suffix else p.with_suffix(".feeder")


def load_sample(name: str) -> Network:
    return load_network(sample_path(name))

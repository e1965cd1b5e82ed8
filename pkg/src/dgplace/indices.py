"""DG benefit indices (line loss, voltage profile, line apparent power), the composite
benefit index and operating-constraint checks."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .network import DGPlan, Network
from .powerflow import PowerFlowSolution, _require_converged, branch_flows

RATIO_GUARD = 1e-12
WEIGHT_TOL = 1e-9


class IndexComputationError(ValueError):
    pass


@dataclass(frozen=True)
class IndexWeights:
    bw_vpi: float = 1 / 3
    bw_llr: float = 1 / 3
    bw_ltap: float = 1 / 3
    fitness_mode: str = "consistent"  # consistent | as_written

    def __post_init__(self):
        check_weights(self)

    @classmethod
    def parse(cls, text: str, fitness_mode: str = "consistent") -> IndexWeights:
        parts = [float(t) for t in text.split(",")]
        if len(parts) != 3:
            raise IndexComputationError("weights need three comma-separated values: bw_vpi,bw_llr,bw_ltap")
        return cls(*parts, fitness_mode=fitness_mode)


def check_weights(w: IndexWeights) -> None:
    ws = (w.bw_vpi, w.bw_llr, w.bw_ltap)
    if any(x < 0 for x in ws):
        raise IndexComputationError(f"index weights must be non-negative, got {ws}")
    if abs(sum(ws) - 1.0) > WEIGHT_TOL:
        raise IndexComputationError(f"index weights must sum to 1, got {sum(ws):.12g}")
    if w.fitness_mode not in ("consistent", "as_written"):
        raise IndexComputationError(f"unknown fitness mode {w.fitness_mode!r}")


def _ratio(num: float, den: float, what: str) -> float:
    if not den > RATIO_GUARD:
        raise IndexComputationError(f"{what}: denominator {den!r} must be positive")
    return num / den


def line_loss(sol: PowerFlowSolution, net: Network, factor: float = 3.0) -> float:
    """3 * sum(I^2 * r_per_km * length) with per-unit branch currents."""
    _require_converged(sol)
    r_km = np.array([br.r_per_km for br in net.branches])
    d = np.array([br.length_km for br in net.branches])
    return factor * float(np.sum(sol.i_branch ** 2 * r_km * d))


def llri(ll_with: float, ll_without: float) -> float:
    return _ratio(ll_with, ll_without, "LLRI")


def voltage_profile(sol: PowerFlowSolution, net: Network) -> float:
    """Load- and weight-scaled voltage sum; loads are the bus demands, DG excluded."""
    _require_converged(sol)
    k = net.weights
    load_buses = np.abs(net.s_load_pu) > 0
    if load_buses.any() and abs(float(k[load_buses].sum()) - 1.0) > WEIGHT_TOL:
        raise IndexComputationError("voltage-profile weights over load buses must sum to 1")
    return float(np.sum(sol.v_mag * np.abs(net.s_load_pu) * k))


def vpii(vp_with: float, vp_without: float) -> float:
    return _ratio(vp_with, vp_without, "VPII")


def ltap(sol: PowerFlowSolution, net: Network, end: str = "receiving") -> float:
    """Sum over branches of |I| times the receiving-end (or sending-end) voltage magnitude."""
    _require_converged(sol)
    f, t = net.branch_ends
    if end == "receiving":
        ends = t
    elif end == "sending":
        ends = f
    else:
        raise ValueError(f"end must be 'receiving' or 'sending', got {end!r}")
    return float(np.sum(sol.i_branch * sol.v_mag[ends]))


def ltapii(ltap_with: float, ltap_without: float) -> float:
    return _ratio(ltap_with, ltap_without, "LTAPII")


def benefit_index(llri_value: float, vpii_value: float, ltapii_value: float, w: IndexWeights) -> float:
    check_weights(w)
    if not llri_value > 0:
        raise IndexComputationError(f"LLRI must be positive, got {llri_value!r}")
    bi = w.bw_vpi * vpii_value + w.bw_llr / llri_value
    if w.fitness_mode == "as_written":
        return bi + w.bw_ltap * ltapii_value
    if not ltapii_value > 0:
        raise IndexComputationError(f"LTAPII must be positive, got {ltapii_value!r}")
    return bi + w.bw_ltap / ltapii_value


@dataclass(frozen=True)
class Violation:
    kind: str  # p_gen | q_gen | p_flow | voltage
    entity: int  # bus id (p_gen, q_gen, voltage) or branch id (p_flow)
    bound: float
    actual: float
    excess: float

    def describe(self) -> str:
        return f"{self.kind}@{self.entity}: {self.actual:.6g} vs bound {self.bound:.6g} (excess {self.excess:.6g})"


def _over(kind, entity, lo, hi, x) -> Violation | None:
    if x < lo:
        return Violation(kind, entity, lo, x, lo - x)
    if x > hi:
        return Violation(kind, entity, hi, x, x - hi)
    return None


def check_constraints(sol: PowerFlowSolution, net: Network, plan: DGPlan) -> list[Violation]:
    """Generation limits (MW/MVAr), branch active-flow limits (pu) and bus voltage limits (pu)."""
    _require_converged(sol)
    found: list[Violation | None] = []
    for u in plan.merged().units:
        found.append(_over("p_gen", u.bus, u.p_min, u.p_max, u.p_gen))
        found.append(_over("q_gen", u.bus, u.q_min, u.q_max, u.q_gen))
    p, _, _ = branch_flows(sol, net)
    for br, pf in zip(net.branches, p):
        if math.isfinite(br.p_flow_max):
            found.append(_over("p_flow", br.id, -br.p_flow_max, br.p_flow_max, float(pf)))
    for b, vm in zip(net.buses, sol.v_mag):
        found.append(_over("voltage", b.id, b.v_min, b.v_max, float(vm)))
    return [v for v in found if v is not None]


@dataclass(frozen=True)
class IndexReport:
    ll_with: float
    ll_without: float
    vp_with: float
    vp_without: float
    ltap_with: float
    ltap_without: float
    llri: float
    vpii: float
    ltapii: float
    bi: float
    constraint_violations: tuple[Violation, ...] = field(default=())

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d.pop("constraint_violations")
        d["violations"] = len(self.constraint_violations)
        return d

    def to_text(self) -> str:
        lines = [f"{k} = {v!r}" for k, v in self.as_dict().items()]
        lines += [f"violation = {v.describe()}" for v in self.constraint_violations]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.as_dict()
        w.writerow(list(d))
        w.writerow([repr(v) for v in d.values()])
        return buf.getvalue()

    def to_table(self) -> str:
        rows = [
            ("VP/w DG", self.vp_with, "LL/w DG", self.ll_with, "LTAP/wo DG", self.ltap_without),
            ("VP/wo DG", self.vp_without, "LL/wo DG", self.ll_without, "LTAP/w DG", self.ltap_with),
            ("VPII", self.vpii, "LLRI", self.llri, "LTAPII", self.ltapii),
        ]
        out = [f"{a:<10}{b:>10.4f}   {c:<9}{d:>10.5f}   {e:<11}{f:>10.4f}" for a, b, c, d, e, f in rows]
        out.append(f"BI = {self.bi:.4f}")
        return "\n".join(out) + "\n"


def index_report(sol_without: PowerFlowSolution, net_without: Network,
                 sol_with: PowerFlowSolution, net_with: Network,
                 plan: DGPlan, w: IndexWeights, ltap_end: str = "receiving") -> IndexReport:
    ll_wo, ll_w = line_loss(sol_without, net_without), line_loss(sol_with, net_with)
    vp_wo, vp_w = voltage_profile(sol_without, net_without), voltage_profile(sol_with, net_with)
    lt_wo, lt_w = ltap(sol_without, net_without, ltap_end), ltap(sol_with, net_with, ltap_end)
    # ratio from the factor-free sums so the constant 3 cannot perturb the last bit
    r_ll = llri(line_loss(sol_with, net_with, 1.0), line_loss(sol_without, net_without, 1.0))
    r_vp, r_lt = vpii(vp_w, vp_wo), ltapii(lt_w, lt_wo)
    if r_ll <= 0 or (w.fitness_mode == "consistent" and r_lt <= 0):
        # a plan that removes all branch flow; the benefit index is unbounded
        bi = math.inf
    else:
        bi = benefit_index(r_ll, r_vp, r_lt, w)
    return IndexReport(ll_w, ll_wo, vp_w, vp_wo, lt_w, lt_wo, r_ll, r_vp, r_lt, bi,
                       tuple(check_constraints(sol_with, net_with, plan)))

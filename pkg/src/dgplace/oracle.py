"""Exhaustive enumeration of the GA's discrete decision space, for small instances."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass

from .ga import FitnessEvaluator, GaConfig, Gene, decode
from .indices import IndexWeights
from .network import DGPlan, Network
from .powerflow import SolverOptions

DEFAULT_CAP = 10**6


class SearchSpaceTooLarge(ValueError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"search space has {count} plans, above the cap of {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class SearchSpace:
    candidate_buses: tuple[int, ...]
    p_grid: tuple[float, ...]
    q_grid: tuple[float, ...]
    n_dg: int = 1
    penalty_coefficient: float = 10.0
    cap: int = DEFAULT_CAP

    @classmethod
    def from_config(cls, cfg: GaConfig, cap: int = DEFAULT_CAP) -> SearchSpace:
        return cls(cfg.candidate_buses, cfg.p_grid, cfg.q_grid, cfg.n_dg, cfg.penalty_coefficient, cap)

    def as_config(self) -> GaConfig:
        return GaConfig(n_dg=self.n_dg, candidate_buses=self.candidate_buses, p_grid=self.p_grid,
                        q_grid=self.q_grid, penalty_coefficient=self.penalty_coefficient)

    @property
    def options(self) -> list[Gene]:
        return [(b, i, j) for b in sorted(self.candidate_buses)
                for i in range(len(self.p_grid)) for j in range(len(self.q_grid))]

    @property
    def count(self) -> int:
        """Multisets of n_dg units drawn from the per-unit options."""
        m = len(self.candidate_buses) * len(self.p_grid) * len(self.q_grid)
        return math.comb(m + self.n_dg - 1, self.n_dg)

    def plans(self):
        """Gene tuples in lexicographic order, each multiset once."""
        return itertools.combinations_with_replacement(self.options, self.n_dg)


@dataclass(frozen=True)
class ScoredPlan:
    genes: tuple[Gene, ...]
    plan: DGPlan
    fitness: float
    llri: float
    vpii: float
    ltapii: float
    bi: float
    violations: int


def _scan(net: Network, space: SearchSpace, w: IndexWeights, opts: SolverOptions | None) -> list[ScoredPlan]:
    if space.count > space.cap:
        raise SearchSpaceTooLarge(space.count, space.cap)
    cfg = space.as_config()
    ev = FitnessEvaluator(net, w, space.penalty_coefficient, opts)
    out = []
    for genes in space.plans():
        plan = decode(genes, cfg)
        e = ev(plan)
        r = e.report
        nan = math.nan
        out.append(ScoredPlan(genes, plan, e.fitness,
                              r.llri if r else nan, r.vpii if r else nan, r.ltapii if r else nan,
                              r.bi if r else nan, len(r.constraint_violations) if r else -1))
    return out


def exhaustive_search(net: Network, space: SearchSpace, w: IndexWeights,
                      opts: SolverOptions | None = None) -> list[ScoredPlan]:
    """Every plan in the space, best first; ties broken by lexicographic gene order."""
    return sorted(_scan(net, space, w, opts), key=lambda s: (-s.fitness, s.genes))


def sweep_report(net: Network, space: SearchSpace, w: IndexWeights,
                 opts: SolverOptions | None = None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["plan", "llri", "vpii", "ltapii", "bi", "violations"])
    for s in _scan(net, space, w, opts):
        wr.writerow([s.plan.describe(), repr(s.llri), repr(s.vpii), repr(s.ltapii), repr(s.bi), s.violations])
    return buf.getvalue()

"""Genetic algorithm for DG siting and sizing.

A chromosome is a fixed-length tuple of ``(bus, p_step, q_step)`` genes, one
per DG unit; sizes come from discrete MW / MVAr menus. Fitness is the benefit
index of the decoded plan minus a linear penalty on constraint excess.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .indices import IndexReport, IndexWeights, index_report
from .network import DGPlan, DGUnit, Network, apply_dg
from .powerflow import PowerFlowError, PowerFlowSolution, SolverOptions, solve

WORST = -math.inf

Gene = tuple[int, int, int]


class GaConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GaConfig:
    n_dg: int = 1
    candidate_buses: tuple[int, ...] = ()
    p_grid: tuple[float, ...] = (0.0,)  # MW
    q_grid: tuple[float, ...] = (0.0,)  # MVAr
    population_size: int = 40
    mutation_rate: float = 0.05
    penalty_coefficient: float = 10.0
    stall_generations: int = 15
    max_generations: int = 200
    rng_seed: int = 0
    # per-unit capability limits; None means the grid's own range
    p_min: float | None = None
    p_max: float | None = None
    q_min: float | None = None
    q_max: float | None = None

    def __post_init__(self):
        for name in ("candidate_buses", "p_grid", "q_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.n_dg < 1:
            raise GaConfigError("n_dg must be >= 1")
        if not self.candidate_buses:
            raise GaConfigError("no candidate buses")
        if not self.p_grid or not self.q_grid:
            raise GaConfigError("size grids must be non-empty")
        if self.population_size < 4 or self.population_size % 2:
            raise GaConfigError("population_size must be even and >= 4")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise GaConfigError("mutation_rate must lie in [0, 1]")
        if self.penalty_coefficient < 0:
            raise GaConfigError("penalty_coefficient must be non-negative")
        if self.stall_generations < 1 or self.max_generations < 0:
            raise GaConfigError("stall_generations >= 1 and max_generations >= 0 required")

    @property
    def unit_limits(self) -> tuple[float, float, float, float]:
        return (min(self.p_grid) if self.p_min is None else self.p_min,
                max(self.p_grid) if self.p_max is None else self.p_max,
                min(self.q_grid) if self.q_min is None else self.q_min,
                max(self.q_grid) if self.q_max is None else self.q_max)

    @classmethod
    def from_text(cls, text: str) -> GaConfig:
        """Read ``key = value`` lines; lists are comma separated, ``#`` starts a comment."""
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise GaConfigError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key in _LIST_INT:
                kw[key] = tuple(_expand_ints(val))
            elif key in _LIST_FLOAT:
                kw[key] = tuple(float(x) for x in val.split(",") if x.strip())
            elif key in _INT:
                kw[key] = int(val)
            elif key in _FLOAT:
                kw[key] = float(val)
            else:
                raise GaConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            return cls(**kw)
        except TypeError as exc:
            raise GaConfigError(str(exc)) from None

    def to_text(self) -> str:
        out = []
        for k, v in asdict(self).items():
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            out.append(f"{k} = {v}")
        return "\n".join(out) + "\n"


_LIST_INT = {"candidate_buses"}
_LIST_FLOAT = {"p_grid", "q_grid"}
_INT = {"n_dg", "population_size", "stall_generations", "max_generations", "rng_seed"}
_FLOAT = {"mutation_rate", "penalty_coefficient", "p_min", "p_max", "q_min", "q_max"}


def _expand_ints(text: str) -> list[int]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "-" in tok[1:]:
            a, b = tok.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(tok))
    return out


@dataclass
class Chromosome:
    genes: tuple[Gene, ...]
    fitness: float | None = None


def check_chromosome(chrom: Chromosome, cfg: GaConfig) -> None:
    if len(chrom.genes) != cfg.n_dg:
        raise GaConfigError(f"chromosome has {len(chrom.genes)} genes, expected {cfg.n_dg}")
    for bus, i, j in chrom.genes:
        if bus not in cfg.candidate_buses:
            raise GaConfigError(f"bus {bus} is not a candidate bus")
        if not (0 <= i < len(cfg.p_grid) and 0 <= j < len(cfg.q_grid)):
            raise GaConfigError(f"size index ({i}, {j}) outside the size grids")


def decode(chrom: Chromosome | tuple[Gene, ...], cfg: GaConfig) -> DGPlan:
    genes = chrom.genes if isinstance(chrom, Chromosome) else chrom
    p_min, p_max, q_min, q_max = cfg.unit_limits
    units = []
    for bus, i, j in genes:
        if not (0 <= i < len(cfg.p_grid) and 0 <= j < len(cfg.q_grid)):
            raise GaConfigError(f"size index ({i}, {j}) outside the size grids")
        units.append(DGUnit(bus, cfg.p_grid[i], cfg.q_grid[j], p_min, p_max, q_min, q_max))
    return DGPlan(tuple(units)).merged()


def plan_key(genes: tuple[Gene, ...]) -> tuple[Gene, ...]:
    """Order-free identity of a gene tuple (plans are multisets of units)."""
    return tuple(sorted(genes))


# -- fitness -----------------------------------------------------------------

@dataclass
class Evaluation:
    fitness: float
    report: IndexReport | None  # None when the with-DG power flow failed
    penalty: float = 0.0


class FitnessEvaluator:
    """Scores DG plans against a fixed base case; shared by the GA and the exhaustive oracle."""

    def __init__(self, net: Network, weights: IndexWeights, penalty_coefficient: float,
                 opts: SolverOptions | None = None):
        self.net = net
        self.weights = weights
        self.penalty_coefficient = penalty_coefficient
        self.opts = opts or SolverOptions()
        try:
            self.base: PowerFlowSolution = solve(net, self.opts)
        except PowerFlowError as exc:
            raise GaConfigError(f"base case power flow failed: {exc}") from exc

    def __call__(self, plan: DGPlan) -> Evaluation:
        net_dg = apply_dg(self.net, plan)
        try:
            sol = solve(net_dg, self.opts)
        except PowerFlowError:
            return Evaluation(WORST, None)
        rep = index_report(self.base, self.net, sol, net_dg, plan, self.weights)
        pen = self.penalty_coefficient * sum(v.excess for v in rep.constraint_violations)
        return Evaluation(rep.bi - pen, rep, pen)


def evaluate(chrom: Chromosome, net: Network, cfg: GaConfig, w: IndexWeights,
             opts: SolverOptions | None = None) -> float:
    chrom.fitness = FitnessEvaluator(net, w, cfg.penalty_coefficient, opts)(decode(chrom, cfg)).fitness
    return chrom.fitness


# -- operators ---------------------------------------------------------------

def random_chromosome(cfg: GaConfig, rng: np.random.Generator) -> Chromosome:
    return Chromosome(tuple(
        (int(cfg.candidate_buses[rng.integers(len(cfg.candidate_buses))]),
         int(rng.integers(len(cfg.p_grid))), int(rng.integers(len(cfg.q_grid))))
        for _ in range(cfg.n_dg)))


def select(population: list[Chromosome]) -> list[Chromosome]:
    """Keep the better half; ties go to the lower ordinal."""
    if any(c.fitness is None for c in population):
        raise GaConfigError("selection over an unevaluated chromosome")
    order = sorted(range(len(population)), key=lambda k: (-population[k].fitness, k))
    return [population[k] for k in order[: len(population) // 2]]


def crossover(a: Chromosome, b: Chromosome, rng: np.random.Generator) -> tuple[Chromosome, Chromosome]:
    """Single-point crossover at a gene boundary; with one gene the cut falls after the bus field."""
    n = len(a.genes)
    if n != len(b.genes):
        raise GaConfigError("parents differ in length")
    fa = [x for g in a.genes for x in g]
    fb = [x for g in b.genes for x in g]
    cut = 1 if n == 1 else 3 * int(rng.integers(1, n))
    ca, cb = fa[:cut] + fb[cut:], fb[:cut] + fa[cut:]
    regroup = lambda f: tuple(tuple(f[k:k + 3]) for k in range(0, 3 * n, 3))  # noqa: E731
    return Chromosome(regroup(ca)), Chromosome(regroup(cb))


def mutate(chrom: Chromosome, cfg: GaConfig, rng: np.random.Generator) -> Chromosome:
    """Redraw each gene field from its domain with probability ``mutation_rate``."""
    genes = []
    changed = False
    for bus, i, j in chrom.genes:
        draws = rng.random(3) < cfg.mutation_rate
        if draws[0]:
            bus = int(cfg.candidate_buses[rng.integers(len(cfg.candidate_buses))])
        if draws[1]:
            i = int(rng.integers(len(cfg.p_grid)))
        if draws[2]:
            j = int(rng.integers(len(cfg.q_grid)))
        changed |= bool(draws.any())
        genes.append((bus, i, j))
    return Chromosome(tuple(genes), None if changed else chrom.fitness)


# -- driver ------------------------------------------------------------------

@dataclass
class GaState:
    population: list[Chromosome]
    rng: np.random.Generator
    generation: int = 0


@dataclass
class GaResult:
    best_plan: DGPlan
    best_genes: tuple[Gene, ...]
    best_fitness: float
    history: list[tuple[float, float]] = field(default_factory=list)  # (best, mean) per generation
    generations_run: int = 0
    evaluations: int = 0
    best_report: IndexReport | None = field(default=None, compare=False)

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "best", "mean"])
        for g, (b, m) in enumerate(self.history):
            w.writerow([g, repr(b), repr(m)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "best_plan": self.best_plan.describe(),
            "best_genes": [list(g) for g in self.best_genes],
            "best_fitness": self.best_fitness,
            "history": [list(h) for h in self.history],
            "generations_run": self.generations_run,
            "evaluations": self.evaluations,
        }, indent=1)


class _Scorer:
    """Memoised plan scoring with an optional process pool; results are consumed in ordinal order."""

    def __init__(self, evaluator: FitnessEvaluator, cfg: GaConfig, workers: int = 1):
        self.evaluator = evaluator
        self.cfg = cfg
        self.cache: dict[tuple[Gene, ...], Evaluation] = {}
        self.workers = workers
        self.calls = 0

    def score(self, chroms: list[Chromosome]) -> None:
        todo = []
        for c in chroms:
            if c.fitness is None:
                k = plan_key(c.genes)
                if k not in self.cache and k not in todo:
                    todo.append(k)
        if todo:
            plans = [decode(k, self.cfg) for k in todo]
            if self.workers > 1 and len(plans) > 1:
                with ProcessPoolExecutor(self.workers) as ex:
                    results = list(ex.map(self.evaluator, plans))
            else:
                results = [self.evaluator(p) for p in plans]
            self.cache.update(zip(todo, results))
            self.calls += len(todo)
        for c in chroms:
            if c.fitness is None:
                c.fitness = self.cache[plan_key(c.genes)].fitness


def _stats(pop: list[Chromosome]) -> tuple[float, float]:
    fit = [c.fitness for c in pop]
    finite = [f for f in fit if math.isfinite(f)]
    return max(fit), (float(np.mean(finite)) if finite else WORST)


def _best(pop: list[Chromosome]) -> Chromosome:
    return pop[max(range(len(pop)), key=lambda k: (pop[k].fitness, -k))]


def step_generation(state: GaState, cfg: GaConfig, score) -> GaState:
    """Select the better half, refill by pairwise crossover, mutate all but the elite, evaluate."""
    survivors = select(state.population)
    elite = survivors[0]
    order = state.rng.permutation(len(survivors))
    children = []
    for k in range(0, len(order) - 1, 2):
        children.extend(crossover(survivors[order[k]], survivors[order[k + 1]], state.rng))
    if len(order) % 2:
        # odd survivor count: the unpaired parent crosses with the elite
        children.extend(crossover(survivors[order[-1]], elite, state.rng))
    pool = survivors + children[: len(state.population) - len(survivors)]
    new_pop = [pool[0]] + [mutate(c, cfg, state.rng) for c in pool[1:]]
    score(new_pop)
    return replace(state, population=new_pop, generation=state.generation + 1)


def optimize(net: Network, cfg: GaConfig, w: IndexWeights, opts: SolverOptions | None = None,
             workers: int = 1, evaluator: FitnessEvaluator | None = None) -> GaResult:
    """Run the GA until the best fitness stalls for ``stall_generations`` or the generation cap."""
    for bus in cfg.candidate_buses:
        if bus not in net.bus_index:
            raise GaConfigError(f"candidate bus {bus} not in network")
        if net.bus(bus).kind == "slack":
            raise GaConfigError(f"candidate bus {bus} is the slack bus")
    evaluator = evaluator or FitnessEvaluator(net, w, cfg.penalty_coefficient, opts)
    scorer = _Scorer(evaluator, cfg, workers)
    rng = np.random.default_rng(cfg.rng_seed)
    state = GaState([random_chromosome(cfg, rng) for _ in range(cfg.population_size)], rng)
    scorer.score(state.population)
    history = [_stats(state.population)]
    stall = 0
    while state.generation < cfg.max_generations and stall < cfg.stall_generations:
        state = step_generation(state, cfg, scorer.score)
        history.append(_stats(state.population))
        stall = stall + 1 if history[-1][0] <= history[-2][0] else 0
    best = _best(state.population)
    ev = scorer.cache[plan_key(best.genes)]
    return GaResult(decode(best, cfg), plan_key(best.genes), best.fitness, history,
                    state.generation, scorer.calls, ev.report)


def load_config(path: Path) -> GaConfig:
    return GaConfig.from_text(Path(path).read_text(encoding="utf-8"))

"""Grammar-guided genetic programming over NPI parse trees."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .bans import BanTemplate, check_tree, incoming_bans, load_bans
from .generate import GenConfig, GenerationExhausted, generator_for, rng_for, sample_population
from .grammar import ExtendedGrammar, Kind, Node, load_extension, render_phenotype, tree_depth
from .interventions import ModelBinding, compile_npi, default_binding
from .sim import DiseaseParams, Metrics, PopulationParams, run_episode, synthesize_population

log = logging.getLogger(__name__)

_WORLD_STREAM = 0xB0B
_RUN_STREAM = 0xE7A1
_EVOLVE_STREAM = 0x6E0


@dataclass(frozen=True)
class GoalFunction:
    w_work: float = 1.0
    w_school: float = 1.0
    w_sick: float = 2.0

    def __post_init__(self):
        ws = (self.w_work, self.w_school, self.w_sick)
        if min(ws) < 0 or max(ws) == 0:
            raise ValueError("goal weights must be non-negative and not all zero")

    def __call__(self, m: Metrics) -> float:
        return self.w_work * m.lost_work_days + self.w_school * m.lost_school_days + self.w_sick * m.sick_days

    def describe(self) -> str:
        terms = []
        for w, name in ((self.w_work, "lost_work_days"), (self.w_school, "lost_school_days"),
                        (self.w_sick, "sick_days")):
            if w == 0:
                continue
            terms.append(name if w == 1 else f"{w:g} * {name}")
        return " + ".join(terms)


def fitness_from_goal(goal_value: float) -> float:
    return 1.0 / (goal_value + 1.0)


@dataclass(frozen=True)
class Scenario:
    """Everything a worker process needs to evaluate a phenotype."""

    population: PopulationParams = field(default_factory=PopulationParams)
    disease: DiseaseParams = field(default_factory=DiseaseParams)
    horizon: int = 365
    replicates: int = 1
    extension: str | None = None
    bans: str | None = None

    def grammar(self) -> ExtendedGrammar:
        return _grammar(self.extension)

    def templates(self) -> tuple[BanTemplate, ...]:
        return _templates(self.bans, self.extension)


@lru_cache(maxsize=None)
def _grammar(extension):
    return load_extension(extension)


@lru_cache(maxsize=None)
def _templates(bans, extension):
    return tuple(load_bans(bans, _grammar(extension)))


_WORLD_CACHE: dict = {}


def _base_world(scenario: Scenario, seed: int, replicate: int):
    key = (repr(scenario.population), repr(scenario.disease), seed, replicate)
    w = _WORLD_CACHE.get(key)
    if w is None:
        if len(_WORLD_CACHE) > 64:
            _WORLD_CACHE.clear()
        w = _WORLD_CACHE[key] = synthesize_population(
            scenario.population, scenario.disease, rng_for(seed, _WORLD_STREAM, replicate))
    return w


def simulate(phenotype: str | None, scenario: Scenario, seed: int,
             binding: ModelBinding | None = None) -> Metrics:
    """Mean metrics over ``scenario.replicates`` runs.

    Every phenotype is run on the same synthetic worlds and random streams
    for a given seed, so the result depends only on the phenotype.
    """
    interventions = []
    if phenotype is not None:
        interventions.append(compile_npi(phenotype, scenario.grammar(), binding))
    acc = np.zeros(3)
    for r in range(scenario.replicates):
        world = _base_world(scenario, seed, r).copy(rng_for(seed, _RUN_STREAM, r))
        m = run_episode(world, interventions, scenario.horizon)
        acc += (m.sick_days, m.lost_work_days, m.lost_school_days)
    acc /= scenario.replicates
    return Metrics(*map(float, acc))


def _evaluate_job(args):
    phenotype, scenario, seed = args
    t0 = time.perf_counter()
    m = simulate(phenotype, scenario, seed)
    return m, time.perf_counter() - t0


@dataclass
class Individual:
    genotype: Node
    phenotype: str = ""
    fitness: float | None = None
    metrics: Metrics | None = None
    provenance: tuple[str, ...] = ("initial",)
    runtime: float = 0.0

    def __post_init__(self):
        if not self.phenotype:
            self.phenotype = render_phenotype(self.genotype)


def evaluate(ind: Individual, goal: GoalFunction, scenario: Scenario, seed: int,
             binding: ModelBinding | None = None) -> tuple[float, Metrics]:
    t0 = time.perf_counter()
    m = simulate(ind.phenotype, scenario, seed, binding)
    ind.metrics, ind.fitness = m, fitness_from_goal(goal(m))
    ind.runtime = time.perf_counter() - t0
    return ind.fitness, m


def tournament_select(pop: Sequence[Individual], k: int, rng: np.random.Generator) -> tuple[int, int]:
    """Indices of the two fittest among ``k`` distinct uniform draws."""
    if not 2 <= k <= len(pop):
        raise ValueError("tournament size must be between 2 and the population size")
    drawn = rng.choice(len(pop), size=k, replace=False)
    ranked = sorted(drawn.tolist(), key=lambda i: (-pop[i].fitness, i))
    return ranked[0], ranked[1]


def _crossover_points(t: Node, g: ExtendedGrammar):
    return [(p, n) for p, n in t.walk() if p and not n.symbol.is_terminal]


def crossover(a: Node, b: Node, templates: Iterable[BanTemplate], max_depth: int,
              rng: np.random.Generator, g: ExtendedGrammar | None = None) -> tuple[Node, Node]:
    """Swap subtrees at a random legal pair of equally-labelled nodes.

    A pair is legal when both children respect the depth bound and pass
    :func:`check_tree`.  Pairs are tried in a random order, so the first
    legal one is uniform over all legal pairs.  Without one, the parents are
    returned unchanged.
    """
    templates = tuple(templates)
    pa, pb = _crossover_points(a, g), _crossover_points(b, g)
    pairs = [(i, j) for i, (_, x) in enumerate(pa) for j, (_, y) in enumerate(pb) if x.label == y.label]
    for k in rng.permutation(len(pairs)):
        i, j = pairs[k]
        (path_a, sub_a), (path_b, sub_b) = pa[i], pb[j]
        if len(path_a) + sub_b.height() > max_depth or len(path_b) + sub_a.height() > max_depth:
            continue
        c1, c2 = a.replace(path_a, sub_b), b.replace(path_b, sub_a)
        if check_tree(c1, templates) or check_tree(c2, templates):
            continue
        return c1, c2
    return a, b


def mutate(t: Node, g: ExtendedGrammar, templates: Iterable[BanTemplate], max_depth: int,
           rng: np.random.Generator) -> Node:
    """Regrow the subtree under a uniformly chosen nonterminal or hybrid node."""
    templates = tuple(templates)
    points = [(p, n) for p, n in t.walk() if not n.symbol.is_terminal]
    path, node = points[int(rng.integers(len(points)))]
    budget = max_depth - len(path)
    incoming = incoming_bans(t, path, templates)
    gen = generator_for(g, templates)
    if node.symbol.kind is Kind.HYBRID:
        # a new terminal changes this edge's bans; keep only ones the rest of the tree tolerates
        options = []
        for term in g.terminals_of(node.label):
            if term in incoming.get(node.label):
                continue
            cand = t.replace(path, gen.grow(node.label, budget, incoming, rng, {node.label: term}))
            if not check_tree(cand, templates):
                options.append(cand)
        if not options:
            return t
        return options[int(rng.integers(len(options)))]
    try:
        out = t.replace(path, gen.grow(node.label, budget, incoming, rng))
    except GenerationExhausted:
        log.info("mutation at %s could not regrow; keeping the tree", node.label)
        return t
    if tree_depth(out) > max_depth or check_tree(out, templates):
        log.warning("regrown tree failed validation; keeping the original")
        return t
    return out


@dataclass(frozen=True)
class GgpParams:
    population_size: int = 10
    generations: int = 4
    crossover_prob: float = 0.7
    mutation_prob: float = 0.5
    tournament_size: int = 3
    max_depth: int = 5
    replicates: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if not (0 <= self.crossover_prob <= 1 and 0 <= self.mutation_prob <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.tournament_size > self.population_size:
            raise ValueError("tournament_size exceeds population_size")
        if self.generations < 1:
            raise ValueError("generations must be positive")


@dataclass
class GenerationRecord:
    generation: int
    mean_fitness: float
    max_fitness: float
    best_phenotype: str
    best_metrics: Metrics
    individuals: list[dict] = field(default_factory=list)


@dataclass
class EvolutionResult:
    history: list[GenerationRecord]
    best: Individual
    populations: list[list[Individual]]


class _Evaluator:
    """Evaluates a population with a phenotype cache and optional worker processes."""

    def __init__(self, scenario: Scenario, goal: GoalFunction, seed: int, workers: int = 1,
                 binding: ModelBinding | None = None):
        self.scenario, self.goal, self.seed = scenario, goal, seed
        self.workers = workers
        self.binding = binding
        self.cache: dict[str, tuple[Metrics, float]] = {}

    def __call__(self, pop: list[Individual]) -> None:
        todo = sorted({ind.phenotype for ind in pop if ind.phenotype not in self.cache})
        if todo:
            if self.workers > 1 and self.binding is None:
                jobs = [(p, self.scenario, self.seed) for p in todo]
                with ProcessPoolExecutor(self.workers) as ex:
                    results = list(ex.map(_evaluate_job, jobs))
            else:
                results = []
                for p in todo:
                    t0 = time.perf_counter()
                    m = simulate(p, self.scenario, self.seed, self.binding)
                    results.append((m, time.perf_counter() - t0))
            for p, (m, dt) in zip(todo, results):
                self.cache[p] = (m, dt)
                log.info("evaluated %s in %.3fs", p, dt)
        for ind in pop:
            m, dt = self.cache[ind.phenotype]
            ind.metrics, ind.fitness, ind.runtime = m, fitness_from_goal(self.goal(m)), dt


def _record(gen: int, pop: list[Individual]) -> GenerationRecord:
    fits = [ind.fitness for ind in pop]
    best = pop[int(np.argmax(fits))]
    return GenerationRecord(
        generation=gen,
        mean_fitness=float(np.mean(fits)),
        max_fitness=float(max(fits)),
        best_phenotype=best.phenotype,
        best_metrics=best.metrics,
        individuals=[
            {"phenotype": i.phenotype, "fitness": i.fitness, "metrics": asdict(i.metrics),
             "provenance": list(i.provenance), "runtime_s": i.runtime}
            for i in pop
        ],
    )


def run_evolution(params: GgpParams, grammar: ExtendedGrammar, templates: Iterable[BanTemplate],
                  scenario: Scenario, goal: GoalFunction, binding: ModelBinding | None = None,
                  workers: int = 1) -> EvolutionResult:
    """Evolve ``params.generations`` generations; generation 0 is random."""
    templates = tuple(templates)
    evaluator = _Evaluator(scenario, goal, params.master_seed, workers, binding)
    cfg = GenConfig(max_depth=params.max_depth, rng_seed=params.master_seed)
    pop = [Individual(t) for t in sample_population(params.population_size, grammar, templates, cfg,
                                                     params.master_seed)]
    evaluator(pop)
    history, populations = [_record(0, pop)], [pop]
    rng = rng_for(params.master_seed, _EVOLVE_STREAM)

    for gen in range(1, params.generations):
        elite = max(range(len(pop)), key=lambda i: (pop[i].fitness, -i))
        nxt = [Individual(pop[elite].genotype, pop[elite].phenotype, provenance=("clone",))]
        while len(nxt) < params.population_size:
            i, j = tournament_select(pop, params.tournament_size, rng)
            a, b = pop[i].genotype, pop[j].genotype
            tags = ()
            if rng.random() < params.crossover_prob:
                a, b = crossover(a, b, templates, params.max_depth, rng, grammar)
                tags = ("crossover",)
            for child in (a, b):
                if len(nxt) >= params.population_size:
                    break
                ctags = tags
                if rng.random() < params.mutation_prob:
                    child = mutate(child, grammar, templates, params.max_depth, rng)
                    ctags = tags + ("mutation",)
                nxt.append(Individual(child, provenance=ctags or ("clone",)))
        pop = nxt
        evaluator(pop)
        history.append(_record(gen, pop))
        populations.append(pop)

    best = max((ind for p in populations for ind in p), key=lambda ind: ind.fitness)
    return EvolutionResult(history, best, populations)

import math
import re
from collections import Counter

import numpy as np
import pytest

from adios.bans import BanTemplate, check_tree
from adios.generate import GenConfig, rng_for, sample_population
from adios.gggp import (
    GgpParams,
    GoalFunction,
    Individual,
    Scenario,
    crossover,
    evaluate,
    fitness_from_goal,
    mutate,
    run_evolution,
    simulate,
    tournament_select,
)
from adios.grammar import parse_intervention, render_phenotype, tree_depth
from adios.sim import DiseaseParams, Metrics, PopulationParams

SMALL = Scenario(PopulationParams(n_agents=200), DiseaseParams(initial_infected=5), horizon=60)


def ind(fitness, text="[true] a!(self-isolate-7)"):
    i = Individual(genotype=None, phenotype=text)
    i.fitness = fitness
    return i


def test_fitness_formula():
    assert fitness_from_goal(0) == 1
    assert fitness_from_goal(0.35) == pytest.approx(0.7407407407)
    assert fitness_from_goal(9.15) == pytest.approx(0.0985221675)


def test_scenario4_reference_goal():
    goal = GoalFunction(1, 1, 2)
    value = goal(Metrics(sick_days=0.03, lost_work_days=0.13, lost_school_days=0.16))
    assert value == pytest.approx(0.35)
    assert goal.describe() == "lost_work_days + lost_school_days + 2 * sick_days"
    assert GoalFunction(0, 0, 1).describe() == "sick_days"


def test_goal_validation():
    with pytest.raises(ValueError):
        GoalFunction(0, 0, 0)
    with pytest.raises(ValueError):
        GoalFunction(-1, 1, 1)


def test_evaluation_is_deterministic(std_grammar):
    t = parse_intervention("[true] a>a(symptoms?).a!(self-isolate-7)", std_grammar)
    a, b = Individual(t), Individual(t)
    assert evaluate(a, GoalFunction(), SMALL, 3) == evaluate(b, GoalFunction(), SMALL, 3)


def test_full_tournament_takes_two_best():
    pop = [ind(f) for f in (0.2, 0.9, 0.1, 0.5, 0.3)]
    rng = rng_for(0)
    for _ in range(20):
        assert tournament_select(pop, len(pop), rng) == (1, 3)


def test_three_way_tournament():
    pop = [ind(f) for f in (0.1, 0.9, 0.5)]
    assert tournament_select(pop, 3, rng_for(1)) == (1, 2)
    with pytest.raises(ValueError):
        tournament_select(pop, 4, rng_for(1))


def test_tournament_frequencies_follow_rank():
    fits = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    pop = [ind(f) for f in fits]
    rng = rng_for(2)
    wins = Counter()
    for _ in range(10000):
        i, j = tournament_select(pop, 3, rng)
        wins[i] += 1
        wins[j] += 1
    n = len(pop)
    # i is picked when drawn and not both other draws outrank it
    expected = [3 / n * (1 - math.comb(n - 1 - i, 2) / math.comb(n - 1, 2)) for i in range(n)]
    assert expected == sorted(expected)
    for i in range(n):
        p = expected[i]
        assert abs(wins[i] / 10000 - p) <= 5 * math.sqrt(p * (1 - p) / 10000) + 1e-12
    assert wins[0] == 0  # the worst can never be among the best two of three


def test_crossover_of_identical_parents(std_grammar, std_bans):
    for k, t in enumerate(sample_population(30, std_grammar, std_bans, GenConfig(), 1)):
        for c in crossover(t, t, std_bans, 5, rng_for(k), std_grammar):
            assert tree_depth(c) <= 5 and check_tree(c, std_bans) == []


def test_crossover_same_positions_is_identity(std_grammar, std_bans):
    t = parse_intervention("[true] a>a(child?).(a!(self-isolate-7)&a2g(School).g!(close-group-7))", std_grammar)
    for path, node in t.walk():
        if path and not node.symbol.is_terminal:
            assert t.replace(path, node) == t


def test_crossover_respects_ban(example):
    ban = (BanTemplate("adult?", {"r_ag": {"School"}}),)
    a = parse_intervention("[true] a>a(adult?).a!(self-isolate!)", example)
    b = parse_intervention("[true] a2g(School).g!(close!)", example)
    children = set()
    for k in range(200):
        c1, c2 = crossover(a, b, ban, 5, rng_for(k), example)
        assert check_tree(c1, ban) == [] and check_tree(c2, ban) == []
        children.add((render_phenotype(c1), render_phenotype(c2)))
    # the measure under adult? cannot be swapped for the school branch ...
    assert not any("adult?).a2g(School)" in c for pair in children for c in pair)
    # ... but the whole branch under the trigger can
    assert ("[true] a2g(School).g!(close!)", "[true] a>a(adult?).a!(self-isolate!)") in children


def test_crossover_without_legal_pair_returns_parents(example):
    a = parse_intervention("[true] a!(self-isolate!)", example)
    b = parse_intervention("[true] g!(close!)", example)
    # the only shared nonterminal below the root is the trigger, which is identical
    c1, c2 = crossover(a, b, (), 5, rng_for(0), example)
    assert (c1, c2) == (a, b)


def test_crossover_fuzz(std_grammar, std_bans):
    pop = sample_population(60, std_grammar, std_bans, GenConfig(), 5)
    rng = rng_for(6)
    for _ in range(1000):
        i, j = rng.integers(len(pop), size=2)
        c1, c2 = crossover(pop[i], pop[j], std_bans, 5, rng, std_grammar)
        for c in (c1, c2):
            assert tree_depth(c) <= 5 and check_tree(c, std_bans) == []


def test_mutation_of_trigger_is_identity(std_grammar, std_bans):
    t = parse_intervention("[true] a>a(child?).a!(self-isolate-7)", std_grammar)
    rng = rng_for(0)
    seen = set()
    for _ in range(300):
        m = mutate(t, std_grammar, std_bans, 5, rng)
        # the trigger has one alternative, so it never changes
        assert m.children[1] == t.children[1]
        seen.add(render_phenotype(m))
    assert len(seen) > 3


def test_mutation_fuzz(std_grammar, std_bans):
    pop = sample_population(60, std_grammar, std_bans, GenConfig(), 8)
    rng = rng_for(9)
    for k in range(1000):
        m = mutate(pop[k % 60], std_grammar, std_bans, 5, rng)
        assert tree_depth(m) <= 5 and check_tree(m, std_bans) == []


def test_mutating_filter_respects_predecessor(std_grammar, std_bans):
    t = parse_intervention("[true] a>a(child?).a>a(symptoms?).a!(self-isolate-7)", std_grammar)
    shape = re.compile(r"\[true\] a>a\(child\?\)\.a>a\(([^)]*)\)\.a!\(self-isolate-7\)$")
    changed = set()
    for k in range(400):
        m = shape.match(render_phenotype(mutate(t, std_grammar, std_bans, 5, rng_for(k))))
        if m and m.group(1) != "symptoms?":
            changed.add(m.group(1))
    # the second filter took a new terminal, never the one its predecessor used
    assert changed
    assert "child?" not in changed


def test_params_validation():
    with pytest.raises(ValueError):
        GgpParams(crossover_prob=1.5)
    with pytest.raises(ValueError):
        GgpParams(population_size=3, tournament_size=4)
    with pytest.raises(ValueError):
        GgpParams(generations=0)


def test_single_generation_is_random_search(std_grammar, std_bans):
    params = GgpParams(population_size=6, generations=1, master_seed=2)
    res = run_evolution(params, std_grammar, std_bans, SMALL, GoalFunction())
    assert len(res.history) == 1 and len(res.populations) == 1
    assert res.best.fitness == max(i.fitness for i in res.populations[0])
    expected = [render_phenotype(t) for t in sample_population(6, std_grammar, std_bans, GenConfig(), 2)]
    assert [i.phenotype for i in res.populations[0]] == expected


def test_evolution_shape_and_elitism(std_grammar, std_bans):
    params = GgpParams(master_seed=4)
    res = run_evolution(params, std_grammar, std_bans, SMALL, GoalFunction())
    assert [h.generation for h in res.history] == [0, 1, 2, 3]
    assert all(len(p) == 10 for p in res.populations)
    maxes = [h.max_fitness for h in res.history]
    assert maxes == sorted(maxes)
    for prev, cur in zip(res.populations, res.populations[1:]):
        best = max(prev, key=lambda i: i.fitness)
        assert cur[0].phenotype == best.phenotype and cur[0].provenance == ("clone",)
    tags = {t for p in res.populations[1:] for i in p for t in i.provenance}
    assert tags <= {"clone", "crossover", "mutation"}
    for p in res.populations:
        for i in p:
            assert check_tree(i.genotype, std_bans) == [] and tree_depth(i.genotype) <= 5
            assert i.fitness == pytest.approx(fitness_from_goal(GoalFunction()(i.metrics)))


def test_evolution_is_reproducible(std_grammar, std_bans):
    params = GgpParams(population_size=6, generations=3, master_seed=11)
    a = run_evolution(params, std_grammar, std_bans, SMALL, GoalFunction())
    b = run_evolution(params, std_grammar, std_bans, SMALL, GoalFunction())
    assert [(h.mean_fitness, h.max_fitness, h.best_phenotype) for h in a.history] == \
           [(h.mean_fitness, h.max_fitness, h.best_phenotype) for h in b.history]


def test_replicates_average():
    two = Scenario(SMALL.population, SMALL.disease, SMALL.horizon, replicates=2)
    m = simulate(None, two, 0)
    assert np.isfinite(m.sick_days) and m.sick_days > 0

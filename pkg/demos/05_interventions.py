"""
Executing an intervention
=========================

A parse tree compiles to a small plan of filters, mappings and measures.
Each tick the plan starts from every agent (or every group) and narrows
the set step by step.
"""

import numpy as np

from adios.generate import rng_for
from adios.gggp import Scenario, simulate
from adios.grammar import default_grammar
from adios.interventions import compile_npi
from adios.sim import DiseaseParams, PopulationParams, synthesize_population

g = default_grammar()
npi = compile_npi("[true] a>a(symptoms?).(a!(self-isolate-7)&a2g(Household).g2a(members).a!(self-isolate-7))", g)
print(npi.plan.describe())

world = synthesize_population(PopulationParams(n_agents=300), DiseaseParams(initial_infected=20), rng_for(3))
for _ in range(5):
    world.step()
npi.execute(world)
print("isolated from tomorrow:", int(world.isolated(world.tick + 1).sum()), "of", world.n_agents)

###############################################################################
# Whole-year comparison on the same world and random streams.

for text in (None,
             "[true] a>a(symptoms?).a!(self-isolate-7)",
             "[true] a>a(positive_test?).a!(self-isolate-14)",
             "[true] a!(self-isolate-14)"):
    m = simulate(text, Scenario(), seed=0)
    print(f"{str(text):50} sick={m.sick_days:6.3f} work={m.lost_work_days:7.2f} school={m.lost_school_days:7.2f}")

"""
Searching for interventions
===========================

Grammar-guided genetic programming: ten random trees, four generations,
tournament selection, ban-aware crossover and mutation, and the best tree
always carried over.  The goal trades lost work and school days against
twice the sick days.
"""

from adios.bans import default_bans
from adios.gggp import GgpParams, GoalFunction, Scenario, run_evolution
from adios.grammar import default_grammar

g = default_grammar()
goal = GoalFunction(w_work=1, w_school=1, w_sick=2)
print("minimising", goal.describe())

result = run_evolution(GgpParams(master_seed=7), g, default_bans(g), Scenario(), goal)
for rec in result.history:
    print(f"gen {rec.generation}: mean {rec.mean_fitness:.3f} max {rec.max_fitness:.3f}  {rec.best_phenotype}")

best = result.best
print("best:", best.phenotype)
print("fitness", round(best.fitness, 4), best.metrics)

"""
The epidemic model
==================

A synthetic town of 1000 people in households, schools and offices.  The
disease spreads by full mixing inside every open group; isolated people
only meet their household.
"""

import numpy as np

from adios.generate import rng_for
from adios.sim import DiseaseParams, GroupType, PopulationParams, State, run_episode, synthesize_population

world = synthesize_population(PopulationParams(), DiseaseParams(), rng_for(0))
for t in GroupType:
    print(f"{t.name.lower():9} groups: {(world.group_type == t).sum()}")

###############################################################################
# Run a year without interventions and watch the compartments.

history = []
metrics = run_episode(world, horizon=365, observer=lambda w: history.append(w.state_counts()))
history = np.array(history)
peak = history[:, State.INFECTIOUS_SYMPTOMATIC] + history[:, State.INFECTIOUS_ASYMPTOMATIC]
print("peak infectious:", peak.max(), "on day", peak.argmax())
print("never infected:", history[-1, State.SUSCEPTIBLE])
print(metrics)

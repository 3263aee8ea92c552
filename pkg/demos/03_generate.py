"""
Random interventions
====================

The generator derives trees top-down and only ever picks expansions that
can still be finished within the depth limit and the bans.  Every tree it
returns is valid, so no samples are thrown away.
"""

from collections import Counter

from adios.bans import default_bans
from adios.generate import GenConfig, sample_phenotypes
from adios.grammar import default_grammar

g = default_grammar()
bans = default_bans(g)

for line in sample_phenotypes(10, g, bans, GenConfig(max_depth=5), master_seed=1):
    print(line)

###############################################################################
# At depth three there is room for exactly one measure.

shortest = Counter(sample_phenotypes(3000, g, bans, GenConfig(max_depth=3), master_seed=2))
for text, n in shortest.most_common():
    print(f"{n:5}  {text}")

"""
Bans: ruling out pointless interventions
========================================

Filtering a set twice by the same property changes nothing, and closing
a household is just isolating its members.  Bans attached to tree edges
remove such choices from the grammar while an intervention is derived.
"""

from adios.bans import (
    EMPTY,
    BanTemplate,
    InterventionEdge,
    ResolvedBanSet,
    check_tree,
    default_bans,
    filter_alternatives,
    resolve_bans,
)
from adios.grammar import default_grammar, load_extension, parse_intervention

small = load_extension("example_extension.json")

# an abstract ban: after any agent filter, neither this filter nor the
# ones before it may be applied again
repeat = BanTemplate("p_a?", {"p_a?": {"self", "previous"}})
edge = InterventionEdge(path=(), symbol="starta", chosen={"p_a?": "symptoms?"})

first = resolve_bans([repeat], edge, EMPTY)
print("after a>a(symptoms?):", dict(first.forbidden))
print("remaining filters:", [t for _, t in filter_alternatives(small, "p_a?", first)])

chained = resolve_bans([repeat], edge, ResolvedBanSet.of({"p_a?": {"child?"}}))
print("after child? then symptoms?:", dict(chained.forbidden))

###############################################################################
# ``check_tree`` replays the bans over a finished tree.

g = default_grammar()
bans = default_bans(g)
for text in (
    "[true] a>a(symptoms?).a>a(symptoms?).a!(self-isolate-14)",
    "[true] a2g(Household).g!(close-group-7)",
    "[true] a>a(symptoms?).a>a(child?).a!(self-isolate-14)",
):
    problems = check_tree(parse_intervention(text, g), bans)
    print(text, "->", problems or "ok")

"""
Writing interventions in the NPI grammar
========================================

An intervention is a sentence of a context-free grammar.  The core rules
say how filters, mappings and measures chain together; an extension
supplies the vocabulary of one particular simulation model.
"""

from adios.grammar import default_grammar, load_extension, parse_intervention, render_phenotype, tree_depth

# the case-study vocabulary ships with the package
g = default_grammar()
for hybrid in ("p_a?", "p_g?", "r_aa", "r_ag", "r_ga", "p_a!", "p_g!"):
    print(f"{hybrid:5} -> {' | '.join(g.terminals_of(hybrid))}")

###############################################################################
# Parsing gives back a derivation tree.  Whitespace does not matter, and
# rendering always produces the canonical spelling.

text = "[true] a>a(positive_test?) .a!(self-isolate-14)"
tree = parse_intervention(text, g)
print(render_phenotype(tree))
print("depth:", tree_depth(tree))
print(tree.pretty())

###############################################################################
# Conjunctions apply two branches to the same set.  Here symptomatic
# people isolate and their schools close, written in the smaller
# vocabulary used for the textbook examples.

small = load_extension("example_extension.json")
both = parse_intervention("[true] a>a(symptoms?).(a!(self-isolate!)&a2g(School).g!(close!))", small)
print(both.pretty())

###############################################################################
# Mistakes are reported with the offset into the original text.

from adios.grammar import NPISyntaxError

try:
    parse_intervention("[true] a>a(symptoms?).a2g(School).a!(self-isolate-7)", g)
except NPISyntaxError as e:
    print(e)

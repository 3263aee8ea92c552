import pytest

from adios.grammar import (
    AmbiguityError,
    DuplicateRule,
    ExtendedGrammar,
    GrammarError,
    IncompleteTree,
    Kind,
    MissingHybridRule,
    Node,
    NPISyntaxError,
    Symbol,
    UnknownSymbol,
    builtin_core_grammar,
    extend_grammar,
    load_extension,
    parse_intervention,
    render_phenotype,
    tree_depth,
    validate_grammar,
)

from oracles import enumerate_trees

SCHOOL_CONJUNCTION = "[true] a>a(symptoms?).(a!(self-isolate!)&a2g(School).g!(close!))"
SMALL_VOCAB = {
    "trigger": ["true"],
    "p_a?": ["symptoms?", "child?", "adult?", "positive_test?"],
    "r_ag": ["School", "Office", "Household"],
    "p_a!": ["self-isolate!"],
    "p_g!": ["close!"],
}
SMALL_TERMINALS = sorted({t for alts in SMALL_VOCAB.values() for t in alts})


def test_core_rules_as_printed():
    g = builtin_core_grammar()
    assert g.start.name == "intervention"
    assert len(g.p["starta"].alternatives) == 5
    assert len(g.p["startg"].alternatives) == 5
    intervention = [[s.name for s in alt] for alt in g.p["intervention"].alternatives]
    assert intervention == [["[", "trigger", "]", "starta"], ["[", "trigger", "]", "startg"]]
    conj = [s.name for s in g.p["starta"].alternatives[0]]
    assert conj == ["(", "starta", "&", "starta", ")"]
    assert {s.name for s in g.h} == {"trigger", "p_a?", "p_g?", "p_a!", "p_g!", "r_aa", "r_ag", "r_ga", "r_gg"}
    assert not g.tau and not g.q


def test_core_grammar_alone_is_invalid():
    report = validate_grammar(builtin_core_grammar())
    assert any(v.kind == "missing-hybrid-rule" and v.symbol == "trigger" for v in report)


def test_extension_with_printed_vocabulary_is_valid():
    g = extend_grammar(builtin_core_grammar(), SMALL_TERMINALS, SMALL_VOCAB,
                       disabled=["r_aa", "r_ga", "r_gg", "p_g?"])
    assert validate_grammar(g) == []
    assert g.terminals_of("p_a?") == ("symptoms?", "child?", "adult?", "positive_test?")


def test_extension_rejects_undeclared_terminal():
    rules = dict(SMALL_VOCAB, **{"p_a!": ["teleport!"]})
    with pytest.raises(UnknownSymbol):
        extend_grammar(builtin_core_grammar(), SMALL_TERMINALS, rules, disabled=["r_aa", "r_ga", "r_gg", "p_g?"])


def test_extension_missing_reachable_hybrid():
    # p_g? is reachable through startg and neither defined nor disabled
    with pytest.raises(MissingHybridRule, match="p_g\\?"):
        extend_grammar(builtin_core_grammar(), SMALL_TERMINALS, SMALL_VOCAB, disabled=["r_aa", "r_ga", "r_gg"])


def test_extension_duplicate_rule():
    g = extend_grammar(builtin_core_grammar(), SMALL_TERMINALS, SMALL_VOCAB, disabled=["r_aa", "r_ga", "r_gg", "p_g?"])
    with pytest.raises(DuplicateRule):
        extend_grammar(g, ["true"], {"trigger": ["true"]})


def test_case_study_grammar_valid(std_grammar):
    assert validate_grammar(std_grammar) == []
    assert std_grammar.terminals_of("p_a?") == ("symptoms?", "child?", "adult?", "older_than_67?", "positive_test?")
    assert std_grammar.terminals_of("p_g?") == ("more_than_20_members?", "at_most_20_members?")
    assert std_grammar.terminals_of("p_a!") == ("self-isolate-14", "self-isolate-7")
    assert std_grammar.terminals_of("p_g!") == ("close-group-7",)
    assert std_grammar.terminals_of("trigger") == ("true",)


def test_overlapping_alphabets_reported(std_grammar):
    clash = Symbol("symptoms?", Kind.CORE_TERMINAL)
    bad = ExtendedGrammar(std_grammar.n, std_grammar.h, std_grammar.sigma | {clash}, std_grammar.tau, std_grammar.p, std_grammar.q, std_grammar.start)
    assert any(v.kind == "overlap" and v.symbol == "symptoms?" for v in validate_grammar(bad))


def test_start_outside_n_reported(std_grammar):
    bad = ExtendedGrammar(std_grammar.n, std_grammar.h, std_grammar.sigma, std_grammar.tau, std_grammar.p, std_grammar.q, std_grammar.symbol("trigger"))
    assert any(v.kind == "start" for v in validate_grammar(bad))


def test_parse_conjunction_tree(example):
    t = parse_intervention(SCHOOL_CONJUNCTION, example)
    assert render_phenotype(t) == SCHOOL_CONJUNCTION
    starta = t.children[3]
    assert [c.label for c in starta.children] == ["a>a(", "p_a?", ").", "starta"]
    conj = starta.children[3]
    assert [c.label for c in conj.children] == ["(", "starta", "&", "starta", ")"]
    assert [c.label for c in conj.children[3].children] == ["a2g(", "r_ag", ").", "startg"]


def test_extra_parenthesis_is_rejected(example):
    with pytest.raises(NPISyntaxError):
        parse_intervention("[true] a>a(symptoms?).(a!(self-isolate!)&(a2g(School).g!(close!))", example)


def test_single_measure_is_three_rule_applications(std_grammar):
    t = parse_intervention("[true] a!(self-isolate-14)", std_grammar)
    assert t.derivation() == [("intervention", 0), ("trigger", 0), ("starta", 4), ("p_a!", 0)]
    assert tree_depth(t) == 3
    assert render_phenotype(t) == "[true] a!(self-isolate-14)"


def test_truncated_input_reports_end(std_grammar):
    text = "[true] a>a("
    with pytest.raises(NPISyntaxError) as e:
        parse_intervention(text, std_grammar)
    assert e.value.position == len(text)


def test_syntax_error_offset_maps_to_original_text(std_grammar):
    text = "[true]  a!(self-isolate-99)"
    with pytest.raises(NPISyntaxError) as e:
        parse_intervention(text, std_grammar)
    assert text[e.value.position:].startswith("self-isolate-99")


def test_whitespace_is_insignificant(std_grammar):
    spaced = "[true] a>a(positive_test?) .a!(self-isolate-14)"
    assert render_phenotype(parse_intervention(spaced, std_grammar)) == "[true] a>a(positive_test?).a!(self-isolate-14)"
    wrapped = "[true] (a>a(positive_test?). a2g (Household).\n g2a(members). a!(self-isolate-7) & g!(close-group-7))"
    with pytest.raises(NPISyntaxError):
        parse_intervention(wrapped, std_grammar)  # mixes agent and group branches in one conjunction


def test_case_study_results_parse(std_grammar):
    s3 = ("[true] (a>a(positive_test?). a2g (Household). g>g(at_most_20_members?). g2a(members). "
          "a!(self-isolate-7) & a>a(symptoms?). (a!(self-isolate-14) & a2g(Household). "
          "g>g(more_than_20_members?). g2a(members). a!(self-isolate-7)))")
    s4 = ("[true] a>a(positive_test?). (a2g (Household). g2a(members). a!(self-isolate-7) & "
          "a>a(older_than_67?). a>a(symptoms?). a!(self-isolate-7))")
    for s in (s3, s4):
        t = parse_intervention(s, std_grammar)
        assert render_phenotype(parse_intervention(render_phenotype(t), std_grammar)) == render_phenotype(t)


def test_render_rejects_incomplete_tree(std_grammar):
    t = Node(std_grammar.symbol("intervention"), 0, (
        Node(std_grammar.symbol("[")),
        Node(std_grammar.symbol("trigger"), 0, (Node(std_grammar.symbol("true")),)),
        Node(std_grammar.symbol("]")),
        Node(std_grammar.symbol("starta")),
    ))
    with pytest.raises(IncompleteTree):
        render_phenotype(t)


def test_ambiguous_grammar_detected():
    # two model terminals whose concatenation collides with a third
    terms = ["true", "x", "xx", "y"]
    rules = {"trigger": ["true"], "p_a!": ["x", "xx"], "r_aa": ["y"], "p_a?": ["y"], "r_ag": ["y"],
             "p_g!": ["y"]}
    g = extend_grammar(builtin_core_grammar(), terms, rules, disabled=["r_ga", "r_gg", "p_g?"])
    assert parse_intervention("[true] a!(xx)", g).derivation()[-1] == ("p_a!", 1)
    amb_rules = dict(rules, **{"p_a!": ["x", "x"]})
    g2 = extend_grammar(builtin_core_grammar(), terms, amb_rules, disabled=["r_ga", "r_gg", "p_g?"])
    with pytest.raises(AmbiguityError):
        parse_intervention("[true] a!(x)", g2)


def test_load_extension_from_file(tmp_path):
    p = tmp_path / "ext.json"
    p.write_text('{"terminals": ["true", "stay-home!"], "rules": {"trigger": ["true"], "p_a!": ["stay-home!"]},'
                 ' "disabled": ["p_a?", "r_aa", "r_ag", "r_ga", "r_gg", "p_g?", "p_g!"]}')
    with pytest.raises(GrammarError, match="unproductive"):
        # startg keeps only its conjunction alternative and never terminates
        load_extension(p)
    p.write_text('{"terminals": ["true", "stay-home!", "shut!"], "rules": {"trigger": ["true"], '
                 '"p_a!": ["stay-home!"], "p_g!": ["shut!"]}, "disabled": ["p_a?", "r_aa", "r_ag", "r_ga", "r_gg", "p_g?"]}')
    g = load_extension(p)
    assert render_phenotype(parse_intervention("[true]g!(shut!)", g)) == "[true] g!(shut!)"


@pytest.mark.parametrize("depth", [3, 4])
def test_bruteforce_language_round_trips(std_grammar, depth):
    """Every derivation up to ``depth`` renders to a string the parser maps back to it."""
    trees = list(enumerate_trees(std_grammar, "intervention", depth))
    assert trees
    strings = set()
    for t in trees:
        s = render_phenotype(t)
        strings.add(s)
        assert parse_intervention(s, std_grammar) == t
    assert len(strings) == len(trees)  # unambiguous: distinct trees, distinct strings


def test_depth3_language_is_single_measures(std_grammar):
    strings = {render_phenotype(t) for t in enumerate_trees(std_grammar, "intervention", 3)}
    assert strings == {"[true] a!(self-isolate-14)", "[true] a!(self-isolate-7)", "[true] g!(close-group-7)"}

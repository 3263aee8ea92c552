"""Extended context-free grammar of the NPI language and its parse trees.

The grammar is a seven-tuple ``<N, H, Sigma, tau, P, Q, S>``: the core
language owns ``N``, ``Sigma`` and ``P``; a model extension contributes the
terminals ``tau`` and the rules ``Q`` that expand the hybrid symbols ``H``.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence


class Kind(enum.Enum):
    NONTERMINAL = "nonterminal"
    HYBRID = "hybrid"
    CORE_TERMINAL = "core-terminal"
    MODEL_TERMINAL = "model-terminal"

    @property
    def is_terminal(self) -> bool:
        return self in (Kind.CORE_TERMINAL, Kind.MODEL_TERMINAL)


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: Kind

    @property
    def is_terminal(self) -> bool:
        return self.kind.is_terminal

    def __str__(self) -> str:
        return self.name


class GrammarError(Exception):
    pass


class DuplicateRule(GrammarError):
    pass


class UnknownSymbol(GrammarError):
    pass


class MissingHybridRule(GrammarError):
    pass


class IncompleteTree(ValueError):
    pass


class NPISyntaxError(SyntaxError):
    """Raised when an NPI string is not derivable from the grammar.

    ``position`` is the offset into the original (un-normalized) text.
    """

    def __init__(self, message: str, position: int, text: str = ""):
        super().__init__(f"{message} at offset {position}")
        self.position = position
        self.text = text


class AmbiguityError(ValueError):
    pass


@dataclass(frozen=True)
class ProductionRule:
    lhs: Symbol
    alternatives: tuple[tuple[Symbol, ...], ...]

    def __post_init__(self):
        if self.lhs.kind not in (Kind.NONTERMINAL, Kind.HYBRID):
            raise GrammarError(f"rule lhs {self.lhs.name!r} is not a nonterminal or hybrid")
        if not self.alternatives or any(len(a) == 0 for a in self.alternatives):
            raise GrammarError(f"rule {self.lhs.name!r} has an empty alternative list or alternative")


START = "intervention"

# The core alphabets.  Hybrid names follow the subscripts of the printed rules.
CORE_NONTERMINALS = ("intervention", "starta", "startg")
CORE_HYBRIDS = ("trigger", "p_a?", "p_g?", "p_a!", "p_g!", "r_aa", "r_ag", "r_ga", "r_gg")
CORE_TERMINALS = (
    "[", "]", "(", "&", ")", ").",
    "a>a(", "a2a(", "a2g(", "a!(",
    "g>g(", "g2a(", "g2g(", "g!(",
)

# Alternatives in declaration order; indices are stable and used for replay.
_CORE_RULES: dict[str, list[list[str]]] = {
    "intervention": [
        ["[", "trigger", "]", "starta"],
        ["[", "trigger", "]", "startg"],
    ],
    "starta": [
        ["(", "starta", "&", "starta", ")"],
        ["a>a(", "p_a?", ").", "starta"],
        ["a2a(", "r_aa", ").", "starta"],
        ["a2g(", "r_ag", ").", "startg"],
        ["a!(", "p_a!", ")"],
    ],
    "startg": [
        ["(", "startg", "&", "startg", ")"],
        ["g>g(", "p_g?", ").", "startg"],
        ["g2a(", "r_ga", ").", "starta"],
        ["g2g(", "r_gg", ").", "startg"],
        ["g!(", "p_g!", ")"],
    ],
}


@dataclass(frozen=True, eq=False)
class ExtendedGrammar:
    n: frozenset[Symbol]
    h: frozenset[Symbol]
    sigma: frozenset[Symbol]
    tau: frozenset[Symbol]
    p: Mapping[str, ProductionRule]
    q: Mapping[str, ProductionRule]
    start: Symbol
    _index: dict[str, Symbol] = field(init=False, repr=False)

    def __post_init__(self):
        index: dict[str, Symbol] = {}
        for alphabet in (self.n, self.h, self.sigma, self.tau):
            for s in alphabet:
                index.setdefault(s.name, s)
        object.__setattr__(self, "_index", index)

    def symbol(self, name: str) -> Symbol:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownSymbol(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def rule(self, name: str) -> ProductionRule:
        if name in self.p:
            return self.p[name]
        return self.q[name]

    def rules(self) -> Iterator[ProductionRule]:
        yield from self.p.values()
        yield from self.q.values()

    def terminals_of(self, hybrid: str) -> tuple[str, ...]:
        """Model terminals a hybrid symbol can expand to, in declaration order."""
        return tuple(alt[0].name for alt in self.q[hybrid].alternatives)

    @property
    def model_terminals(self) -> frozenset[str]:
        return frozenset(s.name for s in self.tau)


def builtin_core_grammar() -> ExtendedGrammar:
    """The model-independent core: three rules in P, an empty tau and Q."""
    n = {name: Symbol(name, Kind.NONTERMINAL) for name in CORE_NONTERMINALS}
    h = {name: Symbol(name, Kind.HYBRID) for name in CORE_HYBRIDS}
    sigma = {name: Symbol(name, Kind.CORE_TERMINAL) for name in CORE_TERMINALS}
    lookup = {**n, **h, **sigma}
    p = {
        lhs: ProductionRule(n[lhs], tuple(tuple(lookup[s] for s in alt) for alt in alts))
        for lhs, alts in _CORE_RULES.items()
    }
    return ExtendedGrammar(
        n=frozenset(n.values()),
        h=frozenset(h.values()),
        sigma=frozenset(sigma.values()),
        tau=frozenset(),
        p=p,
        q={},
        start=n[START],
    )


def _reachable_hybrids(p: Mapping[str, ProductionRule], start: str) -> set[str]:
    seen, stack, hybrids = {start}, [start], set()
    while stack:
        rule = p.get(stack.pop())
        if rule is None:
            continue
        for alt in rule.alternatives:
            for s in alt:
                if s.kind is Kind.HYBRID:
                    hybrids.add(s.name)
                elif s.kind is Kind.NONTERMINAL and s.name not in seen:
                    seen.add(s.name)
                    stack.append(s.name)
    return hybrids


def extend_grammar(
    core: ExtendedGrammar,
    model_terminals: Iterable[str | Symbol],
    model_rules: Mapping[str, Sequence[str]],
    disabled: Iterable[str] = (),
) -> ExtendedGrammar:
    """Merge a model vocabulary into ``core``.

    ``model_rules`` maps each hybrid name to its ordered terminal alternatives.
    Hybrids listed in ``disabled`` have no model counterpart; every core
    alternative that mentions one is dropped from P, so the remaining language
    never needs a rule for it.
    """
    tau = {}
    for t in model_terminals:
        name = t.name if isinstance(t, Symbol) else t
        tau[name] = Symbol(name, Kind.MODEL_TERMINAL)
    hybrids = {s.name: s for s in core.h}

    q = dict(core.q)
    for lhs, alts in model_rules.items():
        if lhs not in hybrids:
            raise UnknownSymbol(f"{lhs!r} is not a hybrid symbol")
        if lhs in q:
            raise DuplicateRule(f"hybrid {lhs!r} already has a rule")
        if not alts:
            raise GrammarError(f"rule for {lhs!r} has no alternatives")
        resolved = []
        for a in alts:
            if a not in tau:
                raise UnknownSymbol(f"{a!r} in rule for {lhs!r} is not a declared model terminal")
            resolved.append((tau[a],))
        q[lhs] = ProductionRule(hybrids[lhs], tuple(resolved))

    disabled = set(disabled)
    unknown = disabled - set(hybrids)
    if unknown:
        raise UnknownSymbol(f"cannot disable unknown hybrids {sorted(unknown)}")
    p = {}
    for lhs, rule in core.p.items():
        alts = tuple(a for a in rule.alternatives if not any(s.name in disabled for s in a))
        if not alts:
            raise GrammarError(f"disabling {sorted(disabled)} empties rule {lhs!r}")
        p[lhs] = ProductionRule(rule.lhs, alts)

    missing = sorted(_reachable_hybrids(p, core.start.name) - set(q))
    if missing:
        raise MissingHybridRule(f"reachable hybrids without a rule: {missing}")

    g = ExtendedGrammar(
        n=core.n, h=core.h, sigma=core.sigma, tau=frozenset(core.tau | set(tau.values())),
        p=p, q=q, start=core.start,
    )
    report = validate_grammar(g)
    if report:
        raise GrammarError("; ".join(str(v) for v in report))
    return g


@dataclass(frozen=True)
class Violation:
    kind: str
    symbol: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.symbol}: {self.detail}"


def validate_grammar(g: ExtendedGrammar) -> list[Violation]:
    """Check every structural invariant; an empty list means valid."""
    out: list[Violation] = []
    alphabets = {"N": g.n, "H": g.h, "Sigma": g.sigma, "tau": g.tau}
    expected_kind = {
        "N": Kind.NONTERMINAL, "H": Kind.HYBRID,
        "Sigma": Kind.CORE_TERMINAL, "tau": Kind.MODEL_TERMINAL,
    }
    owner: dict[str, str] = {}
    for label, alphabet in alphabets.items():
        for s in alphabet:
            if s.kind is not expected_kind[label]:
                out.append(Violation("kind", s.name, f"{s.kind.value} symbol placed in {label}"))
            if s.name in owner and owner[s.name] != label:
                out.append(Violation("overlap", s.name, f"declared in both {owner[s.name]} and {label}"))
            owner.setdefault(s.name, label)

    if g.start not in g.n:
        out.append(Violation("start", g.start.name, "start symbol is not in N"))
    elif g.start.name != START:
        out.append(Violation("start", g.start.name, f"start symbol must be {START!r}"))

    declared = set().union(*(set(s.name for s in a) for a in alphabets.values()))
    for lhs, rule in g.p.items():
        if rule.lhs not in g.n:
            out.append(Violation("rule", lhs, "P rule whose lhs is not in N"))
    for lhs, rule in g.q.items():
        if rule.lhs not in g.h:
            out.append(Violation("rule", lhs, "Q rule whose lhs is not in H"))
        for alt in rule.alternatives:
            for s in alt:
                if s.kind is not Kind.MODEL_TERMINAL:
                    out.append(Violation("rule", lhs, f"Q alternative uses non-model symbol {s.name!r}"))
    for rule in g.rules():
        for alt in rule.alternatives:
            for s in alt:
                if s.name not in declared:
                    out.append(Violation("undeclared", s.name, f"used in rule for {rule.lhs.name!r}"))
    for nt in g.n:
        if nt.name not in g.p:
            out.append(Violation("missing-rule", nt.name, "nonterminal has no rule in P"))

    productive = {s.name for s in g.sigma | g.tau}
    changed = True
    while changed:
        changed = False
        for rule in g.rules():
            if rule.lhs.name not in productive and any(
                all(s.name in productive for s in alt) for alt in rule.alternatives
            ):
                productive.add(rule.lhs.name)
                changed = True
    for rule in g.p.values():
        if rule.lhs.name not in productive and all(s.name in g.q or s.kind is not Kind.HYBRID
                                                   for alt in rule.alternatives for s in alt):
            out.append(Violation("unproductive", rule.lhs.name, "derives no terminal string"))

    used_hybrids = {s.name for r in g.p.values() for alt in r.alternatives for s in alt if s.kind is Kind.HYBRID}
    for name in sorted(used_hybrids):
        if name not in g.q:
            out.append(Violation("missing-hybrid-rule", name, "hybrid used in P has no rule in Q"))
    return out


# ---------------------------------------------------------------------------
# Grammar-extension files


def load_extension(path: str | Path | None = None, core: ExtendedGrammar | None = None) -> ExtendedGrammar:
    """Build a grammar from an extension file (JSON).

    Schema::

        {"terminals": ["true", ...],
         "rules": {"trigger": ["true"], "p_a?": ["symptoms?", ...], ...},
         "disabled": ["r_gg"]}

    ``path=None`` loads the packaged case-study vocabulary.
    """
    if path is None:
        text = resources.files("adios.data").joinpath("default_extension.json").read_text()
    elif isinstance(path, str) and not Path(path).exists() and resources.files("adios.data").joinpath(path).is_file():
        text = resources.files("adios.data").joinpath(path).read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    return extend_grammar(
        core or builtin_core_grammar(),
        doc["terminals"],
        doc["rules"],
        doc.get("disabled", ()),
    )


def default_grammar() -> ExtendedGrammar:
    return load_extension(None)


# ---------------------------------------------------------------------------
# Parse trees


@dataclass(frozen=True)
class Node:
    """A parse-tree node.

    ``alt`` is the index of the applied rule alternative; it is ``None`` for
    leaves.  Trees are immutable and compare structurally.
    """

    symbol: Symbol
    alt: int | None = None
    children: tuple["Node", ...] = ()

    @property
    def label(self) -> str:
        return self.symbol.name

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def height(self) -> int:
        if not self.children:
            return 0
        return 1 + max(c.height() for c in self.children)

    def leaves(self) -> Iterator["Node"]:
        if not self.children:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def walk(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "Node"]]:
        """Pre-order traversal yielding ``(path, node)`` pairs."""
        yield path, self
        for i, c in enumerate(self.children):
            yield from c.walk(path + (i,))

    def at(self, path: Sequence[int]) -> "Node":
        node = self
        for i in path:
            node = node.children[i]
        return node

    def replace(self, path: Sequence[int], subtree: "Node") -> "Node":
        if not path:
            return subtree
        i = path[0]
        kids = list(self.children)
        kids[i] = kids[i].replace(path[1:], subtree)
        return Node(self.symbol, self.alt, tuple(kids))

    def derivation(self) -> list[tuple[str, int]]:
        """The (symbol, alternative-index) choices in pre-order."""
        return [(n.label, n.alt) for _, n in self.walk() if n.alt is not None]

    def pretty(self, indent: int = 0) -> str:
        head = "  " * indent + self.label + (f"  [{self.alt}]" if self.alt is not None else "")
        return "\n".join([head] + [c.pretty(indent + 1) for c in self.children])


ParseTree = Node


def tree_depth(t: Node) -> int:
    """Number of edges on the longest root-to-leaf path."""
    return t.height()


def render_phenotype(t: Node) -> str:
    """Concatenate leaves left to right in canonical form."""
    out = []
    for leaf in t.leaves():
        if not leaf.symbol.is_terminal:
            raise IncompleteTree(f"leaf {leaf.label!r} is not a terminal")
        out.append(leaf.label)
        if leaf.label == "]":
            out.append(" ")
    return "".join(out)


_WS = re.compile(r"\s+")


def normalize(text: str) -> tuple[str, list[int]]:
    """Drop all whitespace; return the compact text and an offset map back to ``text``."""
    kept = [(i, ch) for i, ch in enumerate(text) if not ch.isspace()]
    return "".join(ch for _, ch in kept), [i for i, _ in kept] + [len(text)]


class _Parser:
    def __init__(self, g: ExtendedGrammar, text: str):
        self.g = g
        self.text = text
        self.memo: dict[tuple[str, int], list[tuple[Node, int]]] = {}
        self.furthest = 0
        self.expected: set[str] = set()

    def _fail(self, pos: int, token: str):
        if pos > self.furthest:
            self.furthest, self.expected = pos, {token}
        elif pos == self.furthest:
            self.expected.add(token)

    def parse(self, sym: Symbol, pos: int) -> list[tuple[Node, int]]:
        if sym.is_terminal:
            if self.text.startswith(sym.name, pos):
                return [(Node(sym), pos + len(sym.name))]
            self._fail(pos, sym.name)
            return []
        key = (sym.name, pos)
        if key in self.memo:
            return self.memo[key]
        self.memo[key] = []  # guards against left recursion
        results = []
        for ai, alt in enumerate(self.g.rule(sym.name).alternatives):
            partial: list[tuple[tuple[Node, ...], int]] = [((), pos)]
            for s in alt:
                nxt = []
                for kids, p in partial:
                    for child, q in self.parse(s, p):
                        nxt.append((kids + (child,), q))
                partial = nxt
                if not partial:
                    break
            results.extend((Node(sym, ai, kids), p) for kids, p in partial)
        self.memo[key] = results
        return results


def parse_intervention(text: str, g: ExtendedGrammar) -> Node:
    """Invert the derivation of an NPI string.

    Whitespace carries no meaning and is removed before parsing.  Raises
    :class:`NPISyntaxError` when no derivation exists and
    :class:`AmbiguityError` when more than one does.
    """
    compact, offsets = normalize(text)
    parser = _Parser(g, compact)
    done = [t for t, end in parser.parse(g.start, 0) if end == len(compact)]
    if not done:
        pos = parser.furthest
        if pos >= len(compact):
            msg = "unexpected end of input"
        else:
            msg = f"unexpected {compact[pos:pos + 12]!r}"
        if parser.expected:
            msg += f", expected one of {sorted(parser.expected)}"
        raise NPISyntaxError(msg, offsets[min(pos, len(compact))], text)
    if len(done) > 1:
        raise AmbiguityError(f"{len(done)} derivations for {text!r}")
    return done[0]

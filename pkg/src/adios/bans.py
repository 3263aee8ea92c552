"""Bans: constraints that forbid redundant expansions on the following edge.

A ban template ``subject -/-> {(h, {t, previous, self, ...})}`` attaches to
every intervention-tree edge on which its subject was chosen (a model
terminal) or expanded (a hybrid).  The resolved set constrains how the
hybrids of the *next* edge may be expanded.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .grammar import ExtendedGrammar, Kind, Node

SELF = "self"
PREVIOUS = "previous"
VARIABLES = frozenset({SELF, PREVIOUS})
START_SYMBOLS = frozenset({"starta", "startg"})


class BanError(Exception):
    pass


class UnresolvableSelf(BanError):
    pass


class AllAlternativesBanned(BanError):
    pass


@dataclass(frozen=True)
class BanTemplate:
    subject: str
    entries: Mapping[str, frozenset[str]]

    def __post_init__(self):
        object.__setattr__(
            self, "entries", {h: frozenset(ts) for h, ts in self.entries.items()}
        )

    def __hash__(self):
        return hash((self.subject, tuple(sorted((h, tuple(sorted(ts))) for h, ts in self.entries.items()))))

    def check(self, g: ExtendedGrammar) -> None:
        """Raise BanError unless the template fits the grammar's alphabets."""
        hybrids = {s.name for s in g.h}
        if self.subject not in hybrids and self.subject not in g.model_terminals:
            raise BanError(f"ban subject {self.subject!r} is neither a hybrid nor a model terminal")
        for h, ts in self.entries.items():
            if h not in hybrids:
                raise BanError(f"ban entry key {h!r} is not a hybrid symbol")
            bad = ts - g.model_terminals - VARIABLES
            if bad:
                raise BanError(f"ban entry for {h!r} names unknown terminals {sorted(bad)}")


@dataclass(frozen=True)
class ResolvedBanSet:
    """Concrete forbidden terminals per hybrid; empty sets are dropped."""

    items: frozenset[tuple[str, frozenset[str]]] = frozenset()

    @classmethod
    def of(cls, mapping: Mapping[str, Iterable[str]] | None = None) -> "ResolvedBanSet":
        mapping = mapping or {}
        return cls(frozenset((h, frozenset(ts)) for h, ts in mapping.items() if ts))

    @property
    def forbidden(self) -> dict[str, frozenset[str]]:
        return dict(self.items)

    def get(self, hybrid: str) -> frozenset[str]:
        for h, ts in self.items:
            if h == hybrid:
                return ts
        return frozenset()

    def __bool__(self) -> bool:
        return bool(self.items)

    def __repr__(self) -> str:
        inner = ", ".join(f"{h}: {sorted(ts)}" for h, ts in sorted(self.items))
        return f"ResolvedBanSet({{{inner}}})"


EMPTY = ResolvedBanSet()


@dataclass
class InterventionEdge:
    """The parse-subtree belonging to one intervention-tree edge.

    ``path`` addresses the opening ``starta``/``startg`` node; ``chosen``
    maps the edge's hybrid to the terminal it expanded into.
    """

    path: tuple[int, ...]
    symbol: str
    chosen: dict[str, str | None] = field(default_factory=dict)
    hybrid_path: tuple[int, ...] | None = None
    predecessor: int | None = None


def resolve_bans(
    templates: Iterable[BanTemplate], edge: InterventionEdge, previous: ResolvedBanSet = EMPTY
) -> ResolvedBanSet:
    """Resolve the bans attached to ``edge`` given its predecessor's set.

    Entries that mention ``previous`` carry the predecessor's forbidden
    terminals forward even when the template's subject is absent from the
    edge.
    """
    out: dict[str, set[str]] = {}
    chosen_terminals = set(edge.chosen.values())
    for tpl in templates:
        if tpl.subject in edge.chosen:
            matched, self_terminal = True, edge.chosen[tpl.subject]
        elif tpl.subject in chosen_terminals:
            matched, self_terminal = True, tpl.subject
        else:
            matched, self_terminal = False, None
        for h, ts in tpl.entries.items():
            if not matched:
                if PREVIOUS in ts:
                    out.setdefault(h, set()).update(previous.get(h))
                continue
            acc = out.setdefault(h, set())
            for t in ts:
                if t == SELF:
                    if self_terminal is None:
                        raise UnresolvableSelf(f"{tpl.subject!r} has no chosen terminal on this edge")
                    acc.add(self_terminal)
                elif t == PREVIOUS:
                    acc.update(previous.get(h))
                else:
                    acc.add(t)
    return ResolvedBanSet.of(out)


def filter_alternatives(g: ExtendedGrammar, hybrid: str, bans: ResolvedBanSet) -> list[tuple[int, str]]:
    """Alternatives of the hybrid's rule surviving ``bans``, as ``(index, terminal)``."""
    if hybrid not in g.q:
        raise BanError(f"{hybrid!r} is not a hybrid with a model rule")
    banned = bans.get(hybrid)
    allowed = [(i, t) for i, t in enumerate(g.terminals_of(hybrid)) if t not in banned]
    if not allowed:
        raise AllAlternativesBanned(hybrid)
    return allowed


def is_conjunction(node: Node) -> bool:
    return bool(node.children) and node.children[0].label == "("


def _edge_contents(node: Node, path: tuple[int, ...], edge: InterventionEdge) -> list[tuple[tuple[int, ...], Node]]:
    """Fill ``edge`` from the subtree at ``node``; return the start-symbol children opening later edges."""
    nxt = []
    for i, child in enumerate(node.children):
        cpath = path + (i,)
        if child.label in START_SYMBOLS:
            nxt.append((cpath, child))
        elif child.symbol.kind is Kind.HYBRID:
            term = child.children[0].label if child.children else None
            edge.chosen[child.label] = term
            edge.hybrid_path = cpath
    return nxt


def segment_edges(t: Node) -> list[InterventionEdge]:
    """Split a parse tree into intervention-tree edges in derivation order.

    Conjunction nodes open no edge of their own: both branches take the
    conjunction's predecessor as theirs.
    """
    edges: list[InterventionEdge] = []

    def visit(path, node, pred):
        if is_conjunction(node):
            for i, child in enumerate(node.children):
                if child.label in START_SYMBOLS:
                    visit(path + (i,), child, pred)
            return
        edge = InterventionEdge(path=path, symbol=node.label, predecessor=pred)
        edges.append(edge)
        idx = len(edges) - 1
        for cpath, child in _edge_contents(node, path, edge):
            visit(cpath, child, idx)

    for path, node in t.walk():
        if node.label in START_SYMBOLS:
            visit(path, node, None)
            break
    return edges


@dataclass(frozen=True)
class BanViolation:
    edge: int
    hybrid: str
    terminal: str
    path: tuple[int, ...]

    def __str__(self) -> str:
        return f"edge {self.edge}: {self.hybrid} -> {self.terminal} is banned"


def resolved_sets(t: Node, templates: Iterable[BanTemplate]) -> tuple[list[InterventionEdge], list[ResolvedBanSet]]:
    templates = tuple(templates)
    edges = segment_edges(t)
    sets: list[ResolvedBanSet] = []
    for e in edges:
        prev = sets[e.predecessor] if e.predecessor is not None else EMPTY
        sets.append(resolve_bans(templates, e, prev))
    return edges, sets


def check_tree(t: Node, templates: Iterable[BanTemplate]) -> list[BanViolation]:
    """Every hybrid expansion forbidden by its predecessor edge's bans."""
    edges, sets = resolved_sets(t, templates)
    out = []
    for i, e in enumerate(edges):
        prev = sets[e.predecessor] if e.predecessor is not None else EMPTY
        for h, term in e.chosen.items():
            if term is not None and term in prev.get(h):
                out.append(BanViolation(i, h, term, e.hybrid_path))
    return out


def incoming_bans(t: Node, path: tuple[int, ...], templates: Iterable[BanTemplate]) -> ResolvedBanSet:
    """Bans in force for a subtree regrown at ``path``.

    For a start symbol this is the set of the nearest edge strictly above it;
    a hybrid is governed by the predecessor of the edge that owns it.
    """
    if t.at(path).label not in START_SYMBOLS:
        path = path[:-1]
    edges, sets = resolved_sets(t, templates)
    best = None
    for i, e in enumerate(edges):
        if len(e.path) < len(path) and path[: len(e.path)] == e.path:
            if best is None or len(e.path) > len(edges[best].path):
                best = i
    return EMPTY if best is None else sets[best]


def load_bans(path: str | Path | None = None, g: ExtendedGrammar | None = None) -> list[BanTemplate]:
    """Read a ban file (JSON ``{"bans": [{"subject": ..., "entries": {h: [...]}}]}``)."""
    if path is None:
        text = resources.files("adios.data").joinpath("default_bans.json").read_text()
    elif isinstance(path, str) and not Path(path).exists() and resources.files("adios.data").joinpath(path).is_file():
        text = resources.files("adios.data").joinpath(path).read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    out = [BanTemplate(b["subject"], b["entries"]) for b in doc["bans"]]
    if g is not None:
        for tpl in out:
            tpl.check(g)
    return out


def default_bans(g: ExtendedGrammar | None = None) -> list[BanTemplate]:
    return load_bans(None, g)

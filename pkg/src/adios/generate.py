"""Random, depth-bounded, ban-conformant derivation of NPI parse trees."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .bans import (
    EMPTY,
    START_SYMBOLS,
    BanTemplate,
    InterventionEdge,
    ResolvedBanSet,
    resolve_bans,
)
from .grammar import ExtendedGrammar, Kind, Node, Symbol, render_phenotype


class GenerationExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class GenConfig:
    max_depth: int = 5
    max_retries: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_depth < 3:
            raise ValueError("max_depth must be at least 3 (trigger plus one measure)")
        if self.max_retries < 1:
            raise ValueError("max_retries must be positive")


def _is_conjunction_alt(alt: Sequence[Symbol]) -> bool:
    return alt[0].name == "("


class Generator:
    """Grows trees top-down, left to right.

    At every expansion only alternatives that can still be completed within
    the remaining depth budget and under the bans in force are eligible, so
    a derivation never dead-ends; the choice among them is uniform.  The
    feasibility table is memoized per ``(symbol, budget, incoming bans)``.
    """

    def __init__(self, g: ExtendedGrammar, templates: Iterable[BanTemplate] = ()):
        self.g = g
        self.templates = tuple(templates)
        self._feasible = lru_cache(maxsize=None)(self._feasible_alts)

    # -- feasibility -----------------------------------------------------

    def _edge_options(self, alt, incoming: ResolvedBanSet):
        """Yield ``(chosen, bans_for_children)`` for each hybrid assignment of ``alt``."""
        hybrids = [s.name for s in alt if s.kind is Kind.HYBRID]
        pools = []
        for h in hybrids:
            banned = incoming.get(h)
            pools.append([t for t in self.g.terminals_of(h) if t not in banned])
        for combo in itertools.product(*pools):
            chosen = dict(zip(hybrids, combo))
            edge = InterventionEdge(path=(), symbol="", chosen=chosen)
            yield chosen, resolve_bans(self.templates, edge, incoming)

    def _feasible_alts(self, sym: str, budget: int, incoming: ResolvedBanSet) -> tuple:
        """Completable alternatives as ``(alt_index, options)``.

        ``options`` lists the hybrid assignments (with the bans they pass to
        child start symbols) that keep every child completable.
        """
        if budget < 1:
            return ()
        out = []
        is_start = sym in START_SYMBOLS
        for ai, alt in enumerate(self.g.rule(sym).alternatives):
            if not is_start:
                # the start rule: hybrids unconstrained, children start fresh
                ok = all(self._completable(s.name, budget - 1, EMPTY) for s in alt if not s.is_terminal)
                if ok:
                    out.append((ai, ((None, EMPTY),)))
                continue
            if _is_conjunction_alt(alt):
                kids = [s.name for s in alt if s.name in START_SYMBOLS]
                if all(self._completable(k, budget - 1, incoming) for k in kids):
                    out.append((ai, ((None, incoming),)))
                continue
            if budget - 1 < 1 and any(s.kind is Kind.HYBRID for s in alt):
                continue
            kids = [s.name for s in alt if s.name in START_SYMBOLS]
            opts = tuple(
                (chosen, bans)
                for chosen, bans in self._edge_options(alt, incoming)
                if all(self._completable(k, budget - 1, bans) for k in kids)
            )
            if opts:
                out.append((ai, opts))
        return tuple(out)

    def _completable(self, sym: str, budget: int, incoming: ResolvedBanSet) -> bool:
        s = self.g.symbol(sym)
        if s.is_terminal:
            return budget >= 0
        if s.kind is Kind.HYBRID:
            return budget >= 1 and any(t not in incoming.get(sym) for t in self.g.terminals_of(sym))
        return bool(self._feasible(sym, budget, incoming))

    def feasible_alternatives(self, sym: str, budget: int, incoming: ResolvedBanSet = EMPTY) -> list[int]:
        return [ai for ai, _ in self._feasible(sym, budget, incoming)]

    # -- growth ----------------------------------------------------------

    def grow(self, sym: str, budget: int, incoming: ResolvedBanSet, rng: np.random.Generator,
             fixed: dict[str, str] | None = None) -> Node:
        """Derive a complete subtree for ``sym`` of height at most ``budget``."""
        s = self.g.symbol(sym)
        if s.is_terminal:
            return Node(s)
        if s.kind is Kind.HYBRID:
            term = (fixed or {}).get(sym)
            if term is None:
                allowed = [t for t in self.g.terminals_of(sym) if t not in incoming.get(sym)]
                if not allowed or budget < 1:
                    raise GenerationExhausted(f"no legal expansion for {sym!r}")
                term = allowed[int(rng.integers(len(allowed)))]
            idx = self.g.terminals_of(sym).index(term)
            return Node(s, idx, (Node(self.g.symbol(term)),))
        alts = self._feasible(sym, budget, incoming)
        if not alts:
            raise GenerationExhausted(f"{sym!r} cannot complete within depth {budget}")
        ai, opts = alts[int(rng.integers(len(alts)))]
        chosen, child_bans = opts[int(rng.integers(len(opts)))]
        kids = []
        for child in self.g.rule(sym).alternatives[ai]:
            if child.kind is Kind.HYBRID:
                kids.append(self.grow(child.name, budget - 1, incoming, rng, chosen))
            else:
                kids.append(self.grow(child.name, budget - 1, child_bans, rng))
        return Node(s, ai, tuple(kids))


_GENERATORS: dict[tuple[int, tuple], Generator] = {}


def generator_for(g: ExtendedGrammar, templates: Iterable[BanTemplate]) -> Generator:
    templates = tuple(templates)
    key = (id(g), templates)
    gen = _GENERATORS.get(key)
    if gen is None or gen.g is not g:
        gen = _GENERATORS[key] = Generator(g, templates)
    return gen


def rng_for(*keys: int) -> np.random.Generator:
    """Independent stream for a tuple of integer keys."""
    return np.random.default_rng(np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]))


def generate_tree(
    g: ExtendedGrammar,
    templates: Iterable[BanTemplate],
    cfg: GenConfig,
    rng: np.random.Generator | None = None,
) -> Node:
    if rng is None:
        rng = rng_for(cfg.rng_seed)
    gen = generator_for(g, templates)
    if not gen.feasible_alternatives(g.start.name, cfg.max_depth):
        raise GenerationExhausted(
            f"no ban-conformant tree of depth <= {cfg.max_depth} exists"
        )
    return gen.grow(g.start.name, cfg.max_depth, EMPTY, rng)


def sample_population(
    n: int,
    g: ExtendedGrammar,
    templates: Iterable[BanTemplate],
    cfg: GenConfig,
    master_seed: int,
) -> list[Node]:
    if n < 1:
        raise ValueError("population size must be positive")
    templates = tuple(templates)
    return [generate_tree(g, templates, cfg, rng_for(master_seed, 0x5EED, i)) for i in range(n)]


def sample_phenotypes(n, g, templates, cfg, master_seed) -> list[str]:
    return [render_phenotype(t) for t in sample_population(n, g, templates, cfg, master_seed)]

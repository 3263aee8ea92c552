"""Compile NPI parse trees into plans and run them against a SimWorld.

Sets are sorted arrays of agent or group ids, taken as snapshots when they
are produced.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bans import is_conjunction
from .grammar import ExtendedGrammar, Kind, Node, parse_intervention
from .sim import GROUP_TYPE_NAMES, GroupType, SimWorld, State

AGENTS = "agents"
GROUPS = "groups"


class UnboundTerminal(KeyError):
    pass


# -- filters -------------------------------------------------------------------


def _symptomatic(w: SimWorld, ids):
    return w.state[ids] == State.INFECTIOUS_SYMPTOMATIC


def _positive_test(w: SimWorld, ids):
    return w.test(ids)


AGENT_FILTERS: dict[str, Callable] = {
    "symptoms?": _symptomatic,
    "child?": lambda w, ids: w.age[ids] < 18,
    "adult?": lambda w, ids: w.age[ids] >= 18,
    "older_than_67?": lambda w, ids: w.age[ids] > 67,
    "positive_test?": _positive_test,
}

GROUP_FILTERS: dict[str, Callable] = {
    "more_than_20_members?": lambda w, ids: w.group_size[ids] > 20,
    "at_most_20_members?": lambda w, ids: w.group_size[ids] <= 20,
}


# -- mappings --------------------------------------------------------------------


def _to_group(gtype: GroupType):
    def mapping(w: SimWorld, ids):
        col = {GroupType.HOUSEHOLD: w.household_of, GroupType.SCHOOL: w.school_of,
               GroupType.OFFICE: w.office_of}[gtype]
        out = col[ids]
        return np.unique(out[out >= 0])
    return mapping


def _members(w: SimWorld, ids):
    if not len(ids):
        return np.empty(0, dtype=np.int64)
    return np.unique(w.mem_agent[np.isin(w.mem_group, ids)])


def _trace_infectious_contacts(w: SimWorld, ids):
    return np.flatnonzero(np.isin(w.infector, ids))


AGENT_TO_GROUP = {name: _to_group(t) for name, t in GROUP_TYPE_NAMES.items()}
GROUP_TO_AGENT = {"members": _members}
AGENT_TO_AGENT = {"trace_infectious_contacts": _trace_infectious_contacts}
GROUP_TO_GROUP: dict[str, Callable] = {}


# -- measures --------------------------------------------------------------------


def _isolate(days):
    def measure(w: SimWorld, ids):
        w.isolate(ids, days)
    return measure


def _close(days):
    def measure(w: SimWorld, ids):
        w.close(ids, days)
    return measure


AGENT_MEASURES = {
    "self-isolate-14": _isolate(14),
    "self-isolate-7": _isolate(7),
    "self-isolate!": _isolate(14),
}
GROUP_MEASURES = {
    "close-group-7": _close(7),
    "close!": _close(7),
}

TRIGGERS = {"true": lambda w: True}


@dataclass
class ModelBinding:
    """Token registries, keyed by the hybrid symbol each token expands."""

    registries: dict[str, dict[str, Callable]] = field(default_factory=dict)

    def lookup(self, hybrid: str, token: str) -> Callable:
        try:
            return self.registries[hybrid][token]
        except KeyError:
            raise UnboundTerminal(f"no binding for {token!r} ({hybrid})") from None

    def check(self, g: ExtendedGrammar) -> list[str]:
        """Model terminals of ``g`` without a registry entry."""
        missing = []
        for h, rule in g.q.items():
            for alt in rule.alternatives:
                if alt[0].name not in self.registries.get(h, {}):
                    missing.append(alt[0].name)
        return missing


def default_binding() -> ModelBinding:
    return ModelBinding({
        "trigger": dict(TRIGGERS),
        "p_a?": dict(AGENT_FILTERS),
        "p_g?": dict(GROUP_FILTERS),
        "r_aa": dict(AGENT_TO_AGENT),
        "r_ag": dict(AGENT_TO_GROUP),
        "r_ga": dict(GROUP_TO_AGENT),
        "r_gg": dict(GROUP_TO_GROUP),
        "p_a!": dict(AGENT_MEASURES),
        "p_g!": dict(GROUP_MEASURES),
    })


# -- plans -------------------------------------------------------------------------

_OP_KIND = {
    "p_a?": ("filter", AGENTS, AGENTS),
    "p_g?": ("filter", GROUPS, GROUPS),
    "r_aa": ("map", AGENTS, AGENTS),
    "r_ag": ("map", AGENTS, GROUPS),
    "r_ga": ("map", GROUPS, AGENTS),
    "r_gg": ("map", GROUPS, GROUPS),
    "p_a!": ("measure", AGENTS, None),
    "p_g!": ("measure", GROUPS, None),
}
_KIND_OF_START = {"starta": AGENTS, "startg": GROUPS}


@dataclass(frozen=True)
class PlanNode:
    """``op`` is filter/map/measure/and; ``then`` holds the continuation(s)."""

    op: str
    set_kind: str
    token: str = ""
    fn: Callable | None = field(default=None, compare=False, repr=False)
    then: tuple["PlanNode", ...] = ()

    def describe(self) -> str:
        if self.op == "and":
            return "(" + " & ".join(c.describe() for c in self.then) + ")"
        head = f"{self.op}({self.token})"
        return head if not self.then else f"{head} -> {self.then[0].describe()}"


@dataclass(frozen=True)
class CompiledIntervention:
    trigger: Callable[[SimWorld], bool]
    root_set_kind: str
    plan: PlanNode
    source: str = ""

    def execute(self, world: SimWorld) -> None:
        if not self.trigger(world):
            return
        if self.root_set_kind == AGENTS:
            root = np.arange(world.n_agents)
        else:
            root = np.arange(world.n_groups)
        run_plan(self.plan, root, world)


def _compile_start(node: Node, binding: ModelBinding) -> PlanNode:
    kind = _KIND_OF_START[node.label]
    if is_conjunction(node):
        branches = tuple(_compile_start(c, binding) for c in node.children if c.label in _KIND_OF_START)
        return PlanNode("and", kind, then=branches)
    hybrid = next(c for c in node.children if c.symbol.kind is Kind.HYBRID)
    token = hybrid.children[0].label
    op, in_kind, out_kind = _OP_KIND[hybrid.label]
    if in_kind != kind:
        raise TypeError(f"{hybrid.label} applied to a set of {kind}")
    fn = binding.lookup(hybrid.label, token)
    rest = [c for c in node.children if c.label in _KIND_OF_START]
    then = ()
    if rest:
        nxt = _compile_start(rest[0], binding)
        if nxt.set_kind != out_kind:
            raise TypeError(f"{token} yields {out_kind} but continues on {nxt.set_kind}")
        then = (nxt,)
    return PlanNode(op, kind, token, fn, then)


def compile_tree(t: Node, binding: ModelBinding | None = None, source: str = "") -> CompiledIntervention:
    """Turn a complete parse tree into an executable intervention."""
    binding = binding or default_binding()
    trigger_node = next(c for c in t.children if c.label == "trigger")
    trigger = binding.lookup("trigger", trigger_node.children[0].label)
    start = next(c for c in t.children if c.label in _KIND_OF_START)
    return CompiledIntervention(trigger, _KIND_OF_START[start.label], _compile_start(start, binding), source)


def compile_npi(text: str, g: ExtendedGrammar, binding: ModelBinding | None = None) -> CompiledIntervention:
    return compile_tree(parse_intervention(text, g), binding, source=text)


def apply_filter(ids: np.ndarray, predicate: Callable, world: SimWorld) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if not len(ids):
        return ids
    return ids[np.asarray(predicate(world, ids), dtype=bool)]


def apply_mapping(ids: np.ndarray, relation: Callable, world: SimWorld) -> np.ndarray:
    return np.asarray(relation(world, np.asarray(ids, dtype=np.int64)), dtype=np.int64)


def apply_measure(ids: np.ndarray, measure: Callable, world: SimWorld) -> None:
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids):
        measure(world, ids)


def run_plan(node: PlanNode, ids: np.ndarray, world: SimWorld) -> None:
    """Depth-first, left-to-right; conjunction branches share the incoming snapshot."""
    if node.op == "and":
        snapshot = np.array(ids, copy=True)
        for branch in node.then:
            run_plan(branch, snapshot, world)
        return
    if node.op == "filter":
        out = apply_filter(ids, node.fn, world)
    elif node.op == "map":
        out = apply_mapping(ids, node.fn, world)
    else:
        apply_measure(ids, node.fn, world)
        return
    run_plan(node.then[0], out, world)


def execute(ci: CompiledIntervention, world: SimWorld) -> None:
    ci.execute(world)

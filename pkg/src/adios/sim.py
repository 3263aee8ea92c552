"""Desk-scale agent-based S-E-I-R simulator with households, schools and offices.

One tick is one day.  Contacts are fully mixed within every open group;
isolated agents only meet their household.  The world keeps its state in
numpy arrays indexed by agent or group id.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np


class State(enum.IntEnum):
    SUSCEPTIBLE = 0
    EXPOSED = 1
    INFECTIOUS_SYMPTOMATIC = 2
    INFECTIOUS_ASYMPTOMATIC = 3
    RECOVERED = 4


class Role(enum.IntEnum):
    NEITHER = 0
    WORKER = 1
    STUDENT = 2


class GroupType(enum.IntEnum):
    HOUSEHOLD = 0
    SCHOOL = 1
    OFFICE = 2


GROUP_TYPE_NAMES = {"Household": GroupType.HOUSEHOLD, "School": GroupType.SCHOOL, "Office": GroupType.OFFICE}
NONE = -1


class InvalidParams(ValueError):
    pass


@dataclass
class PopulationParams:
    n_agents: int = 1000
    # (min_age, max_age inclusive, weight); ages are uniform within a band
    age_bands: list = field(default_factory=lambda: [[0, 17, 0.18], [18, 66, 0.62], [67, 95, 0.20]])
    # household size -> weight
    household_sizes: dict = field(default_factory=lambda: {1: 0.4, 2: 0.33, 3: 0.12, 4: 0.1, 5: 0.05})
    school_size: int = 60
    office_size: int = 12
    working_age: list = field(default_factory=lambda: [18, 66])

    def __post_init__(self):
        self.household_sizes = {int(k): float(v) for k, v in self.household_sizes.items()}

    def validate(self):
        if self.n_agents < 1:
            raise InvalidParams("n_agents must be positive")
        if not self.age_bands or any(w < 0 or lo > hi for lo, hi, w in self.age_bands):
            raise InvalidParams("age bands need lo <= hi and non-negative weights")
        if sum(w for *_, w in self.age_bands) <= 0:
            raise InvalidParams("age band weights sum to zero")
        sizes = self.household_sizes
        if not sizes or any(k < 1 or v < 0 for k, v in sizes.items()) or sum(sizes.values()) <= 0:
            raise InvalidParams("household size distribution is not a distribution over sizes >= 1")
        if self.school_size < 1 or self.office_size < 1:
            raise InvalidParams("group sizes must be positive")


@dataclass
class DiseaseParams:
    transmission_prob: float = 0.05
    incubation_ticks: int = 3
    infectious_ticks: int = 8
    symptomatic_fraction: float = 0.6
    initial_infected: int = 10
    test_accuracy: float = 1.0

    def validate(self, n_agents: int | None = None):
        for name in ("transmission_prob", "symptomatic_fraction", "test_accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParams(f"{name}={v} is not a probability")
        if self.incubation_ticks < 1 or self.infectious_ticks < 1:
            raise InvalidParams("durations must be at least one tick")
        if self.initial_infected < 1:
            raise InvalidParams("initial_infected must be at least 1")
        if n_agents is not None and self.initial_infected > n_agents:
            raise InvalidParams("more initial infections than agents")


@dataclass(frozen=True)
class Agent:
    id: int
    age: int
    role: Role
    disease_state: State
    state_timer: int
    isolated_until: int | None
    infector: int | None
    last_test: tuple[int, bool] | None
    household: int
    school: int | None
    office: int | None


@dataclass(frozen=True)
class Group:
    id: int
    group_type: GroupType
    members: frozenset[int]
    closed_until: int | None


@dataclass(frozen=True)
class Metrics:
    sick_days: float = 0.0
    lost_work_days: float = 0.0
    lost_school_days: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


class SimWorld:
    """All mutable state of one simulation run."""

    def __init__(self, age, household_of, school_of, office_of, disease: DiseaseParams,
                 rng: np.random.Generator, working_age=(18, 66)):
        n = len(age)
        self.disease = disease
        self.rng = rng
        self.tick = 0
        self.horizon = 0
        self.age = np.asarray(age, dtype=np.int64)
        lo, hi = working_age
        self.role = np.full(n, Role.NEITHER, dtype=np.int8)
        self.role[self.age < 18] = Role.STUDENT
        self.role[(self.age >= lo) & (self.age <= hi)] = Role.WORKER
        self.household_of = np.asarray(household_of, dtype=np.int64)
        self.school_of = np.asarray(school_of, dtype=np.int64)
        self.office_of = np.asarray(office_of, dtype=np.int64)

        n_groups = 1 + max(self.household_of.max(), self.school_of.max(), self.office_of.max())
        self.group_type = np.full(n_groups, -1, dtype=np.int8)
        self.group_type[self.household_of] = GroupType.HOUSEHOLD
        self.group_type[self.school_of[self.school_of >= 0]] = GroupType.SCHOOL
        self.group_type[self.office_of[self.office_of >= 0]] = GroupType.OFFICE
        if (self.group_type < 0).any():
            raise InvalidParams("group ids must be contiguous and non-empty")
        self.closed_until = np.zeros(n_groups, dtype=np.int64)

        # flat (agent, group) membership table
        agents = np.arange(n)
        parts_a, parts_g = [agents], [self.household_of]
        for col in (self.school_of, self.office_of):
            has = col >= 0
            parts_a.append(agents[has])
            parts_g.append(col[has])
        self.mem_agent = np.concatenate(parts_a)
        self.mem_group = np.concatenate(parts_g)
        order = np.lexsort((self.mem_agent, self.mem_group))
        self.mem_agent, self.mem_group = self.mem_agent[order], self.mem_group[order]
        self.group_size = np.bincount(self.mem_group, minlength=n_groups)
        self._group_start = np.concatenate([[0], np.cumsum(self.group_size)])

        self.state = np.full(n, State.SUSCEPTIBLE, dtype=np.int8)
        self.timer = np.zeros(n, dtype=np.int64)
        self.isolated_from = np.zeros(n, dtype=np.int64)
        self.isolated_until = np.zeros(n, dtype=np.int64)
        self.infector = np.full(n, NONE, dtype=np.int64)
        self.infected_at = np.full(n, NONE, dtype=np.int64)
        self.test_tick = np.full(n, NONE, dtype=np.int64)
        self.test_result = np.zeros(n, dtype=bool)

        self.total_sick_agent_days = 0
        self.total_lost_work_agent_days = 0
        self.total_lost_school_agent_days = 0

    # -- construction helpers -----------------------------------------------

    def seed_infections(self, count: int):
        idx = np.sort(self.rng.choice(self.n_agents, size=count, replace=False))
        self.state[idx] = np.where(
            self.rng.random(count) < self.disease.symptomatic_fraction,
            State.INFECTIOUS_SYMPTOMATIC, State.INFECTIOUS_ASYMPTOMATIC,
        )
        self.timer[idx] = self.disease.infectious_ticks
        self.infected_at[idx] = 0
        return idx

    def copy(self, rng: np.random.Generator) -> "SimWorld":
        """Independent deep copy driven by ``rng``."""
        other = object.__new__(SimWorld)
        for k, v in self.__dict__.items():
            other.__dict__[k] = v.copy() if isinstance(v, np.ndarray) else v
        other.rng = rng
        return other

    # -- queries -------------------------------------------------------------

    @property
    def n_agents(self) -> int:
        return len(self.age)

    @property
    def n_groups(self) -> int:
        return len(self.group_type)

    def members(self, group: int) -> np.ndarray:
        return self.mem_agent[self._group_start[group]:self._group_start[group + 1]]

    def isolated(self, tick: int | None = None) -> np.ndarray:
        tick = self.tick if tick is None else tick
        return (self.isolated_from <= tick) & (tick < self.isolated_until)

    def group_closed(self, tick: int | None = None) -> np.ndarray:
        tick = self.tick if tick is None else tick
        return tick < self.closed_until

    def infectious(self) -> np.ndarray:
        return (self.state == State.INFECTIOUS_SYMPTOMATIC) | (self.state == State.INFECTIOUS_ASYMPTOMATIC)

    def state_counts(self) -> np.ndarray:
        return np.bincount(self.state, minlength=len(State))

    def test(self, agents: np.ndarray) -> np.ndarray:
        """Same-tick test results; repeated tests within a tick agree."""
        agents = np.asarray(agents, dtype=np.int64)
        stale = agents[self.test_tick[agents] != self.tick]
        if len(stale):
            carrying = np.isin(self.state[stale], (State.EXPOSED, State.INFECTIOUS_SYMPTOMATIC,
                                                   State.INFECTIOUS_ASYMPTOMATIC))
            if self.disease.test_accuracy < 1.0:
                carrying &= self.rng.random(len(stale)) < self.disease.test_accuracy
            self.test_result[stale] = carrying
            self.test_tick[stale] = self.tick
        return self.test_result[agents]

    def agent(self, i: int) -> Agent:
        iso = int(self.isolated_until[i]) if self.isolated_until[i] > self.tick else None
        return Agent(
            id=i, age=int(self.age[i]), role=Role(self.role[i]), disease_state=State(self.state[i]),
            state_timer=int(self.timer[i]), isolated_until=iso,
            infector=None if self.infector[i] == NONE else int(self.infector[i]),
            last_test=None if self.test_tick[i] == NONE else (int(self.test_tick[i]), bool(self.test_result[i])),
            household=int(self.household_of[i]),
            school=None if self.school_of[i] == NONE else int(self.school_of[i]),
            office=None if self.office_of[i] == NONE else int(self.office_of[i]),
        )

    def group(self, gid: int) -> Group:
        closed = int(self.closed_until[gid]) if self.closed_until[gid] > self.tick else None
        return Group(gid, GroupType(self.group_type[gid]), frozenset(self.members(gid).tolist()), closed)

    # -- measures ------------------------------------------------------------

    def isolate(self, agents: np.ndarray, days: int):
        """Isolation covering ticks ``tick+1 .. tick+days``; re-issuing only extends."""
        agents = np.asarray(agents, dtype=np.int64)
        if not len(agents):
            return
        new_end = self.tick + 1 + days
        active = self.isolated_until[agents] > self.tick
        fresh = agents[~active]
        self.isolated_from[fresh] = self.tick + 1
        self.isolated_until[agents] = np.maximum(self.isolated_until[agents], new_end)

    def close(self, groups: np.ndarray, days: int):
        """Closure covering ticks ``tick .. tick+days-1``."""
        groups = np.asarray(groups, dtype=np.int64)
        if not len(groups):
            return
        self.closed_until[groups] = np.maximum(self.closed_until[groups], self.tick + days)

    # -- dynamics --------------------------------------------------------------

    def step(self):
        d = self.disease
        n = self.n_agents
        infectious = self.infectious()
        isolated = self.isolated()
        closed = self.group_closed()

        # (1) contacts
        g = self.mem_group
        a = self.mem_agent
        at_home = self.group_type[g] == GroupType.HOUSEHOLD
        active = ~closed[g] & (at_home | ~isolated[a])
        inf_mem = active & infectious[a]
        k_group = np.bincount(g[inf_mem], minlength=self.n_groups)
        sus_mem = active & (self.state[a] == State.SUSCEPTIBLE)
        pressure = np.bincount(a[sus_mem], weights=k_group[g[sus_mem]], minlength=n).astype(np.int64)
        p_inf = 1.0 - (1.0 - d.transmission_prob) ** pressure
        draws = self.rng.random(n)
        newly = np.flatnonzero((pressure > 0) & (draws < p_inf))
        for agent in newly:
            # the infector is uniform over all infectious contacts of this tick
            sources = []
            for grp in g[sus_mem & (a == agent)]:
                mem = self.members(grp)
                ok = infectious[mem] & ~closed[grp]
                if self.group_type[grp] != GroupType.HOUSEHOLD:
                    ok &= ~isolated[mem]
                sources.append(mem[ok])
            pool = np.concatenate(sources)
            self.infector[agent] = pool[self.rng.integers(len(pool))]
        # (2) progression of agents that were not infected this tick
        progressing = (self.state == State.EXPOSED) | infectious
        self.timer[progressing] -= 1
        done = progressing & (self.timer <= 0)
        becoming_inf = np.flatnonzero(done & (self.state == State.EXPOSED))
        recovering = done & infectious
        self.state[recovering] = State.RECOVERED
        if len(becoming_inf):
            symp = self.rng.random(len(becoming_inf)) < d.symptomatic_fraction
            self.state[becoming_inf] = np.where(symp, State.INFECTIOUS_SYMPTOMATIC, State.INFECTIOUS_ASYMPTOMATIC)
            self.timer[becoming_inf] = d.infectious_ticks
        self.state[newly] = State.EXPOSED
        self.timer[newly] = d.incubation_ticks
        self.infected_at[newly] = self.tick

        # (3) accounting over the tick's start-of-day status
        self.total_sick_agent_days += int(infectious.sum())
        office_closed = np.zeros(n, dtype=bool)
        has_office = self.office_of >= 0
        office_closed[has_office] = closed[self.office_of[has_office]]
        school_closed = np.zeros(n, dtype=bool)
        has_school = self.school_of >= 0
        school_closed[has_school] = closed[self.school_of[has_school]]
        self.total_lost_work_agent_days += int(((self.role == Role.WORKER) & (isolated | office_closed)).sum())
        self.total_lost_school_agent_days += int(((self.role == Role.STUDENT) & (isolated | school_closed)).sum())

        # (4)
        self.tick += 1

    def metrics(self) -> Metrics:
        n_workers = int((self.role == Role.WORKER).sum())
        n_students = int((self.role == Role.STUDENT).sum())
        return Metrics(
            sick_days=self.total_sick_agent_days / self.n_agents,
            lost_work_days=self.total_lost_work_agent_days / n_workers if n_workers else 0.0,
            lost_school_days=self.total_lost_school_agent_days / n_students if n_students else 0.0,
        )


def _assign_groups(members: np.ndarray, size: int, first_id: int, rng) -> tuple[np.ndarray, int]:
    """Shuffle ``members`` into consecutive groups of ``size``; return ids and next free id."""
    ids = np.full(len(members), NONE, dtype=np.int64)
    if not len(members):
        return ids, first_id
    order = rng.permutation(len(members))
    ids[order] = first_id + np.arange(len(members)) // size
    return ids, first_id + -(-len(members) // size)


def synthesize_population(pop: PopulationParams, disease: DiseaseParams, rng: np.random.Generator) -> SimWorld:
    """Build a synthetic world and seed ``initial_infected`` infectious agents."""
    pop.validate()
    disease.validate(pop.n_agents)
    n = pop.n_agents

    bands = np.asarray(pop.age_bands, dtype=float)
    w = bands[:, 2] / bands[:, 2].sum()
    band = rng.choice(len(bands), size=n, p=w)
    age = rng.integers(bands[band, 0].astype(int), bands[band, 1].astype(int) + 1)

    sizes = np.array(sorted(int(k) for k in pop.household_sizes), dtype=np.int64)
    sw = np.array([pop.household_sizes[k] for k in sizes])
    sw /= sw.sum()
    household_of = np.empty(n, dtype=np.int64)
    pos, hid = 0, 0
    while pos < n:
        s = int(rng.choice(sizes, p=sw))
        household_of[pos:pos + s] = hid
        pos += s
        hid += 1
    # households are filled in id order; shuffle who lives where
    household_of = household_of[rng.permutation(n)]

    students = np.flatnonzero(age < 18)
    lo, hi = pop.working_age
    workers = np.flatnonzero((age >= lo) & (age <= hi))
    school_of = np.full(n, NONE, dtype=np.int64)
    office_of = np.full(n, NONE, dtype=np.int64)
    ids, nxt = _assign_groups(students, pop.school_size, hid, rng)
    school_of[students] = ids
    ids, nxt = _assign_groups(workers, pop.office_size, nxt, rng)
    office_of[workers] = ids

    world = SimWorld(age, household_of, school_of, office_of, disease, rng, working_age=(lo, hi))
    world.seed_infections(disease.initial_infected)
    return world


def run_episode(world: SimWorld, interventions=(), horizon: int = 365, observer=None) -> Metrics:
    """Run ``horizon`` ticks from tick 0.

    Every tick, each intervention (anything with ``execute(world)``) runs in
    order before the world steps.  ``observer(world)`` is called after every
    step.
    """
    if world.tick != 0:
        raise ValueError("run_episode expects a fresh world at tick 0")
    world.horizon = horizon
    for _ in range(horizon):
        for iv in interventions:
            iv.execute(world)
        world.step()
        if observer is not None:
            observer(world)
    return world.metrics()

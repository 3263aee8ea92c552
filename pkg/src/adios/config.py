"""Scenario configuration: one JSON document plus command-line overrides."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .gggp import GgpParams, GoalFunction, Scenario
from .sim import DiseaseParams, PopulationParams

CONFIG_ENV = "ADIOS_CONFIG"

# the four case-study goal functions
GOAL_PRESETS = {
    "sick_days": GoalFunction(0, 0, 1),
    "lost_school_days": GoalFunction(0, 1, 0),
    "lost_work_days": GoalFunction(1, 0, 0),
    "combined": GoalFunction(1, 1, 2),
}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    population: PopulationParams = field(default_factory=PopulationParams)
    disease: DiseaseParams = field(default_factory=DiseaseParams)
    horizon: int = 365
    replicates: int = 1
    goal: GoalFunction = field(default_factory=lambda: GOAL_PRESETS["combined"])
    gggp: GgpParams = field(default_factory=GgpParams)
    grammar_extension: str | None = None
    bans: str | None = None
    seed: int = 0
    out_dir: str = "runs/default"
    workers: int = 1

    def scenario(self) -> Scenario:
        return Scenario(self.population, self.disease, self.horizon, self.replicates,
                        self.grammar_extension, self.bans)

    def ggp_params(self) -> GgpParams:
        return replace(self.gggp, master_seed=self.seed, replicates=self.replicates)

    def to_dict(self) -> dict:
        d = {
            "population": asdict(self.population),
            "disease": asdict(self.disease),
            "horizon": self.horizon,
            "replicates": self.replicates,
            "goal": {"lost_work_days": self.goal.w_work, "lost_school_days": self.goal.w_school,
                     "sick_days": self.goal.w_sick},
            "gggp": {k: v for k, v in asdict(self.gggp).items() if k not in ("master_seed", "replicates")},
            "grammar_extension": self.grammar_extension,
            "bans": self.bans,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
        }
        d["population"]["household_sizes"] = {str(k): v for k, v in self.population.household_sizes.items()}
        return d


def _build(cls, data: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _goal(spec) -> GoalFunction:
    if isinstance(spec, str):
        if spec not in GOAL_PRESETS:
            raise ConfigError(f"unknown goal preset {spec!r}; choose from {sorted(GOAL_PRESETS)}")
        return GOAL_PRESETS[spec]
    allowed = {"lost_work_days", "lost_school_days", "sick_days"}
    if not isinstance(spec, dict) or set(spec) - allowed:
        raise ConfigError(f"goal must be a preset name or weights over {sorted(allowed)}")
    try:
        return GoalFunction(spec.get("lost_work_days", 0.0), spec.get("lost_school_days", 0.0),
                            spec.get("sick_days", 0.0))
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _resolve_path(value, base: Path | None):
    """Packaged data names stay as they are; other relative paths are relative to the config file."""
    if value is None:
        return None
    if resources.files("adios.data").joinpath(value).is_file() and not Path(value).exists():
        return value
    p = Path(value)
    if not p.is_absolute() and base is not None:
        p = base / p
    if not p.exists():
        raise ConfigError(f"referenced file does not exist: {value}")
    return str(p)


def config_from_dict(doc: dict, base: Path | None = None) -> ScenarioConfig:
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    cfg = ScenarioConfig()
    if "population" in doc:
        cfg.population = _build(PopulationParams, doc["population"], "population")
    if "disease" in doc:
        cfg.disease = _build(DiseaseParams, doc["disease"], "disease")
    if "gggp" in doc:
        cfg.gggp = _build(GgpParams, doc["gggp"], "gggp")
    if "goal" in doc:
        cfg.goal = _goal(doc["goal"])
    for key in ("horizon", "replicates", "seed", "workers"):
        if key in doc:
            if not isinstance(doc[key], int) or doc[key] < 0:
                raise ConfigError(f"{key} must be a non-negative integer")
            setattr(cfg, key, doc[key])
    if cfg.replicates < 1 or cfg.workers < 1:
        raise ConfigError("replicates and workers must be at least 1")
    if "out_dir" in doc:
        cfg.out_dir = str(doc["out_dir"])
    cfg.grammar_extension = _resolve_path(doc.get("grammar_extension"), base)
    cfg.bans = _resolve_path(doc.get("bans"), base)
    try:
        cfg.population.validate()
        cfg.disease.validate(cfg.population.n_agents)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return cfg


def load_config(path: str | Path | None = None) -> ScenarioConfig:
    """Read a config file; ``None`` falls back to ``$ADIOS_CONFIG`` and then to defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return ScenarioConfig()
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    return config_from_dict(doc, p.parent)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

"""Command-line entry point: ``adios optimize | simulate | gen | check``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .bans import check_tree
from .config import CONFIG_ENV, ConfigError, ScenarioConfig, atomic_write, config_from_dict, load_config
from .generate import GenConfig, GenerationExhausted, sample_population
from .gggp import fitness_from_goal, run_evolution, simulate
from .grammar import AmbiguityError, NPISyntaxError, parse_intervention, render_phenotype
from .interventions import UnboundTerminal, compile_tree, default_binding

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("adios")


def fitness_table(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "mean_fitness", "max_fitness", "best_phenotype"])
    for rec in history:
        w.writerow([rec.generation, repr(rec.mean_fitness), repr(rec.max_fitness), rec.best_phenotype])
    return buf.getvalue()


def cmd_optimize(cfg: ScenarioConfig) -> dict:
    scenario = cfg.scenario()
    g, templates = scenario.grammar(), scenario.templates()
    result = run_evolution(cfg.ggp_params(), g, templates, scenario, cfg.goal, workers=cfg.workers)
    out = Path(cfg.out_dir)
    best = result.best
    report = {
        "phenotype": best.phenotype,
        "fitness": best.fitness,
        "goal": cfg.goal.describe(),
        "goal_value": cfg.goal(best.metrics),
        "metrics": asdict(best.metrics),
        "seed": cfg.seed,
    }
    record = {
        "config": cfg.to_dict(),
        "goal": cfg.goal.describe(),
        "history": [
            {"generation": h.generation, "mean_fitness": h.mean_fitness, "max_fitness": h.max_fitness,
             "best_phenotype": h.best_phenotype, "best_metrics": asdict(h.best_metrics),
             "individuals": h.individuals}
            for h in result.history
        ],
        "best": report,
    }
    atomic_write(out / "fitness.csv", fitness_table(result.history))
    atomic_write(out / "best.json", json.dumps(report, indent=2) + "\n")
    atomic_write(out / "run.json", json.dumps(record, indent=2) + "\n")
    return record


def cmd_simulate(npi: str | None, cfg: ScenarioConfig) -> dict:
    scenario = cfg.scenario()
    if npi is not None:
        compile_tree(parse_intervention(npi, scenario.grammar()), default_binding())
    m = simulate(npi, scenario, cfg.seed)
    goal = cfg.goal(m)
    return {"npi": npi, "metrics": asdict(m), "goal": cfg.goal.describe(), "goal_value": goal,
            "fitness": fitness_from_goal(goal), "seed": cfg.seed}


def cmd_gen(n: int, cfg: ScenarioConfig, max_depth: int | None = None) -> list[str]:
    scenario = cfg.scenario()
    gc = GenConfig(max_depth=max_depth or cfg.gggp.max_depth, rng_seed=cfg.seed)
    trees = sample_population(n, scenario.grammar(), scenario.templates(), gc, cfg.seed)
    return [render_phenotype(t) for t in trees]


def cmd_check(npi: str, cfg: ScenarioConfig) -> tuple[bool, str]:
    """``(ok, message)``; the message names the first failure class."""
    scenario = cfg.scenario()
    try:
        tree = parse_intervention(npi, scenario.grammar())
    except NPISyntaxError as e:
        return False, f"syntax: {e}"
    except AmbiguityError as e:
        return False, f"ambiguity: {e}"
    try:
        compile_tree(tree, default_binding())
    except (UnboundTerminal, TypeError) as e:
        return False, f"compile: {e}"
    violations = check_tree(tree, scenario.templates())
    if violations:
        return False, "ban: " + "; ".join(str(v) for v in violations)
    return True, "ok"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adios", description="Evolve non-pharmaceutical interventions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help=f"scenario config (JSON); default ${CONFIG_ENV}")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("optimize", help="run the genetic programming search")
    common(sp)
    sp.add_argument("--generations", type=int)
    sp.add_argument("--out-dir")
    sp.add_argument("--workers", type=int)

    sp = sub.add_parser("simulate", help="evaluate one NPI (or none)")
    common(sp)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--npi")
    grp.add_argument("--baseline", action="store_true")

    sp = sub.add_parser("gen", help="print random ban-conformant NPIs")
    common(sp)
    sp.add_argument("-n", type=int, default=10)
    sp.add_argument("--depth", type=int)

    sp = sub.add_parser("check", help="validate an NPI string")
    common(sp)
    sp.add_argument("npi")
    return p


def _configure(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "generations", None) is not None:
        cfg.gggp = replace(cfg.gggp, generations=args.generations)
    if getattr(args, "out_dir", None):
        cfg.out_dir = args.out_dir
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _configure(args)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "optimize":
            record = cmd_optimize(cfg)
            print(f"best: {record['best']['phenotype']}  fitness={record['best']['fitness']:.6g}")
            print(f"wrote {cfg.out_dir}/fitness.csv, best.json, run.json")
        elif args.command == "simulate":
            print(json.dumps(cmd_simulate(None if args.baseline else args.npi, cfg), indent=2))
        elif args.command == "gen":
            if args.n < 1 or (args.depth is not None and args.depth < 3):
                print("n must be positive and depth at least 3", file=sys.stderr)
                return EXIT_USAGE
            for line in cmd_gen(args.n, cfg, args.depth):
                print(line)
        elif args.command == "check":
            ok, msg = cmd_check(args.npi, cfg)
            print(msg)
            return EXIT_OK if ok else EXIT_RUNTIME
    except (NPISyntaxError, AmbiguityError, UnboundTerminal) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except GenerationExhausted as e:
        print(f"generation failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``pastplan <stage> ...``."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .compiler import compile_goal, format_mapping, parse_mapping
from .fond import FondError, ground, parse_domain, parse_problem, print_domain, print_problem
from .formula import FormulaSyntaxError, eval_trace, parse_formula, parse_trace, to_text
from .hierarchy import CAPTION, TEXT, LevelError, assemble_goal
from .pipeline import (
    PlayConfig,
    load_domain,
    perceive_report,
    perceive_stage,
    planning_problem,
    play,
)
from .planner import MODES, STRONG, export_dot, plan, policy_from_json, policy_to_json, verify_policy
from .semantic import FrameError, OntologyError, ScenarioError
from .sim import SimError, run

EXIT_OK, EXIT_ERROR, EXIT_UNSOLVABLE, EXIT_INVALID = 0, 1, 3, 4
_ERRORS = (OSError, ValueError, FondError, FormulaSyntaxError, LevelError, ScenarioError,
           OntologyError, FrameError, SimError, KeyError)


def seed_value(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def seed_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError("expected a..b")
    a, b = seed_value(lo), seed_value(hi)
    if b < a:
        raise argparse.ArgumentTypeError("empty seed range")
    return list(range(a, b + 1))


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError("dropout must be in [0, 1)")
    return value


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, name: str, text: str) -> None:
    """Write an artifact to --out when given, else to stdout."""
    if args.out:
        (_out_dir(args) / name).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args) -> PlayConfig:
    return PlayConfig(
        scenario=args.scenario,
        domain=getattr(args, "domain", None),
        ontology=args.ontology,
        levels=args.levels,
        mode=args.mode,
        seed=args.seed,
        max_steps=getattr(args, "max_steps", 50),
        dropout=args.dropout,
        variant=args.g2_variant,
        out=args.out,
    )


def _goal_for(args, cfg: PlayConfig):
    if getattr(args, "goal", None):
        return parse_formula(args.goal)
    sm, sel, templates = perceive_stage(cfg)
    if sel.idle:
        raise LevelError(f"no goal: idle ({sel.reason})")
    return assemble_goal(sel.level, sm, templates, cfg.variant)


def _mapping_beside(path: str, explicit: str | None):
    candidate = Path(explicit) if explicit else Path(path).parent / "mapping.txt"
    return parse_mapping(candidate.read_text()) if candidate.exists() else None


# --------------------------------------------------------------- commands


def cmd_perceive(args) -> int:
    sm, sel, templates = perceive_stage(_config(args))
    sys.stdout.write(perceive_report(sm, sel, templates))
    return EXIT_OK


def cmd_assemble_goal(args) -> int:
    goal = _goal_for(args, _config(args))
    _emit(args, "goal.txt", to_text(goal) + "\n")
    return EXIT_OK


def cmd_compile(args) -> int:
    domain = load_domain(args.domain)
    if args.problem:
        problem = parse_problem(Path(args.problem).read_text(), domain)
        if not args.goal:
            raise LevelError("--goal is required with --problem")
        goal = parse_formula(args.goal)
    else:
        if not args.scenario:
            raise LevelError("give a scenario or --problem")
        cfg = _config(args)
        goal = _goal_for(args, cfg)
        sm, _, _ = perceive_stage(cfg)
        problem = planning_problem(sm, domain)
    d2, p2, cmap = compile_goal(domain, problem, goal, unfold_goal=args.unfold)
    out = _out_dir(args)
    (out / "domain.pddl").write_text(print_domain(d2))
    (out / "problem.pddl").write_text(print_problem(p2))
    (out / "mapping.txt").write_text(format_mapping(cmap))
    print(f"goal\t{to_text(goal)}")
    print(f"memory_fluents\t{len(cmap.memory)}")
    print(f"derived_predicates\t{len(cmap.val)}")
    return EXIT_OK


def _load_pair(args):
    domain = parse_domain(Path(args.domain_file).read_text())
    problem = parse_problem(Path(args.problem_file).read_text(), domain)
    return domain, problem


def cmd_plan(args) -> int:
    domain, problem = _load_pair(args)
    model = ground(domain, problem)
    result = plan(model, args.mode)
    print(f"mode\t{args.mode}")
    for k in sorted(result.stats):
        print(f"{k}\t{result.stats[k]}")
    if not result:
        print(f"status\tunsolvable\nreason\t{result.reason}")
        return EXIT_UNSOLVABLE
    cmap = _mapping_beside(args.domain_file, args.mapping)
    hidden = cmap.memory_names if cmap else frozenset()
    out = _out_dir(args)
    (out / "policy.json").write_text(policy_to_json(result))
    (out / "policy.dot").write_text(export_dot(result, hidden))
    if args.figures:
        from . import plotting

        plotting.policy_figure(result, hidden, out / "policy.png")
    print("status\tsolved")
    for name in sorted(result.actions):
        print(f"action\t{name}")
    return EXIT_OK


def cmd_verify(args) -> int:
    domain, problem = _load_pair(args)
    model = ground(domain, problem)
    policy = policy_from_json(Path(args.policy).read_text())
    cmap = _mapping_beside(args.domain_file, args.mapping)
    if cmap is None:
        raise LevelError("verify needs the mapping file written by compile")
    horizon = args.horizon or max(1, policy.stats.get("reachable", len(policy) + 1))
    verdict = verify_policy(model, policy, cmap.goal, horizon, cmap.memory_names)
    print(f"valid\t{str(verdict.valid).lower()}")
    print(f"traces\t{verdict.traces_checked}")
    if not verdict.valid:
        print(f"reason\t{verdict.reason}")
        for i, s in enumerate(verdict.counterexample or []):
            print(f"counterexample\t{i}\t{','.join(sorted(map(str, s)))}")
        return EXIT_INVALID
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    sm, sel, _ = perceive_stage(cfg)
    policy = policy_from_json(Path(args.policy).read_text())
    cmap = parse_mapping(Path(args.mapping).read_text())
    ep = run(policy, sm, cmap, args.seed, args.max_steps, level=sel.level)
    if args.out:
        out = _out_dir(args)
        (out / "trace.log").write_text(ep.log())
        (out / "episode.tsv").write_text(ep.report())
    sys.stdout.write(ep.report())
    return EXIT_OK


def _play_one(cfg: PlayConfig):
    res = play(cfg)
    return cfg.seed, res


def cmd_play(args) -> int:
    cfg = _config(args)
    if args.seeds:
        base = Path(args.out) if args.out else None
        configs = [replace(cfg, seed=s, out=str(base / f"seed_{s}") if base else None,
                           figures=False) for s in args.seeds]
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_play_one, configs))
        lines = ["seed\tlevel\tstatus\tsteps\tverdict"]
        for seed, res in results:
            ep = res.episode
            level = "idle" if res.selection.idle else str(res.selection.level)
            lines.append(f"{seed}\t{level}\t{res.status}\t{ep.steps if ep else 0}\t"
                         f"{str(ep.verdict).lower() if ep else '-'}")
        text = "\n".join(lines) + "\n"
        if base is not None:
            base.mkdir(parents=True, exist_ok=True)
            (base / "sweep.tsv").write_text(text)
        sys.stdout.write(text)
        return EXIT_OK
    res = play(cfg)
    if res.selection.idle:
        print(f"level\tidle\nreason\t{res.selection.reason}")
        return EXIT_OK
    if not res.policy:
        print(f"status\tunsolvable\nreason\t{res.policy.reason}")
        return EXIT_UNSOLVABLE
    sys.stdout.write(res.episode.report())
    print(f"policy_valid\t{str(res.verdict.valid).lower()}")
    print(f"policy_actions\t{len(res.policy.actions)}")
    return EXIT_OK


def cmd_eval_trace(args) -> int:
    goal = parse_formula(args.formula)
    trace = parse_trace(Path(args.trace).read_text())
    print(str(eval_trace(goal, trace)).lower())
    return EXIT_OK


def cmd_dot(args) -> int:
    policy = policy_from_json(Path(args.policy).read_text())
    hidden = frozenset()
    if args.mapping:
        hidden = parse_mapping(Path(args.mapping).read_text()).memory_names
    _emit(args, "policy.dot", export_dot(policy, hidden))
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=seed_value, default=0, help="64-bit unsigned seed")
    common.add_argument("--mode", choices=MODES, default=STRONG)
    common.add_argument("--out", help="output directory")
    common.add_argument("--g2-variant", choices=(TEXT, CAPTION), default=TEXT,
                        help="form of the level-3 goal fragment")

    scene = argparse.ArgumentParser(add_help=False)
    scene.add_argument("--ontology", help="ontology file (default: packaged)")
    scene.add_argument("--levels", help="level templates file (default: packaged)")
    scene.add_argument("--dropout", type=_probability, default=0.0)

    parser = argparse.ArgumentParser(prog="pastplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perceive", parents=[common, scene], help="semantic map and level report")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_perceive)

    p = sub.add_parser("assemble-goal", parents=[common, scene], help="goal formula for a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_assemble_goal)

    p = sub.add_parser("compile", parents=[common, scene], help="compile a temporal goal into PDDL")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--domain", help="domain file (default: packaged soccer domain)")
    p.add_argument("--problem", help="problem file instead of a scenario")
    p.add_argument("--goal", help="goal formula (default: assembled from the scenario)")
    p.add_argument("--unfold", action="store_true", help="emit an axiom-free goal")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("plan", parents=[common], help="solve a compiled problem")
    p.add_argument("domain_file")
    p.add_argument("problem_file")
    p.add_argument("--mapping", help="mapping file (default: next to the domain)")
    p.add_argument("--figures", action="store_true", help="also render policy.png")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify", parents=[common], help="check a policy against the temporal goal")
    p.add_argument("domain_file")
    p.add_argument("problem_file")
    p.add_argument("policy")
    p.add_argument("--mapping")
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", parents=[common, scene], help="run a policy in the grid world")
    p.add_argument("scenario")
    p.add_argument("--policy", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--max-steps", type=int, default=50)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("play", parents=[common, scene], help="whole pipeline on one scenario")
    p.add_argument("scenario")
    p.add_argument("--domain")
    p.add_argument("--max-steps", type=int, default=50)
    p.add_argument("--seeds", type=seed_range, help="sweep a..b, episodes in parallel")
    p.add_argument("--jobs", type=int, default=4)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("eval-trace", parents=[common], help="evaluate a formula on a trace file")
    p.add_argument("formula")
    p.add_argument("trace")
    p.set_defaults(func=cmd_eval_trace)

    p = sub.add_parser("dot", parents=[common], help="DOT text for a policy file")
    p.add_argument("policy")
    p.add_argument("--mapping")
    p.set_defaults(func=cmd_dot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "compile" and args.out is None:
        args.out = "."
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"pastplan: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

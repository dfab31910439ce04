"""End-to-end orchestration: scenario to episode, with every artifact on disk."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .compiler import CompilationMap, compile_goal, format_mapping
from .fond import FondDomain, FondProblem, TRUE_CONDITION, ground, parse_domain, print_domain, print_problem
from .fond.grounding import GroundedModel
from .formula import Formula, to_text
from .hierarchy import TEXT, LevelTemplate, Selection, assemble_goal, default_levels, parse_levels, select_level
from .planner import STRONG, Policy, Unsolvable, Verdict, export_dot, plan, policy_to_json, verify_policy
from .semantic import (
    AGENT_ID,
    DeltaWeights,
    Ontology,
    SemanticMap,
    default_ontology,
    describe_counts,
    parse_ontology,
    semantic_map,
    load_scenario,
    target_goal,
)
from .sim import Episode, build_registry, initial_world, run, runtime_fluents


def packaged(name: str) -> str:
    return resources.files("pastplan").joinpath("data", name).read_text()


def load_domain(path: str | os.PathLike | None = None) -> FondDomain:
    text = Path(path).read_text() if path else packaged("soccer_domain.pddl")
    return parse_domain(text)


def load_ontology(path=None) -> Ontology:
    return parse_ontology(Path(path).read_text()) if path else default_ontology()


def load_levels(path=None) -> list[LevelTemplate]:
    return parse_levels(Path(path).read_text()) if path else default_levels()


def planning_problem(sm: SemanticMap, domain: FondDomain, name: str = "play") -> FondProblem:
    """Objects named by role; the initial state is what the world shows at step 0."""
    objects = [(AGENT_ID, "robot")]
    if sm.of("Ball"):
        objects += [("ball", "ball"), ("ballposition", "location")]
    if target_goal(sm) is not None:
        objects += [("goal1", "goal"), ("goalposition", "location")]
    init = frozenset()
    if sm.of("Ball"):
        w = initial_world(sm)
        init = runtime_fluents(w, build_registry(None, sm, w))
    return FondProblem(name, domain.name, tuple(objects), init, TRUE_CONDITION)


def perceive_report(sm: SemanticMap, sel: Selection, templates: list[LevelTemplate]) -> str:
    rows = [f"frame\t{sm.frame.name}"]
    for line in describe_counts(sm):
        rows.append(f"element\t{line}")
    for p in sorted(sm.predicates):
        rows.append(f"predicate\t{p[0]}({','.join(p[1:])})")
    for t in templates:
        rows.append(f"delta\tlevel {t.index}\t{sel.deltas[t.index]:g}")
    rows.append(f"selected\t{selection_text(sm, sel, templates)}")
    return "\n".join(rows) + "\n"


def selection_text(sm: SemanticMap, sel: Selection, templates: list[LevelTemplate]) -> str:
    if sel.idle:
        return f"idle ({sel.reason})"
    template = next(t for t in templates if t.index == sel.level)
    described = {line.split("×", 1)[0]: line for line in describe_counts(sm)}
    parts = [described[c] for c, _ in reversed(template.requires) if c in described]
    return ", ".join([f"level {sel.level}"] + parts)


@dataclass
class PlayConfig:
    scenario: str
    domain: str | None = None
    ontology: str | None = None
    levels: str | None = None
    mode: str = STRONG
    seed: int = 0
    max_steps: int = 50
    dropout: float = 0.0
    variant: str = TEXT
    horizon: int | None = None
    weights: DeltaWeights = field(default_factory=DeltaWeights)
    out: str | None = None
    figures: bool = True


@dataclass
class PlayResult:
    config: PlayConfig
    sm: SemanticMap
    selection: Selection
    goal: Formula | None = None
    domain: FondDomain | None = None
    problem: FondProblem | None = None
    cmap: CompilationMap | None = None
    model: GroundedModel | None = None
    policy: Policy | Unsolvable | None = None
    verdict: Verdict | None = None
    episode: Episode | None = None
    files: dict[str, str] = field(default_factory=dict)

    @property
    def status(self) -> str:
        if self.selection.idle:
            return "idle"
        if not self.policy:
            return "unsolvable"
        return self.episode.status if self.episode else "planned"


def perceive_stage(cfg: PlayConfig):
    ont = load_ontology(cfg.ontology)
    templates = load_levels(cfg.levels)
    sc = load_scenario(Path(cfg.scenario).read_text(), ont.sensory_kinds)
    sm = semantic_map(sc, ont, cfg.dropout, cfg.seed)
    return sm, select_level(sm, templates, ont, cfg.weights), templates


def play(cfg: PlayConfig) -> PlayResult:
    sm, sel, templates = perceive_stage(cfg)
    res = PlayResult(cfg, sm, sel)
    out = Path(cfg.out) if cfg.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    def write(name, text):
        if out is not None:
            (out / name).write_text(text)
            res.files[name] = str(out / name)

    write("perceive.tsv", perceive_report(sm, sel, templates))
    if sel.idle:
        write("episode.tsv", f"level\tidle\nreason\t{sel.reason}\n")
        return res
    res.goal = assemble_goal(sel.level, sm, templates, cfg.variant)
    write("goal.txt", to_text(res.goal) + "\n")
    domain = load_domain(cfg.domain)
    problem = planning_problem(sm, domain)
    res.domain, res.problem, res.cmap = compile_goal(domain, problem, res.goal)
    write("domain.pddl", print_domain(res.domain))
    write("problem.pddl", print_problem(res.problem))
    write("mapping.txt", format_mapping(res.cmap))
    res.model = ground(res.domain, res.problem)
    res.policy = plan(res.model, cfg.mode)
    if not res.policy:
        write("episode.tsv", f"level\t{sel.level}\nstatus\tunsolvable\nreason\t{res.policy.reason}\n")
        return res
    hidden = res.cmap.memory_names
    write("policy.json", policy_to_json(res.policy))
    write("policy.dot", export_dot(res.policy, hidden))
    horizon = cfg.horizon or max(1, res.policy.stats["reachable"])
    res.verdict = verify_policy(res.model, res.policy, res.goal, horizon, hidden)
    res.episode = run(res.policy, sm, res.cmap, cfg.seed, cfg.max_steps, level=sel.level)
    write("trace.log", res.episode.log())
    write("episode.tsv", res.episode.report() + f"policy_valid\t{str(res.verdict.valid).lower()}\n")
    if out is not None and cfg.figures:
        from . import plotting

        res.files["policy.png"] = plotting.policy_figure(res.policy, hidden, out / "policy.png")
        res.files["delta.png"] = plotting.delta_figure(sel.deltas, sel.level, out / "delta.png")
        res.files["trace.png"] = plotting.trace_figure(res.episode.trace, out / "trace.png")
    return res

"""Levels of operation and the nested goals they unlock."""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from importlib import resources

from .formula import Formula, conjoin, parse_formula
from .semantic import AGENT_ID, DeltaWeights, Ontology, SemanticMap, delta, template_map

TEXT = "text"
CAPTION = "caption"
VARIANTS = (TEXT, CAPTION)


class LevelError(ValueError):
    pass


@dataclass(frozen=True)
class LevelTemplate:
    index: int
    name: str
    requires: tuple[tuple[str, int], ...]
    template: tuple[tuple[str, int], ...] = ()
    fragment: str | None = None
    caption: str | None = None

    def satisfied_by(self, sm: SemanticMap) -> bool:
        counts = sm.counts()
        return all(counts[c] >= n for c, n in self.requires)

    def missing(self, sm: SemanticMap) -> list[str]:
        counts = sm.counts()
        return [f"{c}×{n}" for c, n in self.requires if counts[c] < n]

    def fragment_for(self, variant: str = TEXT) -> str | None:
        if variant == CAPTION and self.caption is not None:
            return self.caption
        return self.fragment


@dataclass(frozen=True)
class Selection:
    level: int | None
    name: str
    deltas: dict[int, float] = field(default_factory=dict)
    reason: str = ""

    @property
    def idle(self) -> bool:
        return self.level is None


def _counts(text: str) -> tuple[tuple[str, int], ...]:
    out = []
    for item in filter(None, text.split(",")):
        concept, _, n = item.partition(":")
        out.append((concept, int(n) if n else 1))
    return tuple(out)


def check_monotone(templates: list[LevelTemplate]) -> None:
    for lo, hi in zip(templates, templates[1:]):
        if hi.index != lo.index + 1:
            raise LevelError("levels must be numbered consecutively from 0")
        need = dict(hi.requires)
        if any(need.get(c, 0) < n for c, n in lo.requires) or dict(lo.requires) == need:
            raise LevelError(f"level {hi.index} must require strictly more than level {lo.index}")


def parse_levels(text: str) -> list[LevelTemplate]:
    levels = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = shlex.split(raw, comments=True)
        if not tokens:
            continue
        if tokens[0] != "level" or len(tokens) < 2:
            raise LevelError(f"line {lineno}: expected 'level <index> key=value ...'")
        opts = dict(t.split("=", 1) for t in tokens[2:] if "=" in t)
        unknown = set(opts) - {"name", "requires", "template", "fragment", "caption"}
        if unknown:
            raise LevelError(f"line {lineno}: unknown option(s) {sorted(unknown)}")
        for key in ("fragment", "caption"):
            if key in opts:
                parse_formula(opts[key].format(agent=AGENT_ID))
        levels.append(LevelTemplate(
            index=int(tokens[1]),
            name=opts.get("name", f"level{tokens[1]}"),
            requires=_counts(opts.get("requires", "")),
            template=_counts(opts.get("template", opts.get("requires", ""))),
            fragment=opts.get("fragment"),
            caption=opts.get("caption"),
        ))
    levels.sort(key=lambda t: t.index)
    if not levels:
        raise LevelError("no levels defined")
    check_monotone(levels)
    return levels


_DEFAULT: list[LevelTemplate] | None = None


def default_levels() -> list[LevelTemplate]:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = parse_levels(resources.files("pastplan").joinpath("data/levels.txt").read_text())
    return list(_DEFAULT)


def select_level(sm: SemanticMap, templates: list[LevelTemplate] | None = None,
                 ont: Ontology | None = None, weights: DeltaWeights = DeltaWeights()) -> Selection:
    """Highest level whose checklist the map meets; delta to each template is diagnostic."""
    templates = templates if templates is not None else default_levels()
    if not templates:
        raise LevelError("no level templates")
    check_monotone(templates)
    deltas = {t.index: delta(sm, template_map(dict(t.template), ont, sm.frame), weights) for t in templates}
    chosen = None
    for t in templates:
        if t.satisfied_by(sm):
            chosen = t
        else:
            break
    if chosen is None:
        missing = ", ".join(templates[0].missing(sm))
        reason = "no ball" if any(m.startswith("Ball") for m in templates[0].missing(sm)) else f"missing {missing}"
        return Selection(None, "idle", deltas, reason)
    return Selection(chosen.index, chosen.name, deltas)


def assemble_goal(level: int, sm: SemanticMap | None = None, templates: list[LevelTemplate] | None = None,
                  variant: str = TEXT, agent: str = AGENT_ID) -> Formula:
    """Conjunction of the fragments of every level up to ``level``, oldest first."""
    if variant not in VARIANTS:
        raise LevelError(f"unknown goal variant {variant!r}")
    templates = templates if templates is not None else default_levels()
    by_index = {t.index: t for t in templates}
    if level not in by_index:
        raise LevelError(f"no level {level}")
    if sm is not None and not by_index[level].satisfied_by(sm):
        raise LevelError(f"level {level} lacks grounding instances: missing "
                         + ", ".join(by_index[level].missing(sm)))
    parts = []
    for i in range(level + 1):
        text = by_index[i].fragment_for(variant)
        if text is not None:
            parts.append(parse_formula(text.format(agent=agent)))
    if not parts:
        raise LevelError(f"levels up to {level} define no goal fragment")
    return conjoin(parts)

"""Scenario files, a small IsA/IsPartOf ontology and semantic maps.

A scenario is the stand-in for the robot's detectors: a reference frame and
a list of raw objects (``soda_can 3.0 -0.6``).  :func:`perceive` drops
objects at random, :func:`conceptualize` lifts what is left to soccer
concepts and aggregates parts into wholes, and the resulting
:class:`SemanticMap` can be compared with :func:`delta` and reduced to the
planner's vocabulary with :func:`deduced_predicates`.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

import numpy as np

_ID = re.compile(r"[a-z][a-z0-9_]*$")
AGENT_ID = "robot1"


class ScenarioError(ValueError):
    pass


class OntologyError(ValueError):
    pass


class FrameError(ValueError):
    pass


# ------------------------------------------------------------------ frames


@dataclass(frozen=True)
class Frame:
    """A named 2D frame, optionally placed rigidly inside a parent frame."""

    name: str = "world"
    parent: str | None = None
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def to_parent(self, px: float, py: float) -> tuple[float, float]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return self.x + c * px - s * py, self.y + s * px + c * py

    def from_parent(self, px: float, py: float) -> tuple[float, float]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx, dy = px - self.x, py - self.y
        return c * dx + s * dy, -s * dx + c * dy


def reconcile(a: Frame, b: Frame) -> str:
    """Name of a frame both can be expressed in, or raise :class:`FrameError`."""
    if a.name == b.name:
        if a != b:
            raise FrameError(f"two different frames are both called {a.name!r}")
        return a.name
    if a.parent == b.name:
        return b.name
    if b.parent == a.name:
        return a.name
    if a.parent is not None and a.parent == b.parent:
        return a.parent
    raise FrameError(f"frames {a.name!r} and {b.name!r} are not related by a declared transform")


# --------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class WorldObject:
    id: str
    kind: str
    x: float
    y: float
    heading: float | None = None
    attrs: tuple[tuple[str, str], ...] = ()

    def attr(self, key: str, default: str | None = None) -> str | None:
        return dict(self.attrs).get(key, default)


@dataclass(frozen=True)
class Scenario:
    frame: Frame
    objects: tuple[WorldObject, ...]

    @property
    def agent(self) -> WorldObject | None:
        for o in self.objects:
            if o.attr("role") == "self":
                return o
        return None

    def others(self) -> tuple[WorldObject, ...]:
        return tuple(o for o in self.objects if o.attr("role") != "self")


def _number(text: str, what: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ScenarioError(f"line {lineno}: malformed {what} {text!r}") from None
    if not math.isfinite(value):
        raise ScenarioError(f"line {lineno}: {what} must be finite")
    return value


def _parse_frame(tokens, lineno) -> Frame:
    if len(tokens) < 2 or not _ID.match(tokens[1]):
        raise ScenarioError(f"line {lineno}: frame needs a name")
    opts = {}
    for tok in tokens[2:]:
        key, eq, value = tok.partition("=")
        if not eq or key not in ("parent", "x", "y", "theta"):
            raise ScenarioError(f"line {lineno}: bad frame option {tok!r}")
        opts[key] = value
    nums = {k: _number(opts[k], k, lineno) for k in ("x", "y", "theta") if k in opts}
    if nums and "parent" not in opts:
        raise ScenarioError(f"line {lineno}: a frame offset needs parent=")
    return Frame(tokens[1], opts.get("parent"), **nums)


def load_scenario(text: str, kinds: Iterable[str] | None = None) -> Scenario:
    """Parse the line-oriented scenario format.

    ``kinds`` is the accepted sensory vocabulary; by default the kinds the
    default ontology knows.
    """
    known = set(kinds) if kinds is not None else default_ontology().sensory_kinds
    frame = None
    objects: list[WorldObject] = []
    seen_ids: set[str] = set()
    per_kind: Counter = Counter()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "frame":
            if frame is not None or objects:
                raise ScenarioError(f"line {lineno}: the frame header must come first and only once")
            frame = _parse_frame(tokens, lineno)
            continue
        kind = tokens[0]
        if kind not in known:
            raise ScenarioError(f"line {lineno}: unknown kind {kind!r}")
        positional = [t for t in tokens[1:] if "=" not in t]
        attrs = [t.split("=", 1) for t in tokens[1:] if "=" in t]
        if len(positional) not in (2, 3):
            raise ScenarioError(f"line {lineno}: expected 'kind x y [heading]'")
        x = _number(positional[0], "x", lineno)
        y = _number(positional[1], "y", lineno)
        heading = _number(positional[2], "heading", lineno) if len(positional) == 3 else None
        attr = dict(attrs)
        per_kind[kind] += 1
        oid = attr.pop("id", None) or f"{kind}{per_kind[kind]}"
        if not _ID.match(oid):
            raise ScenarioError(f"line {lineno}: bad object id {oid!r}")
        if oid in seen_ids:
            raise ScenarioError(f"line {lineno}: duplicate object id {oid!r}")
        seen_ids.add(oid)
        objects.append(WorldObject(oid, kind, x, y, heading, tuple(sorted(attr.items()))))
    sc = Scenario(frame or Frame(), tuple(objects))
    if sum(1 for o in sc.objects if o.attr("role") == "self") > 1:
        raise ScenarioError("more than one object has role=self")
    return sc


def read_scenario(path, kinds=None) -> Scenario:
    with open(path) as fh:
        return load_scenario(fh.read(), kinds)


def format_scenario(sc: Scenario) -> str:
    fr = sc.frame
    head = f"frame {fr.name}"
    if fr.parent is not None:
        head += f" parent={fr.parent} x={fr.x:g} y={fr.y:g} theta={fr.theta:g}"
    lines = [head]
    for o in sc.objects:
        parts = [o.kind, f"{o.x:g}", f"{o.y:g}"]
        if o.heading is not None:
            parts.append(f"{o.heading:g}")
        parts.append(f"id={o.id}")
        parts += [f"{k}={v}" for k, v in o.attrs]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- ontology


@dataclass(frozen=True)
class PairRule:
    part: str
    whole: str
    min_dist: float
    max_dist: float


@dataclass(frozen=True)
class Ontology:
    isa: tuple[tuple[str, str], ...]
    partof: tuple[tuple[str, str, bool], ...]  # (part, whole, collect)
    pairs: tuple[PairRule, ...] = ()

    def __post_init__(self):
        parent = dict(self.isa)
        if len(parent) != len(self.isa):
            raise OntologyError("a concept has two IsA parents")
        for start in parent:
            seen, node = set(), start
            while node in parent:
                if node in seen:
                    raise OntologyError(f"IsA cycle through {start!r}")
                seen.add(node)
                node = parent[node]
        for rule in self.pairs:
            if not (0 < rule.min_dist < rule.max_dist):
                raise OntologyError(f"pair {rule.part} {rule.whole}: need 0 < min < max")

    @property
    def sensory_kinds(self) -> set[str]:
        parents = {p for _, p in self.isa}
        return {c for c, _ in self.isa if c not in parents}

    def concept(self, kind: str) -> str | None:
        """Top of the IsA chain, or None if ``kind`` is not mapped."""
        parent = dict(self.isa)
        if kind not in parent:
            return None
        while kind in parent:
            kind = parent[kind]
        return kind

    def pair_rule(self, part: str) -> PairRule | None:
        for rule in self.pairs:
            if rule.part == part:
                return rule
        return None


def parse_ontology(text: str) -> Ontology:
    isa, partof, pairs = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        if head == "isa" and len(tokens) == 3:
            isa.append((tokens[1], tokens[2]))
        elif head == "partof" and len(tokens) in (3, 4):
            if len(tokens) == 4 and tokens[3] != "collect":
                raise OntologyError(f"line {lineno}: unknown partof option {tokens[3]!r}")
            partof.append((tokens[1], tokens[2], len(tokens) == 4))
        elif head == "pair" and len(tokens) == 5:
            opts = dict(t.split("=", 1) for t in tokens[3:] if "=" in t)
            try:
                pairs.append(PairRule(tokens[1], tokens[2], float(opts["min"]), float(opts["max"])))
            except (KeyError, ValueError):
                raise OntologyError(f"line {lineno}: pair needs min= and max=") from None
        else:
            raise OntologyError(f"line {lineno}: cannot parse {line!r}")
    return Ontology(tuple(isa), tuple(partof), tuple(pairs))


_DEFAULT_ONTOLOGY: Ontology | None = None


def default_ontology() -> Ontology:
    global _DEFAULT_ONTOLOGY
    if _DEFAULT_ONTOLOGY is None:
        text = resources.files("pastplan").joinpath("data/ontology.txt").read_text()
        _DEFAULT_ONTOLOGY = parse_ontology(text)
    return _DEFAULT_ONTOLOGY


# ------------------------------------------------------------- perception


@dataclass(frozen=True)
class PerceptSet:
    frame: Frame
    percepts: tuple[WorldObject, ...]
    agent: WorldObject | None = None


def perceive(sc: Scenario, dropout: float = 0.0, seed: int = 0) -> PerceptSet:
    """Keep each non-agent object with probability ``1 - dropout``.

    One uniform draw per object in file order, so for a fixed seed a higher
    dropout keeps a subset of what a lower one keeps.
    """
    if not 0.0 <= dropout < 1.0:
        raise ValueError("dropout must be in [0, 1)")
    others = sc.others()
    draws = np.random.default_rng(seed).random(len(others))
    kept = tuple(o for o, u in zip(others, draws) if u >= dropout)
    return PerceptSet(sc.frame, kept, sc.agent)


# ------------------------------------------------------------ semantic map


@dataclass(frozen=True)
class Element:
    id: str
    concept: str
    x: float
    y: float
    extent: float = 0.0
    parts: tuple[str, ...] = ()
    sources: tuple[str, ...] = ()


@dataclass(frozen=True)
class SemanticMap:
    frame: Frame
    elements: tuple[Element, ...] = ()
    predicates: frozenset = frozenset()
    agent: tuple[float, float, float] | None = None

    def counts(self) -> Counter:
        return Counter(e.concept for e in self.elements)

    def count(self, concept: str) -> int:
        return sum(1 for e in self.elements if e.concept == concept)

    def of(self, concept: str) -> list[Element]:
        return [e for e in self.elements if e.concept == concept]

    def element(self, eid: str) -> Element:
        for e in self.elements:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def source_kinds(self, concept: str) -> Counter:
        """Sensory kinds behind all instances of ``concept``."""
        c: Counter = Counter()
        for e in self.of(concept):
            c.update(e.sources)
        return c

    def in_frame(self, target: Frame) -> "SemanticMap":
        """The same map with geometry re-expressed in ``target``."""
        if target.name == self.frame.name:
            return self
        if self.frame.parent == target.name:
            move = self.frame.to_parent
        elif target.parent == self.frame.name:
            move = target.from_parent
        elif self.frame.parent is not None and self.frame.parent == target.parent:
            def move(x, y):
                return target.from_parent(*self.frame.to_parent(x, y))
        else:
            raise FrameError(f"cannot express {self.frame.name!r} in {target.name!r}")
        elements = tuple(
            Element(e.id, e.concept, *move(e.x, e.y), e.extent, e.parts, e.sources) for e in self.elements
        )
        agent = None
        if self.agent is not None:
            ax, ay = move(self.agent[0], self.agent[1])
            agent = (ax, ay, self.agent[2] + self.frame.theta - target.theta)
        return SemanticMap(target, elements, self.predicates, agent)


def _tag(concept: str) -> str:
    return concept.lower()


def _pairings(posts: list[Element], rule: PairRule):
    candidates = []
    for i in range(len(posts)):
        for j in range(i + 1, len(posts)):
            d = math.hypot(posts[i].x - posts[j].x, posts[i].y - posts[j].y)
            if rule.min_dist <= d <= rule.max_dist:
                candidates.append((d, posts[i].id, posts[j].id, i, j))
    candidates.sort()
    used: set[int] = set()
    for d, _, _, i, j in candidates:
        if i in used or j in used:
            continue
        used.update((i, j))
        yield posts[i], posts[j], d


def conceptualize(ps: PerceptSet, ont: Ontology | None = None) -> SemanticMap:
    ont = ont or default_ontology()
    frame = ps.frame
    base: dict[str, list[WorldObject]] = {}
    for o in sorted(ps.percepts, key=lambda o: o.id):
        concept = ont.concept(o.kind)
        if concept is not None:
            base.setdefault(concept, []).append(o)
    elements: list[Element] = []
    for concept in sorted(base):
        for n, o in enumerate(base[concept], 1):
            elements.append(Element(f"{_tag(concept)}{n}", concept, o.x, o.y, 0.0, (), (o.kind,)))
    ax, ay = (ps.agent.x, ps.agent.y) if ps.agent is not None else (0.0, 0.0)

    wholes: list[Element] = []
    for part, whole, collect in ont.partof:
        parts = [e for e in elements if e.concept == part]
        if not parts:
            continue
        rule = ont.pair_rule(part)
        made = []
        if rule is not None and rule.whole == whole:
            for p, q, d in _pairings(parts, rule):
                made.append(((p.x + q.x) / 2, (p.y + q.y) / 2, d, (p.id, q.id), p.sources + q.sources))
        elif collect:
            xs = [p.x for p in parts]
            ys = [p.y for p in parts]
            extent = math.hypot(max(xs) - min(xs), max(ys) - min(ys))
            made.append((sum(xs) / len(xs), sum(ys) / len(ys), extent,
                         tuple(p.id for p in parts), tuple(s for p in parts for s in p.sources)))
        # farthest from the agent first, so the first goal is the opponent's
        made.sort(key=lambda m: (-math.hypot(m[0] - ax, m[1] - ay), m[3]))
        for n, (x, y, ext, pids, srcs) in enumerate(made, 1):
            wholes.append(Element(f"{_tag(whole)}{n}", whole, x, y, ext, pids, srcs))
    elements += wholes

    preds = set()
    for e in elements:
        preds.add(("present", _tag(e.concept)))
        preds.add(("present", e.id))
        for pid in e.parts:
            preds.add(("partof", pid, e.id))
    agent = None
    if ps.agent is not None:
        agent = (ps.agent.x, ps.agent.y, ps.agent.heading or 0.0)
    return SemanticMap(frame, tuple(elements), frozenset(preds), agent)


def semantic_map(sc: Scenario, ont: Ontology | None = None, dropout: float = 0.0, seed: int = 0) -> SemanticMap:
    return conceptualize(perceive(sc, dropout, seed), ont)


def anchored(sm: SemanticMap) -> bool:
    """Every predicate argument names an element or a concept present in M."""
    names = {e.id for e in sm.elements} | {_tag(c) for c in sm.counts()}
    return all(arg in names for p in sm.predicates for arg in p[1:])


def template_map(counts: dict[str, int], ont: Ontology | None = None,
                 frame: Frame | None = None) -> SemanticMap:
    """A reference map with the given concept counts and no geometry.

    Parts are assigned to wholes in order: two per paired whole, all of
    them to a collected whole.
    """
    ont = ont or default_ontology()
    elements = []
    ids: dict[str, list[str]] = {}
    for concept in sorted(counts):
        ids[concept] = [f"{_tag(concept)}{n}" for n in range(1, counts[concept] + 1)]
    links = []
    for part, whole, collect in ont.partof:
        parts, wholes = ids.get(part, []), ids.get(whole, [])
        if not parts or not wholes:
            continue
        if ont.pair_rule(part) is not None:
            for k, w in enumerate(wholes):
                links += [(p, w) for p in parts[2 * k:2 * k + 2]]
        elif collect:
            links += [(p, wholes[0]) for p in parts]
    members: dict[str, list[str]] = {}
    for p, w in links:
        members.setdefault(w, []).append(p)
    for concept in sorted(ids):
        for eid in ids[concept]:
            elements.append(Element(eid, concept, 0.0, 0.0, 0.0, tuple(members.get(eid, ()))))
    preds = {("present", _tag(c)) for c in ids if ids[c]}
    preds |= {("present", e.id) for e in elements}
    preds |= {("partof", p, w) for p, w in links}
    return SemanticMap(frame or Frame(), tuple(elements), frozenset(preds))


# ------------------------------------------------------------------ metric


@dataclass(frozen=True)
class DeltaWeights:
    w_geom: float = 1.0
    w_pred: float = 1.0

    def __post_init__(self):
        if self.w_geom < 0 or self.w_pred < 0:
            raise ValueError("delta weights must be non-negative")
        if self.w_geom == 0 and self.w_pred == 0:
            raise ValueError("delta weights must not both be zero")


def geometric_difference(a: SemanticMap, b: SemanticMap) -> int:
    ca, cb = a.counts(), b.counts()
    return sum(abs(ca[c] - cb[c]) for c in set(ca) | set(cb))


def predicate_difference(a: SemanticMap, b: SemanticMap) -> int:
    return len(a.predicates ^ b.predicates)


def delta(a: SemanticMap, b: SemanticMap, w: DeltaWeights = DeltaWeights()) -> float:
    common = reconcile(a.frame, b.frame)
    if common != a.frame.name:
        a = a.in_frame(b.frame if b.frame.name == common else Frame(common))
    if common != b.frame.name:
        b = b.in_frame(a.frame if a.frame.name == common else Frame(common))
    return w.w_geom * geometric_difference(a, b) + w.w_pred * predicate_difference(a, b)


# ------------------------------------------------------ planner vocabulary

# concept -> (planning object, location symbol); only the first instance counts
NORMALIZATION = {
    "Ball": ("ball", "ballposition"),
    "Goal": ("goal1", "goalposition"),
}


def deduced_predicates(sm: SemanticMap, predicates: dict[str, int] | None = None) -> frozenset:
    """The map's facts in the planning vocabulary.

    ``predicates`` maps the domain's predicate names to arities; atoms
    outside it raise ``ValueError``.
    """
    out = set()
    for concept, (obj, loc) in NORMALIZATION.items():
        if sm.count(concept):
            out.add(("present", obj))
            out.add(("isat", obj, loc))
    if predicates is not None:
        for atom in out:
            if predicates.get(atom[0]) != len(atom) - 1:
                raise ValueError(f"deduced atom {atom} is outside the planning vocabulary")
    return frozenset(out)


def target_goal(sm: SemanticMap) -> Element | None:
    goals = sm.of("Goal")
    return goals[0] if goals else None


def describe_counts(sm: SemanticMap) -> list[str]:
    """``Goal×1 (from soda_can×2)`` style lines, one per concept."""
    lines = []
    counts = sm.counts()
    for concept in sorted(counts):
        src = sm.source_kinds(concept)
        origin = ", ".join(f"{k}×{n}" for k, n in sorted(src.items()))
        lines.append(f"{concept}×{counts[concept]}" + (f" (from {origin})" if origin else ""))
    return lines


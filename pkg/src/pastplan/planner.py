"""Explicit-state FOND planning, policy verification and policy export.

:func:`plan` builds the AND-OR graph reachable from the initial state and
solves it by a backward fixpoint (strong) or by prune-and-reach (strong
cyclic).  :func:`verify_policy` re-executes a policy against the model with
its own traversal and checks every outcome trace with the temporal-formula
oracle, so it does not trust anything the planner computed.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .fond.grounding import EvaluatedState, GroundedModel, applicable, evaluate_derived, successors
from .fond.pddl import format_key
from .formula import Atom, Formula, eval_trace

STRONG = "strong"
STRONG_CYCLIC = "strong-cyclic"
MODES = (STRONG, STRONG_CYCLIC)

State = frozenset  # basic atoms


@dataclass
class Policy:
    mode: str
    initial: State
    table: dict[State, str]
    successors: dict[State, tuple[State, ...]] = field(default_factory=dict)
    goals: frozenset = frozenset()
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.table)

    def __bool__(self):
        # an empty policy is still a solution
        return True

    def action_for(self, state) -> str | None:
        basic = state.basic if isinstance(state, EvaluatedState) else frozenset(state)
        return self.table.get(basic)

    @property
    def actions(self) -> set[str]:
        return set(self.table.values())

    def states(self) -> list[State]:
        """Initial state first, then breadth-first through the recorded successors."""
        order, seen = [], {self.initial}
        queue = deque([self.initial])
        while queue:
            s = queue.popleft()
            order.append(s)
            for t in self.successors.get(s, ()):
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
        return order


@dataclass
class Unsolvable:
    mode: str
    reason: str
    stats: dict = field(default_factory=dict)

    def __bool__(self):
        return False


# ------------------------------------------------------------------ search


def explore(model: GroundedModel):
    """Reachable AND-OR graph; goal states are not expanded.

    Returns ``(order, edges, goals)`` with ``edges[s] = [(action, succs), ...]``
    in action-index order.
    """
    s0 = model.initial_state()
    order = [s0]
    seen = {s0.basic: s0}
    edges: dict[State, list] = {}
    goals = set()
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        if model.is_goal(s):
            goals.add(s.basic)
            continue
        out = []
        for a in applicable(model, s):
            succs = []
            for t in successors(model, s, a):
                if t.basic not in seen:
                    seen[t.basic] = t
                    order.append(t)
                    queue.append(t)
                succs.append(t.basic)
            out.append((a, tuple(succs)))
        edges[s.basic] = out
    return [s.basic for s in order], edges, goals


def reachable_states(model: GroundedModel) -> int:
    return len(explore(model)[0])


def _restrict(s0, choice, goals):
    table, succ = {}, {}
    queue, seen = deque([s0]), {s0}
    while queue:
        s = queue.popleft()
        if s in goals:
            continue
        action, targets = choice[s]
        table[s] = action.name
        succ[s] = targets
        for t in targets:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return table, succ


def plan(model: GroundedModel, mode: str = STRONG) -> Policy | Unsolvable:
    if mode not in MODES:
        raise ValueError(f"unknown planning mode {mode!r}")
    order, edges, goals = explore(model)
    s0 = order[0]
    stats = {"reachable": len(order), "goal_states": len(goals)}
    if s0 in goals:
        return Policy(mode, s0, {}, {}, frozenset({s0}), {**stats, "policy_size": 0})
    if mode == STRONG:
        choice = _strong(order, edges, goals)
    else:
        choice = _strong_cyclic(order, edges, goals)
    if s0 not in choice:
        return Unsolvable(mode, "initial state is not winning", stats)
    table, succ = _restrict(s0, choice, goals)
    reached = {t for ts in succ.values() for t in ts} | {s0}
    stats["policy_size"] = len(table)
    return Policy(mode, s0, table, succ, frozenset(reached & goals), stats)


def _strong(order, edges, goals):
    won = set(goals)
    choice = {}
    while True:
        layer = []
        for s in order:
            if s in won:
                continue
            for a, succs in edges[s]:
                if all(t in won for t in succs):
                    layer.append((s, a, succs))
                    break
        if not layer:
            return choice
        for s, a, succs in layer:
            won.add(s)
            choice[s] = (a, succs)


def _strong_cyclic(order, edges, goals):
    pairs = {s: list(edges[s]) for s in order if s not in goals}
    while True:
        alive = set(goals) | {s for s, ps in pairs.items() if ps}
        pruned = {s: [(a, ts) for a, ts in ps if all(t in alive for t in ts)] for s, ps in pairs.items()}
        # backward reachability of the goal through remaining pairs
        preds: dict[State, list[State]] = {}
        for s, ps in pruned.items():
            for _, ts in ps:
                for t in ts:
                    preds.setdefault(t, []).append(s)
        reach = set(goals)
        queue = deque(goals)
        while queue:
            t = queue.popleft()
            for s in preds.get(t, ()):
                if s not in reach:
                    reach.add(s)
                    queue.append(s)
        pruned = {s: (ps if s in reach else []) for s, ps in pruned.items()}
        if pruned == pairs:
            break
        pairs = pruned
    # goal distance through some outcome, then lowest index among the closest
    dist = {g: 0 for g in goals}
    changed = True
    while changed:
        changed = False
        for s in order:
            for _, ts in pairs.get(s, ()):
                known = [dist[t] for t in ts if t in dist]
                if known and (s not in dist or min(known) + 1 < dist[s]):
                    dist[s] = min(known) + 1
                    changed = True
    choice = {}
    for s, ps in pairs.items():
        best = None
        for a, ts in ps:
            d = min((dist[t] for t in ts if t in dist), default=None)
            if d is not None and (best is None or d < best[0]):
                best = (d, a, ts)
        if best is not None:
            choice[s] = (best[1], best[2])
    return choice


# ---------------------------------------------------------------- verifier


@dataclass
class Verdict:
    valid: bool
    reason: str = ""
    counterexample: list | None = None
    traces_checked: int = 0

    def __bool__(self):
        return self.valid


def project(state: EvaluatedState | Iterable, hidden: frozenset = frozenset()) -> frozenset[Atom]:
    """Basic atoms of a state as formula atoms, minus hidden predicates."""
    basic = state.basic if isinstance(state, EvaluatedState) else state
    return frozenset(Atom(k[0], tuple(k[1:])) for k in basic if k[0] not in hidden)


def enumerate_traces(model: GroundedModel, policy: Policy, horizon: int):
    """All outcome paths of ``policy`` from the initial state, depth-first.

    Yields ``(states, actions, status)`` where status is ``"goal"``,
    ``"unmapped"``, ``"inapplicable"`` or ``"horizon"``.
    """
    s0 = evaluate_derived(model, policy.initial)
    stack = [([s0], [])]
    while stack:
        states, actions = stack.pop()
        s = states[-1]
        if model.is_goal(s):
            yield states, actions, "goal"
            continue
        name = policy.action_for(s)
        if name is None:
            yield states, actions, "unmapped"
            continue
        action = model.action(name)
        if not action.precondition.holds(s):
            yield states, actions, "inapplicable"
            continue
        if len(actions) >= horizon:
            yield states, actions, "horizon"
            continue
        for t in reversed(successors(model, s, action)):
            stack.append((states + [t], actions + [name]))


def verify_policy(model: GroundedModel, policy: Policy, goal: Formula, horizon: int,
                  hidden: frozenset = frozenset()) -> Verdict:
    if horizon < 1:
        raise ValueError("horizon must be positive")

    def trace_of(states):
        return [project(s, hidden) for s in states]

    if policy.mode == STRONG:
        checked = 0
        for states, actions, status in enumerate_traces(model, policy, horizon):
            if status != "goal":
                return Verdict(False, f"{status} after {actions}", trace_of(states), checked)
            checked += 1
            if not eval_trace(goal, trace_of(states)):
                return Verdict(False, "goal state reached but trace violates the temporal goal",
                               trace_of(states), checked)
        return Verdict(True, "", None, checked)

    # strong cyclic: closure, goal reachability from everywhere, then traces
    s0 = evaluate_derived(model, policy.initial)
    graph: dict[State, list[State]] = {}
    seen = {s0.basic: s0}
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        if model.is_goal(s):
            graph[s.basic] = []
            continue
        name = policy.action_for(s)
        if name is None or not model.action(name).precondition.holds(s):
            return Verdict(False, "reachable state without an applicable policy action", trace_of([s]))
        outs = successors(model, s, model.action(name))
        graph[s.basic] = [t.basic for t in outs]
        for t in outs:
            if t.basic not in seen:
                seen[t.basic] = t
                queue.append(t)
    rev: dict[State, list[State]] = {}
    for s, ts in graph.items():
        for t in ts:
            rev.setdefault(t, []).append(s)
    good = {s for s in graph if model.is_goal(seen[s])}
    queue = deque(good)
    while queue:
        t = queue.popleft()
        for s in rev.get(t, ()):
            if s not in good:
                good.add(s)
                queue.append(s)
    stuck = [s for s in graph if s not in good]
    if stuck:
        return Verdict(False, "a reachable state cannot reach the goal", trace_of([seen[stuck[0]]]))
    checked = 0
    for states, actions, status in enumerate_traces(model, policy, horizon):
        if status == "goal":
            checked += 1
            if not eval_trace(goal, trace_of(states)):
                return Verdict(False, "goal state reached but trace violates the temporal goal",
                               trace_of(states), checked)
        elif status != "horizon":
            return Verdict(False, f"{status} after {actions}", trace_of(states), checked)
    return Verdict(True, "", None, checked)


# ------------------------------------------------------------------ export


def _atom_text(key) -> str:
    return format_key(key)


def policy_to_json(policy: Policy) -> str:
    order = policy.states()
    ids = {s: i for i, s in enumerate(order)}
    states = []
    for s in order:
        entry = {"id": ids[s], "atoms": [_atom_text(k) for k in sorted(s)], "goal": s in policy.goals}
        if s in policy.table:
            entry["action"] = policy.table[s]
            entry["successors"] = [ids[t] for t in policy.successors[s]]
        states.append(entry)
    doc = {"mode": policy.mode, "initial": 0, "states": states, "stats": policy.stats}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _key_from_text(text):
    return tuple(text.strip("()").split())


def policy_from_json(text: str) -> Policy:
    doc = json.loads(text)
    states = {e["id"]: frozenset(_key_from_text(a) for a in e["atoms"]) for e in doc["states"]}
    table, succ = {}, {}
    goals = set()
    for e in doc["states"]:
        s = states[e["id"]]
        if e.get("goal"):
            goals.add(s)
        if "action" in e:
            table[s] = e["action"]
            succ[s] = tuple(states[i] for i in e["successors"])
    return Policy(doc["mode"], states[doc["initial"]], table, succ, frozenset(goals), doc.get("stats", {}))


def _label(state, hidden):
    atoms = [_atom_text(k) for k in sorted(state) if k[0] not in hidden]
    return "\\n".join(atoms) if atoms else "(empty)"


def export_dot(policy: Policy, hidden: frozenset = frozenset(), name: str = "policy") -> str:
    """Graphviz text: one box per state labelled with its visible fluents."""
    order = policy.states()
    ids = {s: f"s{i}" for i, s in enumerate(order)}
    lines = [f"digraph {name} {{", "  rankdir=TB;", '  node [shape=box, fontname="Helvetica"];']
    for s in order:
        extra = ", peripheries=2" if s in policy.goals else ""
        lines.append(f'  {ids[s]} [label="{_label(s, hidden)}"{extra}];')
    for s in order:
        if s not in policy.table:
            continue
        targets = policy.successors[s]
        for k, t in enumerate(targets):
            tag = f" [{k}]" if len(targets) > 1 else ""
            lines.append(f'  {ids[s]} -> {ids[t]} [label="{policy.table[s]}{tag}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

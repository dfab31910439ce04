"""Eager grounding and successor semantics.

States are :class:`EvaluatedState` values: the true basic atoms plus their
closure under the derived-predicate axioms.  Atoms are tuples
``(predicate, arg, ...)``; :attr:`GroundedModel.index` gives each one a dense
integer id in lexicographic order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .model import (
    Atomic,
    Condition,
    ConditionalEffect,
    Conjunction,
    Disjunction,
    FondDomain,
    FondError,
    FondProblem,
    Implication,
    Key,
    Negation,
    check_problem,
    is_subtype,
    strata,
)


@dataclass(frozen=True)
class GroundAction:
    schema: str
    args: tuple[str, ...]
    precondition: Condition
    branches: tuple[tuple[ConditionalEffect, ...], ...]
    index: int = 0

    @property
    def name(self) -> str:
        return " ".join((self.schema, *self.args))

    def __str__(self):
        return f"({self.name})"


@dataclass(frozen=True)
class GroundAxiom:
    head: Key
    body: Condition
    stratum: int


@dataclass(frozen=True)
class EvaluatedState:
    basic: frozenset
    derived: frozenset = frozenset()

    @property
    def atoms(self) -> frozenset:
        return self.basic | self.derived

    def __contains__(self, key) -> bool:
        return key in self.basic or key in self.derived


@dataclass
class GroundedModel:
    basic_atoms: tuple[Key, ...]
    derived_atoms: tuple[Key, ...]
    actions: tuple[GroundAction, ...]
    axioms: tuple[GroundAxiom, ...]
    init: frozenset
    goal: Condition
    objects: dict[str, str] = field(default_factory=dict)
    index: dict[Key, int] = field(default_factory=dict)
    _strata: list = field(default_factory=list, repr=False)
    _by_name: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        atoms = sorted(set(self.basic_atoms) | set(self.derived_atoms))
        self.index = {a: i for i, a in enumerate(atoms)}
        layers: dict[int, list[GroundAxiom]] = {}
        for ax in self.axioms:
            layers.setdefault(ax.stratum, []).append(ax)
        self._strata = [layers[k] for k in sorted(layers)]
        self._by_name = {a.name: a for a in self.actions}

    def action(self, name: str) -> GroundAction:
        try:
            return self._by_name[name.strip("()")]
        except KeyError:
            raise FondError(f"unknown ground action {name!r}") from None

    def fingerprint(self, state: EvaluatedState) -> tuple[int, ...]:
        return tuple(sorted(self.index[a] for a in state.basic))

    def initial_state(self) -> EvaluatedState:
        return evaluate_derived(self, self.init)

    def is_goal(self, state: EvaluatedState) -> bool:
        return self.goal.holds(state)


def _objects_by_type(domain: FondDomain, problem: FondProblem):
    parents = domain.type_parents()
    objects = dict(domain.constants)
    objects.update(dict(problem.objects))
    by_type: dict[str, list[str]] = {}
    for t in parents:
        by_type[t] = sorted(o for o, ot in objects.items() if is_subtype(parents, ot, t))
    return objects, by_type


def _bindings(parameters, by_type):
    names = [v for v, _ in parameters]
    pools = [by_type.get(t, []) for _, t in parameters]
    for combo in itertools.product(*pools):
        yield dict(zip(names, combo))


def _static_value(cond: Condition, static_true, static_false):
    """Three-valued evaluation: True/False when decided by static atoms, else None."""
    if isinstance(cond, Atomic):
        if cond.key in static_true:
            return True
        if cond.key in static_false:
            return False
        return None
    if isinstance(cond, Negation):
        v = _static_value(cond.operand, static_true, static_false)
        return None if v is None else not v
    if isinstance(cond, Implication):
        a = _static_value(cond.antecedent, static_true, static_false)
        c = _static_value(cond.consequent, static_true, static_false)
        if a is False or c is True:
            return True
        if a is True and c is False:
            return False
        return None
    values = [_static_value(p, static_true, static_false) for p in cond.parts]
    if isinstance(cond, Conjunction):
        if False in values:
            return False
        return True if all(v is True for v in values) else None
    if True in values:
        return True
    return False if all(v is False for v in values) else None


def ground(domain: FondDomain, problem: FondProblem, prune: bool = True) -> GroundedModel:
    """Instantiate every schema over the typed objects.

    With ``prune`` set, actions whose precondition is false given the atoms
    that no action can ever change are dropped (repeated until stable).
    """
    check_problem(domain, problem)
    objects, by_type = _objects_by_type(domain, problem)
    derived_names = domain.derived_names
    basic, derived = [], []
    for p in domain.predicates:
        for b in _bindings(p.parameters, by_type):
            key = (p.name, *(b[v] for v, _ in p.parameters))
            (derived if p.name in derived_names else basic).append(key)

    candidates = []
    for act in domain.actions:
        for b in _bindings(act.parameters, by_type):
            args = tuple(b[v] for v, _ in act.parameters)
            pre = act.precondition.substitute(b)
            branches = tuple(tuple(e.substitute(b) for e in br) for br in act.branches)
            candidates.append((act.name, args, pre, branches))

    kept = candidates
    if prune:
        derived_set = set(derived)
        while True:
            adds, dels = set(), set()
            for _, _, _, branches in kept:
                for br in branches:
                    for e in br:
                        (adds if e.positive else dels).add(e.atom.key)
            static_true = {a for a in problem.init if a not in dels}
            static_false = {a for a in basic if a not in problem.init and a not in adds and a not in derived_set}
            nxt = [c for c in kept if _static_value(c[2], static_true, static_false) is not False]
            if len(nxt) == len(kept):
                break
            kept = nxt

    actions = tuple(GroundAction(n, a, pre, br, i) for i, (n, a, pre, br) in enumerate(kept))
    levels = strata(domain)
    axioms = []
    for ax in domain.axioms:
        for b in _bindings(ax.head.parameters, by_type):
            head = (ax.head.name, *(b[v] for v, _ in ax.head.parameters))
            axioms.append(GroundAxiom(head, ax.body.substitute(b), levels[ax.head.name]))
    axioms.sort(key=lambda ax: (ax.stratum, ax.head))
    return GroundedModel(
        basic_atoms=tuple(sorted(basic)),
        derived_atoms=tuple(sorted(derived)),
        actions=actions,
        axioms=tuple(axioms),
        init=frozenset(problem.init),
        goal=problem.goal,
        objects=objects,
    )


class _View:
    """Membership over basic atoms plus a growing derived set."""

    __slots__ = ("basic", "derived")

    def __init__(self, basic, derived):
        self.basic = basic
        self.derived = derived

    def __contains__(self, key):
        return key in self.basic or key in self.derived


def evaluate_derived(model: GroundedModel, basic) -> EvaluatedState:
    """Least fixpoint of the axioms, one stratum at a time."""
    basic = frozenset(basic)
    derived: set = set()
    view = _View(basic, derived)
    for layer in model._strata:
        changed = True
        while changed:
            changed = False
            for ax in layer:
                if ax.head not in derived and ax.body.holds(view):
                    derived.add(ax.head)
                    changed = True
    return EvaluatedState(basic, frozenset(derived))


def applicable(model: GroundedModel, state: EvaluatedState) -> list[GroundAction]:
    return [a for a in model.actions if a.precondition.holds(state)]


def apply_branch(model: GroundedModel, state: EvaluatedState, branch) -> EvaluatedState:
    # every condition reads the pre-state; deletes first, then adds
    fired = [e for e in branch if e.condition.holds(state)]
    deletes = {e.atom.key for e in fired if not e.positive}
    adds = {e.atom.key for e in fired if e.positive}
    return evaluate_derived(model, (state.basic - deletes) | adds)


def successors(model: GroundedModel, state: EvaluatedState, action: GroundAction) -> list[EvaluatedState]:
    """One successor per oneof branch, in branch order."""
    if not action.precondition.holds(state):
        raise FondError(f"action {action} is not applicable")
    return [apply_branch(model, state, br) for br in action.branches]

"""Lifted FOND domains and problems.

Conditions are small boolean trees over (possibly non-ground) atoms.  An
action effect is a tuple of oneof branches; each branch is a tuple of
:class:`ConditionalEffect`, one literal each, with ``TRUE_CONDITION`` for the
unconditional case.  This flat form is what the parser produces and what the
printer consumes, so parse and print are inverse on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

Key = tuple  # ground atom: (predicate, arg, ...)


class FondError(ValueError):
    """Invalid or unsupported planning model."""


class Condition:
    __slots__ = ()

    def atoms(self) -> Iterable["Atomic"]:
        raise NotImplementedError

    def substitute(self, binding: Mapping[str, str]) -> "Condition":
        raise NotImplementedError

    def holds(self, true_atoms) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class Atomic(Condition):
    predicate: str
    args: tuple[str, ...] = ()

    @property
    def key(self) -> Key:
        return (self.predicate, *self.args)

    def atoms(self):
        yield self

    def substitute(self, binding):
        return Atomic(self.predicate, tuple(binding.get(a, a) for a in self.args))

    def holds(self, true_atoms):
        return self.key in true_atoms

    def __str__(self):
        return "(" + " ".join((self.predicate, *self.args)) + ")"


@dataclass(frozen=True)
class Negation(Condition):
    operand: Condition

    def atoms(self):
        yield from self.operand.atoms()

    def substitute(self, binding):
        return Negation(self.operand.substitute(binding))

    def holds(self, true_atoms):
        return not self.operand.holds(true_atoms)


@dataclass(frozen=True)
class Conjunction(Condition):
    parts: tuple[Condition, ...] = ()

    def atoms(self):
        for p in self.parts:
            yield from p.atoms()

    def substitute(self, binding):
        return Conjunction(tuple(p.substitute(binding) for p in self.parts))

    def holds(self, true_atoms):
        return all(p.holds(true_atoms) for p in self.parts)


@dataclass(frozen=True)
class Disjunction(Condition):
    parts: tuple[Condition, ...] = ()

    def atoms(self):
        for p in self.parts:
            yield from p.atoms()

    def substitute(self, binding):
        return Disjunction(tuple(p.substitute(binding) for p in self.parts))

    def holds(self, true_atoms):
        return any(p.holds(true_atoms) for p in self.parts)


@dataclass(frozen=True)
class Implication(Condition):
    antecedent: Condition
    consequent: Condition

    def atoms(self):
        yield from self.antecedent.atoms()
        yield from self.consequent.atoms()

    def substitute(self, binding):
        return Implication(self.antecedent.substitute(binding), self.consequent.substitute(binding))

    def holds(self, true_atoms):
        return (not self.antecedent.holds(true_atoms)) or self.consequent.holds(true_atoms)


TRUE_CONDITION = Conjunction(())


def polarity_atoms(cond: Condition, positive: bool = True):
    """Yield ``(atom, positive)`` for every atom occurrence, tracking negation."""
    if isinstance(cond, Atomic):
        yield cond, positive
    elif isinstance(cond, Negation):
        yield from polarity_atoms(cond.operand, not positive)
    elif isinstance(cond, Implication):
        yield from polarity_atoms(cond.antecedent, not positive)
        yield from polarity_atoms(cond.consequent, positive)
    else:
        for p in cond.parts:
            yield from polarity_atoms(p, positive)


def uses_negation(cond: Condition) -> bool:
    if isinstance(cond, Negation):
        return True
    if isinstance(cond, Atomic):
        return False
    if isinstance(cond, Implication):
        return True
    return any(uses_negation(p) for p in cond.parts)


def uses_disjunction(cond: Condition) -> bool:
    if isinstance(cond, (Disjunction, Implication)):
        return True
    if isinstance(cond, Atomic):
        return False
    if isinstance(cond, Negation):
        return uses_disjunction(cond.operand)
    return any(uses_disjunction(p) for p in cond.parts)


@dataclass(frozen=True)
class ConditionalEffect:
    condition: Condition
    atom: Atomic
    positive: bool = True

    def substitute(self, binding):
        return ConditionalEffect(self.condition.substitute(binding), self.atom.substitute(binding), self.positive)


Parameters = tuple[tuple[str, str], ...]  # ((?var, type), ...)


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    parameters: Parameters = ()

    @property
    def arity(self) -> int:
        return len(self.parameters)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: Parameters
    precondition: Condition
    branches: tuple[tuple[ConditionalEffect, ...], ...]

    @property
    def deterministic(self) -> bool:
        return len(self.branches) == 1


@dataclass(frozen=True)
class Axiom:
    head: PredicateSchema
    body: Condition


@dataclass(frozen=True)
class FondDomain:
    name: str
    requirements: tuple[str, ...] = (":strips",)
    types: tuple[tuple[str, str], ...] = ()  # (type, parent)
    constants: tuple[tuple[str, str], ...] = ()
    predicates: tuple[PredicateSchema, ...] = ()
    actions: tuple[ActionSchema, ...] = ()
    axioms: tuple[Axiom, ...] = ()

    def predicate(self, name: str) -> PredicateSchema:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(name)

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def derived_names(self) -> frozenset[str]:
        return frozenset(ax.head.name for ax in self.axioms)

    def type_parents(self) -> dict[str, str | None]:
        parents: dict[str, str | None] = {"object": None}
        parents.update(self.types)
        for _, parent in self.types:
            parents.setdefault(parent, "object")
        return parents


@dataclass(frozen=True)
class FondProblem:
    name: str
    domain: str
    objects: tuple[tuple[str, str], ...] = ()
    init: frozenset = field(default_factory=frozenset)  # of Key
    goal: Condition = TRUE_CONDITION


def is_subtype(parents: Mapping[str, str | None], child: str, ancestor: str) -> bool:
    seen = set()
    t = child
    while t is not None and t not in seen:
        if t == ancestor:
            return True
        seen.add(t)
        t = parents.get(t)
    return False


def strata(domain: FondDomain) -> dict[str, int]:
    """Stratum of every derived predicate; raises on recursion through negation."""
    derived = domain.derived_names
    level = {name: 0 for name in sorted(derived)}
    edges = []
    for ax in domain.axioms:
        for atom, positive in polarity_atoms(ax.body):
            if atom.predicate in derived:
                edges.append((ax.head.name, atom.predicate, positive))
    for _ in range(len(derived) + 1):
        changed = False
        for head, dep, positive in edges:
            need = level[dep] + (0 if positive else 1)
            if level[head] < need:
                level[head] = need
                changed = True
        if not changed:
            return level
        if max(level.values(), default=0) > len(derived):
            break
    raise FondError("derived predicates are not stratified (recursion through negation)")


_KNOWN_REQUIREMENTS = frozenset({
    ":strips", ":typing", ":negative-preconditions", ":disjunctive-preconditions",
    ":conditional-effects", ":derived-predicates", ":non-deterministic",
})


def check_domain(domain: FondDomain) -> None:
    """Validate declarations, arities, effects and the requirement gate."""
    reqs = set(domain.requirements)
    unknown = reqs - _KNOWN_REQUIREMENTS
    if unknown:
        raise FondError(f"unsupported requirement(s): {' '.join(sorted(unknown))}")
    parents = domain.type_parents()
    for t, parent in domain.types:
        if parent not in parents:
            raise FondError(f"type {t!r} has undeclared parent {parent!r}")
    if domain.types and ":typing" not in reqs:
        raise FondError("types declared without :typing")
    # cycle check
    for t, _ in domain.types:
        seen = set()
        cur = t
        while cur is not None:
            if cur in seen:
                raise FondError(f"type hierarchy is cyclic at {t!r}")
            seen.add(cur)
            cur = parents.get(cur)

    def check_type(t, where):
        if t not in parents:
            raise FondError(f"undeclared type {t!r} in {where}")
        if t != "object" and ":typing" not in reqs:
            raise FondError(f"typed {where} without :typing")

    constants = {}
    for obj, t in domain.constants:
        check_type(t, f"constant {obj}")
        if obj in constants:
            raise FondError(f"duplicate constant {obj!r}")
        constants[obj] = t

    preds = {}
    for p in domain.predicates:
        if p.name in preds:
            raise FondError(f"duplicate predicate {p.name!r}")
        for _, t in p.parameters:
            check_type(t, f"predicate {p.name}")
        preds[p.name] = p
    derived = domain.derived_names

    def check_condition(cond, scope, where):
        for atom in cond.atoms():
            if atom.predicate not in preds:
                raise FondError(f"undeclared predicate {atom.predicate!r} in {where}")
            arity = preds[atom.predicate].arity
            if len(atom.args) != arity:
                raise FondError(
                    f"arity mismatch for {atom.predicate!r} in {where}: expected {arity}, got {len(atom.args)}")
            for arg in atom.args:
                if arg.startswith("?"):
                    if arg not in scope:
                        raise FondError(f"unbound variable {arg} in {where}")
                elif arg not in constants:
                    raise FondError(f"undeclared constant {arg!r} in {where}")
        if uses_negation(cond) and ":negative-preconditions" not in reqs:
            raise FondError(f"negative condition in {where} requires :negative-preconditions")
        if uses_disjunction(cond) and ":disjunctive-preconditions" not in reqs:
            raise FondError(f"disjunctive condition in {where} requires :disjunctive-preconditions")

    for ax in domain.axioms:
        if ax.head.name not in preds:
            raise FondError(f"derived predicate {ax.head.name!r} is not declared")
        if preds[ax.head.name].arity != ax.head.arity:
            raise FondError(f"arity mismatch in derived head {ax.head.name!r}")
        if ":derived-predicates" not in reqs:
            raise FondError("axioms require :derived-predicates")
        check_condition(ax.body, dict(ax.head.parameters), f"axiom {ax.head.name}")
    names = set()
    for act in domain.actions:
        where = f"action {act.name}"
        if act.name in names:
            raise FondError(f"duplicate action {act.name!r}")
        names.add(act.name)
        scope = {}
        for var, t in act.parameters:
            check_type(t, where)
            if var in scope:
                raise FondError(f"duplicate parameter {var} in {where}")
            scope[var] = t
        check_condition(act.precondition, scope, where)
        if not act.branches:
            raise FondError(f"{where} has no effect branch")
        if len(act.branches) > 1 and ":non-deterministic" not in reqs:
            raise FondError(f"oneof in {where} requires :non-deterministic")
        for branch in act.branches:
            for eff in branch:
                check_condition(eff.atom, scope, where)
                if eff.atom.predicate in derived:
                    raise FondError(f"derived predicate {eff.atom.predicate!r} in effect of {where}")
                if eff.condition != TRUE_CONDITION:
                    if ":conditional-effects" not in reqs:
                        raise FondError(f"when-effect in {where} requires :conditional-effects")
                    check_condition(eff.condition, scope, where)
    strata(domain)


def check_problem(domain: FondDomain, problem: FondProblem) -> None:
    if problem.domain != domain.name:
        raise FondError(f"problem is for domain {problem.domain!r}, not {domain.name!r}")
    parents = domain.type_parents()
    objects = dict(domain.constants)
    for obj, t in problem.objects:
        if t not in parents:
            raise FondError(f"object {obj!r} has undeclared type {t!r}")
        if obj in objects:
            raise FondError(f"duplicate object {obj!r}")
        objects[obj] = t
    preds = {p.name: p for p in domain.predicates}
    derived = domain.derived_names

    def check_ground(key, where):
        name, *args = key
        if name not in preds:
            raise FondError(f"undeclared predicate {name!r} in {where}")
        schema = preds[name]
        if len(args) != schema.arity:
            raise FondError(f"arity mismatch for {name!r} in {where}")
        for arg, (_, t) in zip(args, schema.parameters):
            if arg not in objects:
                raise FondError(f"undeclared object {arg!r} in {where}")
            if not is_subtype(parents, objects[arg], t):
                raise FondError(f"object {arg!r} of type {objects[arg]!r} is not a {t!r} in {where}")

    for key in problem.init:
        check_ground(key, "init")
        if key[0] in derived:
            raise FondError(f"derived atom {key[0]!r} in initial state")
    for atom in problem.goal.atoms():
        if any(a.startswith("?") for a in atom.args):
            raise FondError("goal must be ground")
        check_ground(atom.key, "goal")

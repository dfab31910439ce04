"""Compile a pure-past temporal goal into a reachability goal.

Each sub-formula ``g`` becomes a 0-ary derived predicate ``val_<i>`` whose
axiom evaluates ``g`` in the current state from domain atoms, other ``val_*``
predicates and memory fluents.  Each temporally headed sub-formula gets a
basic fluent ``mem_<i>`` that every action branch refreshes through a pair
of conditional effects reading the pre-state, so after an action it holds
the value its sub-formula needed from the previous instant.  The new goal is
``(val_<last>)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .fond.model import (
    TRUE_CONDITION,
    Atomic,
    Axiom,
    Condition,
    ConditionalEffect,
    Conjunction,
    Disjunction,
    FondDomain,
    FondError,
    FondProblem,
    Negation,
    PredicateSchema,
    check_domain,
    check_problem,
    is_subtype,
)
from .formula import (
    And,
    Atom,
    FalseFormula,
    Formula,
    Historically,
    Implies,
    Not,
    Once,
    Or,
    Since,
    TrueFormula,
    WeakYesterday,
    Yesterday,
    initial_memory,
    is_temporal,
    memory_source,
    parse_formula,
    subformulas,
    to_text,
)

_EXTRA_REQUIREMENTS = (
    ":negative-preconditions", ":disjunctive-preconditions",
    ":conditional-effects", ":derived-predicates",
)


class CompilationError(FondError):
    pass


@dataclass
class CompilationMap:
    goal: Formula
    subformulas: list[Formula]
    val: dict[Formula, str]
    memory: dict[Formula, str]
    renamed: dict[str, str] = field(default_factory=dict)

    def formula_of(self, name: str) -> Formula:
        for table in (self.val, self.memory):
            for f, n in table.items():
                if n == name:
                    return f
        raise KeyError(name)

    @property
    def goal_predicate(self) -> str:
        return self.val[self.goal]

    @property
    def memory_names(self) -> frozenset[str]:
        return frozenset(self.memory.values())

    def memory_atoms(self, sigma) -> frozenset:
        """Ground memory fluents that are true under valuation ``sigma``."""
        return frozenset((self.memory[f],) for f, v in sigma.items() if v)


def added_symbol_count(goal: Formula) -> tuple[int, int]:
    subs = subformulas(goal)
    return sum(1 for f in subs if is_temporal(f)), len(subs)


def _fresh(base: str, taken: set[str], renamed: dict[str, str]) -> str:
    if base not in taken:
        return base
    k = 1
    while f"{base}_c{k}" in taken:
        k += 1
    renamed[base] = f"{base}_c{k}"
    return renamed[base]


def compilation_map(goal: Formula, taken=()) -> CompilationMap:
    taken = set(taken)
    renamed: dict[str, str] = {}
    subs = subformulas(goal)
    val, memory = {}, {}
    for i, f in enumerate(subs):
        val[f] = _fresh(f"val_{i}", taken, renamed)
        taken.add(val[f])
        if is_temporal(f):
            memory[f] = _fresh(f"mem_{i}", taken, renamed)
            taken.add(memory[f])
    return CompilationMap(goal, subs, val, memory, renamed)


def _v(cmap, f) -> Atomic:
    return Atomic(cmap.val[f])


def axiom_body(cmap: CompilationMap, f: Formula) -> Condition:
    if isinstance(f, TrueFormula):
        return Conjunction(())
    if isinstance(f, FalseFormula):
        return Disjunction(())
    if isinstance(f, Atom):
        return Atomic(f.name, f.args)
    if isinstance(f, Not):
        return Negation(_v(cmap, f.operand))
    if isinstance(f, And):
        return Conjunction((_v(cmap, f.left), _v(cmap, f.right)))
    if isinstance(f, Or):
        return Disjunction((_v(cmap, f.left), _v(cmap, f.right)))
    if isinstance(f, Implies):
        return Disjunction((Negation(_v(cmap, f.left)), _v(cmap, f.right)))
    mem = Atomic(cmap.memory[f])
    if isinstance(f, (Yesterday, WeakYesterday)):
        return mem
    if isinstance(f, Once):
        return Disjunction((_v(cmap, f.operand), mem))
    if isinstance(f, Historically):
        return Conjunction((_v(cmap, f.operand), mem))
    if isinstance(f, Since):
        return Disjunction((_v(cmap, f.right), Conjunction((_v(cmap, f.left), mem))))
    raise TypeError(f"unknown formula node {f!r}")


def memory_effects(cmap: CompilationMap) -> tuple[ConditionalEffect, ...]:
    effects = []
    for cell, name in cmap.memory.items():
        source = _v(cmap, memory_source(cell))
        effects.append(ConditionalEffect(source, Atomic(name), True))
        effects.append(ConditionalEffect(Negation(source), Atomic(name), False))
    return tuple(effects)


def unfold(cmap: CompilationMap, f: Formula | None = None) -> Condition:
    """``val`` of ``f`` spelled out over domain atoms and memory fluents only."""
    f = cmap.goal if f is None else f
    if isinstance(f, TrueFormula):
        return Conjunction(())
    if isinstance(f, FalseFormula):
        return Disjunction(())
    if isinstance(f, Atom):
        return Atomic(f.name, f.args)
    if isinstance(f, Not):
        return Negation(unfold(cmap, f.operand))
    if isinstance(f, And):
        return Conjunction((unfold(cmap, f.left), unfold(cmap, f.right)))
    if isinstance(f, Or):
        return Disjunction((unfold(cmap, f.left), unfold(cmap, f.right)))
    if isinstance(f, Implies):
        return Disjunction((Negation(unfold(cmap, f.left)), unfold(cmap, f.right)))
    mem = Atomic(cmap.memory[f])
    if isinstance(f, (Yesterday, WeakYesterday)):
        return mem
    if isinstance(f, Once):
        return Disjunction((unfold(cmap, f.operand), mem))
    if isinstance(f, Historically):
        return Conjunction((unfold(cmap, f.operand), mem))
    return Disjunction((unfold(cmap, f.right), Conjunction((unfold(cmap, f.left), mem))))


def _check_goal_atoms(domain: FondDomain, problem: FondProblem, goal: Formula):
    preds = {p.name: p for p in domain.predicates}
    parents = domain.type_parents()
    objects = dict(domain.constants)
    objects.update(problem.objects)
    used = {}
    for f in subformulas(goal):
        if not isinstance(f, Atom):
            continue
        schema = preds.get(f.name)
        if schema is None:
            raise CompilationError(f"goal atom {f} uses undeclared predicate {f.name!r}")
        if len(f.args) != schema.arity:
            raise CompilationError(f"goal atom {f}: {f.name!r} takes {schema.arity} argument(s)")
        for arg, (_, t) in zip(f.args, schema.parameters):
            if arg not in objects:
                raise CompilationError(f"goal atom {f} names unknown object {arg!r}")
            if not is_subtype(parents, objects[arg], t):
                raise CompilationError(f"goal atom {f}: {arg!r} is not a {t}")
            used[arg] = objects[arg]
    return used


def compile_goal(domain: FondDomain, problem: FondProblem, goal: Formula | str, unfold_goal: bool = False):
    """Return ``(domain', problem', CompilationMap)`` for a temporal goal.

    Objects the goal mentions become domain constants, since the new axioms
    refer to them.  ``unfold_goal`` replaces ``(val_G)`` in the problem by an
    axiom-free condition for planners without derived goals.
    """
    if isinstance(goal, str):
        goal = parse_formula(goal)
    check_problem(domain, problem)
    used = _check_goal_atoms(domain, problem, goal)
    taken = {p.name for p in domain.predicates} | {a.name for a in domain.actions}
    cmap = compilation_map(goal, taken)

    predicates = list(domain.predicates)
    predicates += [PredicateSchema(n) for n in cmap.memory.values()]
    predicates += [PredicateSchema(n) for n in cmap.val.values()]
    axioms = list(domain.axioms)
    axioms += [Axiom(PredicateSchema(cmap.val[f]), axiom_body(cmap, f)) for f in cmap.subformulas]
    extra = memory_effects(cmap)
    actions = tuple(
        replace(a, branches=tuple(tuple(b) + extra for b in a.branches)) for a in domain.actions
    )
    requirements = tuple(domain.requirements) + tuple(
        r for r in _EXTRA_REQUIREMENTS if r not in domain.requirements
    )
    constant_names = {c for c, _ in domain.constants}
    constants = tuple(domain.constants) + tuple(
        o for o in problem.objects if o[0] in used and o[0] not in constant_names
    )
    new_domain = replace(
        domain,
        requirements=requirements,
        constants=constants,
        predicates=tuple(predicates),
        actions=actions,
        axioms=tuple(axioms),
    )
    check_domain(new_domain)

    sigma = initial_memory(goal)
    init = frozenset(problem.init) | cmap.memory_atoms(sigma)
    new_goal = unfold(cmap) if unfold_goal else Atomic(cmap.goal_predicate)
    new_problem = replace(
        problem,
        objects=tuple(o for o in problem.objects if o[0] not in used or o[0] in constant_names),
        init=init,
        goal=new_goal,
    )
    check_problem(new_domain, new_problem)
    return new_domain, new_problem, cmap


# ----------------------------------------------------------- sidecar file


def format_mapping(cmap: CompilationMap) -> str:
    lines = [f"goal = {to_text(cmap.goal)}"]
    for f in cmap.subformulas:
        lines.append(f"{cmap.val[f]} = {to_text(f)}")
    for f in cmap.subformulas:
        if f in cmap.memory:
            lines.append(f"{cmap.memory[f]} = {to_text(f)}")
    for old, new in sorted(cmap.renamed.items()):
        lines.append(f"# renamed {old} -> {new}")
    return "\n".join(lines) + "\n"


def parse_mapping(text: str) -> CompilationMap:
    goal = None
    val, memory, renamed = {}, {}, {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 4 and parts[0] == "renamed":
                renamed[parts[1]] = parts[3]
            continue
        name, _, rhs = line.partition("=")
        name, f = name.strip(), parse_formula(rhs.strip())
        if name == "goal":
            goal = f
        elif name.startswith("mem"):
            memory[f] = name
        else:
            val[f] = name
    if goal is None:
        raise ValueError("mapping file has no goal line")
    subs = subformulas(goal)
    memory = {f: memory[f] for f in subs if f in memory}
    return CompilationMap(goal, subs, {f: val[f] for f in subs}, memory, renamed)

"""Reader and canonical writer for the supported PDDL subset.

Supported: ``:strips :typing :negative-preconditions :disjunctive-preconditions
:conditional-effects :derived-predicates :non-deterministic``, domain
constants, ``oneof`` effects (possibly nested under ``and``), ``when``
effects and ``:derived`` axioms.  Anything else is rejected rather than
skipped.
"""

from __future__ import annotations

import itertools
import re

from .model import (
    TRUE_CONDITION,
    ActionSchema,
    Atomic,
    Axiom,
    Condition,
    ConditionalEffect,
    Conjunction,
    Disjunction,
    FondDomain,
    FondError,
    FondProblem,
    Implication,
    Negation,
    PredicateSchema,
    check_domain,
    check_problem,
)


class PddlSyntaxError(FondError):
    def __init__(self, message, line, column):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class Sym(str):
    """A token carrying its source position."""

    line: int
    column: int

    def __new__(cls, value, line, column):
        obj = super().__new__(cls, value)
        obj.line = line
        obj.column = column
        return obj


class SList(list):
    line: int = 0
    column: int = 0


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s()]+")


def read_sexpr(text: str) -> SList:
    stack = [SList()]
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rindex("\n") + 1
            continue
        if tok == "(":
            lst = SList()
            lst.line, lst.column = line, col
            stack[-1].append(lst)
            stack.append(lst)
        elif tok == ")":
            if len(stack) == 1:
                raise PddlSyntaxError("unbalanced ')'", line, col)
            stack.pop()
        else:
            stack[-1].append(Sym(tok.lower(), line, col))
    if len(stack) > 1:
        raise PddlSyntaxError("unclosed '('", stack[-1].line, stack[-1].column)
    top = stack[0]
    if len(top) != 1 or not isinstance(top[0], SList):
        raise PddlSyntaxError("expected a single (define ...) form", 1, 1)
    return top[0]


def _where(x):
    return getattr(x, "line", 0), getattr(x, "column", 0)


def _fail(message, x):
    raise PddlSyntaxError(message, *_where(x))


def _sym(x, what="name"):
    if not isinstance(x, str):
        _fail(f"expected {what}", x)
    return str(x)


def _typed_list(items, where) -> tuple[tuple[str, str], ...]:
    result, pending = [], []
    i = 0
    while i < len(items):
        tok = items[i]
        if isinstance(tok, SList):
            _fail(f"unexpected list in {where}", tok)
        if tok == "-":
            if i + 1 >= len(items) or not isinstance(items[i + 1], str):
                _fail(f"missing type after '-' in {where}", tok)
            t = str(items[i + 1])
            if t == "either":
                _fail("'either' types are not supported", tok)
            result.extend((name, t) for name in pending)
            pending = []
            i += 2
            continue
        pending.append(str(tok))
        i += 1
    result.extend((name, "object") for name in pending)
    return tuple(result)


def _atom(form) -> Atomic:
    if not isinstance(form, SList) or not form or not isinstance(form[0], str):
        _fail("expected an atom", form)
    for arg in form[1:]:
        if isinstance(arg, SList):
            _fail("nested term in atom", arg)
    if form[0] in ("and", "or", "not", "imply", "when", "oneof", "forall", "exists", "="):
        _fail(f"expected an atom, got {form[0]!r}", form)
    return Atomic(str(form[0]), tuple(str(a) for a in form[1:]))


def parse_condition(form) -> Condition:
    if not isinstance(form, SList):
        _fail("expected a condition", form)
    if not form:
        return TRUE_CONDITION
    head = form[0]
    if head == "and":
        return Conjunction(tuple(parse_condition(f) for f in form[1:]))
    if head == "or":
        return Disjunction(tuple(parse_condition(f) for f in form[1:]))
    if head == "not":
        if len(form) != 2:
            _fail("'not' takes one argument", form)
        return Negation(parse_condition(form[1]))
    if head == "imply":
        if len(form) != 3:
            _fail("'imply' takes two arguments", form)
        return Implication(parse_condition(form[1]), parse_condition(form[2]))
    if head in ("forall", "exists", "="):
        _fail(f"unsupported condition {head!r}", form)
    return _atom(form)


def _literal(form) -> tuple[Atomic, bool]:
    if isinstance(form, SList) and form and form[0] == "not":
        if len(form) != 2:
            _fail("'not' takes one argument", form)
        return _atom(form[1]), False
    return _atom(form), True


def parse_effect(form, condition: Condition = TRUE_CONDITION):
    """Return the effect as a list of branches (lists of conditional effects)."""
    if not isinstance(form, SList):
        _fail("expected an effect", form)
    if not form:
        return [[]]
    head = form[0]
    if head == "and":
        parts = [parse_effect(f, condition) for f in form[1:]]
        branches = [[]]
        for alternatives in parts:
            branches = [b + alt for b in branches for alt in alternatives]
        return branches
    if head == "oneof":
        if condition != TRUE_CONDITION:
            _fail("oneof inside when is not supported", form)
        if len(form) < 2:
            _fail("oneof needs at least one branch", form)
        return [b for f in form[1:] for b in parse_effect(f)]
    if head == "when":
        if condition != TRUE_CONDITION:
            _fail("nested when is not supported", form)
        if len(form) != 3:
            _fail("'when' takes a condition and an effect", form)
        cond = parse_condition(form[1])
        inner = parse_effect(form[2], cond)
        if len(inner) != 1:
            _fail("oneof inside when is not supported", form)
        return inner
    if head in ("forall", "increase", "decrease", "assign", "probabilistic"):
        _fail(f"unsupported effect {head!r}", form)
    atom, positive = _literal(form)
    return [[ConditionalEffect(condition, atom, positive)]]


def _sections(form, kind):
    if not isinstance(form, SList) or len(form) < 2 or form[0] != "define":
        _fail("expected (define ...)", form)
    header = form[1]
    if not isinstance(header, SList) or len(header) != 2 or header[0] != kind:
        _fail(f"expected ({kind} <name>)", header)
    return _sym(header[1]), form[2:]


def parse_domain(text: str) -> FondDomain:
    name, sections = _sections(read_sexpr(text), "domain")
    requirements, types, constants, predicates, actions, axioms = (":strips",), (), (), [], [], []
    seen = set()
    for sec in sections:
        if not isinstance(sec, SList) or not sec or not isinstance(sec[0], str):
            _fail("expected a domain section", sec)
        key = sec[0]
        if key in seen and key not in (":action", ":derived"):
            _fail(f"duplicate section {key}", sec)
        seen.add(key)
        if key == ":requirements":
            requirements = tuple(_sym(r, "requirement") for r in sec[1:])
        elif key == ":types":
            types = _typed_list(sec[1:], ":types")
        elif key == ":constants":
            constants = _typed_list(sec[1:], ":constants")
        elif key == ":predicates":
            for p in sec[1:]:
                if not isinstance(p, SList) or not p:
                    _fail("expected a predicate declaration", p)
                predicates.append(PredicateSchema(_sym(p[0]), _typed_list(p[1:], f"predicate {p[0]}")))
        elif key == ":derived":
            if len(sec) != 3 or not isinstance(sec[1], SList) or not sec[1]:
                _fail("expected (:derived (<head> ...) <body>)", sec)
            head = PredicateSchema(_sym(sec[1][0]), _typed_list(sec[1][1:], ":derived"))
            axioms.append(Axiom(head, parse_condition(sec[2])))
        elif key == ":action":
            actions.append(_parse_action(sec))
        else:
            _fail(f"unsupported domain section {key}", sec)
    domain = FondDomain(name, requirements, types, constants, tuple(predicates), tuple(actions), tuple(axioms))
    check_domain(domain)
    return domain


def _parse_action(sec) -> ActionSchema:
    if len(sec) < 2:
        _fail("action without name", sec)
    name = _sym(sec[1])
    fields = {}
    rest = sec[2:]
    if len(rest) % 2:
        _fail(f"malformed action {name}", sec)
    for k, v in zip(rest[::2], rest[1::2]):
        if k not in (":parameters", ":precondition", ":effect"):
            _fail(f"unsupported action field {k}", k)
        if k in fields:
            _fail(f"duplicate {k} in action {name}", k)
        fields[k] = v
    params = fields.get(":parameters", SList())
    if not isinstance(params, SList):
        _fail("expected a parameter list", params)
    parameters = _typed_list(params, f"action {name}")
    for var, _ in parameters:
        if not var.startswith("?"):
            _fail(f"parameter {var!r} must start with '?'", params)
    pre = parse_condition(fields[":precondition"]) if ":precondition" in fields else TRUE_CONDITION
    if ":effect" not in fields:
        _fail(f"action {name} has no effect", sec)
    branches = tuple(tuple(b) for b in parse_effect(fields[":effect"]))
    return ActionSchema(name, parameters, pre, branches)


def parse_problem(text: str, domain: FondDomain | None = None) -> FondProblem:
    name, sections = _sections(read_sexpr(text), "problem")
    dom, objects, init, goal = None, (), [], None
    seen = set()
    for sec in sections:
        if not isinstance(sec, SList) or not sec or not isinstance(sec[0], str):
            _fail("expected a problem section", sec)
        key = sec[0]
        if key in seen:
            _fail(f"duplicate section {key}", sec)
        seen.add(key)
        if key == ":domain":
            dom = _sym(sec[1])
        elif key == ":objects":
            objects = _typed_list(sec[1:], ":objects")
        elif key == ":init":
            for f in sec[1:]:
                atom = _atom(f)
                init.append(atom.key)
        elif key == ":goal":
            if len(sec) != 2:
                _fail("expected (:goal <condition>)", sec)
            goal = parse_condition(sec[1])
        else:
            _fail(f"unsupported problem section {key}", sec)
    if dom is None:
        raise FondError("problem has no :domain")
    problem = FondProblem(name, dom, objects, frozenset(init), goal if goal is not None else TRUE_CONDITION)
    if domain is not None:
        check_problem(domain, problem)
    return problem


# ------------------------------------------------------------------ printing


def format_condition(cond: Condition) -> str:
    if isinstance(cond, Atomic):
        return str(cond)
    if isinstance(cond, Negation):
        return f"(not {format_condition(cond.operand)})"
    if isinstance(cond, Implication):
        return f"(imply {format_condition(cond.antecedent)} {format_condition(cond.consequent)})"
    head = "and" if isinstance(cond, Conjunction) else "or"
    if not cond.parts:
        return f"({head})"
    return f"({head} " + " ".join(format_condition(p) for p in cond.parts) + ")"


def _typed(items) -> str:
    out = []
    for key, group in itertools.groupby(items, key=lambda x: x[1]):
        names = " ".join(n for n, _ in group)
        out.append(names if key == "object" else f"{names} - {key}")
    return " ".join(out)


def format_effect(eff: ConditionalEffect) -> str:
    lit = str(eff.atom) if eff.positive else f"(not {eff.atom})"
    if eff.condition == TRUE_CONDITION:
        return lit
    return f"(when {format_condition(eff.condition)} {lit})"


def _format_branch(branch, indent) -> list[str]:
    pad = " " * indent
    if not branch:
        return [pad + "(and)"]
    lines = [pad + "(and"]
    lines += [pad + "  " + format_effect(e) for e in branch]
    lines[-1] += ")"
    return lines


def print_domain(domain: FondDomain) -> str:
    lines = [f"(define (domain {domain.name})"]
    lines.append("  (:requirements " + " ".join(domain.requirements) + ")")
    if domain.types:
        lines.append("  (:types")
        lines += [f"    {t} - {p}" for t, p in domain.types]
        lines[-1] += ")"
    if domain.constants:
        lines.append("  (:constants")
        lines += ["    " + _typed([c]) for c in domain.constants]
        lines[-1] += ")"
    if domain.predicates:
        lines.append("  (:predicates")
        for p in domain.predicates:
            params = _typed(p.parameters)
            lines.append(f"    ({p.name}{' ' + params if params else ''})")
        lines[-1] += ")"
    for ax in domain.axioms:
        params = _typed(ax.head.parameters)
        lines.append(f"  (:derived ({ax.head.name}{' ' + params if params else ''})")
        lines.append(f"    {format_condition(ax.body)})")
    for act in domain.actions:
        lines.append(f"  (:action {act.name}")
        lines.append(f"    :parameters ({_typed(act.parameters)})")
        lines.append(f"    :precondition {format_condition(act.precondition)}")
        if len(act.branches) == 1:
            body = _format_branch(act.branches[0], 4)
            body[0] = "    :effect " + body[0].lstrip()
            lines += body
        else:
            lines.append("    :effect (oneof")
            for b in act.branches:
                lines += _format_branch(b, 6)
            lines[-1] += ")"
        lines[-1] += ")"
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def format_key(key) -> str:
    return "(" + " ".join(key) + ")"


def print_problem(problem: FondProblem) -> str:
    lines = [f"(define (problem {problem.name})", f"  (:domain {problem.domain})"]
    if problem.objects:
        lines.append("  (:objects")
        lines += ["    " + _typed([o]) for o in problem.objects]
        lines[-1] += ")"
    lines.append("  (:init")
    lines += ["    " + format_key(k) for k in sorted(problem.init)]
    lines[-1] += ")"
    lines.append(f"  (:goal {format_condition(problem.goal)}))")
    return "\n".join(lines) + "\n"

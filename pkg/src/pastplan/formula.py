"""Pure-past temporal formulas on finite traces.

Formulas are immutable trees built from atoms, boolean connectives and the
past operators Y (yesterday), WY (weak yesterday), O (once), H (historically)
and S (since).  A formula is evaluated at the last instant of a trace.

Concrete syntax, loosest binding first::

    a -> b          implication, right associative (desugared to !a | b)
    a | b           disjunction
    a & b           conjunction
    a S b           since
    !a  Y a  WY a  O a  H a
    true  false  name  name(arg, ...)

The one-step update :func:`step_val` is shared by :func:`eval_trace`, the
online :class:`Monitor` and the goal compiler, so all of them agree on what a
memory cell holds between two instants.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

IDENT = re.compile(r"[a-z][a-z0-9_]*\Z")
RESERVED = frozenset({"true", "false"})


class Formula:
    """Base class of all formula nodes."""

    __slots__ = ()
    children: tuple["Formula", ...] = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return to_text(self)

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)


@dataclass(frozen=True, repr=False)
class TrueFormula(Formula):
    def __repr__(self):
        return "TRUE"


@dataclass(frozen=True, repr=False)
class FalseFormula(Formula):
    def __repr__(self):
        return "FALSE"


TRUE = TrueFormula()
FALSE = FalseFormula()


@dataclass(frozen=True)
class Atom(Formula):
    name: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))
        for token in (self.name, *self.args):
            if not IDENT.match(token):
                raise ValueError(f"bad identifier {token!r} in atom")
            if token in RESERVED:
                raise ValueError(f"reserved word {token!r} used in atom")

    def __str__(self):
        if not self.args:
            return self.name
        return f"{self.name}({','.join(self.args)})"


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula

    @property
    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class _Binary(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


class And(_Binary):
    pass


class Or(_Binary):
    pass


class Implies(_Binary):
    pass


class Since(_Binary):
    """``left S right``: right held at some instant and left ever since."""


@dataclass(frozen=True)
class _Temporal(Formula):
    operand: Formula

    @property
    def children(self):
        return (self.operand,)


class Yesterday(_Temporal):
    pass


class WeakYesterday(_Temporal):
    pass


class Once(_Temporal):
    pass


class Historically(_Temporal):
    pass


TEMPORAL = (Yesterday, WeakYesterday, Once, Historically, Since)
_PREFIX = {Yesterday: "Y", WeakYesterday: "WY", Once: "O", Historically: "H"}


def is_temporal(phi: Formula) -> bool:
    return isinstance(phi, TEMPORAL)


def is_ground(phi: Formula) -> bool:
    return all(IDENT.match(a) for f in subformulas(phi) if isinstance(f, Atom) for a in f.args)


def atoms_of(phi: Formula) -> list[Atom]:
    return [f for f in subformulas(phi) if isinstance(f, Atom)]


def conjoin(parts: Iterable[Formula]) -> Formula:
    """Left-nested conjunction; TRUE for no parts."""
    result = None
    for part in parts:
        result = part if result is None else And(result, part)
    return TRUE if result is None else result


# ---------------------------------------------------------------- printing

_PREC = {Implies: 1, Or: 2, And: 3, Since: 4}
_SYMBOL = {Implies: "->", Or: "|", And: "&", Since: "S"}


def _prec(phi: Formula) -> int:
    return _PREC.get(type(phi), 5)


def to_text(phi: Formula) -> str:
    """Print with the fewest parentheses that still parse back to ``phi``."""
    if isinstance(phi, TrueFormula):
        return "true"
    if isinstance(phi, FalseFormula):
        return "false"
    if isinstance(phi, Atom):
        return str(phi)
    if isinstance(phi, Not):
        inner = to_text(phi.operand)
        return f"!{inner}" if _prec(phi.operand) >= 5 else f"!({inner})"
    if isinstance(phi, _Temporal):
        return f"{_PREFIX[type(phi)]}({to_text(phi.operand)})"
    p = _prec(phi)
    right_assoc = isinstance(phi, Implies)
    left, right = to_text(phi.left), to_text(phi.right)
    if _prec(phi.left) < p or (_prec(phi.left) == p and right_assoc):
        left = f"({left})"
    if _prec(phi.right) < p or (_prec(phi.right) == p and not right_assoc):
        right = f"({right})"
    return f"{left} {_SYMBOL[type(phi)]} {right}"


# ----------------------------------------------------------------- parsing


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<arrow>->)|(?P<op>[!&|(),])|(?P<upper>[A-Z][A-Za-z0-9_]*)"
    r"|(?P<ident>[a-z][a-z0-9_]*)"
)
_UNARY = {"!": Not, "Y": Yesterday, "WY": WeakYesterday, "O": Once, "H": Historically}


def _tokenize(text: str):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "ws":
            line += value.count("\n")
            if "\n" in value:
                line_start = pos + value.rindex("\n") + 1
        else:
            if kind == "upper" and value not in ("Y", "WY", "O", "H", "S"):
                raise FormulaSyntaxError(f"unknown operator {value!r}", line, col)
            tokens.append((value, kind, line, col))
        pos = m.end()
    tokens.append(("", "end", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0]

    def take(self, expected=None):
        value, kind, line, col = self.tokens[self.i]
        if expected is not None and value != expected:
            shown = value or "end of input"
            raise FormulaSyntaxError(f"expected {expected!r}, got {shown!r}", line, col)
        self.i += 1
        return value, kind, line, col

    def fail(self, message):
        _, _, line, col = self.tokens[self.i]
        raise FormulaSyntaxError(message, line, col)

    def implication(self):
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Or(Not(left), self.implication())
        return left

    def disjunction(self):
        result = self.conjunction()
        while self.peek() == "|":
            self.take()
            result = Or(result, self.conjunction())
        return result

    def conjunction(self):
        result = self.since()
        while self.peek() == "&":
            self.take()
            result = And(result, self.since())
        return result

    def since(self):
        result = self.unary()
        while self.peek() == "S":
            self.take()
            result = Since(result, self.unary())
        return result

    def unary(self):
        op = self.peek()
        if op in _UNARY:
            self.take()
            return _UNARY[op](self.unary())
        return self.primary()

    def primary(self):
        value, kind, line, col = self.take()
        if value == "(":
            inner = self.implication()
            self.take(")")
            return inner
        if kind != "ident":
            shown = value or "end of input"
            raise FormulaSyntaxError(f"unexpected {shown!r}", line, col)
        if value in RESERVED:
            if self.peek() == "(":
                raise FormulaSyntaxError(f"reserved word {value!r} used as atom", line, col)
            return TRUE if value == "true" else FALSE
        args = []
        if self.peek() == "(":
            self.take()
            while True:
                arg, akind, aline, acol = self.take()
                if akind != "ident":
                    raise FormulaSyntaxError(f"expected argument, got {arg!r}", aline, acol)
                if arg in RESERVED:
                    raise FormulaSyntaxError(f"reserved word {arg!r} used as atom", aline, acol)
                args.append(arg)
                if self.peek() == ",":
                    self.take()
                    continue
                self.take(")")
                break
        return Atom(value, tuple(args))


def parse_formula(text: str) -> Formula:
    if not text or not text.strip():
        raise FormulaSyntaxError("empty formula", 1, 1)
    parser = _Parser(text)
    result = parser.implication()
    if parser.peek() != "" or parser.tokens[parser.i][1] != "end":
        parser.fail(f"unexpected {parser.peek()!r}")
    return result


# ------------------------------------------------------------ sub-formulas


def subformulas(phi: Formula) -> list[Formula]:
    """Distinct sub-formulas, children before parents; the last one is ``phi``."""
    seen: dict[Formula, None] = {}

    def visit(f):
        if f in seen:
            return
        for c in f.children:
            visit(c)
        seen[f] = None

    visit(phi)
    return list(seen)


def memory_set(phi: Formula, prefix: str = "mem") -> dict[Formula, str]:
    """Temporally headed sub-formulas mapped to memory-fluent names.

    Names carry the sub-formula's position in :func:`subformulas`, so ``O(a)``
    gets ``mem_1``.
    """
    return {f: f"{prefix}_{i}" for i, f in enumerate(subformulas(phi)) if is_temporal(f)}


def memory_source(cell: Formula) -> Formula:
    """The sub-formula whose current truth a memory cell stores for the next instant."""
    if isinstance(cell, (Yesterday, WeakYesterday)):
        return cell.operand
    return cell


def initial_memory(phi: Formula) -> dict[Formula, bool]:
    """Valuation before the first instant.

    Chosen so that at instant 0 ``O a`` and ``H a`` reduce to ``a``, ``a S b``
    to ``b``, ``Y a`` is false and ``WY a`` is true.
    """
    return {f: isinstance(f, (WeakYesterday, Historically)) for f in memory_set(phi)}


def step_val(phi: Formula, sigma_prev: Mapping[Formula, bool], state: Iterable[Atom]):
    """Evaluate every sub-formula at one instant.

    Returns ``(truth, sigma_next)`` where ``truth`` maps each sub-formula to its
    value at this instant and ``sigma_next`` is the memory valuation to pass to
    the following instant.
    """
    state = state if isinstance(state, (set, frozenset)) else frozenset(state)
    truth: dict[Formula, bool] = {}
    for f in subformulas(phi):
        if is_temporal(f) and f not in sigma_prev:
            raise KeyError(f"memory valuation has no cell for {to_text(f)}")
        if isinstance(f, TrueFormula):
            v = True
        elif isinstance(f, FalseFormula):
            v = False
        elif isinstance(f, Atom):
            v = f in state
        elif isinstance(f, Not):
            v = not truth[f.operand]
        elif isinstance(f, And):
            v = truth[f.left] and truth[f.right]
        elif isinstance(f, Or):
            v = truth[f.left] or truth[f.right]
        elif isinstance(f, Implies):
            v = (not truth[f.left]) or truth[f.right]
        elif isinstance(f, (Yesterday, WeakYesterday)):
            v = sigma_prev[f]
        elif isinstance(f, Once):
            v = truth[f.operand] or sigma_prev[f]
        elif isinstance(f, Historically):
            v = truth[f.operand] and sigma_prev[f]
        elif isinstance(f, Since):
            v = truth[f.right] or (truth[f.left] and sigma_prev[f])
        else:
            raise TypeError(f"unknown formula node {f!r}")
        truth[f] = v
    sigma_next = {cell: truth[memory_source(cell)] for cell in sigma_prev if cell in truth}
    return truth, sigma_next


# ---------------------------------------------------------------- monitor


class _Program:
    """Straight-line code for one formula: ``step(state, memory) -> (value, memory)``.

    Same recursions as :func:`step_val`, compiled once per formula because
    exhaustive trace checks call it millions of times.
    """

    def __init__(self, phi: Formula):
        subs = subformulas(phi)
        index = {f: i for i, f in enumerate(subs)}
        cells = [i for i, f in enumerate(subs) if is_temporal(f)]
        slot = {i: k for k, i in enumerate(cells)}
        env: dict[str, object] = {}
        body = []
        for i, f in enumerate(subs):
            if isinstance(f, TrueFormula):
                expr = "True"
            elif isinstance(f, FalseFormula):
                expr = "False"
            elif isinstance(f, Atom):
                env[f"a{i}"] = f
                expr = f"(a{i} in s)"
            elif isinstance(f, Not):
                expr = f"(not v{index[f.operand]})"
            elif isinstance(f, And):
                expr = f"(v{index[f.left]} and v{index[f.right]})"
            elif isinstance(f, Or):
                expr = f"(v{index[f.left]} or v{index[f.right]})"
            elif isinstance(f, Implies):
                expr = f"((not v{index[f.left]}) or v{index[f.right]})"
            elif isinstance(f, (Yesterday, WeakYesterday)):
                expr = f"m[{slot[i]}]"
            elif isinstance(f, Once):
                expr = f"(v{index[f.operand]} or m[{slot[i]}])"
            elif isinstance(f, Historically):
                expr = f"(v{index[f.operand]} and m[{slot[i]}])"
            else:
                expr = f"(v{index[f.right]} or (v{index[f.left]} and m[{slot[i]}]))"
            body.append(f"    v{i} = {expr}")
        nxt = [f"v{index[memory_source(subs[i])]}" for i in cells]
        source = "def step(s, m):\n" + "\n".join(body)
        source += f"\n    return v{len(subs) - 1}, ({', '.join(nxt)}{',' if nxt else ''})\n"
        exec(compile(source, f"<formula {to_text(phi)}>", "exec"), env)
        self.step = env["step"]
        self.cells = tuple(subs[i] for i in cells)
        init = initial_memory(phi)
        self.initial = tuple(init[c] for c in self.cells)


_PROGRAMS: dict[Formula, _Program] = {}


def _program(phi: Formula) -> _Program:
    prog = _PROGRAMS.get(phi)
    if prog is None:
        if len(_PROGRAMS) > 4096:
            _PROGRAMS.clear()
        prog = _PROGRAMS[phi] = _Program(phi)
    return prog


class Monitor:
    """Online evaluator: feed one state at a time, read the verdict so far.

    ``snapshot``/``restore`` let callers branch a monitor cheaply when
    enumerating trace trees.
    """

    def __init__(self, phi: Formula):
        self.formula = phi
        self._prog = _program(phi)
        self.memory = self._prog.initial
        self.value: bool | None = None

    def step(self, state) -> bool:
        self.value, self.memory = self._prog.step(state, self.memory)
        return self.value

    def snapshot(self):
        return self.memory, self.value

    def restore(self, snap) -> None:
        self.memory, self.value = snap

    def valuation(self) -> dict[Formula, bool]:
        return dict(zip(self._prog.cells, self.memory))


def eval_trace(phi: Formula, trace: Sequence[Iterable[Atom]]) -> bool:
    """Truth of ``phi`` at the final instant of ``trace``."""
    if len(trace) == 0:
        raise ValueError("cannot evaluate a formula on an empty trace")
    prog = _program(phi)
    memory = prog.initial
    value = False
    for state in trace:
        if not isinstance(state, (set, frozenset)):
            state = frozenset(state)
        value, memory = prog.step(state, memory)
    return value


# ------------------------------------------------------------- trace files


def _split_top(line: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(line):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(line[start:i])
            start = i + 1
    parts.append(line[start:])
    return [p.strip() for p in parts if p.strip()]


def parse_atom(text: str) -> Atom:
    phi = parse_formula(text)
    if not isinstance(phi, Atom):
        raise ValueError(f"not an atom: {text!r}")
    return phi


def parse_trace(text: str) -> list[frozenset[Atom]]:
    """One instant per line; blank line is an empty state; ``#`` lines are comments."""
    trace = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        if "#" in stripped:
            stripped = stripped[: stripped.index("#")].strip()
        trace.append(frozenset(parse_atom(p) for p in _split_top(stripped)))
    return trace


def format_state(state: Iterable[Atom]) -> str:
    return ",".join(sorted(str(a) for a in state))


def format_trace(trace: Sequence[Iterable[Atom]]) -> str:
    return "".join(format_state(s) + "\n" for s in trace)

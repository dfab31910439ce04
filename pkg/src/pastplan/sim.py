"""Grid micro-world that executes soccer policies.

The registry binds the symbols a policy talks about (``robot1``,
``ballposition``, ``goalposition``...) to world cells.  Bindings are live:
``ballposition`` always means the cell the ball is in now, which is why the
planning domain never has to move the ball between named locations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .compiler import CompilationMap
from .formula import Atom, Formula, eval_trace, format_state, initial_memory, step_val
from .planner import Policy
from .semantic import AGENT_ID, SemanticMap, target_goal

Cell = tuple[int, int]
DEFAULT_CELL = 0.5


class SimError(RuntimeError):
    pass


class PolicyMiss(SimError):
    def __init__(self, state, step):
        atoms = ", ".join(sorted(" ".join(k) for k in state))
        super().__init__(f"policy has no action for the state at step {step}: {{{atoms}}}")
        self.state = state
        self.step = step


def to_cell(x: float, y: float, size: float = DEFAULT_CELL) -> Cell:
    return (int(math.floor(x / size + 0.5)), int(math.floor(y / size + 0.5)))


def midpoint(a: Cell, b: Cell) -> Cell:
    return (int(math.floor((a[0] + b[0]) / 2 + 0.5)), int(math.floor((a[1] + b[1]) / 2 + 0.5)))


@dataclass(frozen=True)
class WorldState:
    cell_size: float
    bounds: tuple[Cell, Cell]
    robot: Cell
    ball: Cell
    mouth: Cell | None = None
    goalscored: bool = False
    ballsafe: bool = False
    ballnear: bool = False
    steps: int = 0

    def inside(self, c: Cell) -> bool:
        (x0, y0), (x1, y1) = self.bounds
        return x0 <= c[0] <= x1 and y0 <= c[1] <= y1


def initial_world(sm: SemanticMap, cell_size: float = DEFAULT_CELL, margin: int = 2) -> WorldState:
    balls = sm.of("Ball")
    if not balls:
        raise SimError("ballposition unresolvable: the semantic map has no ball")
    ax, ay = sm.agent[:2] if sm.agent is not None else (0.0, 0.0)
    goal = target_goal(sm)
    robot = to_cell(ax, ay, cell_size)
    ball = to_cell(balls[0].x, balls[0].y, cell_size)
    mouth = to_cell(goal.x, goal.y, cell_size) if goal is not None else None
    cells = [robot, ball] + [to_cell(e.x, e.y, cell_size) for e in sm.elements]
    xs, ys = [c[0] for c in cells], [c[1] for c in cells]
    bounds = ((min(xs) - margin, min(ys) - margin), (max(xs) + margin, max(ys) + margin))
    return WorldState(cell_size, bounds, robot, ball, mouth)


@dataclass(frozen=True)
class Registry:
    """Symbol bindings: objects to semantic-map instances, locations to live cells."""

    agent: str
    ball: str | None
    goal: str | None
    instances: dict[str, str] = field(default_factory=dict)

    def location(self, symbol: str, w: WorldState) -> Cell:
        if symbol == "ballposition":
            if self.ball is None:
                raise SimError("ballposition unresolvable")
            return w.ball
        if symbol == "goalposition":
            if self.goal is None or w.mouth is None:
                raise SimError("goalposition unresolvable")
            return w.mouth
        raise SimError(f"{symbol} unresolvable")

    def symbols(self) -> set[str]:
        out = {self.agent}
        if self.ball is not None:
            out |= {"ball", "ballposition"}
        if self.goal is not None:
            out |= {"goal1", "goalposition"}
        return out


def policy_symbols(policy: Policy) -> set[str]:
    out = set()
    for name in policy.table.values():
        out.update(name.split()[1:])
    for s in policy.states():
        for key in s:
            out.update(key[1:])
    return out


def build_registry(policy: Policy | None, sm: SemanticMap, w: WorldState | None = None) -> Registry:
    balls = sm.of("Ball")
    goal = target_goal(sm)
    instances = {AGENT_ID: "self"}
    if balls:
        instances["ball"] = balls[0].id
    if goal is not None:
        instances["goal1"] = goal.id
    reg = Registry(AGENT_ID, balls[0].id if balls else None, goal.id if goal else None, instances)
    if policy is not None:
        for sym in sorted(policy_symbols(policy) - reg.symbols()):
            raise SimError(f"{sym} unresolvable")
    if w is not None and w.mouth is None and reg.goal is not None:
        raise SimError("goalposition unresolvable")
    return reg


def runtime_fluents(w: WorldState, reg: Registry) -> frozenset:
    """Ground atoms (as key tuples) true in the world right now."""
    out = set()
    if reg.ball is not None:
        out |= {("present", "ball"), ("isat", "ball", "ballposition")}
        if w.robot == w.ball:
            out.add(("isat", reg.agent, "ballposition"))
    if reg.goal is not None:
        out |= {("present", "goal1"), ("isat", "goal1", "goalposition")}
        if w.ballnear:
            out.add(("ballnear", "goal1"))
    if w.goalscored:
        out.add(("goalscored",))
    if w.ballsafe:
        out.add(("ballsafe",))
    return frozenset(out)


def _holds_pre(name: str, w: WorldState, reg: Registry) -> bool:
    schema = name.split()[0]
    if schema == "moveto":
        return reg.ball is not None and w.robot != w.ball
    if schema in ("kick", "dribble"):
        return reg.ball is not None and reg.goal is not None and w.robot == w.ball
    raise SimError(f"no world semantics for action {schema!r}")


def branch_count(name: str, kick_branches: int = 2) -> int:
    return kick_branches if name.split()[0] == "kick" else 1


def step(w: WorldState, action: str, reg: Registry, rng: np.random.Generator,
         kick_branches: int = 2) -> tuple[WorldState, int]:
    """Execute one ground action; returns the new world and the branch that fired."""
    if not _holds_pre(action, w, reg):
        raise SimError(f"precondition of ({action}) is false in the world")
    schema = action.split()[0]
    n = branch_count(action, kick_branches)
    branch = int(rng.integers(n)) if n > 1 else 0
    if schema == "moveto":
        nxt = replace(w, robot=reg.location("ballposition", w))
    elif schema == "kick":
        mouth = reg.location("goalposition", w)
        if branch == 0:
            nxt = replace(w, ball=mouth, goalscored=True)
        else:
            # short kick: the ball stops halfway and the robot stays behind
            nxt = replace(w, ball=midpoint(w.ball, mouth), ballnear=True)
    else:
        mouth = reg.location("goalposition", w)
        if w.ballnear:
            nxt = replace(w, robot=mouth, ball=mouth, goalscored=True, ballsafe=True)
        else:
            mid = midpoint(w.ball, mouth)
            nxt = replace(w, robot=mid, ball=mid, ballsafe=True, ballnear=True)
    if not (nxt.inside(nxt.robot) and nxt.inside(nxt.ball)):
        raise SimError("object left the grid")
    return replace(nxt, steps=w.steps + 1), branch


def _atoms(keys) -> frozenset:
    return frozenset(Atom(k[0], tuple(k[1:])) for k in keys)


@dataclass
class Episode:
    goal: Formula
    seed: int
    trace: list[frozenset]
    actions: list[str]
    branches: list[int]
    status: str  # goal | max_steps
    verdict: bool
    level: int | None = None

    @property
    def steps(self) -> int:
        return len(self.actions)

    def log(self) -> str:
        lines = [f"# seed {self.seed}"]
        for i, s in enumerate(self.trace):
            lines.append(format_state(s))
            if i < len(self.actions):
                lines.append(f"# action {self.actions[i]}")
                lines.append(f"# branch {self.branches[i]}")
        return "\n".join(lines) + "\n"

    def report(self) -> str:
        rows = [
            ("goal", str(self.goal)),
            ("level", "idle" if self.level is None else str(self.level)),
            ("seed", str(self.seed)),
            ("steps", str(self.steps)),
            ("status", self.status),
            ("verdict", str(self.verdict).lower()),
        ]
        return "".join(f"{k}\t{v}\n" for k, v in rows)


def run(policy: Policy, sm: SemanticMap, cmap: CompilationMap, seed: int = 0,
        max_steps: int = 50, kick_branches: int = 2, cell_size: float = DEFAULT_CELL,
        level: int | None = None, world: WorldState | None = None) -> Episode:
    """Execute ``policy`` from the world the semantic map describes.

    Memory fluents are replayed with :func:`step_val` so each world state can
    be looked up under the compiled state's key.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    goal = cmap.goal
    w = world or initial_world(sm, cell_size)
    reg = build_registry(policy, sm, w)
    rng = np.random.default_rng(seed)
    sigma = initial_memory(goal)
    trace, actions, branches = [], [], []
    status = "max_steps"
    while True:
        fluents = runtime_fluents(w, reg)
        state = _atoms(fluents)
        trace.append(state)
        truth, sigma_next = step_val(goal, sigma, state)
        if truth[goal]:
            status = "goal"
            break
        if len(actions) >= max_steps:
            break
        key = fluents | cmap.memory_atoms(sigma)
        name = policy.action_for(key)
        if name is None:
            raise PolicyMiss(key, len(actions))
        w, b = step(w, name, reg, rng, kick_branches)
        actions.append(name)
        branches.append(b)
        sigma = sigma_next
    return Episode(goal, seed, trace, actions, branches, status, eval_trace(goal, trace), level)


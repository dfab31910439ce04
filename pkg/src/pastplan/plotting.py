"""Report figures.  PNG metadata is stripped so identical inputs give identical bytes."""

from __future__ import annotations

from collections import deque

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .fond.pddl import format_key  # noqa: E402
from .formula import format_state  # noqa: E402
from .planner import Policy  # noqa: E402

_META = {"Software": None}
_DPI = 100


def _save(fig, path) -> str:
    fig.savefig(path, format="png", dpi=_DPI, metadata=_META)
    plt.close(fig)
    return str(path)


def _depths(policy: Policy) -> dict:
    depth = {policy.initial: 0}
    queue = deque([policy.initial])
    while queue:
        s = queue.popleft()
        for t in policy.successors.get(s, ()):
            if t not in depth:
                depth[t] = depth[s] + 1
                queue.append(t)
    return depth


def policy_figure(policy: Policy, hidden=frozenset(), path="policy.png") -> str:
    """Layered drawing of the policy graph: one row per BFS depth."""
    order = policy.states()
    depth = _depths(policy)
    rows: dict[int, list] = {}
    for s in order:
        rows.setdefault(depth[s], []).append(s)
    width = max(len(r) for r in rows.values())
    fig, ax = plt.subplots(figsize=(3.2 * width + 1, 1.9 * len(rows) + 0.5))
    pos = {}
    for d, states in rows.items():
        for k, s in enumerate(states):
            pos[s] = ((k + 0.5) * width / len(states), -d)
    for s in order:
        if s not in policy.table:
            continue
        targets = policy.successors[s]
        for k, t in enumerate(targets):
            (x0, y0), (x1, y1) = pos[s], pos[t]
            ax.annotate("", xy=(x1, y1 + 0.25), xytext=(x0, y0 - 0.25),
                        arrowprops={"arrowstyle": "->", "color": "0.3"})
            tag = f" [{k}]" if len(targets) > 1 else ""
            ax.text((x0 + x1) / 2, (y0 + y1) / 2, policy.table[s].split()[0] + tag,
                    fontsize=7, ha="center", va="center", color="tab:blue",
                    bbox={"boxstyle": "round,pad=0.1", "fc": "white", "ec": "none"})
    for s in order:
        label = "\n".join(format_key(k) for k in sorted(s) if k[0] not in hidden) or "(empty)"
        goal = s in policy.goals
        ax.text(*pos[s], label, fontsize=6, ha="center", va="center", family="monospace",
                bbox={"boxstyle": "square,pad=0.3", "fc": "#e8f5e9" if goal else "white",
                      "ec": "black", "lw": 1.6 if goal else 0.8})
    ax.set_xlim(-0.2, width + 0.2)
    ax.set_ylim(-len(rows) + 0.4, 0.6)
    ax.axis("off")
    ax.set_title(f"{policy.mode} policy, {len(policy)} decision state(s)", fontsize=9)
    return _save(fig, path)


def delta_figure(deltas: dict[int, float], selected: int | None, path="delta.png") -> str:
    levels = sorted(deltas)
    fig, ax = plt.subplots(figsize=(4, 3))
    colors = ["tab:orange" if i == selected else "tab:gray" for i in levels]
    ax.bar([str(i) for i in levels], [deltas[i] for i in levels], color=colors)
    ax.set_xlabel("level template")
    ax.set_ylabel("delta to template map")
    ax.set_title("selected: " + ("idle" if selected is None else f"level {selected}"), fontsize=9)
    fig.tight_layout()
    return _save(fig, path)


def trace_figure(trace, path="trace.png") -> str:
    """Atoms by instant; filled cells are true."""
    atoms = sorted({a for s in trace for a in s}, key=str)
    fig, ax = plt.subplots(figsize=(1.2 + 0.5 * len(trace), 0.8 + 0.3 * max(1, len(atoms))))
    grid = [[1.0 if a in s else 0.0 for s in trace] for a in atoms] or [[0.0] * len(trace)]
    ax.imshow(grid, cmap="Greys", vmin=0, vmax=1, aspect="auto", interpolation="nearest")
    ax.set_yticks(range(len(atoms)))
    ax.set_yticklabels([format_state([a]) for a in atoms], fontsize=7)
    ax.set_xticks(range(len(trace)))
    ax.set_xlabel("instant")
    fig.tight_layout()
    return _save(fig, path)

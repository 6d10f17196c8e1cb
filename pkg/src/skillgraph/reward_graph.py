"""Achievement-triggered multi-path reward evaluation.

A reward graph is a DAG whose nodes are per-skill reward signals and whose
edges carry passing scores. Each edge ``(i, j)`` keeps an achievement score

    a[i, j] <- max(a[i, j], r[i] - passing_score[i, j])    while skill i is active

where a skill is active if it is a root or has a positive incoming
achievement. Edges are updated in topological order of their source, so a
chain can unlock within a single step. The gate keeps a locked skill from
unlocking its successors; without it a high reward on a locked skill would
activate the next one out of order. The step reward is

    total = sum_roots r[k] + sum_edges a[i, j] * r[j]

The root term is a virtual source with a permanent achievement of 1 feeding
every root; without it the sum is identically zero before any skill passes.

All evaluation functions accept arrays with arbitrary leading batch
dimensions so one call can update every environment of a vectorized rollout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

NEVER = None


class GraphError(ValueError):
    """Raised when a reward graph violates one of its structural invariants."""

    def __init__(self, errors: Sequence[str], line: int | None = None, column: int | None = None):
        self.errors = list(errors)
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + "; ".join(self.errors))


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    passing_score: float


@dataclass(frozen=True)
class RewardGraph:
    names: tuple[str, ...]
    edges: tuple[Edge, ...] = ()
    _src: np.ndarray = field(init=False, repr=False, compare=False)
    _dst: np.ndarray = field(init=False, repr=False, compare=False)
    _ps: np.ndarray = field(init=False, repr=False, compare=False)
    _roots: np.ndarray = field(init=False, repr=False, compare=False)
    _plan: list | None = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(
            self, "edges", tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        )
        src = np.array([e.src for e in self.edges], dtype=np.intp)
        dst = np.array([e.dst for e in self.edges], dtype=np.intp)
        ps = np.array([e.passing_score for e in self.edges], dtype=np.float64)
        has_parent = np.zeros(len(self.names), dtype=bool)
        for e in self.edges:
            if 0 <= e.dst < len(self.names):
                has_parent[e.dst] = True
        object.__setattr__(self, "_src", src)
        object.__setattr__(self, "_dst", dst)
        object.__setattr__(self, "_ps", ps)
        object.__setattr__(self, "_roots", np.flatnonzero(~has_parent))

    @property
    def node_count(self) -> int:
        return len(self.names)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def roots(self) -> tuple[int, ...]:
        return tuple(int(k) for k in self._roots)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def predecessors(self, j: int) -> list[int]:
        return [e.src for e in self.edges if e.dst == j]

    def successors(self, i: int) -> list[int]:
        return [e.dst for e in self.edges if e.src == i]


def _find_cycle(n: int, edges: Sequence[Edge]) -> list[int] | None:
    adj: list[list[int]] = [[] for _ in range(n)]
    for e in edges:
        if 0 <= e.src < n and 0 <= e.dst < n:
            adj[e.src].append(e.dst)
    color = [0] * n  # 0 unvisited, 1 on stack, 2 done
    parent = [-1] * n
    for start in range(n):
        if color[start]:
            continue
        stack = [(start, iter(adj[start]))]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            for nxt in it:
                if color[nxt] == 0:
                    color[nxt] = 1
                    parent[nxt] = node
                    stack.append((nxt, iter(adj[nxt])))
                    break
                if color[nxt] == 1:
                    cycle = [node]
                    while cycle[-1] != nxt:
                        cycle.append(parent[cycle[-1]])
                    return cycle[::-1]
            else:
                color[node] = 2
                stack.pop()
    return None


def find_cycle(g: RewardGraph) -> list[int] | None:
    """One directed cycle as a node list ``[a, b, ..., z]`` (closing edge z -> a), or None."""
    return _find_cycle(g.node_count, g.edges)


def unreachable_skills(g: RewardGraph) -> list[int]:
    reached = set(g.roots)
    frontier = list(reached)
    while frontier:
        i = frontier.pop()
        for j in g.successors(i):
            if j not in reached:
                reached.add(j)
                frontier.append(j)
    return [k for k in range(g.node_count) if k not in reached]


def validate_graph(g: RewardGraph) -> list[str]:
    """Return a list of invariant violations; empty means the graph is valid.

    At most one message is reported per category (bad index, non-finite
    score, duplicate edge, cycle, unreachable node).
    """
    errors: list[str] = []
    n = g.node_count
    if n == 0:
        return ["graph has no skills"]

    bad = [e for e in g.edges if not (0 <= e.src < n and 0 <= e.dst < n)]
    if bad:
        errors.append(f"edge {bad[0].src}->{bad[0].dst} references an unknown skill")
    nonfinite = [e for e in g.edges if not math.isfinite(e.passing_score)]
    if nonfinite:
        e = nonfinite[0]
        errors.append(f"non-finite passing score on edge {e.src}->{e.dst}")
    dups = [x for k, x in enumerate(g.names) if x in g.names[:k]]
    if dups:
        errors.append(f"duplicate skill name {dups[0]!r}")
    if bad:
        return errors

    seen_pairs: set[tuple[int, int]] = set()
    for e in g.edges:
        if (e.src, e.dst) in seen_pairs:
            errors.append(f"duplicate edge {g.names[e.src]}->{g.names[e.dst]}")
            break
        seen_pairs.add((e.src, e.dst))

    cycle = _find_cycle(n, g.edges)
    if cycle is not None:
        path = " -> ".join(g.names[k] for k in cycle + [cycle[0]])
        errors.append(f"cycle detected: {path}")

    unreachable = unreachable_skills(g)
    if unreachable:
        errors.append(f"skill {g.names[unreachable[0]]!r} is unreachable from any root")
    return errors


def check_graph(g: RewardGraph) -> RewardGraph:
    errors = validate_graph(g)
    if errors:
        raise GraphError(errors)
    return g


def topological_order(g: RewardGraph) -> list[int]:
    """Kahn's algorithm; ties broken by skill id so the order is deterministic."""
    indeg = [0] * g.node_count
    for e in g.edges:
        indeg[e.dst] += 1
    ready = sorted(k for k in range(g.node_count) if indeg[k] == 0)
    order = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in sorted(g.successors(i)):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
        ready.sort()
    if len(order) != g.node_count:
        raise GraphError(["cycle detected"])
    return order


def make_linear(names: Sequence[str], passing_scores: Sequence[float]) -> RewardGraph:
    if len(passing_scores) != max(len(names) - 1, 0):
        raise ValueError(
            f"a chain of {len(names)} skills needs {max(len(names) - 1, 0)} passing scores, "
            f"got {len(passing_scores)}"
        )
    edges = [Edge(k, k + 1, float(s)) for k, s in enumerate(passing_scores)]
    return RewardGraph(tuple(names), tuple(edges))


def make_single(names: Sequence[str]) -> RewardGraph:
    """Edgeless graph over ``names``: every skill is a root."""
    return RewardGraph(tuple(names), ())


def initial_achievements(g: RewardGraph, batch_shape: tuple[int, ...] = ()) -> np.ndarray:
    return np.zeros(batch_shape + (g.edge_count,), dtype=np.float64)


def _check_sizes(g: RewardGraph, state: np.ndarray | None, rewards: np.ndarray) -> None:
    if rewards.shape[-1:] != (g.node_count,):
        raise ValueError(
            f"reward vector has {rewards.shape[-1] if rewards.ndim else 0} entries, "
            f"graph has {g.node_count} skills"
        )
    if state is not None and state.shape[-1:] != (g.edge_count,):
        raise ValueError(
            f"achievement state has {state.shape[-1] if state.ndim else 0} entries, "
            f"graph has {g.edge_count} edges"
        )


def _update_plan(g: RewardGraph) -> list[tuple[int, bool, np.ndarray, np.ndarray, np.ndarray]]:
    """Per source skill in topological order: (skill, is_root, incoming, outgoing, outgoing scores)."""
    if g._plan is None:
        roots = set(g.roots)
        plan = []
        for i in topological_order(g):
            out = np.array([k for k, e in enumerate(g.edges) if e.src == i], dtype=np.intp)
            if out.size:
                inc = np.array([k for k, e in enumerate(g.edges) if e.dst == i], dtype=np.intp)
                plan.append((i, i in roots, inc, out, g._ps[out]))
        object.__setattr__(g, "_plan", plan)
    return g._plan


def _update(g: RewardGraph, state: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    new = state.copy()
    if new.ndim == 1:  # one environment: plain branches beat masked writes
        for i, is_root, inc, out, ps in _update_plan(g):
            if is_root or new[inc].max() > 0:
                new[out] = np.maximum(new[out], rewards[i] - ps)
        return new
    for i, is_root, inc, out, ps in _update_plan(g):
        cand = np.maximum(new[..., out], rewards[..., i:i + 1] - ps)
        if is_root:
            new[..., out] = cand
        else:
            gate = (new[..., inc] > 0).any(axis=-1, keepdims=True)
            new[..., out] = np.where(gate, cand, new[..., out])
    return new


def _total(g: RewardGraph, state: np.ndarray, rewards: np.ndarray) -> np.ndarray | float:
    if not np.isfinite(rewards).all():
        raise ValueError("non-finite skill reward")
    out = rewards[..., g._roots].sum(axis=-1)
    if g.edge_count:
        out = out + (state * rewards[..., g._dst]).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _coerce(g: RewardGraph, state, rewards) -> tuple[np.ndarray, np.ndarray]:
    state = np.asarray(state, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    _check_sizes(g, state, rewards)
    return state, rewards


def update_achievements(g: RewardGraph, state: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    """Return the new per-edge achievements after observing ``rewards``.

    Only edges leaving an active skill move; see the module docstring.
    """
    return _update(g, *_coerce(g, state, rewards))


def total_reward(g: RewardGraph, state: np.ndarray, rewards: np.ndarray) -> np.ndarray | float:
    """Root rewards plus achievement-weighted successor rewards."""
    return _total(g, *_coerce(g, state, rewards))


def step(g: RewardGraph, state: np.ndarray, rewards: np.ndarray) -> tuple[np.ndarray, np.ndarray | float]:
    """Update achievements then evaluate the total reward for one time step."""
    state, rewards = _coerce(g, state, rewards)
    new_state = _update(g, state, rewards)
    return new_state, _total(g, new_state, rewards)


def active_mask(g: RewardGraph, state: np.ndarray) -> np.ndarray:
    """Boolean mask over skills: roots, plus any skill with a positive incoming achievement."""
    state = np.asarray(state, dtype=np.float64)
    mask = np.zeros(state.shape[:-1] + (g.node_count,), dtype=bool)
    mask[..., g._roots] = True
    for k, e in enumerate(g.edges):
        mask[..., e.dst] |= state[..., k] > 0
    return mask


def active_skills(g: RewardGraph, state: np.ndarray) -> set[int]:
    return {int(k) for k in np.flatnonzero(active_mask(g, np.asarray(state)))}


def first_activation_times(
    g: RewardGraph, history: Iterable[np.ndarray] | np.ndarray
) -> dict[int, int | None]:
    """Earliest step index at which each skill becomes active.

    ``history`` yields one achievement vector per step (shape ``(E,)`` or
    ``(batch, E)``; with a batch axis a skill counts as active when it is
    active in any member). Roots map to 0, never-activated skills to ``None``.
    """
    times: dict[int, int | None] = {k: NEVER for k in range(g.node_count)}
    for k in g.roots:
        times[k] = 0
    for t, a in enumerate(history):
        mask = active_mask(g, np.asarray(a))
        if mask.ndim > 1:
            mask = mask.reshape(-1, g.node_count).any(axis=0)
        for k in np.flatnonzero(mask):
            if times[int(k)] is NEVER:
                times[int(k)] = t
        if all(v is not NEVER for v in times.values()):
            break
    return times


def activation_order_respected(g: RewardGraph, times: Mapping[int, int | None]) -> bool:
    """True when every activated non-root skill has an activated predecessor that came no later."""
    for j, tj in times.items():
        if tj is NEVER or j in g.roots:
            continue
        preds = [times[i] for i in g.predecessors(j)]
        if not any(ti is not NEVER and ti <= tj for ti in preds):
            return False
    return True


def count_active(times: Mapping[int, int | None]) -> int:
    return sum(1 for v in times.values() if v is not NEVER)

"""Maximum spanning arborescence decoding over dense score matrices.

Scores follow the row = dependent, column = candidate head convention with
the artificial root at index 0. Row 0 is ignored. Ties break toward the
lower head index (argmax takes the first maximum).
"""

from __future__ import annotations

from typing import Optional

import numpy as np


def greedy_heads(scores: np.ndarray) -> list[int]:
    """Per-dependent argmax heads; the result may contain cycles."""
    s = _prepare(scores)
    heads = [0] * s.shape[0]
    for i in range(1, s.shape[0]):
        heads[i] = int(np.argmax(s[i]))
    return heads


def chu_liu_edmonds(scores: np.ndarray) -> list[int]:
    """Maximum-score spanning arborescence rooted at node 0.

    Returns heads[0..n] with heads[0] = 0 as a placeholder.
    """
    s = _prepare(scores)
    if s.shape[0] == 1:
        return [0]
    return _solve(s)


def tree_score(scores: np.ndarray, heads: list[int]) -> float:
    """Sum of the selected arc scores (dependents 1..n in order)."""
    return float(sum(scores[i, heads[i]] for i in range(1, len(heads))))


def is_arborescence(heads: list[int]) -> bool:
    """True iff every non-root node has one in-range head and all nodes
    reach the root without cycles."""
    n = len(heads) - 1
    for i in range(1, n + 1):
        if not 0 <= heads[i] <= n or heads[i] == i:
            return False
    for i in range(1, n + 1):
        seen = set()
        v = i
        while v != 0:
            if v in seen:
                return False
            seen.add(v)
            v = heads[v]
    return True


def decode_tree(
    arc_scores: np.ndarray,
    rel_scores: Optional[np.ndarray] = None,
    method: str = "mst",
) -> tuple[list[int], Optional[list[int]]]:
    """Decode heads (and relation indices at the chosen arcs).

    `method="mst"` runs Chu-Liu/Edmonds and always yields a valid tree;
    `method="greedy"` takes per-dependent argmax heads for comparison and
    may yield a non-tree.
    """
    if method == "mst":
        heads = chu_liu_edmonds(arc_scores)
    elif method == "greedy":
        heads = greedy_heads(arc_scores)
    else:
        raise ValueError(f"unknown decoding method {method!r}")
    rels = None
    if rel_scores is not None:
        rels = [int(np.argmax(rel_scores[i, heads[i]])) for i in range(1, len(heads))]
    return heads, rels


def _prepare(scores: np.ndarray) -> np.ndarray:
    s = np.array(scores, dtype=np.float64, copy=True)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
        raise ValueError(f"scores must be square (n+1, n+1), got {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    np.fill_diagonal(s, -np.inf)
    s[0, :] = -np.inf
    return s


def _find_cycle(heads: list[int]) -> Optional[list[int]]:
    m = len(heads)
    color = [0] * m  # 0 new, 1 on path, 2 done
    color[0] = 2
    for start in range(1, m):
        if color[start]:
            continue
        path = []
        v = start
        while color[v] == 0:
            color[v] = 1
            path.append(v)
            v = heads[v]
        cycle = None
        if color[v] == 1:
            cycle = path[path.index(v):]
        for u in path:
            color[u] = 2
        if cycle is not None:
            return cycle
    return None


def _solve(s: np.ndarray) -> list[int]:
    m = s.shape[0]
    heads = [0] * m
    for i in range(1, m):
        heads[i] = int(np.argmax(s[i]))
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads

    in_cycle = set(cycle)
    outside = [v for v in range(m) if v not in in_cycle]  # includes root 0
    new_of = {v: i for i, v in enumerate(outside)}
    c = len(outside)  # index of the contracted node
    k = c + 1

    s2 = np.full((k, k), -np.inf)
    # best head inside the cycle for each outside dependent
    enter_cycle_head: dict[int, int] = {}
    # best cycle dependent for each outside head (scored as the gain over
    # the dependent's current cycle arc)
    leave_cycle_dep: dict[int, int] = {}

    cyc = list(cycle)
    for u in outside:
        if u == 0:
            continue
        for v in outside:
            if u != v:
                s2[new_of[u], new_of[v]] = s[u, v]
        col = [s[u, v] for v in cyc]
        best = int(np.argmax(col))
        s2[new_of[u], c] = col[best]
        enter_cycle_head[u] = cyc[best]
    for v in outside:
        col = [s[u, v] - s[u, heads[u]] for u in cyc]
        best = int(np.argmax(col))
        s2[c, new_of[v]] = col[best]
        leave_cycle_dep[v] = cyc[best]
    s2[0, :] = -np.inf
    np.fill_diagonal(s2, -np.inf)

    heads2 = _solve(s2)

    result = list(heads)  # cycle nodes keep their cycle arcs by default
    entry_head = outside[heads2[c]]
    entry_dep = leave_cycle_dep[entry_head]
    result[entry_dep] = entry_head  # breaking the cycle
    for u in outside:
        if u == 0:
            continue
        h2 = heads2[new_of[u]]
        result[u] = enter_cycle_head[u] if h2 == c else outside[h2]
    return result

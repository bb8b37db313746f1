"""Per-user item similarity graphs and maximum-connected-component filtering.

A user's distinct items become nodes; two nodes are joined when the cosine
similarity of their embeddings reaches the threshold ``tau``. The largest
connected component is taken as the user's consistent preference and the
history is restricted to it.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .catalog import InteractionHistory
from .errors import EmptyGraph, ZeroVector

DEFAULT_TAU = 0.7


def cosine(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def similarity_matrix(vectors):
    """Pairwise cosine similarities of the rows, clamped to [-1, 1]."""
    x = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroVector("cannot build a similarity graph over a zero vector")
    x = x / norms
    return np.clip(x @ x.T, -1.0, 1.0)


@dataclass(frozen=True)
class SimilarityGraph:
    nodes: tuple
    tau: float
    edges: np.ndarray
    similarities: np.ndarray

    @property
    def n(self):
        return len(self.nodes)

    def edge_list(self):
        i, j = np.nonzero(np.triu(self.edges, k=1))
        return list(zip(i.tolist(), j.tolist()))

    def neighbors(self, i):
        return np.flatnonzero(self.edges[i]).tolist()


@dataclass(frozen=True)
class ComponentSet:
    components: tuple
    max_index: int = 0

    @property
    def sizes(self):
        return [len(c) for c in self.components]


@dataclass(frozen=True)
class FilteredHistory:
    events: tuple
    retained_items: frozenset

    @property
    def item_ids(self):
        return [i for i, _ in self.events]


def _events(history):
    """Normalize a history or a bare item-id sequence to ``(item_id, t)`` pairs."""
    if isinstance(history, InteractionHistory):
        return list(history.events)
    return [(item_id, pos) for pos, item_id in enumerate(history)]


def _check_tau(tau):
    if not -1.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [-1, 1], got {tau}")


def graph_from_similarities(nodes, similarities, tau):
    """Threshold a precomputed similarity matrix: edge iff S_ij >= tau, i != j."""
    _check_tau(tau)
    s = np.asarray(similarities, dtype=np.float64)
    if s.shape != (len(nodes), len(nodes)):
        raise ValueError("similarity matrix shape does not match node count")
    edges = s >= tau
    np.fill_diagonal(edges, False)
    edges = edges & edges.T
    return SimilarityGraph(tuple(nodes), float(tau), edges, s)


def build_graph(history, matrix, tau=DEFAULT_TAU, exclude_last=False):
    """Graph over the distinct items of ``history``.

    With ``exclude_last`` the final event is held out (evaluation-time leakage
    rule): its item is only a node if it also occurs earlier.
    """
    _check_tau(tau)
    events = _events(history)
    if exclude_last:
        events = events[:-1]
    nodes = list(dict.fromkeys(i for i, _ in events))
    if not nodes:
        raise EmptyGraph("no nodes left to build a graph")
    sims = similarity_matrix(matrix.get(nodes))
    return graph_from_similarities(nodes, sims, tau)


def connected_components(g):
    """Breadth-first search from each unvisited node in node order."""
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = True
        comp, queue = [start], deque([start])
        while queue:
            for nb in g.neighbors(queue.popleft()):
                if not seen[nb]:
                    seen[nb] = True
                    comp.append(nb)
                    queue.append(nb)
        comps.append(frozenset(comp))
    return ComponentSet(tuple(comps), 0)


def select_max_component(cs, history, g=None):
    """Index of the largest component.

    Ties go to the component holding the most recently interacted item, then
    to the one whose smallest item id sorts first. ``g`` maps node indices to
    item ids; without it the recency rule cannot be applied and node order is
    used.
    """
    if not cs.components:
        raise EmptyGraph("no components")
    last_seen = {}
    for pos, (item_id, _) in enumerate(_events(history)):
        last_seen[item_id] = pos

    def key(k):
        comp = cs.components[k]
        if g is None:
            return (len(comp), 0, -min(comp))
        items = [g.nodes[i] for i in comp]
        recency = max(last_seen.get(i, -1) for i in items)
        return (len(comp), recency, _neg_lex(min(items)))

    best = max(range(len(cs.components)), key=key)
    return ComponentSet(cs.components, best)


class _neg_lex(str):
    """String whose ordering is reversed, so ``max`` prefers the smaller id."""

    def __lt__(self, other):
        return str.__gt__(self, other)

    def __gt__(self, other):
        return str.__lt__(self, other)


def filter_history(history, retained, g, exclude_last=False):
    """Keep the events whose item is in ``retained`` (node indices of ``g``),
    in original order and with repeats."""
    if not retained:
        raise ValueError("retained set is empty")
    keep = frozenset(g.nodes[i] for i in retained)
    events = _events(history)
    if exclude_last:
        events = events[:-1]
    return FilteredHistory(tuple(e for e in events if e[0] in keep), keep)


def denoise(history, matrix, tau=DEFAULT_TAU, exclude_last=False, details=False):
    """Restrict ``history`` to its maximum connected component.

    Returns a :class:`FilteredHistory`, or ``(filtered, graph, components)``
    when ``details`` is set.
    """
    g = build_graph(history, matrix, tau, exclude_last)
    cs = select_max_component(connected_components(g), _held_in(history, exclude_last), g)
    out = filter_history(history, cs.components[cs.max_index], g, exclude_last)
    return (out, g, cs) if details else out


def _held_in(history, exclude_last):
    events = _events(history)
    return [i for i, _ in (events[:-1] if exclude_last else events)]


def filter_report(user_id, history, matrix, tau=DEFAULT_TAU, exclude_last=True):
    """One record of the ``filter`` command's JSON-lines output."""
    filtered, g, cs = denoise(history, matrix, tau, exclude_last, details=True)
    retained = [n for n in g.nodes if n in filtered.retained_items]
    removed = [n for n in g.nodes if n not in filtered.retained_items]
    return {"user_id": user_id, "retained": retained, "removed": removed,
            "component_sizes": cs.sizes}

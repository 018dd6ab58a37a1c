"""Ready-made graphs used throughout the examples and tests."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .graph import DIRICHLET, NK, CustomUnitary, Delta, MetricGraph, VertexCondition


def interval(length: float = 1.0, left: VertexCondition = NK, right: VertexCondition = NK) -> MetricGraph:
    return MetricGraph.from_edges([(0, 1, length)], {0: left, 1: right})


def tadpole(l1: float = 1.0, l2: float = 1.0, alpha: float | None = None) -> MetricGraph:
    """Loop e2 at v0 plus dangling bond e1 from v0 to the tail end v1.

    An optional delta coupling sits on the degree-3 vertex v0.
    """
    cond = NK if alpha is None else Delta(alpha)
    return MetricGraph.from_edges([(0, 1, l1), (0, 0, l2)], {0: cond})


def star(lengths: Sequence[float], center: VertexCondition = NK,
         tips: VertexCondition | Sequence[VertexCondition] = NK) -> MetricGraph:
    """Star with center v0 and bonds oriented outwards to tips v1..vN."""
    n = len(lengths)
    if not isinstance(tips, (list, tuple)):
        tips = [tips] * n
    conds = {0: center}
    conds.update({i + 1: c for i, c in enumerate(tips)})
    return MetricGraph.from_edges([(0, i + 1, ln) for i, ln in enumerate(lengths)], conds)


def figure_eight(l1: float = 1.0, l2: float = math.sqrt(2)) -> MetricGraph:
    return MetricGraph.from_edges([(0, 0, l1), (0, 0, l2)], n_vertices=1)


def complete_graph(n: int, lengths: Sequence[float] | None = None) -> MetricGraph:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if lengths is None:
        lengths = [1.0 + 0.1 * math.sqrt(p + 2) for p in range(len(pairs))]
    return MetricGraph.from_edges([(i, j, ln) for (i, j), ln in zip(pairs, lengths)], n_vertices=n)


def open_loop(length: float = 1.0) -> MetricGraph:
    """One lead and one loop bond at a single NK vertex."""
    return MetricGraph.from_edges([(0, None, 0.0), (0, 0, length)], n_vertices=1)


def open_star(n_leads: int, bond_lengths: Sequence[float] = ()) -> MetricGraph:
    """NK center with leads and dangling NK bonds."""
    edges: list = [(0, None, 0.0)] * n_leads
    edges += [(0, i + 1, ln) for i, ln in enumerate(bond_lengths)]
    return MetricGraph.from_edges(edges, n_vertices=1 + len(bond_lengths))


def dirichlet_wall() -> MetricGraph:
    """Single lead ending on a Dirichlet vertex."""
    return MetricGraph.from_edges([(0, None, 0.0)], {0: DIRICHLET})


def star_dirichlet_tips(lengths: Sequence[float] = (1.0, 1.3, 0.7 * math.sqrt(2), 0.9 * math.sqrt(3))) -> MetricGraph:
    """4-star, NK tips on e1,e2, Dirichlet tips on e3,e4."""
    return star(lengths, tips=[NK, NK, DIRICHLET, DIRICHLET])


def tadpole_two_tails(lengths: Sequence[float] = (1.0, 0.8 * math.sqrt(2), 0.9 * math.sqrt(3), 0.6 * math.sqrt(5))) -> MetricGraph:
    """Path v0-v1, double bond v1=v2, path v2-v3."""
    l1, l2, l3, l4 = lengths
    return MetricGraph.from_edges([(0, 1, l1), (1, 2, l2), (1, 2, l3), (2, 3, l4)])


def square_with_diagonal(lengths: Sequence[float] = (1.0, 0.9 * math.sqrt(2), 0.7 * math.sqrt(3), 0.8 * math.sqrt(5), 0.5 * math.sqrt(7))) -> MetricGraph:
    """Square v0-v2-v1-v3-v0 with diagonal v2-v3 (v0, v1 degree 2)."""
    l1, l2, l3, l4, l5 = lengths
    return MetricGraph.from_edges([(0, 2, l1), (2, 1, l2), (1, 3, l3), (3, 0, l4), (2, 3, l5)])


def random_connected_graph(rng: np.random.Generator, n_bonds: int, *, length_range=(0.5, 2.0),
                           allow_loops: bool = True, n_vertices: int | None = None) -> MetricGraph:
    """Random connected multigraph with NK conditions.

    A random spanning tree on the vertex set is completed by extra bonds
    (possibly parallel or loops).
    """
    if n_vertices is None:
        n_vertices = int(rng.integers(1 if allow_loops else 2, n_bonds + 2))
    n_vertices = max(1, min(n_vertices, n_bonds + 1))
    if n_vertices == 1 and not allow_loops:
        n_vertices = 2
    edges = []
    for v in range(1, n_vertices):
        u = int(rng.integers(0, v))
        edges.append((u, v))
    while len(edges) < n_bonds:
        a, b = (int(x) for x in rng.integers(0, n_vertices, size=2))
        if a == b and not allow_loops:
            continue
        edges.append((a, b))
    perm = rng.permutation(len(edges))
    lo, hi = length_range
    triples = []
    for i in perm:
        a, b = edges[i]
        if rng.random() < 0.5:
            a, b = b, a
        triples.append((a, b, float(rng.uniform(lo, hi))))
    return MetricGraph.from_edges(triples, n_vertices=n_vertices)


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def with_random_unitaries(g: MetricGraph, rng: np.random.Generator, p: float = 0.5) -> MetricGraph:
    conds = {}
    for v in g.vertices:
        if rng.random() < p:
            conds[v.id] = CustomUnitary(haar_unitary(rng, g.degree(v.id)))
    return g.with_conditions(conds)

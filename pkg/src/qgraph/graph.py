"""Metric graph data model, vertex conditions and directed-edge indexing.

Edges are intervals ``[0, length]`` running from ``origin`` (x = 0) to
``terminus`` (x = length).  Leads are half-lines attached at their origin
and have ``terminus = None`` and ``length = inf``.  Vertex and edge ids are
dense integers so that every matrix can be addressed by id.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import GraphInputError

UNITARY_TOL = 1e-12


# ---------------------------------------------------------------------------
# vertex conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NeumannKirchhoff:
    """Continuity plus vanishing sum of outgoing derivatives."""

    @property
    def alpha(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Dirichlet:
    """psi(v) = 0 on every incident endpoint."""


@dataclass(frozen=True)
class Delta:
    """Continuity plus sum of outgoing derivatives = alpha * psi(v)."""

    alpha: float

    def __post_init__(self):
        if not math.isfinite(float(self.alpha)):
            raise GraphInputError("delta coupling must be finite", "condition.delta")
        object.__setattr__(self, "alpha", float(self.alpha))


@dataclass(frozen=True, eq=False)
class CustomUnitary:
    """Vertex scattering matrix prescribed directly (rows: outgoing)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GraphInputError("unitary condition must be a square matrix", "condition.unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        return isinstance(other, CustomUnitary) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m @ m.conj().T - np.eye(len(m)))) <= tol)


VertexCondition = Union[NeumannKirchhoff, Dirichlet, Delta, CustomUnitary]

NK = NeumannKirchhoff()
DIRICHLET = Dirichlet()


def coupling(cond: VertexCondition) -> float | None:
    """Delta coupling of a condition (0 for NK), None if not delta-type."""
    if isinstance(cond, NeumannKirchhoff):
        return 0.0
    if isinstance(cond, Delta):
        return cond.alpha
    return None


def is_delta_type(cond: VertexCondition) -> bool:
    return coupling(cond) is not None


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Vertex:
    id: int
    condition: VertexCondition = NK


@dataclass(frozen=True)
class Edge:
    id: int
    origin: int
    terminus: int | None
    length: float

    @property
    def is_lead(self) -> bool:
        return self.terminus is None

    @property
    def is_loop(self) -> bool:
        return self.terminus is not None and self.terminus == self.origin


@dataclass(frozen=True)
class Endpoint:
    """One end of an edge at a vertex; ``side`` 0 = origin, 1 = terminus."""
    edge: int
    side: int


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))

    # -- construction helpers ------------------------------------------------
    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[int, int | None, float]],
        conditions: dict[int, VertexCondition] | None = None,
        n_vertices: int | None = None,
    ) -> "MetricGraph":
        """Build from ``(origin, terminus, length)`` triples; ``terminus=None`` is a lead."""
        edges = list(edges)
        conditions = dict(conditions or {})
        if n_vertices is None:
            ids = [e[0] for e in edges] + [e[1] for e in edges if e[1] is not None]
            ids += list(conditions)
            n_vertices = max(ids) + 1 if ids else 0
        verts = tuple(Vertex(v, conditions.get(v, NK)) for v in range(n_vertices))
        es = tuple(
            Edge(i, int(o), None if t is None else int(t), math.inf if t is None else float(ln))
            for i, (o, t, ln) in enumerate(edges)
        )
        return cls(verts, es)

    def with_conditions(self, conditions: dict[int, VertexCondition]) -> "MetricGraph":
        verts = tuple(Vertex(v.id, conditions.get(v.id, v.condition)) for v in self.vertices)
        return MetricGraph(verts, self.edges)

    def with_lengths(self, lengths: Sequence[float]) -> "MetricGraph":
        bonds = self.bond_ids
        if len(lengths) != len(bonds):
            raise ValueError("one length per bond expected")
        new = {b: float(x) for b, x in zip(bonds, lengths)}
        es = tuple(Edge(e.id, e.origin, e.terminus, new.get(e.id, e.length)) for e in self.edges)
        return MetricGraph(self.vertices, es)

    def reoriented(self, edge_ids: Iterable[int]) -> "MetricGraph":
        """Flip the orientation of the given bonds."""
        flip = set(edge_ids)
        es = []
        for e in self.edges:
            if e.id in flip and not e.is_lead:
                es.append(Edge(e.id, e.terminus, e.origin, e.length))
            else:
                es.append(e)
        return MetricGraph(self.vertices, tuple(es))

    def subdivided(self, edge_id: int, fraction: float = 0.5) -> "MetricGraph":
        """Insert a degree-2 NK vertex into a bond at ``fraction`` of its length."""
        e = self.edges[edge_id]
        if e.is_lead:
            raise ValueError("cannot subdivide a lead")
        w = len(self.vertices)
        verts = self.vertices + (Vertex(w, NK),)
        es = list(self.edges)
        es[edge_id] = Edge(e.id, e.origin, w, e.length * fraction)
        es.append(Edge(len(es), w, e.terminus, e.length * (1.0 - fraction)))
        return MetricGraph(verts, tuple(es))

    # -- derived quantities --------------------------------------------------
    @cached_property
    def bond_ids(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.edges if not e.is_lead)

    @cached_property
    def lead_ids(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.edges if e.is_lead)

    @property
    def n_bonds(self) -> int:
        return len(self.bond_ids)

    @property
    def n_leads(self) -> int:
        return len(self.lead_ids)

    @property
    def is_closed(self) -> bool:
        return self.n_leads == 0

    @cached_property
    def total_length(self) -> float:
        return float(sum(self.edges[b].length for b in self.bond_ids))

    @cached_property
    def bond_lengths(self) -> np.ndarray:
        return np.array([self.edges[b].length for b in self.bond_ids], dtype=float)

    @cached_property
    def endpoints(self) -> tuple[tuple[Endpoint, ...], ...]:
        """Endpoints at each vertex, ordered by (edge id, origin before terminus)."""
        acc: dict[int, list[Endpoint]] = defaultdict(list)
        for e in self.edges:
            acc[e.origin].append(Endpoint(e.id, 0))
            if e.terminus is not None:
                acc[e.terminus].append(Endpoint(e.id, 1))
        return tuple(tuple(acc.get(v.id, ())) for v in self.vertices)

    def degree(self, v: int) -> int:
        return len(self.endpoints[v])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(p) for p in self.endpoints], dtype=int)

    @property
    def conditions(self) -> tuple[VertexCondition, ...]:
        return tuple(v.condition for v in self.vertices)

    @cached_property
    def is_k_dependent(self) -> bool:
        return any(isinstance(c, Delta) and c.alpha != 0.0 for c in self.conditions)

    @cached_property
    def has_negative_coupling(self) -> bool:
        return any(isinstance(c, Delta) and c.alpha < 0.0 for c in self.conditions)

    @cached_property
    def components(self) -> tuple[tuple[int, ...], ...]:
        """Vertex sets of connected components (sorted)."""
        parent = list(range(len(self.vertices)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in self.edges:
            if e.terminus is not None:
                ra, rb = find(e.origin), find(e.terminus)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        groups: dict[int, list[int]] = defaultdict(list)
        for v in range(len(self.vertices)):
            groups[find(v)].append(v)
        return tuple(tuple(g) for g in sorted(groups.values()))

    @property
    def is_connected(self) -> bool:
        return len(self.components) <= 1

    def component_graphs(self) -> list["MetricGraph"]:
        """Split into connected components with dense re-numbering."""
        out = []
        for comp in self.components:
            vmap = {v: i for i, v in enumerate(comp)}
            verts = tuple(Vertex(vmap[v], self.vertices[v].condition) for v in comp)
            es = []
            for e in self.edges:
                if e.origin in vmap:
                    t = None if e.terminus is None else vmap[e.terminus]
                    es.append(Edge(len(es), vmap[e.origin], t, e.length))
            out.append(MetricGraph(verts, tuple(es)))
        return out

    @cached_property
    def index(self) -> "DirectedEdgeIndex":
        return directed_edge_index(self)

    # -- serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        return graph_to_dict(self)

    def to_json(self, indent: int | None = 1) -> str:
        return json.dumps(graph_to_dict(self), indent=indent)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_graph(g: MetricGraph) -> ValidationReport:
    """List every violated structural invariant (empty report means valid)."""
    rep = ValidationReport()
    nv = len(g.vertices)
    for i, v in enumerate(g.vertices):
        if v.id != i:
            rep.violations.append(f"vertex {i}: id {v.id} is not dense")
    for i, e in enumerate(g.edges):
        if e.id != i:
            rep.violations.append(f"edge {i}: id {e.id} is not dense")
        if not 0 <= e.origin < nv:
            rep.violations.append(f"edge {e.id}: origin {e.origin} references a missing vertex")
        if e.terminus is not None and not 0 <= e.terminus < nv:
            rep.violations.append(f"edge {e.id}: terminus {e.terminus} references a missing vertex")
        if e.terminus is None:
            if not math.isinf(e.length):
                rep.violations.append(f"edge {e.id}: lead must have infinite length")
        elif not (math.isfinite(e.length) and e.length > 0):
            rep.violations.append(f"edge {e.id}: nonpositive length" if e.length <= 0
                                  else f"edge {e.id}: bond length must be finite")
    if any("missing vertex" in s for s in rep.violations):
        return rep
    for v in g.vertices:
        d = g.degree(v.id)
        if d < 1:
            rep.violations.append(f"vertex {v.id}: isolated (degree 0)")
        c = v.condition
        if isinstance(c, CustomUnitary):
            if c.matrix.shape != (d, d):
                rep.violations.append(f"vertex {v.id}: unitary shape {c.matrix.shape} != degree {d}")
            elif not c.is_unitary():
                rep.violations.append(f"vertex {v.id}: matrix not unitary")
    if nv and not g.is_connected:
        rep.violations.append("disconnected")
    if g.is_closed and g.n_bonds - nv + len(g.components) < 0:
        rep.violations.append("negative cycle rank")
    return rep


def require_valid(g: MetricGraph, allow_disconnected: bool = False) -> None:
    rep = validate_graph(g)
    bad = [s for s in rep.violations if not (allow_disconnected and s == "disconnected")]
    if bad:
        raise GraphInputError("; ".join(bad))


def betti_number(g: MetricGraph) -> int:
    """Cycle rank |E| - |V| + 1 of a closed connected graph."""
    if not g.is_closed:
        raise GraphInputError("betti number is defined here for closed graphs only")
    if not g.is_connected:
        raise GraphInputError("graph is disconnected")
    return g.n_bonds - len(g.vertices) + 1


# ---------------------------------------------------------------------------
# directed edges
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectedEdgeIndex:
    """Ordering [e1+..eB+, e1-..eB-, lead1..leadL] of directed bonds and lead channels.

    ``origin[i]``/``terminus[i]`` are the vertices a directed edge leaves and
    enters (both equal the attachment vertex for a lead channel).
    """

    n_bonds: int
    n_leads: int
    edge_of: np.ndarray
    sign_of: np.ndarray
    origin: np.ndarray
    terminus: np.ndarray
    lengths: np.ndarray
    reversal: np.ndarray
    bond_pos: dict
    lead_pos: dict

    @property
    def size(self) -> int:
        return 2 * self.n_bonds + self.n_leads

    def plus(self, edge_id: int) -> int:
        return self.bond_pos[edge_id]

    def minus(self, edge_id: int) -> int:
        return self.bond_pos[edge_id] + self.n_bonds

    def lead(self, edge_id: int) -> int:
        return 2 * self.n_bonds + self.lead_pos[edge_id]

    @property
    def bond_slice(self) -> slice:
        return slice(0, 2 * self.n_bonds)

    @property
    def lead_slice(self) -> slice:
        return slice(2 * self.n_bonds, self.size)

    def follows(self, a: int, b: int) -> bool:
        """True if directed edge ``b`` can follow ``a`` (o(b) = t(a))."""
        return bool(self.terminus[a] == self.origin[b])

    def label(self, i: int) -> str:
        s = self.sign_of[i]
        return f"e{self.edge_of[i]}" + ("+" if s > 0 else "-" if s < 0 else "L")

    def channels_at(self, g: MetricGraph, v: int) -> tuple[list[int], list[int]]:
        """(outgoing, incoming) channel indices of the endpoints of ``v``."""
        out, inc = [], []
        for ep in g.endpoints[v]:
            e = g.edges[ep.edge]
            if e.is_lead:
                out.append(self.lead(e.id))
                inc.append(self.lead(e.id))
            elif ep.side == 0:
                out.append(self.plus(e.id))
                inc.append(self.minus(e.id))
            else:
                out.append(self.minus(e.id))
                inc.append(self.plus(e.id))
        return out, inc


def directed_edge_index(g: MetricGraph) -> DirectedEdgeIndex:
    bonds, leads = g.bond_ids, g.lead_ids
    B, L = len(bonds), len(leads)
    N = 2 * B + L
    edge_of = np.empty(N, dtype=int)
    sign_of = np.zeros(N, dtype=int)
    origin = np.empty(N, dtype=int)
    terminus = np.empty(N, dtype=int)
    lengths = np.zeros(N)
    reversal = np.arange(N)
    for j, b in enumerate(bonds):
        e = g.edges[b]
        edge_of[j] = edge_of[j + B] = b
        sign_of[j], sign_of[j + B] = 1, -1
        origin[j], terminus[j] = e.origin, e.terminus
        origin[j + B], terminus[j + B] = e.terminus, e.origin
        lengths[j] = lengths[j + B] = e.length
        reversal[j], reversal[j + B] = j + B, j
    for j, ld in enumerate(leads):
        i = 2 * B + j
        edge_of[i] = ld
        origin[i] = terminus[i] = g.edges[ld].origin
    return DirectedEdgeIndex(
        n_bonds=B, n_leads=L, edge_of=edge_of, sign_of=sign_of, origin=origin,
        terminus=terminus, lengths=lengths, reversal=reversal,
        bond_pos={b: j for j, b in enumerate(bonds)},
        lead_pos={ld: j for j, ld in enumerate(leads)},
    )


# ---------------------------------------------------------------------------
# JSON format
# ---------------------------------------------------------------------------

def _parse_condition(raw, where: str) -> VertexCondition:
    if isinstance(raw, str):
        key = raw.strip().lower()
        if key in ("nk", "neumann", "kirchhoff", "neumann-kirchhoff"):
            return NK
        if key == "dirichlet":
            return DIRICHLET
        raise GraphInputError(f"unknown condition {raw!r}", where)
    if isinstance(raw, dict) and len(raw) == 1:
        (key, val), = raw.items()
        if key == "delta":
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise GraphInputError("delta coupling must be a number", where + ".delta")
            return Delta(float(val))
        if key == "unitary":
            try:
                m = np.array([[complex(a, b) for a, b in row] for row in val])
            except (TypeError, ValueError):
                raise GraphInputError("unitary must be rows of [re, im] pairs", where + ".unitary")
            return CustomUnitary(m)
    raise GraphInputError(f"unrecognized condition {raw!r}", where)


def _condition_to_json(c: VertexCondition):
    if isinstance(c, NeumannKirchhoff):
        return "NK"
    if isinstance(c, Dirichlet):
        return "dirichlet"
    if isinstance(c, Delta):
        return {"delta": c.alpha}
    return {"unitary": [[[z.real, z.imag] for z in row] for row in c.matrix]}


def graph_from_dict(data: dict) -> MetricGraph:
    if not isinstance(data, dict):
        raise GraphInputError("graph file must hold a JSON object", "<root>")
    for key in ("vertices", "edges"):
        if key not in data or not isinstance(data[key], list):
            raise GraphInputError(f"missing or non-list '{key}'", key)
    verts = []
    for i, rv in enumerate(data["vertices"]):
        where = f"vertices[{i}]"
        if not isinstance(rv, dict) or "id" not in rv:
            raise GraphInputError("vertex needs an 'id'", where + ".id")
        if not isinstance(rv["id"], int) or isinstance(rv["id"], bool):
            raise GraphInputError("vertex id must be an integer", where + ".id")
        cond = _parse_condition(rv.get("condition", "NK"), where + ".condition")
        verts.append(Vertex(rv["id"], cond))
    verts.sort(key=lambda v: v.id)
    if [v.id for v in verts] != list(range(len(verts))):
        raise GraphInputError("vertex ids must be 0..|V|-1", "vertices")
    edges = []
    for i, re_ in enumerate(data["edges"]):
        where = f"edges[{i}]"
        if not isinstance(re_, dict):
            raise GraphInputError("edge must be an object", where)
        for key in ("id", "from", "length"):
            if key not in re_:
                raise GraphInputError(f"edge needs '{key}'", f"{where}.{key}")
        ln = re_["length"]
        if ln == "inf":
            if re_.get("to") is not None:
                raise GraphInputError("lead must omit 'to'", where + ".to")
            length, to = math.inf, None
        else:
            if not isinstance(ln, (int, float)) or isinstance(ln, bool):
                raise GraphInputError("length must be a number or \"inf\"", where + ".length")
            length = float(ln)
            if not (math.isfinite(length) and length > 0):
                raise GraphInputError("nonpositive or non-finite length", where + ".length")
            if "to" not in re_ or not isinstance(re_["to"], int):
                raise GraphInputError("bond needs integer 'to'", where + ".to")
            to = re_["to"]
        if not isinstance(re_["from"], int) or not 0 <= re_["from"] < len(verts):
            raise GraphInputError("'from' must reference a vertex", where + ".from")
        if to is not None and not 0 <= to < len(verts):
            raise GraphInputError("'to' must reference a vertex", where + ".to")
        edges.append(Edge(re_["id"], re_["from"], to, length))
    edges.sort(key=lambda e: e.id)
    if [e.id for e in edges] != list(range(len(edges))):
        raise GraphInputError("edge ids must be 0..|E|-1", "edges")
    g = MetricGraph(tuple(verts), tuple(edges))
    rep = validate_graph(g)
    if not rep.ok:
        raise GraphInputError("; ".join(rep.violations), "graph")
    return g


def graph_to_dict(g: MetricGraph) -> dict:
    verts = [{"id": v.id, "condition": _condition_to_json(v.condition)} for v in g.vertices]
    edges = []
    for e in g.edges:
        d = {"id": e.id, "from": e.origin}
        if e.is_lead:
            d["length"] = "inf"
        else:
            d["to"] = e.terminus
            d["length"] = e.length
        edges.append(d)
    return {"vertices": verts, "edges": edges}


def load_graph(path) -> MetricGraph:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GraphInputError(f"invalid JSON: {exc.msg} at line {exc.lineno}", "<json>")
    except OSError as exc:
        raise GraphInputError(f"cannot read graph file: {exc.strerror}", "<path>")
    return graph_from_dict(data)


def save_graph(g: MetricGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(g.to_json() + "\n")

"""Graph surgery (Dirichlet imposition, vertex splitting, coupling increase)
and checks of the resulting eigenvalue interlacing.

Eigenvalues are E = k^2, multiplicities expanded, zero modes included,
with the convention lambda_j = -inf for j <= 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GraphInputError, IncompleteSpectrumError
from .graph import (DIRICHLET, NK, Delta, Edge, Endpoint, MetricGraph, NeumannKirchhoff, Vertex,
                    coupling, is_delta_type, require_valid)
from .spectrum import find_spectrum, zero_mode_multiplicity

SLACK_REL = 1e-8


def impose_dirichlet(g: MetricGraph, vs: Sequence[int]) -> MetricGraph:
    vs = sorted(set(int(v) for v in vs))
    for v in vs:
        if not 0 <= v < len(g.vertices):
            raise GraphInputError(f"no vertex {v}", field="vertices")
    return g.with_conditions({v: DIRICHLET for v in vs})


def _as_endpoint(g: MetricGraph, v: int, item) -> Endpoint:
    eps = g.endpoints[v]
    if isinstance(item, Endpoint):
        ep = item
    elif isinstance(item, (int, np.integer)):
        if not 0 <= item < len(eps):
            raise GraphInputError(f"vertex {v} has no endpoint #{item}", field="partition")
        ep = eps[item]
    else:
        ep = Endpoint(int(item[0]), int(item[1]))
    if ep not in eps:
        raise GraphInputError(f"endpoint {ep} is not incident to vertex {v}", field="partition")
    return ep


def split_vertex(g: MetricGraph, v: int, partition, couplings: Sequence[float] | None = None) -> MetricGraph:
    """Replace v by one vertex per group of incident endpoints.

    Groups hold endpoint positions in ``g.endpoints[v]``, Endpoint objects or
    (edge, side) pairs.  A delta vertex may be split only with explicit new
    couplings that sum to the old one.
    """
    if not 0 <= v < len(g.vertices):
        raise GraphInputError(f"no vertex {v}", field="vertex")
    cond = g.vertices[v].condition
    groups = [[_as_endpoint(g, v, it) for it in grp] for grp in partition]
    if any(len(grp) == 0 for grp in groups):
        raise GraphInputError("empty group in partition", field="partition")
    flat = [ep for grp in groups for ep in grp]
    if len(flat) != len(set(flat)) or set(flat) != set(g.endpoints[v]):
        raise GraphInputError("partition must cover each incident endpoint exactly once", field="partition")
    p = len(groups)
    if isinstance(cond, NeumannKirchhoff) or (isinstance(cond, Delta) and cond.alpha == 0.0 and couplings is None):
        new_conds = [NK] * p
    elif isinstance(cond, Delta):
        if couplings is None or len(couplings) != p:
            raise GraphInputError("splitting a delta vertex needs one coupling per group", field="couplings")
        if not math.isclose(math.fsum(couplings), cond.alpha, rel_tol=1e-12, abs_tol=1e-12):
            raise GraphInputError("new couplings must sum to the original coupling", field="couplings")
        new_conds = [Delta(float(a)) if a != 0 else NK for a in couplings]
    else:
        raise GraphInputError("only Neumann-Kirchhoff (or delta with redistributed couplings) vertices split",
                              field="vertex")
    if couplings is not None and isinstance(cond, NeumannKirchhoff):
        if any(a != 0 for a in couplings):
            raise GraphInputError("an NK vertex splits into NK vertices", field="couplings")
    ids = [v] + [len(g.vertices) + j for j in range(p - 1)]
    verts = list(g.vertices)
    verts[v] = Vertex(v, new_conds[0])
    verts += [Vertex(ids[j], new_conds[j]) for j in range(1, p)]
    where = {ep: ids[j] for j, grp in enumerate(groups) for ep in grp}
    es = []
    for e in g.edges:
        o = where.get(Endpoint(e.id, 0), e.origin)
        t = e.terminus if e.is_lead else where.get(Endpoint(e.id, 1), e.terminus)
        es.append(Edge(e.id, o, t, e.length))
    return MetricGraph(tuple(verts), tuple(es))


def increase_coupling(g: MetricGraph, assignments: dict[int, float]) -> MetricGraph:
    new = {}
    for v, a in assignments.items():
        cond = g.vertices[v].condition
        if not is_delta_type(cond):
            raise GraphInputError(f"vertex {v} is not of delta type", field=f"vertices[{v}]")
        old = coupling(cond)
        if a < old:
            raise GraphInputError(f"coupling at vertex {v} would decrease ({old} -> {a})", field=f"vertices[{v}]")
        new[v] = Delta(float(a)) if a != 0 else NK
    return g.with_conditions(new)


# ---------------------------------------------------------------------------
# spectra and interlacing
# ---------------------------------------------------------------------------

@dataclass
class EnergySpectrum:
    """Sorted eigenvalues E = k^2 (expanded) complete up to ``E_max``."""
    E: np.ndarray
    E_max: float

    def __len__(self) -> int:
        return len(self.E)

    def at(self, n: int) -> float:
        return -math.inf if n <= 0 else float(self.E[n - 1])


def energy_spectrum(g: MetricGraph, n_states: int, threads: int | None = 1) -> EnergySpectrum:
    """At least ``n_states`` eigenvalues, merged over connected components."""
    require_valid(g, allow_disconnected=True)
    if g.has_negative_coupling:
        raise GraphInputError("negative couplings: negative eigenvalues are not computed")
    comps = g.component_graphs()
    L = g.total_length
    K = math.pi * (n_states + len(g.edges) + 4) / L
    for _ in range(30):
        parts = [np.zeros(zero_mode_multiplicity(g))]
        for c in comps:
            # without a zero mode the lowest level can sit below the default grid start
            k_min = None if zero_mode_multiplicity(c) else 1e-4 * math.pi / c.total_length
            parts.append(find_spectrum(c, K, k_min=k_min, threads=threads).expanded() ** 2)
        E = np.sort(np.concatenate(parts))
        if len(E) >= n_states:
            return EnergySpectrum(E, K * K)
        K *= 1.3
    raise IncompleteSpectrumError(f"could not reach {n_states} states")


@dataclass
class SurgeryRecord:
    operation: str  # "dirichlet" | "split" | "coupling"
    parameters: dict
    d: int
    before: MetricGraph
    after: MetricGraph

    @property
    def direction(self) -> str:
        return "down" if self.operation == "split" else "up"


def dirichlet_surgery(g: MetricGraph, vs: Sequence[int]) -> SurgeryRecord:
    vs = sorted(set(int(v) for v in vs))
    return SurgeryRecord("dirichlet", {"vertices": vs}, len(vs), g, impose_dirichlet(g, vs))


def split_surgery(g: MetricGraph, v: int, partition, couplings=None) -> SurgeryRecord:
    after = split_vertex(g, v, partition, couplings)
    parts = [[[ep.edge, ep.side] for ep in (_as_endpoint(g, v, it) for it in grp)] for grp in partition]
    return SurgeryRecord("split", {"vertex": v, "partition": parts}, len(partition) - 1, g, after)


def coupling_surgery(g: MetricGraph, assignments: dict[int, float]) -> SurgeryRecord:
    after = increase_coupling(g, assignments)
    return SurgeryRecord("coupling", {"assignments": {int(k): float(a) for k, a in assignments.items()}},
                         len(assignments), g, after)


@dataclass
class InterlacingReport:
    operation: str
    d: int
    checked_n: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps({"operation": self.operation, "d": self.d, "checked_n": self.checked_n,
                           "violations": self.violations}, sort_keys=True)


def check_interlacing(before: EnergySpectrum, after: EnergySpectrum, d: int, direction: str,
                      n_max: int, operation: str = "") -> InterlacingReport:
    """Two-sided bracketing for n = 1..n_max.

    up:   lambda_n(H) <= lambda_n(H') <= lambda_{n+d}(H)
    down: lambda_{n-d}(H) <= lambda_n(H') <= lambda_n(H)
    """
    if direction not in ("up", "down"):
        raise GraphInputError("direction must be 'up' or 'down'")
    need_before = n_max + d if direction == "up" else n_max
    if len(before) < need_before or len(after) < n_max:
        raise IncompleteSpectrumError(
            f"need {need_before} states before and {n_max} after, have {len(before)} and {len(after)}")
    bad = []
    for n in range(1, n_max + 1):
        mid = after.at(n)
        if direction == "up":
            lo, hi = before.at(n), before.at(n + d)
        else:
            lo, hi = before.at(n - d), before.at(n)
        slack = SLACK_REL * (1.0 + abs(mid))
        if not (lo <= mid + slack and mid <= hi + slack):
            bad.append({"n": n, "lower": lo, "value": mid, "upper": hi})
    return InterlacingReport(operation, d, n_max, bad)


def verify_surgery(rec: SurgeryRecord, n_max: int = 30, threads: int | None = 1) -> InterlacingReport:
    before = energy_spectrum(rec.before, n_max + rec.d + 1, threads)
    after = energy_spectrum(rec.after, n_max + 1, threads)
    return check_interlacing(before, after, rec.d, rec.direction, n_max, rec.operation)

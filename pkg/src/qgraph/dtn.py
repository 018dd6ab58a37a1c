"""Dirichlet-to-Neumann maps of edges and graphs, Schur reduction and the DtN secular equation.

For an edge of length l and wave number k the solution with end values
(f0, f1) has outgoing derivative sums (A f0 + B f1, B f0 + A f1) with
A = -k cot(kl), B = k / sin(kl).  Summing over edges gives the all-vertex
matrix Lambda(k); eigenvalues are zeros of det(Lambda(k) - Theta) with
Dirichlet vertices removed.  The scan works with the pole-free function
F(k) = det(Lambda - Theta) * prod_e sin(k l_e) and masks a small window
around every edge pole, where eigenvalues can hide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import GraphInputError, PoleError, SingularInteriorError
from .graph import NK, Dirichlet, MetricGraph, coupling, require_valid
from .spectrum import Spectrum, SpectrumAudit

POLE_TOL = 1e-12
MASK_RADIUS = 1e-6
SINGULAR_COND = 1e12


@dataclass(frozen=True)
class EdgeDtN:
    A: float
    B: float


def edge_dtn(length: float, k: float, edge_id: int | None = None) -> EdgeDtN:
    s = math.sin(k * length)
    if abs(s) <= POLE_TOL:
        raise PoleError(f"k*l = {k * length!r} is a Dirichlet eigenvalue of edge {edge_id}", edge_id)
    return EdgeDtN(-k * math.cos(k * length) / s, k / s)


@dataclass
class DtNMatrix:
    matrix: np.ndarray
    labels: tuple  # vertex ids, or ("dummy", edge_id) for loop midpoints
    k: float
    conditions: dict = field(default_factory=dict)  # label -> VertexCondition
    masked: list = field(default_factory=list)

    def position(self, label) -> int:
        return self.labels.index(label)


@dataclass
class _Expanded:
    """Edge list after splitting loops: (endpoint labels, length, original edge id)."""
    labels: tuple
    edges: list
    conditions: dict
    loops_direct: list  # (label, length, edge id) for loops kept whole


def _expand(g: MetricGraph, loops: str) -> _Expanded:
    if not g.is_closed:
        raise GraphInputError("DtN routines handle closed graphs")
    labels = [v.id for v in g.vertices]
    conds = {v.id: v.condition for v in g.vertices}
    edges, direct = [], []
    for e in g.edges:
        if e.is_loop:
            if loops == "direct":
                direct.append((e.origin, e.length, e.id))
                continue
            w = ("dummy", e.id)
            labels.append(w)
            conds[w] = NK
            edges.append((e.origin, w, e.length / 2, e.id))
            edges.append((w, e.origin, e.length / 2, e.id))
        else:
            edges.append((e.origin, e.terminus, e.length, e.id))
    return _Expanded(tuple(labels), edges, conds, direct)


def _check_conditions(conds: dict):
    for lab, c in conds.items():
        if coupling(c) is None and not isinstance(c, Dirichlet):
            raise GraphInputError(f"vertex {lab}: DtN route supports NK, delta and Dirichlet only")


def _assemble(ex: _Expanded, ks: np.ndarray) -> np.ndarray:
    """Batched all-vertex DtN matrices, shape (len(ks), n, n)."""
    pos = {lab: i for i, lab in enumerate(ex.labels)}
    n = len(ex.labels)
    ks = np.asarray(ks, dtype=float)
    Lam = np.zeros((len(ks), n, n))
    for a, b, ln, _ in ex.edges:
        s = np.sin(ks * ln)
        A = -ks * np.cos(ks * ln) / s
        B = ks / s
        i, j = pos[a], pos[b]
        Lam[:, i, i] += A
        Lam[:, j, j] += A
        Lam[:, i, j] += B
        Lam[:, j, i] += B
    for v, ln, _ in ex.loops_direct:
        i = pos[v]
        # both ends at v: 2A + 2B = 2k tan(kl/2)
        Lam[:, i, i] += 2.0 * ks * np.tan(ks * ln / 2)
    return Lam


def _pole_check(ex: _Expanded, k: float):
    for a, b, ln, eid in ex.edges:
        if abs(math.sin(k * ln)) <= POLE_TOL:
            raise PoleError(f"k = {k!r} hits a Dirichlet eigenvalue of edge {eid}", eid)
    for v, ln, eid in ex.loops_direct:
        if abs(math.cos(k * ln / 2)) <= POLE_TOL:
            raise PoleError(f"k = {k!r} hits a pole of loop {eid}", eid)


def all_vertex_dtn(g: MetricGraph, k: float, loops: str = "split") -> DtNMatrix:
    """Lambda(k) over all vertices (plus a dummy NK vertex per split loop)."""
    require_valid(g)
    ex = _expand(g, loops)
    _pole_check(ex, k)
    Lam = _assemble(ex, np.array([k]))[0]
    return DtNMatrix(Lam, ex.labels, float(k), dict(ex.conditions))


def reduce_dtn(lam: DtNMatrix, boundary: Sequence[Hashable],
               interior_conditions: dict | None = None) -> DtNMatrix:
    """Schur complement onto ``boundary``.

    Interior Dirichlet vertices are dropped; the remaining interior block is
    Lambda_II - Theta_II with Theta the delta couplings (0 for NK).
    """
    conds = dict(lam.conditions)
    if interior_conditions:
        conds.update(interior_conditions)
    boundary = list(boundary)
    for b in boundary:
        if b not in lam.labels:
            raise GraphInputError(f"boundary vertex {b!r} not in DtN matrix")
    bpos = [lam.position(b) for b in boundary]
    interior = [i for i, lab in enumerate(lam.labels)
                if lab not in boundary and not isinstance(conds.get(lab, NK), Dirichlet)]
    M = lam.matrix
    LBB = M[np.ix_(bpos, bpos)]
    if not interior:
        return DtNMatrix(LBB.copy(), tuple(boundary), lam.k, {b: conds.get(b, NK) for b in boundary})
    theta = np.array([coupling(conds.get(lam.labels[i], NK)) or 0.0 for i in interior])
    LII = M[np.ix_(interior, interior)] - np.diag(theta)
    # relative to the whole matrix: a 1x1 block always has condition number 1
    sv = np.linalg.svd(LII, compute_uv=False)
    scale = max(float(np.abs(M).max()), abs(lam.k), 1.0)
    if not np.all(np.isfinite(sv)) or sv[-1] < scale / SINGULAR_COND:
        raise SingularInteriorError(f"interior block singular (smallest singular value {sv[-1]:.3g}): k^2 is "
                                    "an eigenvalue of the graph with Dirichlet conditions on the boundary")
    LBI = M[np.ix_(bpos, interior)]
    red = LBB - LBI @ np.linalg.solve(LII, LBI.T)
    return DtNMatrix(0.5 * (red + red.T), tuple(boundary), lam.k, {b: conds.get(b, NK) for b in boundary})


# ---------------------------------------------------------------------------
# DtN secular function and spectrum
# ---------------------------------------------------------------------------

class _Secular:
    def __init__(self, g: MetricGraph, loops: str):
        require_valid(g)
        self.ex = _expand(g, loops)
        _check_conditions(self.ex.conditions)
        keep = [i for i, lab in enumerate(self.ex.labels)
                if not isinstance(self.ex.conditions[lab], Dirichlet)]
        self.keep = np.array(keep, dtype=int)
        self.theta = np.array([coupling(self.ex.conditions[self.ex.labels[i]]) for i in keep])
        lens = [ln for _, _, ln, _ in self.ex.edges]
        # a direct loop of length l has poles where cos(kl/2) = 0, cleared by sin(kl)
        lens += [ln for _, ln, _ in self.ex.loops_direct]
        self.pole_lengths = np.array(lens, dtype=float)

    def reduced(self, ks) -> np.ndarray:
        Lam = _assemble(self.ex, ks)
        M = Lam[:, self.keep][:, :, self.keep]
        return M - np.diag(self.theta)[None]

    def F(self, ks) -> np.ndarray:
        ks = np.atleast_1d(np.asarray(ks, dtype=float))
        if len(self.keep) == 0:
            det = np.ones(len(ks))
        else:
            det = np.linalg.det(self.reduced(ks))
        return det * np.prod(np.sin(np.outer(ks, self.pole_lengths)), axis=1)

    def f1(self, k: float) -> float:
        return float(self.F([k])[0])

    def nullity(self, k: float) -> tuple[int, float]:
        if len(self.keep) == 0:
            return 0, 1.0
        s = np.linalg.svd(self.reduced([k])[0], compute_uv=False)
        scale = max(s[0], 1.0)
        return int(np.sum(s < 1e-7 * scale)), float(s[-1] / scale)

    def masks(self, k_lo: float, k_hi: float) -> list[tuple[float, float, float]]:
        """(lo, hi, length) windows around k = n pi / l for each edge."""
        out = []
        for ln in np.unique(self.pole_lengths):
            n0 = max(1, int(math.floor(k_lo * ln / math.pi)))
            n1 = int(math.ceil(k_hi * ln / math.pi))
            for m in range(n0, n1 + 1):
                c = m * math.pi / ln
                if c + MASK_RADIUS >= k_lo and c - MASK_RADIUS <= k_hi:
                    out.append((c - MASK_RADIUS, c + MASK_RADIUS, float(ln)))
        out.sort()
        merged = []
        for lo, hi, ln in out:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(hi, merged[-1][1]), merged[-1][2])
            else:
                merged.append((lo, hi, ln))
        return merged


def dtn_secular_function(g: MetricGraph, k, loops: str = "split") -> np.ndarray:
    """Pole-free DtN secular function det(Lambda - Theta) * prod sin(k l_e)."""
    return _Secular(g, loops).F(k)


def _golden_abs(f, a, b, iters=80):
    gr = (math.sqrt(5) - 1) / 2
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = abs(f(c)), abs(f(d))
    for _ in range(iters):
        if b - a < 1e-15 * (1 + b):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = abs(f(c))
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = abs(f(d))
    return (c, fc) if fc < fd else (d, fd)


def find_spectrum_dtn(g: MetricGraph, k_max: float, grid_step: float | None = None,
                      loops: str = "split", k_min: float | None = None, tol: float = 1e-14) -> Spectrum:
    """Zeros of the pole-free DtN secular function in (k_min, k_max].

    Windows of radius 1e-6 around edge poles are excluded and listed in
    ``Spectrum.masked``; eigenvalues there must be recovered by the
    scattering route.
    """
    sec = _Secular(g, loops)
    L = g.total_length
    if grid_step is None:
        grid_step = math.pi / (8.0 * L)
    if k_min is None:
        k_min = grid_step
    masks = sec.masks(k_min, k_max)
    # grid pieces between masks
    pts = list(k_min + grid_step * np.arange(int(math.ceil((k_max - k_min) / grid_step)) + 1))
    pts[-1] = k_max
    pts = np.array(pts)
    pieces = []
    lo = k_min
    for mlo, mhi, _ in masks + [(k_max, k_max, 0.0)]:
        hi = min(mlo, k_max)
        if hi > lo:
            inner = pts[(pts > lo) & (pts < hi)]
            pieces.append(np.concatenate([[lo], inner, [hi]]))
        lo = max(lo, mhi)
    roots = []
    f = sec.f1
    for seg in pieces:
        Fv = sec.F(seg)
        h = 1e-7 * grid_step
        dF = (sec.F(seg + h) - sec.F(seg - h)) / (2 * h)
        for i in range(len(seg) - 1):
            a, b = float(seg[i]), float(seg[i + 1])
            fa, fb = Fv[i], Fv[i + 1]
            if fa == 0.0:
                if i == 0:
                    roots.append(a)
                continue
            if fa * fb < 0:
                roots.append(brentq(f, a, b, xtol=tol * (1 + a), rtol=1e-15, maxiter=200))
            elif np.sign(dF[i]) != np.sign(dF[i + 1]):
                # an extremum inside the cell: either two roots or a touching zero
                try:
                    m = brentq(lambda x: (f(x + h) - f(x - h)) / (2 * h), a, b, xtol=1e-13 * (1 + a))
                except ValueError:
                    m, _ = _golden_abs(f, a, b)
                fm = f(m)
                if fm * fa < 0:
                    roots.append(brentq(f, a, m, xtol=tol * (1 + a), rtol=1e-15, maxiter=200))
                    roots.append(brentq(f, m, b, xtol=tol * (1 + a), rtol=1e-15, maxiter=200))
                else:
                    km, fk = _golden_abs(f, a, b)
                    scale = max(abs(fa), abs(fb), 1e-300)
                    null, _ = sec.nullity(km)
                    if fk < 1e-8 * scale and null >= 1:
                        roots.append(km)
        if Fv[-1] == 0.0:
            roots.append(float(seg[-1]))
    roots.sort()
    recs = []
    for k in roots:
        if recs and abs(k - recs[-1][0]) < 1e-10 * (1 + k):
            continue
        null, res = sec.nullity(k)
        recs.append((k, max(1, null), res))
    ks = np.array([r[0] for r in recs])
    mult = np.array([r[1] for r in recs], dtype=int)
    res = np.array([r[2] for r in recs])
    audit = SpectrumAudit(int(mult.sum()), int(mult.sum()), True)
    sp = Spectrum(ks, mult, res, float(k_min), float(k_max), float(grid_step), tol, L, "dtn", audit,
                  [(lo, hi) for lo, hi, _ in masks])
    return sp


def masked_lengths(g: MetricGraph, loops: str = "split") -> np.ndarray:
    """Edge lengths whose Dirichlet eigenvalues nπ/l are masked by the DtN scan."""
    return np.unique(_Secular(g, loops).pole_lengths)

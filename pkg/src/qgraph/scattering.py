"""Vertex and edge scattering matrices, the quantum map and open-graph scattering.

Conventions: directed edges are indexed by :class:`DirectedEdgeIndex`; at a
vertex with endpoints ordered by (edge id, origin first) the vertex matrix
maps incoming to outgoing amplitudes, ``S[out_i, in_j] = sigma[i, j]``.
Lead channels carry no phase in ``T``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphInputError
from .graph import (CustomUnitary, Delta, Dirichlet, MetricGraph, NeumannKirchhoff,
                    VertexCondition, coupling, require_valid)

SINGULAR_COND = 1e12
SINGULAR_SHIFT = 1e-9


def vertex_scattering_matrix(cond: VertexCondition, degree: int, k: float | None = None) -> np.ndarray:
    """Scattering matrix of a single vertex (rows outgoing, columns incoming)."""
    d = int(degree)
    if d < 1:
        raise GraphInputError("degree must be positive")
    eye = np.eye(d, dtype=complex)
    if isinstance(cond, NeumannKirchhoff):
        return -eye + (2.0 / d) * np.ones((d, d))
    if isinstance(cond, Dirichlet):
        return -eye
    if isinstance(cond, Delta):
        if cond.alpha == 0.0:
            return -eye + (2.0 / d) * np.ones((d, d))
        if k is None or k == 0:
            raise GraphInputError("delta condition needs k != 0")
        return -eye + (2.0 / (d + 1j * cond.alpha / k)) * np.ones((d, d))
    if isinstance(cond, CustomUnitary):
        if cond.matrix.shape != (d, d):
            raise GraphInputError(f"unitary condition has shape {cond.matrix.shape}, degree is {d}")
        return cond.matrix.astype(complex)
    raise TypeError(f"unknown vertex condition {cond!r}")


@dataclass
class EdgeScatteringMatrix:
    matrix: np.ndarray
    k_dependent: bool
    k: float | None = None


class _SBuilder:
    """S(k) = S0 + sum_v c_v(k) P_v, with P_v the all-ones block at a delta vertex."""

    def __init__(self, g: MetricGraph):
        idx = g.index
        N = idx.size
        self.S0 = np.zeros((N, N), dtype=complex)
        self.terms: list[tuple[np.ndarray, np.ndarray, int, float]] = []
        for v in g.vertices:
            out, inc = idx.channels_at(g, v.id)
            d = len(out)
            if d == 0:
                continue
            cond = v.condition
            if isinstance(cond, Delta) and cond.alpha != 0.0:
                self.S0[out, inc] += -1.0
                self.terms.append((np.array(out), np.array(inc), d, cond.alpha))
            else:
                sig = vertex_scattering_matrix(cond, d)
                self.S0[np.ix_(out, inc)] += sig
        self.k_dependent = bool(self.terms)

    def at(self, k: float) -> np.ndarray:
        if not self.terms:
            return self.S0
        if k == 0:
            raise GraphInputError("delta condition needs k != 0")
        S = self.S0.copy()
        for out, inc, d, a in self.terms:
            S[np.ix_(out, inc)] += 2.0 / (d + 1j * a / k)
        return S

    def batch(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=float)
        S = np.broadcast_to(self.S0, (len(ks),) + self.S0.shape).copy()
        for out, inc, d, a in self.terms:
            c = 2.0 / (d + 1j * a / ks)
            ii, jj = np.ix_(out, inc)
            S[:, ii, jj] += c[:, None, None]
        return S


def assemble_edge_scattering(g: MetricGraph, k: float | None = None) -> EdgeScatteringMatrix:
    require_valid(g, allow_disconnected=True)
    b = _SBuilder(g)
    if b.k_dependent and k is None:
        raise GraphInputError("graph has delta vertices: k is required")
    return EdgeScatteringMatrix(b.at(k) if b.k_dependent else b.S0.copy(), b.k_dependent, k)


def _alpha_vector(g: MetricGraph, alpha) -> np.ndarray:
    """Per-directed-edge magnetic phases (+a on e+, -a on e-, 0 on leads)."""
    idx = g.index
    out = np.zeros(idx.size)
    if alpha is None:
        return out
    a = np.asarray(alpha, dtype=float)
    if a.shape == (len(g.edges),):
        per_bond = a[list(g.bond_ids)]
    elif a.shape == (g.n_bonds,):
        per_bond = a
    else:
        raise GraphInputError(f"alpha needs one entry per edge, got shape {a.shape}")
    B = idx.n_bonds
    out[:B] = per_bond
    out[B:2 * B] = -per_bond
    return out


def transport_diagonal(g: MetricGraph, k, alpha=None) -> np.ndarray:
    """Diagonal of T(k, alpha); ``k`` may be an array (returns shape (M, N))."""
    idx = g.index
    B = idx.n_bonds
    k = np.asarray(k, dtype=float)
    phase = np.multiply.outer(k, idx.lengths) + _alpha_vector(g, alpha)
    t = np.exp(1j * phase)
    t[..., 2 * B:] = 1.0
    return t


class QuantumMapEvaluator:
    """Evaluates U(k, alpha) = T(k, alpha) S(k) for a fixed graph."""

    def __init__(self, g: MetricGraph):
        require_valid(g, allow_disconnected=True)
        self.graph = g
        self.index = g.index
        self._sb = _SBuilder(g)
        self.k_dependent = self._sb.k_dependent
        B = self.index.n_bonds
        self._L = np.array(self.index.lengths)
        self._L[2 * B:] = 0.0

    @property
    def size(self) -> int:
        return self.index.size

    def S(self, k: float | None = None) -> np.ndarray:
        if self.k_dependent:
            return self._sb.at(k)
        return self._sb.S0

    def S_batch(self, ks) -> np.ndarray:
        return self._sb.batch(ks)

    def __call__(self, k: float, alpha=None) -> np.ndarray:
        t = transport_diagonal(self.graph, k, alpha)
        return t[:, None] * self.S(k)

    def batch(self, ks, alpha=None) -> np.ndarray:
        ks = np.asarray(ks, dtype=float)
        t = transport_diagonal(self.graph, ks, alpha)
        if self.k_dependent:
            return t[:, :, None] * self._sb.batch(ks)
        return t[:, :, None] * self._sb.S0[None]

    def dU_dk(self, k: float, alpha=None, h: float = 1e-6) -> np.ndarray:
        """Derivative of U in k (exact when S is k-independent)."""
        U = self(k, alpha)
        if not self.k_dependent:
            return 1j * self._L[:, None] * U
        return (self(k + h, alpha) - self(k - h, alpha)) / (2 * h)

    def lengths_diagonal(self) -> np.ndarray:
        return self._L.copy()


def quantum_map(g: MetricGraph, k: float, alpha=None) -> np.ndarray:
    return QuantumMapEvaluator(g)(k, alpha)


@dataclass
class OpenBlocks:
    LL: np.ndarray
    LB: np.ndarray
    BL: np.ndarray
    BB: np.ndarray


def open_blocks(U: np.ndarray, n_bonds: int) -> OpenBlocks:
    b = slice(0, 2 * n_bonds)
    ld = slice(2 * n_bonds, U.shape[0])
    return OpenBlocks(U[ld, ld], U[ld, b], U[b, ld], U[b, b])


@dataclass
class OpenScatteringResult:
    S: np.ndarray
    R: np.ndarray
    k: float
    singular: bool = False
    condition_number: float = 1.0
    notes: list = field(default_factory=list)


def _open_at(ev: QuantumMapEvaluator, k: float):
    bl = open_blocks(ev(k), ev.index.n_bonds)
    nb = bl.BB.shape[0]
    if nb == 0:
        return bl.LL.copy(), np.zeros((0, bl.LL.shape[0]), dtype=complex), 1.0
    A = np.eye(nb) - bl.BB
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        return None, None, cond
    R = np.linalg.solve(A, bl.BL)
    return bl.LL + bl.LB @ R, R, cond


def open_scattering_matrix(g: MetricGraph, k: float) -> OpenScatteringResult:
    """S_Gamma = U_LL + U_LB (I - U_BB)^-1 U_BL and the internal response R_Gamma.

    Near an embedded eigenvalue ``I - U_BB`` is singular but the limit is
    removable; the result is then the average of the two sides ``k +- 1e-9``.
    """
    if g.is_closed:
        raise GraphInputError("open_scattering_matrix needs at least one lead")
    ev = QuantumMapEvaluator(g)
    S, R, cond = _open_at(ev, k)
    if S is not None:
        return OpenScatteringResult(S, R, k, False, float(cond))
    Sp, Rp, _ = _open_at(ev, k + SINGULAR_SHIFT)
    Sm, Rm, _ = _open_at(ev, k - SINGULAR_SHIFT)
    if Sp is None or Sm is None:
        raise np.linalg.LinAlgError("I - U_BB singular on both sides of k")
    return OpenScatteringResult(0.5 * (Sp + Sm), 0.5 * (Rp + Rm), k, True, float(cond),
                                ["removable singularity: two-sided average"])


@dataclass
class WignerSmithResult:
    Q: np.ndarray
    singular: bool


def wigner_smith(g: MetricGraph, k: float, h: float = 1e-5) -> WignerSmithResult:
    """Q = -i S^dagger dS/dk by central differences."""
    mid = open_scattering_matrix(g, k)
    plus = open_scattering_matrix(g, k + h)
    minus = open_scattering_matrix(g, k - h)
    dS = (plus.S - minus.S) / (2 * h)
    Q = -1j * mid.S.conj().T @ dS
    flagged = mid.singular or plus.singular or minus.singular
    if flagged:
        warnings.warn("Wigner-Smith stencil touches a flagged singular point", RuntimeWarning)
    return WignerSmithResult(Q, flagged)


def vertex_couplings(g: MetricGraph) -> list[tuple[int, int, float]]:
    """(vertex, degree, alpha) for every delta-type vertex with nonzero alpha."""
    out = []
    for v in g.vertices:
        a = coupling(v.condition)
        if a:
            out.append((v.id, g.degree(v.id), a))
    return out

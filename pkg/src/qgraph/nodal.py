"""Nodal counts, nodal domains, surplus statistics and the magnetic Hessian.

On a bond a real eigenfunction is psi(x) = 2|c| cos(kx + arg c), so its
zeros in the open bond follow from the phase interval [arg c, arg c + k l].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContinuationError, GraphInputError, NonGenericError
from .graph import Dirichlet, MetricGraph, betti_number, require_valid
from .scattering import QuantumMapEvaluator
from .spectrum import Eigenfunction, Spectrum, eigenfunctions_at, find_n_states, zero_mode_multiplicity

VERTEX_ZERO_REL = 1e-6
DIRICHLET_PHASE_TOL = 1e-6


# ---------------------------------------------------------------------------
# counting
# ---------------------------------------------------------------------------

def _is_dirichlet(g: MetricGraph, v: int) -> bool:
    return isinstance(g.vertices[v].condition, Dirichlet)


def sup_norm_bound(ef: Eigenfunction) -> float:
    return float(np.max(ef.edge_bound()[list(ef.graph.bond_ids)]))


def genericity(ef: Eigenfunction, vertex_tol: float = VERTEX_ZERO_REL) -> tuple[bool, str]:
    """(generic, reason) for a real eigenfunction."""
    if ef.multiplicity != 1:
        return False, f"eigenvalue multiplicity {ef.multiplicity}"
    if not ef.real_gauge:
        return False, "no real gauge"
    scale = sup_norm_bound(ef)
    g = ef.graph
    for v in range(len(g.vertices)):
        if _is_dirichlet(g, v):
            continue
        for val in ef.endpoint_values(v):
            if abs(val) <= vertex_tol * scale:
                return False, f"vanishes at vertex {v}"
    return True, ""


def _require_generic(ef: Eigenfunction, vertex_tol: float):
    ok, why = genericity(ef, vertex_tol)
    if not ok:
        raise NonGenericError(why)


def edge_zero_count(ef: Eigenfunction, edge: int) -> int:
    """Zeros of psi_e in the open bond."""
    g = ef.graph
    e = g.edges[edge]
    c = ef.c[edge]
    if abs(c) == 0.0:
        raise NonGenericError(f"eigenfunction vanishes on edge {edge}")
    theta = math.atan2(c.imag, c.real)
    u0 = (theta - math.pi / 2) / math.pi
    u1 = (theta + ef.k * e.length - math.pi / 2) / math.pi
    # a Dirichlet endpoint sits (up to rounding) exactly on a zero; exclude it
    r0, r1 = round(u0), round(u1)
    d0 = _is_dirichlet(g, e.origin) and abs(u0 - r0) < DIRICHLET_PHASE_TOL
    d1 = _is_dirichlet(g, e.terminus) and abs(u1 - r1) < DIRICHLET_PHASE_TOL
    lo = r0 if d0 else math.floor(u0)
    if d1:
        return max(0, r1 - lo - 1)
    return max(0, math.floor(u1) - lo)


def nodal_count(ef: Eigenfunction, vertex_tol: float = VERTEX_ZERO_REL) -> int:
    """Number of interior zeros (Dirichlet vertices are not counted)."""
    _require_generic(ef, vertex_tol)
    return sum(edge_zero_count(ef, e) for e in ef.graph.bond_ids)


def nodal_domain_count(ef: Eigenfunction, vertex_tol: float = VERTEX_ZERO_REL) -> int:
    """Connected components of the graph minus the zero set (and Dirichlet vertices)."""
    _require_generic(ef, vertex_tol)
    g = ef.graph
    parent: list[int] = []

    def new() -> int:
        parent.append(len(parent))
        return len(parent) - 1

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    vnode = {v: new() for v in range(len(g.vertices)) if not _is_dirichlet(g, v)}
    for eid in g.bond_ids:
        e = g.edges[eid]
        segs = [new() for _ in range(edge_zero_count(ef, eid) + 1)]
        if e.origin in vnode:
            union(vnode[e.origin], segs[0])
        if e.terminus in vnode:
            union(vnode[e.terminus], segs[-1])
    return len({find(a) for a in range(len(parent))})


@dataclass
class NodalData:
    n: int
    k: float
    generic: bool
    phi: int | None = None
    nu: int | None = None
    reason: str = ""
    morse_index: int | None = None

    @property
    def surplus(self) -> int | None:
        return None if self.phi is None else self.phi - (self.n - 1)

    @property
    def deficiency(self) -> int | None:
        return None if self.nu is None else self.n - self.nu


def indexed_states(g: MetricGraph, n_states: int, spectrum: Spectrum | None = None):
    """[(n, k, multiplicity)] for the first ``n_states`` states, k = 0 modes included."""
    z = zero_mode_multiplicity(g)
    if spectrum is None:
        spectrum = find_n_states(g, max(1, n_states - z))
    out = []
    n = 1
    if z:
        out.append((n, 0.0, z))
        n += z
    for k, m in zip(spectrum.k.tolist(), spectrum.multiplicity.tolist()):
        if n > n_states:
            break
        out.append((n, k, int(m)))
        n += int(m)
    return out


def nodal_data(g: MetricGraph, n_states: int, spectrum: Spectrum | None = None,
               vertex_tol: float = VERTEX_ZERO_REL) -> list[NodalData]:
    """Nodal data for states 1..n_states; degenerate states fill one entry per index."""
    require_valid(g)
    if not g.is_closed:
        raise GraphInputError("nodal counts need a closed graph")
    if g.has_negative_coupling:
        raise GraphInputError("negative couplings: negative eigenvalues are not indexed")
    out = []
    for n, k, m in indexed_states(g, n_states, spectrum):
        if m > 1:
            out.extend(NodalData(n + j, k, False, reason=f"eigenvalue multiplicity {m}")
                       for j in range(m) if n + j <= n_states)
            continue
        if k == 0.0:
            out.append(NodalData(n, 0.0, True, 0, 1))
            continue
        ef = eigenfunctions_at(g, k, multiplicity=1)[0]
        ok, why = genericity(ef, vertex_tol)
        if not ok:
            out.append(NodalData(n, k, False, reason=why))
            continue
        out.append(NodalData(n, k, True, nodal_count(ef, vertex_tol), nodal_domain_count(ef, vertex_tol)))
    return out


@dataclass
class SurplusDistribution:
    beta: int
    probabilities: np.ndarray
    mean: float
    variance: float
    stderr: float
    n_generic: int
    n_skipped: int

    @property
    def probability_stderr(self) -> np.ndarray:
        """Binomial error bars sqrt(p (1 - p) / n) on the surplus probabilities."""
        p = self.probabilities
        return np.sqrt(p * (1 - p) / max(1, self.n_generic))

    @property
    def skipped_fraction(self) -> float:
        tot = self.n_generic + self.n_skipped
        return self.n_skipped / tot if tot else 0.0

    @property
    def mean_offset(self) -> float:
        """Deviation of the empirical mean from beta/2."""
        return self.mean - self.beta / 2


def surplus_distribution(g: MetricGraph, n_generic: int, data: list[NodalData] | None = None,
                         max_states: int | None = None) -> SurplusDistribution:
    """Empirical law of the nodal surplus over the first ``n_generic`` generic states."""
    beta = betti_number(g)
    if data is None:
        want = n_generic
        limit = max_states or 20 * n_generic + 50
        while True:
            data = nodal_data(g, want)
            if sum(d.generic for d in data) >= n_generic or want >= limit:
                break
            want = min(limit, int(want * 1.5) + 10)
    gen = [d for d in data if d.generic][:n_generic]
    if gen:
        last = gen[-1].n
        skipped = sum(1 for d in data if not d.generic and d.n <= last)
    else:
        skipped = len(data)
    s = np.array([d.surplus for d in gen], dtype=float)
    p = np.bincount(s.astype(int), minlength=beta + 1)[:max(beta + 1, 1)] / max(1, len(s))
    mean = float(s.mean()) if len(s) else float("nan")
    var = float(s.var(ddof=1)) if len(s) > 1 else float("nan")
    return SurplusDistribution(beta, p, mean, var, math.sqrt(var / len(s)) if len(s) > 1 else float("nan"),
                               len(gen), skipped)


# ---------------------------------------------------------------------------
# magnetic perturbation
# ---------------------------------------------------------------------------

def cycle_edges(g: MetricGraph) -> list[int]:
    """Bonds outside a BFS spanning tree; one magnetic phase per independent cycle."""
    seen = {0}
    tree = set()
    frontier = [0]
    adj: dict[int, list[tuple[int, int]]] = {v: [] for v in range(len(g.vertices))}
    for eid in g.bond_ids:
        e = g.edges[eid]
        adj[e.origin].append((eid, e.terminus))
        adj[e.terminus].append((eid, e.origin))
    while frontier:
        nxt = []
        for v in frontier:
            for eid, w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    tree.add(eid)
                    nxt.append(w)
        frontier = nxt
    return [e for e in g.bond_ids if e not in tree]


class MagneticEigenvalue:
    """k_n(alpha) near a simple eigenvalue k_n(0), by Newton on the eigenphase."""

    def __init__(self, g: MetricGraph, k0: float, max_shift: float, tol: float = 1e-14):
        self.g = g
        self.ev = QuantumMapEvaluator(g)
        self.k0 = float(k0)
        self.max_shift = float(max_shift)
        self.tol = tol

    def __call__(self, alpha) -> float:
        k = self.k0
        for _ in range(50):
            U = self.ev(k, alpha)
            lam, vec = np.linalg.eig(U)
            j = int(np.argmin(np.abs(lam - 1.0)))
            v = vec[:, j] / np.linalg.norm(vec[:, j])
            theta = float(np.angle(lam[j]))
            dlam = v.conj() @ self.ev.dU_dk(k, alpha) @ v
            dtheta = float((dlam / lam[j]).imag)
            if dtheta <= 0:
                raise ContinuationError(f"eigenphase not increasing at k = {k!r}")
            step = theta / dtheta
            k -= step
            if abs(k - self.k0) > self.max_shift:
                raise ContinuationError(f"branch from k = {self.k0!r} moved to {k!r}")
            if abs(step) <= self.tol * (1.0 + abs(k)):
                return k
        raise ContinuationError(f"Newton did not converge near k = {self.k0!r}")


def _hessian(f, dim: int, h: float):
    f0 = f(np.zeros(dim))
    H = np.zeros((dim, dim))
    grad = np.zeros(dim)
    E = np.eye(dim) * h
    fp = [f(E[i]) for i in range(dim)]
    fm = [f(-E[i]) for i in range(dim)]
    for i in range(dim):
        grad[i] = (fp[i] - fm[i]) / (2 * h)
        H[i, i] = (fp[i] - 2 * f0 + fm[i]) / h ** 2
        for j in range(i + 1, dim):
            v = (f(E[i] + E[j]) - f(E[i] - E[j]) - f(-E[i] + E[j]) + f(-E[i] - E[j])) / (4 * h * h)
            H[i, j] = H[j, i] = v
    return f0, grad, H


@dataclass
class MagneticBranch:
    n: int
    k: float
    hessian: np.ndarray
    eigenvalues: np.ndarray
    morse_index: int
    kernel_dim: int
    gradient: np.ndarray
    parameters: list[int]
    full: bool
    expected_kernel: int
    threshold: float = 0.0

    @property
    def kernel_ok(self) -> bool:
        return self.kernel_dim == self.expected_kernel


def magnetic_hessian_morse_index(g: MetricGraph, n: int | None = None, fd_step: float = 1e-4, *,
                                 k: float | None = None, full: bool = False,
                                 spectrum: Spectrum | None = None, rel_threshold: float = 1e-3,
                                 abs_threshold: float = 1e-6,
                                 vertex_tol: float = VERTEX_ZERO_REL) -> MagneticBranch:
    """Hessian of k_n(alpha) at alpha = 0 and its Morse index.

    By default one phase per independent cycle is varied (the others are
    gauge); ``full=True`` varies every bond and reports the kernel, which
    should have dimension |E| - beta.  Pass either the spectral index n or
    the eigenvalue k (then n is looked up in ``spectrum`` when given).
    """
    require_valid(g)
    beta = betti_number(g)
    if k is None:
        if n is None:
            raise GraphInputError("pass n or k")
        states = indexed_states(g, n, spectrum)
        rec = [s for s in states if s[0] <= n < s[0] + s[2]]
        if not rec:
            raise GraphInputError(f"state {n} not found")
        n0, k, m = rec[0]
        if m != 1:
            raise NonGenericError(f"eigenvalue multiplicity {m}")
        if k == 0.0:
            raise NonGenericError("k = 0 state has no magnetic k-branch")
        if spectrum is None:
            spectrum = find_n_states(g, n + 2)
    ef = eigenfunctions_at(g, k, multiplicity=1)
    if len(ef) != 1:
        raise NonGenericError("degenerate eigenvalue")
    _require_generic(ef[0], vertex_tol)
    # half the distance to the nearest other level bounds the branch excursion
    if spectrum is not None and len(spectrum.k) > 1:
        d = np.abs(spectrum.k - k)
        d = d[d > 1e-9 * (1 + k)]
        gap = float(d.min()) if d.size else math.pi / g.total_length
        gap = min(gap, k)
    else:
        gap = min(k, math.pi / g.total_length)
    kfun = MagneticEigenvalue(g, k, 0.5 * gap)
    bonds = list(g.bond_ids)
    params = bonds if full else cycle_edges(g)
    dim = len(params)
    pos = {e: i for i, e in enumerate(bonds)}

    def f(x):
        a = np.zeros(len(bonds))
        for p, val in zip(params, x):
            a[pos[p]] = val
        return kfun(a)

    if dim == 0:
        return MagneticBranch(n if n is not None else -1, float(k), np.zeros((0, 0)), np.zeros(0), 0, 0,
                              np.zeros(0), [], full, 0)
    k0, grad, H = _hessian(f, dim, fd_step)
    w = np.linalg.eigvalsh(0.5 * (H + H.T))
    thr = max(rel_threshold * float(np.max(np.abs(w))), abs_threshold)
    morse = int(np.sum(w < -thr))
    kern = int(np.sum(np.abs(w) <= thr))
    expected = len(bonds) - beta if full else 0
    return MagneticBranch(n if n is not None else -1, float(k0), H, w, morse, kern, grad, params,
                          full, expected, thr)


def nodal_report_csv(rows: list[NodalData]) -> str:
    lines = ["n,k_n,phi,nu,surplus,deficiency,morse_index,generic_flag"]

    def fmt(x):
        return "" if x is None else str(x)
    for d in rows:
        lines.append(f"{d.n:d},{d.k:.17g},{fmt(d.phi)},{fmt(d.nu)},{fmt(d.surplus)},"
                     f"{fmt(d.deficiency)},{fmt(d.morse_index)},{int(d.generic)}")
    return "\n".join(lines) + "\n"

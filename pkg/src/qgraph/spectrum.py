"""Secular function, spectrum search and eigenfunction reconstruction.

Root isolation counts eigenphase crossings of U(k) through 1 between grid
points (the phase of det U is known in closed form, so the number of
crossings follows from the principal eigenphases alone).  Cells with a
nonzero count are refined by golden-section search on the smallest
singular value of I - U(k), followed by a Newton step on the crossing
eigenphase for simple roots.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphInputError, ResidualError
from .graph import CustomUnitary, Delta, MetricGraph, NeumannKirchhoff, require_valid
from .scattering import QuantumMapEvaluator

TWO_PI = 2.0 * math.pi
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DEGENERACY_REL = 1e-7
ACCEPT_SMIN = 1e-6


def default_threads() -> int:
    env = os.environ.get("QGRAPH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def secular_function(g: MetricGraph, k: float, alpha=None) -> complex:
    """xi(k) = det(I - U(k))."""
    U = QuantumMapEvaluator(g)(k, alpha)
    return complex(np.linalg.det(np.eye(len(U)) - U))


# ---------------------------------------------------------------------------
# Spectrum container
# ---------------------------------------------------------------------------

@dataclass
class SpectrumAudit:
    counted: int
    found: int
    heuristic: bool
    suspect_intervals: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.counted == self.found


@dataclass
class Spectrum:
    k: np.ndarray
    multiplicity: np.ndarray
    residual: np.ndarray
    k_min: float
    k_max: float
    grid_step: float
    tol: float
    total_length: float
    method: str = "scattering"
    audit: SpectrumAudit | None = None
    masked: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.k)

    @property
    def n_states(self) -> int:
        return int(np.sum(self.multiplicity))

    def expanded(self) -> np.ndarray:
        return np.repeat(self.k, self.multiplicity)

    def eigenvalues(self) -> np.ndarray:
        return self.expanded() ** 2

    def records(self):
        return list(zip(self.k.tolist(), self.multiplicity.tolist(), self.residual.tolist()))

    def restricted(self, k_max: float) -> "Spectrum":
        m = self.k <= k_max
        return Spectrum(self.k[m], self.multiplicity[m], self.residual[m], self.k_min, k_max,
                        self.grid_step, self.tol, self.total_length, self.method, self.audit,
                        list(self.masked), list(self.warnings))

    def to_csv(self) -> str:
        lines = ["k,multiplicity,residual"]
        for k, m, r in self.records():
            lines.append(f"{k:.17g},{m:d},{r:.17g}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# eigenphase bookkeeping
# ---------------------------------------------------------------------------

class _PhaseModel:
    """Continuous phase of det U(k) up to a constant: 2 L k + sum arg det sigma_v(k)."""

    def __init__(self, g: MetricGraph):
        self.L = g.total_length
        self.delta = [(g.degree(v.id), v.condition.alpha) for v in g.vertices
                      if isinstance(v.condition, Delta) and v.condition.alpha != 0.0]
        # eigenphases move monotonically when sigma is constant or alpha > 0
        self.monotone = all(a > 0 for _, a in self.delta)
        self.heuristic = not self.monotone

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        out = 2.0 * self.L * k
        for d, a in self.delta:
            out = out - 2.0 * np.arctan(a / (k * d))
        return out


def _principal_phase_sums(U: np.ndarray):
    """Sum of principal eigenphases in [0, 2pi) and distance of the spectrum from 1."""
    lam = np.linalg.eigvals(U)
    ph = np.mod(np.angle(lam), TWO_PI)
    return ph.sum(axis=-1), np.min(np.abs(lam - 1.0), axis=-1)


class _Solver:
    def __init__(self, g: MetricGraph, tol: float, refine_iters: int):
        self.g = g
        self.ev = QuantumMapEvaluator(g)
        self.N = self.ev.size
        self.I = np.eye(self.N)
        self.phase = _PhaseModel(g)
        self.tol = tol
        self.refine_iters = refine_iters
        self.deg_thr = DEGENERACY_REL * 2.0  # 1e-7 * (1 + ||U||), ||U|| = 1

    # single-point evaluations ------------------------------------------------
    def svals(self, k: float) -> np.ndarray:
        return np.linalg.svd(self.I - self.ev(k), compute_uv=False)

    def smin(self, k: float) -> float:
        return float(self.svals(k)[-1])

    def phase_sum(self, k: float) -> float:
        s, _ = _principal_phase_sums(self.ev(k))
        return float(s)

    def count(self, a: float, b: float, sa: float | None = None, sb: float | None = None) -> int:
        if sa is None:
            sa = self.phase_sum(a)
        if sb is None:
            sb = self.phase_sum(b)
        w = (self.phase(b) - self.phase(a) - (sb - sa)) / TWO_PI
        return int(round(float(w)))

    # refinement ----------------------------------------------------------------
    def golden(self, a: float, b: float) -> tuple[float, float]:
        f = self.smin
        c = b - GOLDEN * (b - a)
        d = a + GOLDEN * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(self.refine_iters):
            if abs(b - a) <= self.tol * (1.0 + abs(c)):
                break
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - GOLDEN * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + GOLDEN * (b - a)
                fd = f(d)
        return (c, fc) if fc < fd else (d, fd)

    def newton_polish(self, k: float, s: float, steps: int = 3) -> tuple[float, float]:
        best_k, best_s = k, s
        for _ in range(steps):
            U = self.ev(k)
            lam, vec = np.linalg.eig(U)
            j = int(np.argmin(np.abs(lam - 1.0)))
            v = vec[:, j] / np.linalg.norm(vec[:, j])
            th = float(np.angle(lam[j]))
            dU = self.ev.dU_dk(k)
            dth = float(np.real(-1j * np.conj(lam[j]) * (v.conj() @ dU @ v)))
            if dth == 0.0 or not np.isfinite(dth):
                break
            k = k - th / dth
            s_new = self.smin(k)
            if s_new < best_s:
                best_k, best_s = k, s_new
            else:
                break
        return best_k, best_s

    def multiplicity(self, k: float) -> int:
        return int(np.sum(self.svals(k) < self.deg_thr))

    def resolve(self, a: float, b: float, c: int, out: list, suspects: list, depth: int = 0):
        if c <= 0:
            return
        if depth > 60 or b - a <= 4e-15 * (1.0 + b):
            k = 0.5 * (a + b)
            out.append((k, c, self.smin(k)))
            suspects.append((a, b))
            return
        k, s = self.golden(a, b)
        if s <= ACCEPT_SMIN:
            if self.multiplicity(k) <= 1:
                k, s = self.newton_polish(k, s)
            eps = max(1e-9 * (1.0 + k), 64 * self.tol * (1.0 + k))
            left = self.count(a, k - eps) if k - eps > a else 0
            right = self.count(k + eps, b) if k + eps < b else 0
            rest = c - left - right
            if rest >= 1:
                out.append((k, rest, s))
                if left > 0:
                    self.resolve(a, k - eps, left, out, suspects, depth + 1)
                if right > 0:
                    self.resolve(k + eps, b, right, out, suspects, depth + 1)
                return
        # no root at the minimum (it may be a neighbour just outside): bisect
        mid = 0.5 * (a + b)
        cl = self.count(a, mid)
        self.resolve(a, mid, cl, out, suspects, depth + 1)
        self.resolve(mid, b, c - cl, out, suspects, depth + 1)


def _scan(solver: _Solver, ks: np.ndarray, threads: int, chunk: int = 512):
    """Principal phase sums and distance-from-1 on a grid, chunked for threads."""
    pieces = [ks[i:i + chunk] for i in range(0, len(ks), chunk)]

    def work(kk):
        return _principal_phase_sums(solver.ev.batch(kk))

    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            res = list(pool.map(work, pieces))
    else:
        res = [work(p) for p in pieces]
    return np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res])


def _smin_scan(solver: _Solver, ks: np.ndarray) -> np.ndarray:
    U = solver.ev.batch(ks)
    return np.linalg.svd(solver.I[None] - U, compute_uv=False)[:, -1]


def find_spectrum(g: MetricGraph, k_max: float, grid_step: float | None = None,
                  tol: float = 1e-12, refine_iters: int = 200, k_min: float | None = None,
                  threads: int | None = None) -> Spectrum:
    """All eigenvalues k in (k_min, k_max] of a closed graph with multiplicities.

    ``k_min`` defaults to the grid step (k = 0 is never reported).
    """
    require_valid(g, allow_disconnected=True)
    if not g.is_closed:
        raise GraphInputError("find_spectrum needs a closed graph")
    if k_max <= 0:
        raise GraphInputError("k_max must be positive")
    L = g.total_length
    if grid_step is None:
        grid_step = math.pi / (8.0 * L)
    if k_min is None:
        k_min = grid_step
    threads = default_threads() if threads is None else max(1, int(threads))
    solver = _Solver(g, tol, refine_iters)
    notes = []
    if g.has_negative_coupling:
        msg = "negative delta coupling: negative spectrum not computed, root audit heuristic"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning)

    n = max(1, int(math.ceil((k_max - k_min) / grid_step)))
    ks = k_min + grid_step * np.arange(n + 1)
    ks[-1] = k_max
    sums, dist = _scan(solver, ks, threads)
    # move grid points that sit on an eigenvalue
    for _ in range(8):
        bad = np.nonzero(dist < 1e-8)[0]
        if len(bad) == 0:
            break
        ks[bad] += grid_step * 1e-3 * (1.0 + 0.37 * np.arange(1, len(bad) + 1) / len(bad))
        s2, d2 = _scan(solver, ks[bad], 1)
        sums[bad], dist[bad] = s2, d2
    order = np.argsort(ks)
    ks, sums = ks[order], sums[order]
    ph = solver.phase(ks)
    counts = np.rint((np.diff(ph) - np.diff(sums)) / TWO_PI).astype(int)

    cells = [(i, int(c)) for i, c in enumerate(counts) if c != 0]
    negative = [i for i, c in cells if c < 0]
    if negative:
        notes.append(f"negative crossing counts in {len(negative)} cells")
    cells = [(i, c) for i, c in cells if c > 0]
    if solver.phase.heuristic:
        sm = _smin_scan(solver, ks)
        loc = np.nonzero((sm[1:-1] <= sm[:-2]) & (sm[1:-1] <= sm[2:]))[0] + 1
        have = {i for i, _ in cells}
        for j in loc:
            for i in (j - 1, j):
                if i not in have and 0 <= i < len(counts):
                    cells.append((i, 0))
                    have.add(i)

    def do_cell(item):
        i, c = item
        roots, sus = [], []
        a, b = float(ks[i]), float(ks[i + 1])
        if c > 0:
            solver.resolve(a, b, c, roots, sus)
        else:
            k, s = solver.golden(a, b)
            if s <= ACCEPT_SMIN:
                m = max(1, solver.multiplicity(k))
                if m == 1:
                    k, s = solver.newton_polish(k, s)
                roots.append((k, m, s))
        return roots, sus

    if threads > 1 and len(cells) > 8:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(do_cell, sorted(cells)))
    else:
        results = [do_cell(c) for c in sorted(cells)]

    roots, suspects = [], []
    for r, s in results:
        roots.extend(r)
        suspects.extend(s)
    roots = [r for r in roots if k_min < r[0] <= k_max * (1 + 1e-14)]
    roots = _merge_close(sorted(roots), tol)
    ksol = np.array([r[0] for r in roots], dtype=float)
    mult = np.array([r[1] for r in roots], dtype=int)
    res = np.array([r[2] for r in roots], dtype=float)
    counted = int(max(0, counts.sum()))
    audit = SpectrumAudit(counted, int(mult.sum()), solver.phase.heuristic, suspects)
    if not audit.consistent:
        notes.append(f"root audit: counted {audit.counted}, found {audit.found}")
        warnings.warn(notes[-1], RuntimeWarning)
    return Spectrum(ksol, mult, res, float(k_min), float(k_max), float(grid_step), tol, L,
                    "scattering", audit, [], notes)


def _merge_close(roots, tol):
    out = []
    for k, m, s in roots:
        if out and abs(k - out[-1][0]) <= 1e3 * tol * (1.0 + k):
            pk, pm, ps = out[-1]
            out[-1] = (pk if ps <= s else k, pm + m, min(ps, s))
        else:
            out.append((k, m, s))
    return out


def find_n_states(g: MetricGraph, n_states: int, **kw) -> Spectrum:
    """Spectrum containing at least ``n_states`` positive states (multiplicity expanded)."""
    L = g.total_length
    k_max = math.pi * (n_states + len(g.edges) + 3) / L
    for _ in range(20):
        sp = find_spectrum(g, k_max, **kw)
        if sp.n_states >= n_states:
            return sp
        k_max *= 1.25
    return sp


def zero_mode_multiplicity(g: MetricGraph) -> int:
    """Number of k = 0 states of the Laplacian (constants on all-NK components)."""
    total = 0
    for comp in g.component_graphs():
        if all(isinstance(c, NeumannKirchhoff) or (isinstance(c, Delta) and c.alpha == 0.0)
               for c in comp.conditions):
            total += 1
    return total


# ---------------------------------------------------------------------------
# eigenfunctions
# ---------------------------------------------------------------------------

def _edge_J(k: float, ell: np.ndarray) -> np.ndarray:
    """Integral of exp(2ikx) over [0, ell]."""
    z = 2j * k * ell
    small = np.abs(z) < 1e-8
    out = np.empty_like(ell, dtype=complex)
    out[~small] = (np.exp(z[~small]) - 1.0) / (2j * k)
    out[small] = ell[small] * (1 + z[small] / 2)
    return out


@dataclass
class Eigenfunction:
    """psi_e(x) = b_e exp(-ikx) + c_e exp(ikx) on each bond (zero on leads)."""

    graph: MetricGraph
    k: float
    b: np.ndarray
    c: np.ndarray
    real_gauge: bool = False
    multiplicity: int = 1
    residual: float = 0.0

    def value(self, edge: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.b[edge] * np.exp(-1j * self.k * x) + self.c[edge] * np.exp(1j * self.k * x)

    def derivative(self, edge: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 1j * self.k * (self.c[edge] * np.exp(1j * self.k * x) - self.b[edge] * np.exp(-1j * self.k * x))

    def norm(self) -> float:
        return math.sqrt(max(0.0, inner(self, self).real))

    def edge_bound(self) -> np.ndarray:
        """|b| + |c| per edge, an upper bound for sup |psi_e|."""
        return np.abs(self.b) + np.abs(self.c)

    def endpoint_values(self, v: int) -> list[complex]:
        vals = []
        for ep in self.graph.endpoints[v]:
            e = self.graph.edges[ep.edge]
            if e.is_lead:
                vals.append(0j)
            else:
                vals.append(complex(self.value(e.id, 0.0 if ep.side == 0 else e.length)))
        return vals

    def vertex_value(self, v: int) -> complex:
        vals = self.endpoint_values(v)
        return complex(np.mean(vals)) if vals else 0j

    def outgoing_derivative_sum(self, v: int) -> complex:
        tot = 0j
        for ep in self.graph.endpoints[v]:
            e = self.graph.edges[ep.edge]
            if e.is_lead:
                continue
            if ep.side == 0:
                tot += complex(self.derivative(e.id, 0.0))
            else:
                tot -= complex(self.derivative(e.id, e.length))
        return tot

    def sample(self, per_unit_length: float = 100.0, min_points: int = 2):
        """Rows (edge_id, x, psi) on a uniform grid over each bond."""
        rows = []
        for e in self.graph.edges:
            if e.is_lead:
                continue
            n = max(min_points, int(math.ceil(e.length * per_unit_length)) + 1)
            xs = np.linspace(0.0, e.length, n)
            for x, p in zip(xs, self.value(e.id, xs)):
                rows.append((e.id, float(x), complex(p)))
        return rows

    def to_csv(self, per_unit_length: float = 100.0) -> str:
        lines = ["edge_id,x,psi_re,psi_im"]
        for e, x, p in self.sample(per_unit_length):
            lines.append(f"{e:d},{x:.17g},{p.real:.17g},{p.imag:.17g}")
        return "\n".join(lines) + "\n"

    def conjugate(self) -> "Eigenfunction":
        return Eigenfunction(self.graph, self.k, np.conj(self.c), np.conj(self.b),
                             self.real_gauge, self.multiplicity, self.residual)


def _lengths_by_edge(g: MetricGraph) -> np.ndarray:
    return np.array([0.0 if e.is_lead else e.length for e in g.edges])


def _gram(k, ell, B, C, B2=None, C2=None):
    """Matrix of L2 inner products between amplitude sets (rows = functions)."""
    if B2 is None:
        B2, C2 = B, C
    J = _edge_J(k, ell)
    G = (B.conj() * ell) @ B2.T + (C.conj() * ell) @ C2.T
    G += (B.conj() * J) @ C2.T + (C.conj() * np.conj(J)) @ B2.T
    return G


def inner(f: Eigenfunction, h: Eigenfunction) -> complex:
    ell = _lengths_by_edge(f.graph)
    return complex(_gram(f.k, ell, f.b[None], f.c[None], h.b[None], h.c[None])[0, 0])


def _orthonormalize(k, ell, B, C, rank_tol=1e-10):
    G = _gram(k, ell, B, C)
    G = 0.5 * (G + G.conj().T)
    w, V = np.linalg.eigh(G)
    keep = w > rank_tol * max(w.max(), 1e-300)
    T = V[:, keep] / np.sqrt(w[keep])
    return T.T @ B, T.T @ C


def _time_reversal_symmetric(g: MetricGraph) -> bool:
    for c in g.conditions:
        if isinstance(c, CustomUnitary) and not np.allclose(c.matrix, c.matrix.T, atol=1e-12):
            return False
    return True


def _amplitudes(g: MetricGraph, ev: QuantumMapEvaluator, k: float, null: np.ndarray):
    """Edge coefficient arrays (b, c) for a set of null vectors (columns)."""
    idx = g.index
    S = ev.S(k)
    aout = S @ null
    m = null.shape[1]
    B = np.zeros((m, len(g.edges)), dtype=complex)
    C = np.zeros((m, len(g.edges)), dtype=complex)
    for e in g.bond_ids:
        B[:, e] = null[idx.minus(e), :]
        C[:, e] = aout[idx.plus(e), :]
    return B, C


def _fix_sign(b: np.ndarray, c: np.ndarray):
    j = int(np.argmax(np.abs(c) + np.abs(b)))
    ref = c[j] + b[j]
    if abs(ref) < 1e-12:
        ref = c[j]
    if ref.real < 0:
        return -b, -c
    return b, c


def _real_gauge(k, ell, B, C):
    m = B.shape[0]
    if m == 1:
        J = _edge_J(k, ell)
        q = np.sum(2 * B[0] * C[0] * ell + B[0] ** 2 * np.conj(J) + C[0] ** 2 * J)
        if abs(q) < 1e-8:
            return B, C, False
        rot = np.exp(-0.5j * np.angle(q))
        return B * rot, C * rot, True
    # real and imaginary parts of every basis function, then re-orthonormalize
    Bc, Cc = np.conj(C), np.conj(B)
    Br = np.vstack([(B + Bc) / 2, (B - Bc) / 2j])
    Cr = np.vstack([(C + Cc) / 2, (C - Cc) / 2j])
    G = _gram(k, ell, Br, Cr).real
    G = 0.5 * (G + G.T)
    w, V = np.linalg.eigh(G)
    order = np.argsort(w)[::-1][:m]
    if w[order[-1]] < 1e-8 * w[order[0]]:
        return B, C, False
    T = V[:, order] / np.sqrt(w[order])
    return T.T @ Br, T.T @ Cr, True


def eigenfunctions_at(g: MetricGraph, k: float, residual_tol: float = 1e-6,
                      multiplicity: int | None = None) -> list[Eigenfunction]:
    """Orthonormal (real where possible) eigenfunctions spanning the eigenspace at k.

    Works for closed graphs and for bound states of open graphs, whose
    amplitudes must also not leak into the leads.
    """
    require_valid(g, allow_disconnected=True)
    ev = QuantumMapEvaluator(g)
    idx = g.index
    U = ev(k)
    N = idx.size
    if g.is_closed:
        A = np.eye(N) - U
    else:
        nb = 2 * idx.n_bonds
        # bond amplitudes must be invariant and must not feed the leads
        A = np.vstack([np.eye(nb) - U[:nb, :nb], U[nb:, :nb]])
    _, s, Vh = np.linalg.svd(A)
    smin = float(s[-1])
    if smin > residual_tol:
        raise ResidualError(f"k = {k!r} is not an eigenvalue: smallest singular value {smin:.3e}")
    if multiplicity is None:
        multiplicity = max(1, int(np.sum(s < DEGENERACY_REL * 2.0)))
    null = Vh[-multiplicity:].conj().T
    if not g.is_closed:
        full = np.zeros((N, multiplicity), dtype=complex)
        full[:2 * idx.n_bonds] = null
        null = full
    B, C = _amplitudes(g, ev, k, null)
    ell = _lengths_by_edge(g)
    B, C = _orthonormalize(k, ell, B, C)
    real = False
    if _time_reversal_symmetric(g):
        B, C, real = _real_gauge(k, ell, B, C)
    out = []
    for i in range(B.shape[0]):
        b, c = B[i], C[i]
        if real:
            # enforce c = conj(b) exactly for real functions
            c = 0.5 * (c + np.conj(b))
            b = np.conj(c)
            b, c = _fix_sign(b, c)
        out.append(Eigenfunction(g, float(k), b, c, real, B.shape[0], smin))
    return out


@dataclass
class Scar:
    eigenfunction: Eigenfunction
    support: tuple[int, ...]


def detect_perfect_scars(efs, tol: float = 1e-9) -> list[Scar]:
    """Eigenfunctions vanishing (sup-norm below tol relative) on a nonempty proper edge subset."""
    out = []
    for ef in efs:
        bonds = list(ef.graph.bond_ids)
        bound = ef.edge_bound()[bonds]
        scale = bound.max() if bound.size else 0.0
        if scale == 0:
            continue
        support = tuple(e for e, v in zip(bonds, bound) if v > tol * scale)
        if 0 < len(support) < len(bonds):
            out.append(Scar(ef, support))
    return out

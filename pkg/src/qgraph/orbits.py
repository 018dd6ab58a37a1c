"""Classical map, periodic orbits, trace identities and the trace formula."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BudgetExceededError, GraphInputError, KDependentError
from .graph import MetricGraph, betti_number, require_valid
from .scattering import QuantumMapEvaluator, open_blocks
from .spectrum import Spectrum, zero_mode_multiplicity

MAX_ORBITS = 10 ** 7
_NONZERO = 1e-14


# ---------------------------------------------------------------------------
# classical map
# ---------------------------------------------------------------------------

@dataclass
class ClassicalMap:
    M: np.ndarray
    eigenvalues: np.ndarray  # sorted by |1 - lambda|
    gap: float
    has_minus_one: bool

    def bistochastic_error(self) -> float:
        return float(max(np.max(np.abs(self.M.sum(axis=0) - 1)), np.max(np.abs(self.M.sum(axis=1) - 1))))


def classical_map(g: MetricGraph) -> ClassicalMap:
    """Markov matrix M[a, b] = |S[a, b]|^2 with spectrum and gap."""
    require_valid(g, allow_disconnected=True)
    ev = QuantumMapEvaluator(g)
    if ev.k_dependent:
        raise KDependentError("delta couplings make the classical map k-dependent")
    M = np.abs(ev.S()) ** 2
    lam = np.linalg.eigvals(M)
    lam = lam[np.argsort(np.abs(1 - lam), kind="stable")]
    # one unit eigenvalue per closed connected component is the invariant one
    d = np.abs(1 - lam)
    n_unit = max(1, int(np.sum(d < 1e-10)))
    gap = float(d[n_unit]) if len(d) > n_unit else float("nan")
    minus_one = bool(np.any(np.abs(lam + 1) < 1e-10))
    return ClassicalMap(M, lam, gap, minus_one)


# ---------------------------------------------------------------------------
# orbit enumeration
# ---------------------------------------------------------------------------

@dataclass
class OrbitTable:
    """Primitive periodic orbits as flat arrays (Lyndon-word representatives)."""
    n: np.ndarray
    L: np.ndarray
    A: np.ndarray
    seq: np.ndarray | None = None
    seq_ptr: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.n)

    def sequence(self, i: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.seq[self.seq_ptr[i]:self.seq_ptr[i + 1]])


def _successor_arrays(S: np.ndarray, lengths: np.ndarray, n_chan: int):
    """CSR list of (a -> b, S[b, a]) restricted to the first ``n_chan`` channels."""
    S = S[:n_chan, :n_chan]
    indptr = [0]
    succ, are, aim = [], [], []
    for a in range(n_chan):
        nz = np.nonzero(np.abs(S[:, a]) > _NONZERO)[0]
        succ.extend(nz.tolist())
        are.extend(S[nz, a].real.tolist())
        aim.extend(S[nz, a].imag.tolist())
        indptr.append(len(succ))
    return (np.array(indptr, dtype=np.int64), np.array(succ, dtype=np.int64),
            np.array(are), np.array(aim), np.ascontiguousarray(lengths[:n_chan], dtype=float))


def orbit_table(g: MetricGraph, n_max: int, L_max: float = math.inf, *, store: bool = False,
                max_orbits: int = MAX_ORBITS, k: float | None = None) -> OrbitTable:
    """Primitive orbits with n_p <= n_max and L_p <= L_max on the bond channels."""
    if n_max < 1:
        raise GraphInputError("n_max must be >= 1")
    ev = QuantumMapEvaluator(g)
    if ev.k_dependent and k is None:
        raise KDependentError("delta couplings: pass k to evaluate orbit amplitudes")
    idx = g.index
    arrs = _successor_arrays(ev.S(k), idx.lengths, 2 * idx.n_bonds)
    status, n, L, A, seq, ptr = kernels.primitive_orbits(*arrs, int(n_max), float(L_max),
                                                         int(max_orbits), bool(store))
    if status:
        raise BudgetExceededError(f"more than {max_orbits} primitive orbits; lower n_max or L_max")
    return OrbitTable(n, L, A, seq, ptr)


def canonical_rotation(seq) -> tuple[int, ...]:
    """Lexicographically minimal rotation."""
    seq = tuple(seq)
    n = len(seq)
    return min(seq[i:] + seq[:i] for i in range(n)) if n else seq


@dataclass
class PeriodicOrbit:
    sequence: tuple[int, ...]
    n: int
    L: float
    A: complex
    r: int = 1
    primitive: bool = True
    partner: int | None = None

    def visits(self, g: MetricGraph) -> np.ndarray:
        """Number of traversals of each bond (either direction), by bond position."""
        B = g.index.n_bonds
        v = np.zeros(B, dtype=int)
        for x in self.sequence:
            v[x % B] += 1
        return v * self.r


def enumerate_primitive_orbits(g: MetricGraph, n_max: int, max_orbits: int = MAX_ORBITS,
                               k: float | None = None) -> list[PeriodicOrbit]:
    tab = orbit_table(g, n_max, store=True, max_orbits=max_orbits, k=k)
    rev = g.index.reversal
    orbits = [PeriodicOrbit(tab.sequence(i), int(tab.n[i]), float(tab.L[i]), complex(tab.A[i]))
              for i in range(len(tab))]
    where = {o.sequence: i for i, o in enumerate(orbits)}
    for o in orbits:
        back = canonical_rotation(tuple(int(rev[x]) for x in reversed(o.sequence)))
        o.partner = where.get(back)
    return orbits


def orbits_of_length(g: MetricGraph, n: int, primitive: list[PeriodicOrbit] | None = None,
                     k: float | None = None) -> list[PeriodicOrbit]:
    """All periodic orbits of topological length n (repetitions included)."""
    if primitive is None:
        primitive = enumerate_primitive_orbits(g, n, k=k)
    out = []
    for p in primitive:
        if n % p.n == 0:
            r = n // p.n
            out.append(PeriodicOrbit(p.sequence, n, r * p.L, p.A ** r, r, r == 1, p.partner))
    return out


def orbits_to_csv(orbits: list[PeriodicOrbit]) -> str:
    lines = ["length_topological,length_metric,amplitude_re,amplitude_im,repetition,primitive_flag"]
    for o in orbits:
        lines.append(f"{o.n:d},{o.L:.17g},{o.A.real:.17g},{o.A.imag:.17g},{o.r:d},{int(o.primitive)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# trace identity
# ---------------------------------------------------------------------------

def trace_identity_check(g: MetricGraph, k: float, n: int, table: OrbitTable | None = None):
    """(tr U(k)^n, sum over orbits of length n of n_p A_p^r exp(ik r L_p))."""
    U = QuantumMapEvaluator(g)(k)
    tr_m = complex(np.trace(np.linalg.matrix_power(U, n)))
    if table is None:
        table = orbit_table(g, n, k=k if g.is_k_dependent else None)
    sel = (table.n <= n) & (n % np.maximum(table.n, 1) == 0)
    r = n // table.n[sel]
    tr_o = complex(np.sum(table.n[sel] * table.A[sel] ** r * np.exp(1j * k * r * table.L[sel])))
    return tr_m, tr_o


# ---------------------------------------------------------------------------
# trace formula
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianTestFunction:
    """Even test function h(k) = g(k - c) + g(k + c) (single Gaussian if c = 0).

    g(k) = exp(-k^2 / 2 sigma^2); transform hat h(x) = int h(k) exp(ikx) dk.
    """
    sigma: float
    center: float = 0.0

    @classmethod
    def for_cutoff(cls, L_cut: float, tail: float = 1e-12, center: float = 0.0) -> "GaussianTestFunction":
        """Width such that |hat h(L)| / hat h(0) <= tail for L >= L_cut."""
        return cls(math.sqrt(2.0 * math.log(1.0 / tail)) / L_cut, center)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        s2 = 2.0 * self.sigma ** 2
        if self.center == 0.0:
            return np.exp(-k ** 2 / s2)
        return np.exp(-(k - self.center) ** 2 / s2) + np.exp(-(k + self.center) ** 2 / s2)

    def hat(self, x):
        x = np.asarray(x, dtype=float)
        base = self.sigma * math.sqrt(2 * math.pi) * np.exp(-0.5 * (self.sigma * x) ** 2)
        if self.center == 0.0:
            return base
        return 2.0 * np.cos(self.center * x) * base

    def hat_envelope(self, x):
        x = np.asarray(x, dtype=float)
        f = 1.0 if self.center == 0.0 else 2.0
        return f * self.sigma * math.sqrt(2 * math.pi) * np.exp(-0.5 * (self.sigma * x) ** 2)

    def support_radius(self, eps: float = 1e-17) -> float:
        """k beyond which h(k) < eps."""
        return abs(self.center) + self.sigma * math.sqrt(2.0 * math.log(2.0 / eps))


@dataclass
class TraceFormulaReport:
    spectral_side: float
    geometric_side: float
    truncation_bound: float
    zero_mode_multiplicity: int
    zero_mode_sensitivity: float
    n_primitive_orbits: int
    notes: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return abs(self.spectral_side - self.geometric_side)

    @property
    def ok(self) -> bool:
        return self.residual <= self.truncation_bound + 1e-7


def _log_trace_powers_bound(P: np.ndarray, n: np.ndarray) -> np.ndarray:
    """log of an upper bound for tr(P^n), P entrywise nonnegative."""
    mu = np.abs(np.linalg.eigvals(P))
    mu = mu[mu > 1e-300]
    if mu.size == 0:
        return np.full(len(n), -np.inf)
    lm = np.log(mu)
    top = lm.max()
    return n * top + np.log(np.sum(np.exp(np.outer(n, lm - top)), axis=1))


def geometric_tail_bound(g: MetricGraph, h: GaussianTestFunction, L_cut: float) -> float:
    """Bound on the orbit terms with metric length above L_cut.

    Closed walks of length n have |amplitude| summing to tr|S|^n and metric
    length at least max(L_cut, n * l_min); each contributes at most
    L |hat h(L)| / (n pi).
    """
    ev = QuantumMapEvaluator(g)
    P = np.abs(ev.S())
    lens = g.bond_lengths
    lmin, lmax = float(lens.min()), float(lens.max())
    n0 = int(math.floor(L_cut / lmax)) + 1
    turn = 1.0 / h.sigma  # L * envelope(L) decreases beyond this
    total = 0.0
    n_hi = n0 + 64
    while True:
        ns = np.arange(n0, n_hi + 1)
        Ls = np.maximum(np.maximum(L_cut, ns * lmin), turn)
        log_terms = (_log_trace_powers_bound(P, ns) - np.log(ns * math.pi) + np.log(Ls)
                     + np.log(h.hat_envelope(0.0)) - 0.5 * (h.sigma * Ls) ** 2)
        terms = np.exp(log_terms)
        total += float(terms.sum())
        if terms[-1] < 1e-40 * max(total, 1e-300) or terms[-1] < 1e-60 or n_hi > 100000:
            break
        n0, n_hi = n_hi + 1, 2 * n_hi
    return total


def trace_formula_check(g: MetricGraph, spectrum: Spectrum, h: GaussianTestFunction,
                        L_cut: float, table: OrbitTable | None = None) -> TraceFormulaReport:
    """Spectral side sum h(+-k_n) against the Weyl term plus the orbit sum.

    The k = 0 root enters with the order of vanishing of det(I - U(k)) at 0,
    which for k-independent S is dim ker(I - S).
    """
    require_valid(g)
    ev = QuantumMapEvaluator(g)
    if ev.k_dependent:
        raise KDependentError("trace formula check needs k-independent vertex scattering")
    notes = []
    S = ev.S()
    N = S.shape[0]
    sv = np.linalg.svd(np.eye(N) - S, compute_uv=False)
    m0 = int(np.sum(sv < 1e-9))
    spectral = float(np.sum(spectrum.multiplicity * (h(spectrum.k) + h(-spectrum.k))) + m0 * h(0.0))
    lap0 = zero_mode_multiplicity(g)
    sensitivity = float(abs(m0 - lap0) * h(0.0))
    if m0 != lap0:
        notes.append(f"k=0 root counted {m0} times (Laplacian zero modes: {lap0}); "
                     f"using {lap0} instead would shift the spectral side by {sensitivity:.3e}")
    # spectral tail beyond the computed range
    K = spectrum.k_max
    beta = betti_number(g) if g.is_connected else 0
    Lg = g.total_length
    # Weyl density plus the +-(2 + beta) counting fluctuation
    c, s = abs(h.center), h.sigma
    integral = sum(s * math.sqrt(math.pi / 2) * math.erfc((K - cc) / (s * math.sqrt(2)))
                   for cc in ({c, -c} if c else {0.0}))
    spec_tail = 2.0 * (Lg / math.pi * integral + 2 * (2 + beta) * float(h(K)))
    if K < h.support_radius(1e-16):
        notes.append(f"spectrum only known up to k = {K:g}; h({K:g}) = {float(h(K)):.2e}")

    if table is None:
        n_max = int(math.floor(L_cut / float(g.bond_lengths.min()) + 1e-9))
        table = orbit_table(g, max(1, n_max), L_cut)
    geom = Lg / math.pi * float(h.hat(0.0))
    if len(table):
        Lp, Ap = table.L, table.A
        R = np.floor(L_cut / Lp + 1e-12).astype(int)
        rmax = int(R.max())
        Ar = np.ones_like(Ap)
        for r in range(1, rmax + 1):
            live = R >= r
            Ar = Ar * Ap
            if not np.any(live):
                break
            x = r * Lp[live]
            # (L/2pi)[A^r hat h(-x) + conj(A^r) hat h(x)]
            geom += float(np.sum(Lp[live] / (2 * math.pi) *
                                 (Ar[live] * h.hat(-x) + np.conj(Ar[live]) * h.hat(x)).real))
    bound = geometric_tail_bound(g, h, L_cut) + spec_tail
    return TraceFormulaReport(spectral, geom, bound, m0, sensitivity, len(table), notes)


# ---------------------------------------------------------------------------
# open graphs
# ---------------------------------------------------------------------------

def scattering_trajectory_expansion(g: MetricGraph, lead_in: int, lead_out: int, k: float,
                                    n_max: int) -> complex:
    """Partial trajectory sum for S_Gamma[lead_out, lead_in] up to topological length n_max.

    Trajectories of length n cross n - 1 bonds; summing them for fixed n is
    the matrix element of U_LB U_BB^(n-2) U_BL.
    """
    if g.is_closed:
        raise GraphInputError("trajectory expansion needs an open graph")
    ev = QuantumMapEvaluator(g)
    idx = g.index
    bl = open_blocks(ev(k), idx.n_bonds)
    i = idx.lead_pos[lead_in]
    o = idx.lead_pos[lead_out]
    total = complex(bl.LL[o, i]) if n_max >= 1 else 0j
    if bl.BB.size:
        rho = float(np.max(np.abs(np.linalg.eigvals(bl.BB))))
        if rho >= 1 - 1e-6:
            warnings.warn(f"spectral radius of U_BB is {rho:.9f}: expansion may not converge",
                          RuntimeWarning)
        vec = bl.BL[:, i]
        for _ in range(2, n_max + 1):
            total += complex(bl.LB[o] @ vec)
            vec = bl.BB @ vec
    return total

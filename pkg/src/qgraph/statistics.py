"""Spectral statistics: Weyl law, spacings, form factor and the Tanner gap.

The spectral average in the form factor is replaced by an average over
independent uniform bond phases (valid for rationally independent lengths).
Monte Carlo sampling uses numpy's Philox counter-based generator; chunk i
draws from ``Philox(seed).jumped(i)`` so the estimate does not depend on
how chunks are distributed over threads.
"""
from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphInputError, InsufficientDataError, KDependentError
from .graph import MetricGraph, require_valid
from .orbits import MAX_ORBITS, classical_map, enumerate_primitive_orbits, orbits_of_length
from .scattering import QuantumMapEvaluator
from .spectrum import Spectrum, default_threads

MC_CHUNK = 2048
TANNER_C = 2.5


# ---------------------------------------------------------------------------
# Weyl law and spacings
# ---------------------------------------------------------------------------

def _levels(spectrum) -> tuple[np.ndarray, float | None]:
    if isinstance(spectrum, Spectrum):
        return spectrum.expanded(), spectrum.total_length
    return np.sort(np.asarray(spectrum, dtype=float)), None


def weyl_ratio(spectrum, total_length: float | None = None, n: int | None = None,
               include_zero: int = 0) -> float:
    """N(K) pi / (L K) at K = the n-th positive eigenvalue (default: the last one).

    ``include_zero`` adds the k = 0 states to the counting function.
    """
    ks, L = _levels(spectrum)
    L = total_length if total_length is not None else L
    if L is None:
        raise GraphInputError("total_length required for a bare eigenvalue array")
    if len(ks) == 0:
        raise InsufficientDataError("empty spectrum")
    n = len(ks) if n is None else int(n)
    if not 1 <= n <= len(ks):
        raise InsufficientDataError(f"only {len(ks)} eigenvalues, asked for n = {n}")
    K = ks[n - 1]
    count = int(np.searchsorted(ks, K, side="right")) + include_zero
    return count * math.pi / (L * K)


@dataclass
class SpacingSample:
    spacings: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    density: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.spacings))

    @property
    def minimum(self) -> float:
        return float(np.min(self.spacings))

    def histogram_csv(self) -> str:
        lines = ["bin_lo,bin_hi,count,pdf"]
        w = np.diff(self.edges)
        pdf = self.counts / max(1, len(self.spacings)) / w
        for lo, hi, c, p in zip(self.edges[:-1], self.edges[1:], self.counts, pdf):
            lines.append(f"{lo:.17g},{hi:.17g},{int(c)},{p:.17g}")
        return "\n".join(lines) + "\n"


def spacing_distribution(spectrum, density: float | None = None, bins=40,
                         hist_range=(0.0, 4.0), min_levels: int = 100) -> SpacingSample:
    """Nearest-neighbour spacings unfolded by a constant mean density.

    ``density`` is the mean number of levels per unit k; it defaults to the
    Weyl value L/pi when a Spectrum is passed.
    """
    ks, L = _levels(spectrum)
    if density is None:
        if L is None:
            raise GraphInputError("density required for a bare eigenvalue array")
        density = L / math.pi
    if len(ks) < min_levels:
        raise InsufficientDataError(f"need at least {min_levels} eigenvalues, got {len(ks)}")
    s = np.diff(ks) * density
    counts, edges = np.histogram(s, bins=bins, range=hist_range)
    return SpacingSample(s, counts, edges, float(density))


# ---------------------------------------------------------------------------
# form factor
# ---------------------------------------------------------------------------

@dataclass
class FormFactorEstimate:
    n: int
    tau: float
    K: float
    stderr: float
    samples: int
    seed: int


def _bond_S(g: MetricGraph) -> np.ndarray:
    require_valid(g)
    if not g.is_closed:
        raise GraphInputError("form factor needs a closed graph")
    ev = QuantumMapEvaluator(g)
    if ev.k_dependent:
        raise KDependentError("form factor needs a k-independent S")
    return ev.S()


def _trace_power_batch(S: np.ndarray, phases: np.ndarray, n: int) -> np.ndarray:
    """tr (T S)^n for a batch of bond phase vectors (shape m x B)."""
    t = np.exp(1j * np.concatenate([phases, phases], axis=1))
    U = t[:, :, None] * S[None]
    P = U
    for _ in range(n - 1):
        P = P @ U
    return np.trace(P, axis1=1, axis2=2)


def form_factor_mc(g: MetricGraph, n: int, samples: int = 100_000, seed: int = 0,
                   threads: int | None = None) -> FormFactorEstimate:
    """Phase-disorder Monte Carlo estimate of K_n = <|tr U^n|^2> / (2B)."""
    S = _bond_S(g)
    B = S.shape[0] // 2
    if n < 0 or samples < 1:
        raise GraphInputError("n must be >= 0 and samples >= 1")
    seed = int(seed) & ((1 << 64) - 1)
    if n == 0:
        return FormFactorEstimate(0, 0.0, float(2 * B), 0.0, samples, seed)
    sizes = [min(MC_CHUNK, samples - i) for i in range(0, samples, MC_CHUNK)]

    def work(i):
        rng = np.random.Generator(np.random.Philox(seed).jumped(i))
        ph = rng.uniform(0.0, 2.0 * math.pi, size=(sizes[i], B))
        return np.abs(_trace_power_batch(S, ph, n)) ** 2 / (2 * B)

    threads = default_threads() if threads is None else max(1, int(threads))
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    x = np.concatenate(parts)
    mean = float(np.sum(x) / len(x))  # numpy reduces contiguous arrays pairwise
    var = float(np.sum((x - mean) ** 2) / max(1, len(x) - 1))
    # floating-point floor: matters when |tr U^n| is phase independent
    rounding = np.finfo(float).eps * (4 * n + math.log2(len(x)) + 2 * B) * float(np.max(x))
    return FormFactorEstimate(n, n / (2 * B), mean, math.sqrt(var / len(x)) + rounding, samples, seed)


def form_factor_exact_small(g: MetricGraph, n: int, max_orbits: int = MAX_ORBITS) -> float:
    """K_n from periodic orbits grouped by their bond-visit vector.

    Assumes rationally independent lengths, so two orbits have equal length
    exactly when they visit every bond equally often.
    """
    S = _bond_S(g)
    B = S.shape[0] // 2
    if n == 0:
        return float(2 * B)
    if not 1 <= n <= 10:
        raise GraphInputError("exact form factor is limited to 1 <= n <= 10")
    prim = enumerate_primitive_orbits(g, n, max_orbits=max_orbits)
    groups: dict[tuple, complex] = defaultdict(complex)
    for o in orbits_of_length(g, n, prim):
        groups[tuple(o.visits(g))] += o.A / o.r
    total = math.fsum(abs(v) ** 2 for v in groups.values())
    return n * n / (2 * B) * total


@dataclass
class DiagonalFormFactor:
    n: int
    tau: float
    leading: float
    self_retracing: float = 0.0
    repetition: float = 0.0
    corrections_included: bool = True

    @property
    def value(self) -> float:
        return self.leading + self.self_retracing + self.repetition


def form_factor_diagonal(g: MetricGraph, n: int, max_exact_n: int = 10) -> DiagonalFormFactor:
    """Diagonal approximation 2 tau tr M^n plus the orbit corrections.

    The corrections (self-retracing orbits counted once, repetitions
    weighted by 1/r^2) need explicit orbits and are only added for
    n <= ``max_exact_n``.
    """
    S = _bond_S(g)
    B = S.shape[0] // 2
    tau = n / (2 * B)
    M = classical_map(g).M
    leading = 2 * tau * float(np.trace(np.linalg.matrix_power(M, n)))
    if n > max_exact_n or n < 1:
        return DiagonalFormFactor(n, tau, leading, corrections_included=n < 1)
    prim = enumerate_primitive_orbits(g, n)
    where = {p.sequence: i for i, p in enumerate(prim)}
    sr = rep = 0.0
    for o in orbits_of_length(g, n, prim):
        a2 = abs(o.A) ** 2
        if o.partner == where[o.sequence]:
            sr -= tau * n * a2 / o.r ** 2
        rep += 2 * tau * n * (1 - o.r) * a2 / o.r ** 2
    return DiagonalFormFactor(n, tau, leading, sr, rep, True)


def form_factor_sweep_csv(g: MetricGraph, ns, samples: int, seed: int, threads: int | None = None) -> str:
    lines = ["n,tau,K_mc,stderr,K_diag_leading"]
    for n in ns:
        est = form_factor_mc(g, int(n), samples, seed, threads)
        diag = form_factor_diagonal(g, int(n), max_exact_n=0)
        lines.append(f"{est.n:d},{est.tau:.17g},{est.K:.17g},{est.stderr:.17g},{diag.leading:.17g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Tanner criterion
# ---------------------------------------------------------------------------

@dataclass
class TannerReport:
    gap: float
    scaled_B: float
    scaled_sqrtB: float
    verdict: str
    c: float
    n_bonds: int
    has_minus_one: bool
    convention: str = field(default="")

    def to_dict(self) -> dict:
        return {"gap": self.gap, "gap_times_B": self.scaled_B, "gap_times_sqrtB": self.scaled_sqrtB,
                "verdict": self.verdict, "c": self.c, "n_bonds": self.n_bonds,
                "has_minus_one": self.has_minus_one, "convention": self.convention}


def tanner_gap_report(g: MetricGraph, c: float = TANNER_C) -> TannerReport:
    """Spectral gap of the classical map and a universality verdict.

    universal-expected if gap > c/sqrt(B), non-universal-expected if
    gap < c/B, intermediate otherwise.
    """
    cm = classical_map(g)
    B = g.n_bonds
    gap = cm.gap
    if gap > c / math.sqrt(B):
        verdict = "universal-expected"
    elif gap < c / B:
        verdict = "non-universal-expected"
    else:
        verdict = "intermediate"
    conv = (f"gap = min |1 - lambda| over non-unit eigenvalues of M; thresholds c/sqrt(B) and c/B with c = {c:g}")
    return TannerReport(gap, gap * B, gap * math.sqrt(B), verdict, c, B, cm.has_minus_one, conv)

"""Independent reference computations shared by several test modules."""
import math

import numpy as np
from scipy.optimize import brentq

from qgraph.dtn import find_spectrum_dtn, masked_lengths
from qgraph.spectrum import find_spectrum


def scan_roots(f, a, b, n):
    """Sign-change roots of a scalar function on a uniform grid, refined by brentq."""
    xs = np.linspace(a, b, n)
    fv = f(xs)
    idx = np.nonzero(fv[:-1] * fv[1:] < 0)[0]
    return np.array([brentq(f, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15) for i in idx])


def delta_tadpole_roots(l1, l2, alpha, k_max, n=400001):
    def f(k):
        return (k * np.cos(k * l2 / 2) * np.sin(k * l1) + 2 * k * np.cos(k * l1) * np.sin(k * l2 / 2)
                - alpha * np.cos(k * l1) * np.cos(k * l2 / 2))
    return scan_roots(f, 1e-6, k_max, n)


def on_mask(k, lengths, tol=1e-9):
    return any(abs(k * ln / math.pi - round(k * ln / math.pi)) * math.pi / ln < tol for ln in lengths)


def cross_validate(g, k_max, loops="split", tol=1e-8):
    """Pair DtN roots with scattering roots.

    Returns (matched, worst difference, unmatched scattering roots, ok) where
    ok means every DtN root has a partner with equal multiplicity and every
    unmatched scattering root sits on a masked edge eigenvalue.
    """
    sc = find_spectrum(g, k_max, threads=1)
    dt = find_spectrum_dtn(g, k_max, loops=loops)
    lens = masked_lengths(g, loops)
    used = np.zeros(len(sc), dtype=bool)
    worst, ok = 0.0, True
    for k, m in zip(dt.k, dt.multiplicity):
        j = int(np.argmin(np.abs(sc.k - k)))
        d = abs(sc.k[j] - k)
        if d > tol or used[j] or sc.multiplicity[j] != m:
            ok = False
            continue
        used[j] = True
        worst = max(worst, d)
    unmatched = sc.k[~used]
    ok = ok and all(on_mask(k, lens) for k in unmatched)
    return int(used.sum()), worst, unmatched, ok


def brute_form_factor(g, n):
    """Phase-averaged |tr U^n|^2 / 2B by summing closed walks grouped by bond-visit vector.

    Walk amplitudes are accumulated by dynamic programming over
    (start, current channel, visits); no orbit machinery is involved.
    """
    from collections import defaultdict

    from qgraph.scattering import QuantumMapEvaluator

    S = QuantumMapEvaluator(g).S()
    B = g.n_bonds
    N = 2 * B
    groups = defaultdict(complex)
    for start in range(N):
        v0 = [0] * B
        v0[start % B] += 1
        layer = {(start, tuple(v0)): 1.0 + 0j}
        for _ in range(n - 1):
            nxt = defaultdict(complex)
            for (cur, vis), amp in layer.items():
                for b in np.nonzero(np.abs(S[:, cur]) > 1e-14)[0]:
                    v = list(vis)
                    v[b % B] += 1
                    nxt[(int(b), tuple(v))] += amp * S[b, cur]
            layer = nxt
        for (cur, vis), amp in layer.items():
            if abs(S[start, cur]) > 1e-14:
                groups[vis] += amp * S[start, cur]
    return sum(abs(a) ** 2 for a in groups.values()) / N

"""Pure-Python implementations of the hot kernels (fallback when the
compiled extension is unavailable).  Signatures match ``_kernels.pyx``."""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def is_lyndon(w) -> bool:
    """True if the sequence is strictly smaller than all its proper rotations."""
    n = len(w)
    if n == 0:
        return False
    k, j = 0, 1
    while j < n:
        if w[k] < w[j]:
            k = 0
            j += 1
        elif w[k] == w[j]:
            k += 1
            j += 1
        else:
            return False
    return k == 0


def primitive_orbits(indptr, succ, amp_re, amp_im, step, n_max, L_max, max_orbits, store):
    """Depth-first enumeration of primitive periodic orbits as Lyndon words.

    ``succ[indptr[a]:indptr[a+1]]`` lists the states that can follow ``a``,
    with amplitudes ``amp`` (the scattering element S[next, a]).  ``step[x]``
    is the metric length gained on entering ``x``.  Walks from start ``s``
    only visit states >= s.  Returns (status, n, L, A, seq, seq_ptr) where
    status is 0 on success and 1 when ``max_orbits`` was exceeded.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    succ = np.asarray(succ, dtype=np.int64)
    amp = np.asarray(amp_re, dtype=float) + 1j * np.asarray(amp_im, dtype=float)
    step = np.asarray(step, dtype=float)
    N = len(indptr) - 1
    # closing amplitude: S[s, x] if s follows x
    close = [dict() for _ in range(N)]
    for a in range(N):
        for p in range(indptr[a], indptr[a + 1]):
            close[a][int(succ[p])] = amp[p]
    ns, Ls, As, seqs = [], [], [], []
    eps = 1e-12 * (1.0 + L_max) if np.isfinite(L_max) else 0.0
    status = 0
    path = [0] * (n_max + 1)
    for s in range(N):
        if step[s] > L_max + eps:
            continue
        path[0] = s
        # stack of (depth, next successor pointer, partial amplitude, partial length)
        stack = [(1, indptr[s], 1.0 + 0j, step[s])]
        # check the single-edge orbit first
        if s in close[s]:
            ns.append(1); Ls.append(step[s]); As.append(close[s][s])
            if store:
                seqs.append((s,))
        while stack:
            depth, ptr, A, L = stack.pop()
            x = path[depth - 1]
            if ptr >= indptr[x + 1] or depth >= n_max:
                continue
            stack.append((depth, ptr + 1, A, L))
            y = int(succ[ptr])
            if y < s:
                continue
            Ly = L + step[y]
            if Ly > L_max + eps:
                continue
            Ay = A * amp[ptr]
            path[depth] = y
            d1 = depth + 1
            c = close[y].get(s)
            if c is not None and is_lyndon(path[:d1]):
                ns.append(d1); Ls.append(Ly); As.append(Ay * c)
                if store:
                    seqs.append(tuple(path[:d1]))
                if len(ns) > max_orbits:
                    status = 1
                    break
            stack.append((d1, indptr[y], Ay, Ly))
        if status:
            break
    n = np.array(ns, dtype=np.int64)
    L = np.array(Ls, dtype=float)
    A = np.array(As, dtype=complex)
    if store:
        ptr = np.zeros(len(seqs) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(q) for q in seqs])
        flat = np.array([x for q in seqs for x in q], dtype=np.int64)
        return status, n, L, A, flat, ptr
    return status, n, L, A, None, None


# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Same signatures and results as ``_pykernels``."""
import numpy as np

from libc.stdlib cimport malloc, realloc, free
from libc.math cimport INFINITY, isfinite

BACKEND = "cython"


cdef inline bint _lyndon(const long long* w, int n) nogil:
    cdef int k = 0, j = 1
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


def is_lyndon(w):
    cdef long long[::1] a = np.ascontiguousarray(w, dtype=np.int64)
    if a.shape[0] == 0:
        return False
    return bool(_lyndon(&a[0], a.shape[0]))


cdef struct Buf:
    long long* n
    double* L
    double* Are
    double* Aim
    long long* seq
    long long cap
    long long size
    long long seq_cap
    long long seq_size


cdef int _grow(Buf* b) nogil:
    cdef long long cap = b.cap * 2 if b.cap > 0 else 1024
    cdef void* p
    p = realloc(b.n, cap * sizeof(long long))
    if p == NULL:
        return -1
    b.n = <long long*> p
    p = realloc(b.L, cap * sizeof(double))
    if p == NULL:
        return -1
    b.L = <double*> p
    p = realloc(b.Are, cap * sizeof(double))
    if p == NULL:
        return -1
    b.Are = <double*> p
    p = realloc(b.Aim, cap * sizeof(double))
    if p == NULL:
        return -1
    b.Aim = <double*> p
    b.cap = cap
    return 0


cdef int _grow_seq(Buf* b, long long need) nogil:
    cdef long long cap = b.seq_cap if b.seq_cap > 0 else 4096
    cdef void* p
    while cap < need:
        cap *= 2
    p = realloc(b.seq, cap * sizeof(long long))
    if p == NULL:
        return -1
    b.seq = <long long*> p
    b.seq_cap = cap
    return 0


def primitive_orbits(indptr, succ, amp_re, amp_im, step, int n_max, double L_max,
                     long long max_orbits, bint store):
    """Depth-first enumeration of primitive periodic orbits as Lyndon words.

    See the pure-Python twin for the argument conventions.
    """
    cdef long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef long long[::1] sc = np.ascontiguousarray(succ, dtype=np.int64)
    cdef double[::1] are = np.ascontiguousarray(amp_re, dtype=np.float64)
    cdef double[::1] aim = np.ascontiguousarray(amp_im, dtype=np.float64)
    cdef double[::1] st = np.ascontiguousarray(step, dtype=np.float64)
    cdef int N = ip.shape[0] - 1
    cdef double eps = 1e-12 * (1.0 + L_max) if isfinite(L_max) else 0.0
    cdef double Lcap = L_max + eps
    # closing amplitude lookup: cl[x*N + s] (dense, N is small)
    cdef double[::1] cre = np.zeros(N * N, dtype=np.float64)
    cdef double[::1] cim = np.zeros(N * N, dtype=np.float64)
    cdef unsigned char[::1] chas = np.zeros(N * N, dtype=np.uint8)
    cdef long long a, p, y, s, x
    for a in range(N):
        for p in range(ip[a], ip[a + 1]):
            y = sc[p]
            cre[a * N + y] = are[p]
            cim[a * N + y] = aim[p]
            chas[a * N + y] = 1

    cdef long long* path = <long long*> malloc((n_max + 1) * sizeof(long long))
    cdef long long* ptrs = <long long*> malloc((n_max + 1) * sizeof(long long))
    cdef double* Ar = <double*> malloc((n_max + 1) * sizeof(double))
    cdef double* Ai = <double*> malloc((n_max + 1) * sizeof(double))
    cdef double* Ls = <double*> malloc((n_max + 1) * sizeof(double))
    cdef Buf b
    b.n = NULL; b.L = NULL; b.Are = NULL; b.Aim = NULL; b.seq = NULL
    b.cap = 0; b.size = 0; b.seq_cap = 0; b.seq_size = 0
    cdef int status = 0
    cdef int depth, i
    cdef double ar, ai, nr, ni, Ly, cr, ci
    if path == NULL or ptrs == NULL or Ar == NULL or Ai == NULL or Ls == NULL or _grow(&b) != 0:
        status = 2
    with nogil:
        s = 0
        while s < N and status == 0:
            if st[s] > Lcap:
                s += 1
                continue
            path[0] = s
            ptrs[0] = ip[s]
            Ar[0] = 1.0
            Ai[0] = 0.0
            Ls[0] = st[s]
            if chas[s * N + s]:
                if b.size >= b.cap and _grow(&b) != 0:
                    status = 2
                    break
                b.n[b.size] = 1
                b.L[b.size] = st[s]
                b.Are[b.size] = cre[s * N + s]
                b.Aim[b.size] = cim[s * N + s]
                b.size += 1
                if store:
                    if b.seq_size + 1 > b.seq_cap and _grow_seq(&b, b.seq_size + 1) != 0:
                        status = 2
                        break
                    b.seq[b.seq_size] = s
                    b.seq_size += 1
            depth = 0  # index of the last element in path
            while depth >= 0:
                x = path[depth]
                if depth + 1 >= n_max or ptrs[depth] >= ip[x + 1]:
                    depth -= 1
                    continue
                p = ptrs[depth]
                ptrs[depth] = p + 1
                y = sc[p]
                if y < s:
                    continue
                Ly = Ls[depth] + st[y]
                if Ly > Lcap:
                    continue
                ar = Ar[depth]; ai = Ai[depth]
                nr = ar * are[p] - ai * aim[p]
                ni = ar * aim[p] + ai * are[p]
                depth += 1
                path[depth] = y
                ptrs[depth] = ip[y]
                Ar[depth] = nr
                Ai[depth] = ni
                Ls[depth] = Ly
                if chas[y * N + s] and _lyndon(path, depth + 1):
                    if b.size >= b.cap and _grow(&b) != 0:
                        status = 2
                        break
                    cr = cre[y * N + s]
                    ci = cim[y * N + s]
                    b.n[b.size] = depth + 1
                    b.L[b.size] = Ly
                    b.Are[b.size] = nr * cr - ni * ci
                    b.Aim[b.size] = nr * ci + ni * cr
                    b.size += 1
                    if store:
                        if b.seq_size + depth + 1 > b.seq_cap and _grow_seq(&b, b.seq_size + depth + 1) != 0:
                            status = 2
                            break
                        for i in range(depth + 1):
                            b.seq[b.seq_size + i] = path[i]
                        b.seq_size += depth + 1
                    if b.size > max_orbits:
                        status = 1
                        break
            s += 1

    free(path); free(ptrs); free(Ar); free(Ai); free(Ls)
    if status == 2:
        free(b.n); free(b.L); free(b.Are); free(b.Aim); free(b.seq)
        raise MemoryError("orbit buffer allocation failed")
    cdef long long m = b.size
    n_out = np.empty(m, dtype=np.int64)
    L_out = np.empty(m, dtype=np.float64)
    A_out = np.empty(m, dtype=np.complex128)
    cdef long long[::1] nv = n_out
    cdef double[::1] Lv = L_out
    cdef double complex[::1] Av = A_out
    cdef long long q
    for q in range(m):
        nv[q] = b.n[q]
        Lv[q] = b.L[q]
        Av[q] = b.Are[q] + 1j * b.Aim[q]
    seq_out = None
    ptr_out = None
    cdef long long[::1] sv
    if store:
        seq_out = np.empty(b.seq_size, dtype=np.int64)
        sv = seq_out
        for q in range(b.seq_size):
            sv[q] = b.seq[q]
        ptr_out = np.zeros(m + 1, dtype=np.int64)
        ptr_out[1:] = np.cumsum(n_out)
    free(b.n); free(b.L); free(b.Are); free(b.Aim); free(b.seq)
    return status, n_out, L_out, A_out, seq_out, ptr_out

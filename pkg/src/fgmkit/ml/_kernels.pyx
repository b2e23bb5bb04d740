# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CART best split and SMO loops; see _pykernels for the reference."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def best_split(double[:, ::1] X, double[::1] y, long[::1] features, long min_leaf):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t k, i, f, bi
    cdef long best_f = -1
    cdef double best_t = 0.0, best_p = -np.inf, best_s = 0.0, total = 0.0, run, p, fp
    cdef double nl, nr, sl, sr, t
    cdef double[::1] xs = np.empty(n)
    cdef double[::1] cs = np.empty(n)
    cdef cnp.intp_t[::1] order
    for k in range(features.shape[0]):
        f = features[k]
        order = np.argsort(np.asarray(X[:, f]), kind="mergesort")
        run = 0.0
        for i in range(n):
            xs[i] = X[order[i], f]
            run = run + y[order[i]]
            cs[i] = run
        total = cs[n - 1]
        fp = -np.inf
        bi = -1
        for i in range(n - 1):
            nl = <double>(i + 1)
            nr = n - nl
            if not (xs[i] < xs[i + 1] and nl >= min_leaf and nr >= min_leaf):
                continue
            sl = cs[i]
            sr = total - sl
            p = sl * sl / nl + sr * sr / nr
            if bi < 0 or p > fp:
                fp = p
                bi = i
        if bi >= 0 and fp > best_p:
            best_p = fp
            best_f = f
            best_s = total
            t = 0.5 * (xs[bi] + xs[bi + 1])
            best_t = xs[bi] if t >= xs[bi + 1] else t
    if best_f < 0:
        return -1, 0.0, 0.0
    return best_f, best_t, best_p - best_s * best_s / n


def smo_solve(double[:, ::1] K, double[::1] y, double C, double epsilon, double tol, long max_iter):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t m = 2 * n
    cdef Py_ssize_t t, i, j, ii, jj
    cdef double[::1] s = np.concatenate([np.ones(n), -np.ones(n)])
    cdef double[::1] a = np.zeros(m)
    cdef double[::1] G = np.concatenate([np.asarray(epsilon) - np.asarray(y), np.asarray(epsilon) + np.asarray(y)])
    cdef double vi, vj, v, si, sj, kij, ai, aj, quad, delta, diff, tot, dai, daj, col
    cdef long it = 0
    cdef bint converged = False
    cdef bint up, low
    while True:
        i = -1
        j = -1
        vi = -np.inf
        vj = np.inf
        for t in range(m):
            v = -s[t] * G[t]
            if s[t] > 0:
                up = a[t] < C
                low = a[t] > 0
            else:
                up = a[t] > 0
                low = a[t] < C
            if up and v > vi:
                vi = v
                i = t
            if low and v < vj:
                vj = v
                j = t
        if i < 0 or j < 0 or vi - vj < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        ii = i % n
        jj = j % n
        si = s[i]
        sj = s[j]
        kij = K[ii, jj]
        ai = a[i]
        aj = a[j]
        if si != sj:
            quad = K[ii, ii] + K[jj, jj] + 2.0 * (si * sj * kij)
            if quad <= 0.0:
                quad = 1e-12
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            a[i] += delta
            a[j] += delta
            if diff > 0.0:
                if a[j] < 0.0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0.0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0.0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = K[ii, ii] + K[jj, jj] - 2.0 * (si * sj * kij)
            if quad <= 0.0:
                quad = 1e-12
            delta = (G[i] - G[j]) / quad
            tot = ai + aj
            a[i] -= delta
            a[j] += delta
            if tot > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = tot - C
            else:
                if a[j] < 0.0:
                    a[j] = 0.0
                    a[i] = tot
            if tot > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = tot - C
            else:
                if a[i] < 0.0:
                    a[i] = 0.0
                    a[j] = tot
        dai = a[i] - ai
        daj = a[j] - aj
        for t in range(n):
            col = (si * dai) * K[t, ii] + (sj * daj) * K[t, jj]
            G[t] += col
            G[t + n] -= col
    return np.asarray(a), np.asarray(G), it, converged

"""Pure-Python versions of the hot loops: CART best split and SMO.

They mirror the compiled kernels operation for operation, so both produce
the same bits.
"""

import numpy as np


def best_split(X, y, features, min_leaf):
    """Best variance-reduction split of the rows (X, y).

    Returns (feature, threshold, gain) with feature = -1 if no admissible
    split exists.  gain is the drop in summed squared error.  Ties keep the
    first candidate in feature order, then in sorted position.
    """
    n = X.shape[0]
    best_f, best_t, best_p, best_s = -1, 0.0, -np.inf, 0.0
    for f in features:
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        cs = np.cumsum(y[order])
        total = cs[n - 1]
        nl = np.arange(1, n, dtype=float)
        nr = n - nl
        sl = cs[: n - 1]
        sr = total - sl
        proxy = sl * sl / nl + sr * sr / nr
        ok = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        proxy = np.where(ok, proxy, -np.inf)
        i = int(np.argmax(proxy))
        if proxy[i] > best_p:
            best_p = proxy[i]
            best_f = int(f)
            best_s = total
            t = 0.5 * (xs[i] + xs[i + 1])
            best_t = xs[i] if t >= xs[i + 1] else t
    if best_f < 0:
        return -1, 0.0, 0.0
    return best_f, float(best_t), float(best_p - best_s * best_s / n)


def smo_solve(K, y, C, epsilon, tol, max_iter):
    """epsilon-SVR dual by SMO with maximal-violating-pair selection.

    Works on the doubled problem (alpha, alpha*) of 2n bounded variables.
    Variables 0..n-1 are alpha (label +1), n..2n-1 are alpha* (label -1).
    Returns (a, G, iterations, converged) with G the final dual gradient.
    """
    n = y.shape[0]
    s = np.concatenate([np.ones(n), -np.ones(n)])
    a = np.zeros(2 * n)
    G = np.concatenate([epsilon - y, epsilon + y])
    qd = np.diag(K).copy()
    it = 0
    converged = False
    while True:
        v = -s * G
        up = ((s > 0) & (a < C)) | ((s < 0) & (a > 0))
        low = ((s > 0) & (a > 0)) | ((s < 0) & (a < C))
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        if not up[i] or not low[j] or v[i] - v[j] < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        ii, jj = i % n, j % n
        si, sj = s[i], s[j]
        kij = K[ii, jj]
        ai, aj = a[i], a[j]
        if si != sj:
            quad = qd[ii] + qd[jj] + 2.0 * (si * sj * kij)
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
            quad = qd[ii] + qd[jj] - 2.0 * (si * sj * kij)
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
        col = (si * dai) * K[:, ii] + (sj * daj) * K[:, jj]
        G[:n] += col
        G[n:] -= col
    return a, G, it, converged

"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.special import logsumexp


def sinkhorn_rect(log_k, a, b, v, tol, max_iter):
    log_a = np.log(a)
    log_b = np.log(b)
    residual = np.inf
    it = 0
    u = np.empty(log_k.shape[0])
    while it < max_iter:
        it += 1
        t = log_k + v
        mx = t.max(axis=1, keepdims=True)
        e = np.exp(t - mx)
        s = e.sum(axis=1)
        u = log_a - mx[:, 0] - np.log(s)
        col = (a / s) @ e
        residual = float(np.abs(col - b).sum())
        if residual <= tol:
            break
        ok = col > 0
        v[ok] += log_b[ok] - np.log(col[ok])
        if not ok.all():
            for z in np.flatnonzero(~ok):
                v[z] = log_b[z] - logsumexp(log_k[:, z] + u)
    return u, residual, it


def lsap(cost):
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.intp)
    way = np.zeros(n + 1, dtype=np.intp)
    c = np.zeros((n + 1, n + 1))
    c[1:, 1:] = cost
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = c[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    perm = np.empty(n, dtype=np.int64)
    perm[p[1:] - 1] = np.arange(n)
    return perm


def greedy_capacity(weights, order, capacities):
    n, r = weights.shape
    room = np.array(capacities, dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    top = np.argmax(weights, axis=1)
    for i in order:
        z = top[i]
        if room[z] <= 0:
            w = np.where(room > 0, weights[i], -np.inf)
            z = int(np.argmax(w))
        labels[i] = z
        room[z] -= 1
    return labels

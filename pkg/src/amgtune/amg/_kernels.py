"""Compiled inner loops for the AMG setup and the SOR-type smoothers.

All kernels take raw CSR arrays and are deterministic: they visit rows
and entries in index order.
"""
import numpy as np
from numba import njit

UNASSIGNED = -1
F_PT = 0
C_PT = 1


@njit(cache=True)
def strength(indptr, indices, data, theta):
    n = indptr.size - 1
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        big = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] != i and -data[k] > big:
                big = -data[k]
        if big <= 0.0:
            continue
        cut = theta * big
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] != i and -data[k] >= cut:
                counts[i + 1] += 1
    sp = np.cumsum(counts)
    sj = np.empty(sp[n], dtype=np.int64)
    for i in range(n):
        big = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] != i and -data[k] > big:
                big = -data[k]
        if big <= 0.0:
            continue
        cut = theta * big
        pos = sp[i]
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] != i and -data[k] >= cut:
                sj[pos] = indices[k]
                pos += 1
    return sp, sj


@njit(cache=True)
def cljp(n, sp, sj, tp, tj, tpos, rnd):
    """CLJP splitting.

    ``sp/sj``: edge i->j when j is in S_i.  ``tp/tj``: the same edges
    grouped by target, ``tpos`` maps each to its position in ``sj``.
    """
    alive = np.ones(sj.size, dtype=np.bool_)
    w = rnd.copy()
    for e in range(sj.size):
        w[sj[e]] += 1.0
    state = np.full(n, UNASSIGNED, dtype=np.int8)
    depends_on = np.full(n, -1, dtype=np.int64)
    selected = np.empty(n, dtype=np.int64)
    left = n
    while left > 0:
        for i in range(n):
            if state[i] == UNASSIGNED and w[i] < 1.0:
                state[i] = F_PT
                left -= 1
        if left == 0:
            break
        nsel = 0
        for i in range(n):
            if state[i] != UNASSIGNED:
                continue
            wi = w[i]
            best = True
            for e in range(sp[i], sp[i + 1]):
                j = sj[e]
                if alive[e] and state[j] == UNASSIGNED and w[j] >= wi:
                    best = False
                    break
            if best:
                for k in range(tp[i], tp[i + 1]):
                    j = tj[k]
                    if alive[tpos[k]] and state[j] == UNASSIGNED and w[j] >= wi:
                        best = False
                        break
            if best:
                selected[nsel] = i
                nsel += 1
        for s in range(nsel):
            state[selected[s]] = C_PT
        left -= nsel
        for s in range(nsel):
            c = selected[s]
            # points that influence c lose value as C candidates
            for e in range(sp[c], sp[c + 1]):
                if alive[e]:
                    alive[e] = False
                    w[sj[e]] -= 1.0
            for k in range(tp[c], tp[c + 1]):
                depends_on[tj[k]] = c
            # j depends on c; if k depends on both j and c, j is less needed
            for k in range(tp[c], tp[c + 1]):
                j = tj[k]
                alive[tpos[k]] = False
                for kk in range(tp[j], tp[j + 1]):
                    e = tpos[kk]
                    if alive[e] and depends_on[tj[kk]] == c:
                        alive[e] = False
                        w[j] -= 1.0
    return state


@njit(cache=True)
def interpolation(indptr, indices, data, sp, sj, state, coarse_index):
    """Classical interpolation weights.

    Returns CSR arrays of P plus counts of zero-denominator rows and of
    F-points without coarse neighbours.
    """
    n = indptr.size - 1
    diag = np.zeros(n)
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] == i:
                diag[i] += data[k]
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if state[i] == C_PT:
            counts[i + 1] = 1
        else:
            c = 0
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i and data[k] != 0.0 and state[j] == C_PT:
                    c += 1
            counts[i + 1] = c
    pp = np.cumsum(counts)
    pj = np.empty(pp[n], dtype=np.int64)
    px = np.empty(pp[n])
    in_ci = np.full(n, -1, dtype=np.int64)
    strong = np.full(n, -1, dtype=np.int64)
    num = np.zeros(n)
    n_zero_denom = 0
    n_empty = 0
    for i in range(n):
        if state[i] == C_PT:
            pj[pp[i]] = coarse_index[i]
            px[pp[i]] = 1.0
            continue
        if pp[i + 1] == pp[i]:
            n_empty += 1
            continue
        for e in range(sp[i], sp[i + 1]):
            strong[sj[e]] = i
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j != i and data[k] != 0.0 and state[j] == C_PT:
                in_ci[j] = i
                num[j] = data[k]
        denom = diag[i]
        for k in range(indptr[i], indptr[i + 1]):
            l = indices[k]
            a_il = data[k]
            if l == i or a_il == 0.0 or in_ci[l] == i:
                continue
            if strong[l] != i:
                denom += a_il
                continue
            a_ll = diag[l]
            s = 0.0
            for kk in range(indptr[l], indptr[l + 1]):
                m = indices[kk]
                if in_ci[m] == i and data[kk] * a_ll <= 0.0:
                    s += data[kk]
            if s == 0.0:
                denom += a_il
                continue
            for kk in range(indptr[l], indptr[l + 1]):
                m = indices[kk]
                if in_ci[m] == i and data[kk] * a_ll <= 0.0:
                    num[m] += a_il * data[kk] / s
        pos = pp[i]
        if denom == 0.0:
            n_zero_denom += 1
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i and in_ci[j] == i:
                    pj[pos] = coarse_index[j]
                    px[pos] = -data[k] / diag[i]
                    pos += 1
        else:
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i and in_ci[j] == i:
                    pj[pos] = coarse_index[j]
                    px[pos] = -num[j] / denom
                    pos += 1
    return pp, pj, px, n_zero_denom, n_empty


@njit(cache=True)
def sor_sweep(indptr, indices, data, d, u, f, omega, backward):
    n = indptr.size - 1
    for t in range(n):
        i = n - 1 - t if backward else t
        r = f[i]
        for k in range(indptr[i], indptr[i + 1]):
            r -= data[k] * u[indices[k]]
        u[i] += omega * r / d[i]

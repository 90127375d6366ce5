"""Level-wise exact greedy tree growth (numba kernels).

Every tree in the package goes through :func:`grow`. Rows carry a statistic
vector: class weights for impurity criteria, or (gradient, hessian) for the
second-order criterion. Squared-error regression is the second-order case
with g = -y, h = 1 and no regularisation, whose leaf weight is the mean.

Each feature keeps its own sorted list of row ids. After every split the
node's segment is stably partitioned in every list, so each open node owns
one contiguous, still sorted, segment [start, end).
"""

import numpy as np
from numba import njit

NEWTON = 0
GINI = 1
ENTROPY = 2


@njit(cache=True, inline="always", error_model="numpy")
def _soft(g, alpha):
    if g > alpha:
        return g - alpha
    if g < -alpha:
        return g + alpha
    return 0.0


@njit(cache=True, inline="always", error_model="numpy")
def _score(vec, count, crit, lam, alpha):
    # Higher is better; gain = score(left) + score(right) - score(parent).
    if crit == NEWTON:
        t = _soft(vec[0], alpha)
        return 0.5 * t * t / (vec[1] + lam)
    if count <= 0.0:
        return 0.0
    s = 0.0
    if crit == GINI:
        for c in range(vec.shape[0]):
            p = vec[c] / count
            s += p * p
        return -count * (1.0 - s)
    for c in range(vec.shape[0]):
        p = vec[c] / count
        if p > 0.0:
            s -= p * np.log2(p)
    return -count * s


@njit(cache=True, inline="always", error_model="numpy")
def _is_pure(vec, crit):
    if crit == NEWTON:
        return False
    nz = 0
    for c in range(vec.shape[0]):
        if vec[c] > 0.0:
            nz += 1
    return nz <= 1


@njit(cache=True, error_model="numpy")
def _best_newton(rows, vals, stats, a, b, G, H, parent, min_leaf, mcw, lam, alpha):
    # Rows have unit weight here, so the left count at position i is i - a
    # and only cuts leaving min_leaf rows on each side are scanned. Gains
    # are compared as cross-multiplied fractions to keep divisions out of
    # the loop.
    best_num = -1.0
    best_den = 1.0
    best_thr = 0.0
    found = False
    gl = 0.0
    hl = 0.0
    lo = a + max(int(np.ceil(min_leaf)), 1)
    hi = b - max(int(np.ceil(min_leaf)), 1)
    for i in range(a, min(lo, b)):
        r = rows[i]
        gl += stats[r, 0]
        hl += stats[r, 1]
    for i in range(lo, hi + 1):
        x = vals[i]
        prev = vals[i - 1]
        if x > prev:
            hr = H - hl
            if hl >= mcw and hr >= mcw:
                if alpha > 0.0:
                    tl = _soft(gl, alpha)
                    tr = _soft(G - gl, alpha)
                else:
                    tl = gl
                    tr = G - gl
                dl = hl + lam
                dr = hr + lam
                num = tl * tl * dr + tr * tr * dl
                den = dl * dr
                if not found or num * best_den > best_num * den:
                    found = True
                    best_num = num
                    best_den = den
                    t = 0.5 * (prev + x)
                    best_thr = prev if t >= x else t
        r = rows[i]
        gl += stats[r, 0]
        hl += stats[r, 1]
    if not found:
        return -np.inf, 0.0
    return 0.5 * best_num / best_den - parent, best_thr


@njit(cache=True, error_model="numpy")
def _best_impurity(rows, vals, stats, weight, a, b, tot, cnt, parent, crit, min_leaf, acc, rvec):
    best = -np.inf
    best_thr = 0.0
    m = stats.shape[1]
    acc[:] = 0.0
    cl = 0.0
    prev = vals[a]
    for i in range(a, b):
        r = rows[i]
        x = vals[i]
        if x > prev and cl >= min_leaf and cnt - cl >= min_leaf:
            for c in range(m):
                rvec[c] = tot[c] - acc[c]
            gain = _score(acc, cl, crit, 0.0, 0.0) + _score(rvec, cnt - cl, crit, 0.0, 0.0) - parent
            if gain > best:
                best = gain
                t = 0.5 * (prev + x)
                best_thr = prev if t >= x else t
        for c in range(m):
            acc[c] += stats[r, c]
        cl += weight[r]
        prev = x
    return best, best_thr


@njit(cache=True, error_model="numpy")
def _random_cut(rows, vals, stats, weight, a, b, tot, cnt, parent, crit, min_leaf, mcw, lam, alpha, acc, rvec):
    lo = vals[a]
    hi = vals[b - 1]
    if not hi > lo:
        return -np.inf, 0.0
    cut = lo + np.random.random() * (hi - lo)
    if not cut < hi:
        return -np.inf, 0.0
    m = stats.shape[1]
    acc[:] = 0.0
    cl = 0.0
    for i in range(a, b):
        if vals[i] > cut:
            break
        r = rows[i]
        for c in range(m):
            acc[c] += stats[r, c]
        cl += weight[r]
    if cl < min_leaf or cnt - cl < min_leaf:
        return -np.inf, 0.0
    for c in range(m):
        rvec[c] = tot[c] - acc[c]
    if crit == NEWTON and (acc[1] < mcw or rvec[1] < mcw):
        return -np.inf, 0.0
    gain = _score(acc, cl, crit, lam, alpha) + _score(rvec, cnt - cl, crit, lam, alpha) - parent
    return gain, cut


@njit(cache=True, error_model="numpy")
def grow(
    X,
    order,
    xs,
    stats,
    weight,
    crit,
    features,
    max_depth,
    min_split,
    min_leaf,
    min_child_weight,
    lam,
    alpha,
    min_gain,
    random_split,
    seed,
):
    """Grow one tree.

    ``order`` is the (n_features, n_rows) argsort of ``X`` by column, ``xs``
    the matching sorted values, and ``stats`` is already multiplied by
    ``weight``. Rows with zero weight are ignored; the second-order
    criterion expects every weight to be 1. Only the columns listed in
    ``features`` are split on. Returns node arrays (feature, threshold, left,
    right, stats, count, gain) trimmed to the node count, plus the leaf index
    of every row (-1 for ignored rows).
    """
    n = X.shape[0]
    m = stats.shape[1]
    nf = features.shape[0]
    cap = 2 * n + 1
    if max_depth < 40:
        cap = min(cap, 2 ** (max_depth + 1) - 1)
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    nstats = np.zeros((cap, m))
    ncount = np.zeros(cap)
    ngain = np.zeros(cap)
    start = np.zeros(cap, np.int64)
    end = np.zeros(cap, np.int64)
    leaf_of = np.full(n, -1, np.int64)

    # Per-feature sorted lists restricted to rows with positive weight.
    rows = np.empty((nf, n), np.int64)
    vals = np.empty((nf, n))
    n_act = 0
    for j in range(nf):
        f = features[j]
        k = 0
        for i in range(n):
            r = order[f, i]
            if weight[r] > 0.0:
                rows[j, k] = r
                vals[j, k] = xs[f, i]
                k += 1
        n_act = k
    for i in range(n):
        if weight[i] > 0.0:
            ncount[0] += weight[i]
            for c in range(m):
                nstats[0, c] += stats[i, c]
    end[0] = n_act
    if random_split:
        np.random.seed(seed)

    go_left = np.zeros(n, np.bool_)
    terminal = np.zeros(cap, np.bool_)
    buf_r = np.empty(n, np.int64)
    buf_v = np.empty(n)
    acc = np.zeros(m)
    rvec = np.zeros(m)
    n_nodes = 1
    frontier = np.zeros(1, np.int64)
    depth = 0
    while frontier.shape[0] > 0:
        n_split = 0
        for nd in frontier:
            if (
                depth >= max_depth
                or ncount[nd] < min_split
                or ncount[nd] < 2.0 * min_leaf
                or end[nd] - start[nd] < 2
                or _is_pure(nstats[nd], crit)
            ):
                continue
            a = start[nd]
            b = end[nd]
            cnt = ncount[nd]
            parent = _score(nstats[nd], cnt, crit, lam, alpha)
            best = -np.inf
            best_j = -1
            best_t = 0.0
            for j in range(nf):
                if random_split:
                    gain, t = _random_cut(
                        rows[j], vals[j], stats, weight, a, b, nstats[nd], cnt, parent,
                        crit, min_leaf, min_child_weight, lam, alpha, acc, rvec,
                    )
                elif crit == NEWTON:
                    gain, t = _best_newton(
                        rows[j], vals[j], stats, a, b, nstats[nd, 0], nstats[nd, 1],
                        parent, min_leaf, min_child_weight, lam, alpha,
                    )
                else:
                    gain, t = _best_impurity(
                        rows[j], vals[j], stats, weight, a, b, nstats[nd], cnt, parent,
                        crit, min_leaf, acc, rvec,
                    )
                # A later column must beat the best by more than rounding
                # noise, so exact ties go to the earlier column.
                if gain > best and (best_j < 0 or gain > best + 1e-12 * abs(best)):
                    best = gain
                    best_j = j
                    best_t = t
            if best_j < 0 or not best > min_gain:
                continue

            feat[nd] = features[best_j]
            thr[nd] = best_t
            ngain[nd] = best
            lc = n_nodes
            rc = n_nodes + 1
            left[nd] = lc
            right[nd] = rc
            n_nodes += 2
            n_left = 0
            for i in range(a, b):
                r = rows[best_j, i]
                gl = vals[best_j, i] <= best_t
                go_left[r] = gl
                child = lc if gl else rc
                ncount[child] += weight[r]
                for c in range(m):
                    nstats[child, c] += stats[r, c]
                if gl:
                    n_left += 1
            start[lc] = a
            end[lc] = a + n_left
            start[rc] = a + n_left
            end[rc] = b
            # Children that can never split become leaves right away and
            # need no partitioning.
            if depth + 1 >= max_depth or max(ncount[lc], ncount[rc]) < max(min_split, 2.0 * min_leaf):
                terminal[nd] = True
                for i in range(a, b):
                    r = rows[best_j, i]
                    leaf_of[r] = lc if go_left[r] else rc
                continue
            n_split += 1
            for j in range(nf):
                if j == best_j:
                    # Left rows already come first in the split column.
                    continue
                # Branch-free stable partition: every row is written to both
                # destinations and only the matching cursor advances.
                p = a
                q = 0
                for i in range(a, b):
                    r = rows[j, i]
                    v = vals[j, i]
                    g = go_left[r]
                    rows[j, p] = r
                    vals[j, p] = v
                    buf_r[q] = r
                    buf_v[q] = v
                    p += g
                    q += 1 - g
                for i in range(q):
                    rows[j, p + i] = buf_r[i]
                    vals[j, p + i] = buf_v[i]

        new_frontier = np.empty(2 * n_split, np.int64)
        k = 0
        for nd in frontier:
            if feat[nd] >= 0 and not terminal[nd]:
                new_frontier[k] = left[nd]
                new_frontier[k + 1] = right[nd]
                k += 2
            elif feat[nd] < 0:
                for i in range(start[nd], end[nd]):
                    leaf_of[rows[0, i]] = nd
        frontier = new_frontier
        depth += 1

    return (
        feat[:n_nodes].copy(),
        thr[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        nstats[:n_nodes].copy(),
        ncount[:n_nodes].copy(),
        ngain[:n_nodes].copy(),
        leaf_of,
    )


@njit(cache=True, error_model="numpy")
def apply_tree(X, feat, thr, left, right):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        nd = 0
        while feat[nd] >= 0:
            if X[i, feat[nd]] <= thr[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = nd
    return out


def presort(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise sort order of ``X`` and the sorted values, both (n_features, n_rows)."""
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    xs = np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))
    return order, xs

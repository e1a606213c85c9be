"""Independent, deliberately naive reference implementations used by the tests."""

import itertools
import math

import numpy as np


def glcm_loop(values, levels, dr, dc):
    """Symmetric normalized co-occurrence matrix by explicit pixel loops."""
    v = np.asarray(values)
    h, w = v.shape
    m = [[0.0] * levels for _ in range(levels)]
    n = 0
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < h and 0 <= c2 < w:
                a, b = int(v[r, c]), int(v[r2, c2])
                m[a][b] += 1
                m[b][a] += 1
                n += 2
    return np.array(m) / n


def haralick_loop(p):
    """The nine features by direct double loops over a G x G matrix, in feature order."""
    g = len(p)
    cells = [(i, j, float(p[i][j])) for i in range(g) for j in range(g)]
    px = [sum(p[i][j] for j in range(g)) for i in range(g)]
    py = [sum(p[i][j] for i in range(g)) for j in range(g)]
    mx = sum(i * px[i] for i in range(g))
    my = sum(j * py[j] for j in range(g))
    sx = math.sqrt(sum((i - mx) ** 2 * px[i] for i in range(g)))
    sy = math.sqrt(sum((j - my) ** 2 * py[j] for j in range(g)))
    ent = -sum(v * math.log2(v) for _, _, v in cells if v > 0)
    ene = sum(v * v for _, _, v in cells)
    con = sum((i - j) ** 2 * v for i, j, v in cells)
    sa = 0.0
    for k in range(2 * g - 1):
        sa += k * sum(v for i, j, v in cells if i + j == k)
    mu = (mx + my) / 2
    var = sum((i - mu) ** 2 * v for i, j, v in cells)
    cor = sum((i - mx) * (j - my) * v for i, j, v in cells) / (sx * sy) if sx * sy > 1e-15 else 0.0
    mp = max(v for _, _, v in cells)
    idm = sum(v / (1 + (i - j) ** 2) for i, j, v in cells)
    ct = sum((i + j - mx - my) ** 2 * v for i, j, v in cells)
    return [ent, ene, con, sa, var, cor, mp, idm, ct]


def mann_whitney_auc(scores, labels):
    """Fraction of (positive, negative) pairs ranked correctly; ties count one half."""
    pos = [s for s, y in zip(scores, labels) if y > 0]
    neg = [s for s, y in zip(scores, labels) if y <= 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def max_margin_2d(X, y, n_angles=7200):
    """Brute-force hard-margin geometric margin in 2-D.

    For each unit normal w the best offset is halfway between the closest
    projections of the two classes; the margin is half that gap. Refined by a
    local ternary search around the best grid angle.
    """
    X = np.asarray(X, float)
    y = np.asarray(y)

    def gap(theta):
        w = np.array([math.cos(theta), math.sin(theta)])
        proj = X @ w
        return (proj[y > 0].min() - proj[y < 0].max()) / 2.0

    thetas = np.linspace(0, 2 * math.pi, n_angles, endpoint=False)
    best = max(thetas, key=gap)
    lo, hi = best - 2 * math.pi / n_angles, best + 2 * math.pi / n_angles
    for _ in range(100):
        a, b = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if gap(a) < gap(b):
            lo = a
        else:
            hi = b
    return gap((lo + hi) / 2)


def exhaustive_best_J(n_features, max_size, J):
    best = -math.inf
    for k in range(1, max_size + 1):
        for subset in itertools.combinations(range(n_features), k):
            best = max(best, J(subset))
    return best


def central_difference(f, params, eps=1e-5):
    """Gradient of scalar f() w.r.t. every entry of each array in params, perturbed in place."""
    grads = []
    for arr in params:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = arr[idx]
            arr[idx] = old + eps
            up = f()
            arr[idx] = old - eps
            down = f()
            arr[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads

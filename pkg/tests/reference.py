"""Independent high-precision oracles used to freeze expected test values.

Everything here is evaluated term by term from the printed formulas with
50-digit mpmath arithmetic (or brute-force enumeration), deliberately
sharing no code with the package under test.
"""

import math

import numpy as np
from mpmath import mp, mpf

mp.dps = 50


def _vec(x):
    return [mpf(float(v)) for v in np.asarray(x, dtype=float).reshape(-1)]


def _dot(a, b):
    return sum(ai * bi for ai, bi in zip(a, b))


def _norm(a):
    return mp.sqrt(_dot(a, a))


def _to_np(a):
    return np.array([float(v) for v in a])


def _mob_add_mp(x, y, c):
    x2, y2, xy = _dot(x, x), _dot(y, y), _dot(x, y)
    num_x = 1 + 2 * c * xy + c * y2
    num_y = 1 - c * x2
    den = 1 + 2 * c * xy + c * c * x2 * y2
    return [(num_x * xi + num_y * yi) / den for xi, yi in zip(x, y)]


def mob_add(x, y, c):
    """Term-by-term Mobius addition."""
    return _to_np(_mob_add_mp(_vec(x), _vec(y), mpf(c)))


def scalar_mul(r, x, c):
    x, r, c = _vec(x), mpf(r), mpf(c)
    n = _norm(x)
    if n == 0:
        return _to_np(x)
    factor = mp.tanh(r * mp.atanh(mp.sqrt(c) * n)) / (mp.sqrt(c) * n)
    return _to_np([factor * xi for xi in x])


def matvec(m, x, c):
    x, c = _vec(x), mpf(c)
    m = [[mpf(float(v)) for v in row] for row in np.asarray(m, dtype=float)]
    mx = [_dot(row, x) for row in m]
    n_mx, n_x = _norm(mx), _norm(x)
    if n_mx == 0 or n_x == 0:
        return _to_np([mpf(0)] * len(mx))
    factor = mp.tanh((n_mx / n_x) * mp.atanh(mp.sqrt(c) * n_x)) / (mp.sqrt(c) * n_mx)
    return _to_np([factor * v for v in mx])


def exp0(v, c):
    v, c = _vec(v), mpf(c)
    n = _norm(v)
    if n == 0:
        return _to_np(v)
    factor = mp.tanh(mp.sqrt(c) * n) / (mp.sqrt(c) * n)
    return _to_np([factor * vi for vi in v])


def log0(y, c):
    y, c = _vec(y), mpf(c)
    n = _norm(y)
    if n == 0:
        return _to_np(y)
    factor = mp.atanh(mp.sqrt(c) * n) / (mp.sqrt(c) * n)
    return _to_np([factor * yi for yi in y])


def exp_at(x, v, c):
    x, v, c = _vec(x), _vec(v), mpf(c)
    n = _norm(v)
    if n == 0:
        return _to_np(x)
    lam = 2 / (1 - c * _dot(x, x))
    factor = mp.tanh(mp.sqrt(c) * lam * n / 2) / (mp.sqrt(c) * n)
    return _to_np(_mob_add_mp(x, [factor * vi for vi in v], c))


def log_at(x, y, c):
    x, y, c = _vec(x), _vec(y), mpf(c)
    w = _mob_add_mp([-xi for xi in x], y, c)
    n = _norm(w)
    if n == 0:
        return _to_np([mpf(0)] * len(x))
    lam = 2 / (1 - c * _dot(x, x))
    factor = (2 / (mp.sqrt(c) * lam)) * mp.atanh(mp.sqrt(c) * n) / n
    return _to_np([factor * wi for wi in w])


def dist(x, y, c):
    x, y, c = _vec(x), _vec(y), mpf(c)
    w = _mob_add_mp([-xi for xi in x], y, c)
    return float(2 / mp.sqrt(c) * mp.atanh(mp.sqrt(c) * _norm(w)))


def softmax(scores):
    scores = [mpf(float(s)) for s in scores]
    exps = [mp.e ** s for s in scores]
    total = sum(exps)
    return _to_np([e / total for e in exps])


def brute_nmi(labels_a, labels_b) -> float:
    """NMI from its definition: explicit contingency table, arithmetic-mean
    entropy normalization, plain double loops."""
    a = list(labels_a)
    b = list(labels_b)
    n = len(a)
    ca, cb = sorted(set(a)), sorted(set(b))
    counts = {(i, j): 0 for i in ca for j in cb}
    for ai, bi in zip(a, b):
        counts[(ai, bi)] += 1
    mi = 0.0
    for i in ca:
        ni = sum(counts[(i, j)] for j in cb)
        for j in cb:
            nj = sum(counts[(k, j)] for k in ca)
            nij = counts[(i, j)]
            if nij:
                mi += (nij / n) * math.log(n * nij / (ni * nj))
    ha = -sum((sum(counts[(i, j)] for j in cb) / n)
              * math.log(sum(counts[(i, j)] for j in cb) / n)
              for i in ca if sum(counts[(i, j)] for j in cb))
    hb = -sum((sum(counts[(i, j)] for i in ca) / n)
              * math.log(sum(counts[(i, j)] for i in ca) / n)
              for j in cb if sum(counts[(i, j)] for i in ca))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    mean_h = 0.5 * (ha + hb)
    return mi / mean_h if mean_h else 0.0


def central_difference(f, p: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Plain central finite differences of a scalar function, no autodiff."""
    p = np.array(p, dtype=float)
    grad = np.zeros_like(p)
    flat = p.reshape(-1)
    g = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        up = f(p)
        flat[k] = orig - step
        down = f(p)
        flat[k] = orig
        g[k] = (up - down) / (2.0 * step)
    return grad


def rand_ball(rng: np.random.Generator, n: int, d: int, c: float,
              max_norm: float) -> np.ndarray:
    """Rows uniformly directed with radii uniform in [0, max_norm/sqrt(c))."""
    direction = rng.standard_normal((n, d))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-12)
    return direction * (max_norm / np.sqrt(c)) * rng.random((n, 1))

"""Batched Poincare-ball gyrovector operations, differentiable by construction.

Each function maps row-stacked points (one point per row) through autodiff
primitives, so gradients with respect to any tracked operand come for free.
Curvature c >= 0; at c == 0 every operation degenerates to its Euclidean
counterpart (the c -> 0 limit of the ball formula).
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import MIN_NORM, Tensor


def check_curvature(c: float) -> float:
    c = float(c)
    if not math.isfinite(c) or c < 0.0:
        raise ValueError(f"curvature must be a finite non-negative real, got {c}")
    return c


def max_ball_norm(c: float) -> float:
    """Largest row norm kept by projection: (1 - BALL_EPS)/sqrt(c)."""
    return (1.0 - ad.BALL_EPS) / math.sqrt(c)


def project(x: Tensor, c: float) -> Tensor:
    if c == 0.0:
        return x
    return ad.project_ball(x, c)


def conformal_factor(x: Tensor, c: float) -> Tensor:
    """lambda_x = 2 / (1 - c * ||x||^2), shape (n, 1)."""
    if c == 0.0:
        return ad.constant(np.full((x.shape[0], 1), 2.0))
    sq = ad.row_sum(ad.mul(x, x))
    return ad.div(2.0, ad.sub(1.0, ad.mul(c, sq)))


def mobius_add(x: Tensor, y: Tensor, c: float) -> Tensor:
    """Mobius addition x (+)_c y, rowwise."""
    if c == 0.0:
        return ad.add(x, y)
    x2 = ad.row_sum(ad.mul(x, x))
    y2 = ad.row_sum(ad.mul(y, y))
    xy = ad.row_sum(ad.mul(x, y))
    coef_x = ad.add(ad.add(1.0, ad.mul(2.0 * c, xy)), ad.mul(c, y2))
    coef_y = ad.sub(1.0, ad.mul(c, x2))
    num = ad.add(ad.mul(coef_x, x), ad.mul(coef_y, y))
    den = ad.add(ad.add(1.0, ad.mul(2.0 * c, xy)), ad.mul(c * c, ad.mul(x2, y2)))
    return project(ad.div(num, ad.clamp_min(den, MIN_NORM)), c)


def mobius_neg(x: Tensor) -> Tensor:
    return ad.neg(x)


def mobius_scalar_mul(r, x: Tensor, c: float) -> Tensor:
    """Mobius scalar multiplication r (x)_c x; r is a scalar or an (n, 1) column."""
    if c == 0.0:
        return ad.mul(r, x)
    sc = math.sqrt(c)
    xn = ad.clamp_min(ad.row_norm(x), MIN_NORM)
    arg = ad.mul(r, ad.atanh(ad.mul(sc, xn)))
    factor = ad.div(ad.tanh(arg), ad.mul(sc, xn))
    return project(ad.mul(x, factor), c)


def mobius_matvec(m: Tensor, x: Tensor, c: float) -> Tensor:
    """Mobius matrix-vector multiplication M (x)_c x, rowwise.

    `m` has shape (d_out, d_in); rows of x are d_in-dimensional points.
    Rows where either x or Mx vanishes map to the origin.
    """
    if c == 0.0:
        return ad.matmul(x, _transpose(m))
    sc = math.sqrt(c)
    mx = ad.matmul(x, _transpose(m))
    mx_norm = ad.row_norm(mx)
    x_norm = ad.row_norm(x)
    ratio = ad.div(mx_norm, ad.clamp_min(x_norm, MIN_NORM))
    arg = ad.mul(ratio, ad.atanh(ad.mul(sc, x_norm)))
    factor = ad.div(ad.tanh(arg), ad.mul(sc, ad.clamp_min(mx_norm, MIN_NORM)))
    return project(ad.mul(mx, factor), c)


def expmap0(v: Tensor, c: float) -> Tensor:
    """Exponential map at the origin: tangent vectors to ball points."""
    if c == 0.0:
        return v
    sc = math.sqrt(c)
    vn = ad.clamp_min(ad.row_norm(v), MIN_NORM)
    factor = ad.div(ad.tanh(ad.mul(sc, vn)), ad.mul(sc, vn))
    return project(ad.mul(v, factor), c)


def logmap0(y: Tensor, c: float) -> Tensor:
    """Logarithmic map at the origin: ball points to tangent vectors."""
    if c == 0.0:
        return y
    sc = math.sqrt(c)
    yn = ad.clamp_min(ad.row_norm(y), MIN_NORM)
    factor = ad.div(ad.atanh(ad.mul(sc, yn)), ad.mul(sc, yn))
    return ad.mul(y, factor)


def expmap(x: Tensor, v: Tensor, c: float) -> Tensor:
    """Exponential map at base point x."""
    if c == 0.0:
        return ad.add(x, v)
    sc = math.sqrt(c)
    vn = ad.clamp_min(ad.row_norm(v), MIN_NORM)
    lam = conformal_factor(x, c)
    arg = ad.mul(sc / 2.0, ad.mul(lam, vn))
    second = ad.mul(v, ad.div(ad.tanh(arg), ad.mul(sc, vn)))
    return mobius_add(x, second, c)


def logmap(x: Tensor, y: Tensor, c: float) -> Tensor:
    """Logarithmic map at base point x; logmap(x, x) is the zero vector."""
    if c == 0.0:
        return ad.sub(y, x)
    sc = math.sqrt(c)
    w = mobius_add(mobius_neg(x), y, c)
    wn = ad.clamp_min(ad.row_norm(w), MIN_NORM)
    lam = conformal_factor(x, c)
    coef = ad.div(ad.mul(2.0 / sc, ad.atanh(ad.mul(sc, wn))), ad.mul(lam, wn))
    return ad.mul(w, coef)


def distance(x: Tensor, y: Tensor, c: float) -> Tensor:
    """Geodesic distance, rowwise, shape (n, 1)."""
    if c == 0.0:
        return ad.mul(2.0, ad.row_norm(ad.sub(y, x)))
    sc = math.sqrt(c)
    w = mobius_add(mobius_neg(x), y, c)
    return ad.mul(2.0 / sc, ad.atanh(ad.mul(sc, ad.row_norm(w))))


def _transpose(m: Tensor) -> Tensor:
    if m.tape is None and not m.requires_grad:
        return ad.constant(m.data.T)
    return ad.transpose(m)

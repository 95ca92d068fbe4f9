"""Single-point API for Poincare-ball gyrovector arithmetic.

Thin wrappers over the batched kernels in :mod:`gyronet.gyro`: a
``BallPoint`` is one row of the batched representation plus its curvature.
All producing operations project back into the open ball, so the invariant
c * ||coords||^2 < 1 holds for every value of this type.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import gyro


def _as_vector(coords) -> np.ndarray:
    arr = np.asarray(coords, dtype=np.float64).reshape(-1)
    return arr


@dataclass(frozen=True)
class BallPoint:
    """A point of the open ball {x : c * ||x||^2 < 1}."""

    coords: np.ndarray
    c: float

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_vector(self.coords))
        object.__setattr__(self, "c", gyro.check_curvature(self.c))
        if not np.all(np.isfinite(self.coords)):
            raise FloatingPointError("ball point coordinates must be finite")
        if self.c > 0.0 and self.c * float(self.coords @ self.coords) >= 1.0:
            raise ValueError("point lies outside the open ball; use project_to_ball")

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class TangentVector:
    """A vector in the tangent space at `base` (unconstrained norm)."""

    coords: np.ndarray
    base: BallPoint = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_vector(self.coords))
        if not np.all(np.isfinite(self.coords)):
            raise FloatingPointError("tangent coordinates must be finite")
        if self.coords.shape[0] != self.base.dim:
            raise ValueError("tangent vector dimension differs from its base point")


def origin(dim: int, c: float) -> BallPoint:
    return BallPoint(np.zeros(dim), c)


def project_to_ball(coords, c: float) -> BallPoint:
    """Rescale a raw vector onto norm (1 - 1e-5)/sqrt(c) if it falls outside."""
    c = gyro.check_curvature(c)
    vec = _as_vector(coords)
    if not np.all(np.isfinite(vec)):
        raise FloatingPointError("cannot project a non-finite vector")
    if c > 0.0:
        norm = float(np.linalg.norm(vec))
        limit = gyro.max_ball_norm(c)
        if norm > limit:
            vec = vec * (limit / norm)
    return BallPoint(vec, c)


def _check_pair(x: BallPoint, y: BallPoint):
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if x.c != y.c:
        raise ValueError(f"curvature mismatch: {x.c} vs {y.c}")


def _row(p) -> ad.Tensor:
    return ad.constant(p.coords.reshape(1, -1))


def _point(t: ad.Tensor, c: float) -> BallPoint:
    return BallPoint(t.data[0], c)


def conformal_factor(x: BallPoint) -> float:
    """2 / (1 - c * ||x||^2); equals 2 at the origin and for c = 0."""
    return gyro.conformal_factor(_row(x), x.c).item()


def mobius_add(x: BallPoint, y: BallPoint) -> BallPoint:
    _check_pair(x, y)
    return _point(gyro.mobius_add(_row(x), _row(y), x.c), x.c)


def mobius_neg(x: BallPoint) -> BallPoint:
    return BallPoint(-x.coords, x.c)


def mobius_scalar_mul(r: float, x: BallPoint) -> BallPoint:
    return _point(gyro.mobius_scalar_mul(float(r), _row(x), x.c), x.c)


def mobius_matvec(m: np.ndarray, x: BallPoint) -> BallPoint:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != x.dim:
        raise ValueError(f"matrix shape {m.shape} does not accept dim-{x.dim} points")
    return _point(gyro.mobius_matvec(ad.constant(m), _row(x), x.c), x.c)


def exp_map(x: BallPoint, v: TangentVector) -> BallPoint:
    if v.base.dim != x.dim or v.base.c != x.c:
        raise ValueError("tangent vector does not live at a compatible base point")
    return _point(gyro.expmap(_row(x), ad.constant(v.coords.reshape(1, -1)), x.c), x.c)


def log_map(x: BallPoint, y: BallPoint) -> TangentVector:
    _check_pair(x, y)
    if np.array_equal(x.coords, y.coords):
        return TangentVector(np.zeros(x.dim), x)
    out = gyro.logmap(_row(x), _row(y), x.c)
    return TangentVector(out.data[0], x)


def distance(x: BallPoint, y: BallPoint) -> float:
    _check_pair(x, y)
    if np.array_equal(x.coords, y.coords):
        return 0.0
    return gyro.distance(_row(x), _row(y), x.c).item()

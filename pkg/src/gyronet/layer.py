"""Hyperbolic graph attention layer.

Pipeline per node: map raw features into the ball (exp map at the origin),
apply a Mobius matrix transform, score every neighbor edge by negative
geodesic distance, softmax-normalize per node, scale each neighbor by its
weight (Mobius scalar multiplication), aggregate, and pass the result
through a pointwise ELU (which contracts coordinates, so outputs stay in
the ball).

Two aggregation paths are provided:

* ``serial``       left-associated chain of Mobius additions in ascending
                   neighbor-index order; order-sensitive by nature.
* ``accelerated``  log map to the origin tangent space, plain vector sum,
                   exp map back; order-insensitive and batched.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import gyro
from .autodiff import Tensor
from .graphs import Adjacency


@dataclass
class LayerParams:
    weight: np.ndarray            # (d_out, d_in)
    curvature: float = 1.0
    aggregation: str = "accelerated"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 2 or self.weight.shape[0] < 1:
            raise ValueError(f"weight must be a d_out x d_in matrix, got {self.weight.shape}")
        if not np.all(np.isfinite(self.weight)):
            raise ValueError("weight contains non-finite entries")
        gyro.check_curvature(self.curvature)
        if self.curvature <= 0.0:
            raise ValueError("the attention layer requires positive curvature")
        if self.aggregation not in ("serial", "accelerated"):
            raise ValueError(f"unknown aggregation mode: {self.aggregation!r}")


@dataclass(frozen=True)
class _EdgePlan:
    """Precomputed index arrays driving the batched edge computations."""

    src: np.ndarray
    dst: np.ndarray
    indptr: np.ndarray
    nonself: np.ndarray           # 1.0 on (i, j != i) edges, 0.0 on self-loops
    steps: tuple[tuple[np.ndarray, np.ndarray], ...] = field(repr=False)


_PLANS: "weakref.WeakKeyDictionary[Adjacency, _EdgePlan]" = weakref.WeakKeyDictionary()


def _plan(adj: Adjacency) -> _EdgePlan:
    plan = _PLANS.get(adj)
    if plan is None:
        src, dst = adj.edge_src, adj.edge_dst
        degrees = adj.degrees
        steps = []
        for k in range(1, int(degrees.max())):
            nodes = np.where(degrees > k)[0]
            steps.append((nodes, adj.indptr[nodes] + k))
        plan = _EdgePlan(src=src, dst=dst, indptr=adj.indptr,
                         nonself=(src != dst).astype(np.float64).reshape(-1, 1),
                         steps=tuple(steps))
        _PLANS[adj] = plan
    return plan


def project_features(features: Tensor, weight: Tensor, c: float) -> Tensor:
    """Ball representation of every node: M (x)_c exp0(f_i).

    Computed in a rearranged but exactly equivalent form that touches the
    wide feature matrix only twice (one row norm, one matmul): the per-row
    exp-map scale commutes through the matmul, and atanh(tanh(z)) = z
    collapses the inner atanh.  The ball margin becomes a clamp on the
    (column-shaped) tanh magnitude, which equals rescaling the row.
    """
    sc = np.sqrt(c)
    fn = ad.clamp_min(ad.row_norm(features), gyro.MIN_NORM)
    sfn = ad.mul(sc, fn)
    vm = ad.matmul(features, ad.transpose(weight) if weight.requires_grad
                   else ad.constant(weight.data.T))
    mx = ad.mul(vm, ad.div(ad.tanh(sfn), sfn))          # = (M p) with p = exp0(f)
    mx_norm = ad.clamp_min(ad.row_norm(mx), gyro.MIN_NORM)
    p_norm = ad.clamp_min(ad.div(ad.tanh(sfn), sc), gyro.MIN_NORM)
    arg = ad.mul(ad.div(mx_norm, p_norm), sfn)          # (|Mp|/|p|) atanh(sqrt(c)|p|)
    magnitude = ad.clamp_max(ad.tanh(arg), 1.0 - ad.BALL_EPS)
    return ad.mul(mx, ad.div(magnitude, ad.mul(sc, mx_norm)))


def attention_scores(h: Tensor, adj: Adjacency, c: float) -> Tensor:
    """Per-edge score: negative geodesic distance; exactly zero on self-loops."""
    plan = _plan(adj)
    hi = ad.gather_rows(h, plan.src)
    hj = ad.gather_rows(h, plan.dst)
    d = gyro.distance(hi, hj, c)
    return ad.neg(ad.mul(d, ad.constant(plan.nonself)))


def normalize_attention(scores: Tensor, adj: Adjacency) -> Tensor:
    """Per-node softmax over each node's incident edges (max-shifted)."""
    plan = _plan(adj)
    # every segment is non-empty (self-loops), so reduceat is safe
    shift = np.maximum.reduceat(scores.data, plan.indptr[:-1], axis=0)
    e = ad.exp(ad.sub(scores, ad.gather_rows(ad.constant(shift), plan.src)))
    denom = ad.segment_sum(e, plan.indptr)
    return ad.div(e, ad.gather_rows(denom, plan.src))


def _weighted_neighbors(h: Tensor, weights: Tensor, plan: _EdgePlan, c: float) -> Tensor:
    return gyro.mobius_scalar_mul(weights, ad.gather_rows(h, plan.dst), c)


def aggregate_serial(h: Tensor, weights: Tensor, adj: Adjacency, c: float) -> Tensor:
    """Left-associated Mobius-addition chain in ascending neighbor order,
    advanced one neighbor rank at a time across all unfinished nodes."""
    plan = _plan(adj)
    v = _weighted_neighbors(h, weights, plan, c)
    acc = ad.gather_rows(v, plan.indptr[:-1])
    for nodes, positions in plan.steps:
        summed = gyro.mobius_add(ad.gather_rows(acc, nodes),
                                 ad.gather_rows(v, positions), c)
        acc = ad.set_rows(acc, nodes, summed)
    return ad.elu(acc)


def aggregate_accelerated(h: Tensor, weights: Tensor, adj: Adjacency, c: float) -> Tensor:
    """Order-insensitive aggregation through the origin tangent space."""
    plan = _plan(adj)
    v = _weighted_neighbors(h, weights, plan, c)
    tangent = gyro.logmap0(v, c)
    return ad.elu(gyro.expmap0(ad.segment_sum(tangent, plan.indptr), c))


def layer_forward(features: Tensor, weight: Tensor, adj: Adjacency, c: float,
                  aggregation: str = "accelerated", *, dropout: float = 0.0,
                  training: bool = False,
                  rng: np.random.Generator | None = None,
                  scratch: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
    """Full layer; returns (node embeddings, per-edge attention weights).

    Dropout (inverted scaling) is applied to the raw feature matrix only,
    and only when `training` is set.  `scratch` may supply a reusable
    feature-shaped buffer so repeated training steps do not reallocate it;
    the caller must not read a previously returned forward after passing
    the same scratch again.
    """
    if training and dropout > 0.0:
        if rng is None:
            raise ValueError("training-mode dropout needs an RNG")
        data = features.data
        if scratch is None or scratch.shape != data.shape:
            scratch = np.empty_like(data)
        rng.random(out=scratch)
        np.greater_equal(scratch, dropout, out=scratch, casting="unsafe")
        scratch *= 1.0 / (1.0 - dropout)
        np.multiply(scratch, data, out=scratch)
        features = ad.constant(scratch)
    h = project_features(features, weight, c)
    scores = attention_scores(h, adj, c)
    weights = normalize_attention(scores, adj)
    if aggregation == "serial":
        out = aggregate_serial(h, weights, adj, c)
    elif aggregation == "accelerated":
        out = aggregate_accelerated(h, weights, adj, c)
    else:
        raise ValueError(f"unknown aggregation mode: {aggregation!r}")
    return out, weights

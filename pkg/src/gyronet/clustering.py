"""K-means clustering of tangent-space embeddings and NMI scoring.

Embeddings are mapped to the origin tangent space before clustering, the
same view the readout trains against.  K-means uses k-means++ seeding, 10
restarts and a 300-iteration cap, keeping the lowest-inertia run; ties in
assignment go to the lowest centroid index.
"""

from __future__ import annotations

import numpy as np
from sklearn.cluster import KMeans

from . import gyro
from .autodiff import constant
from .graphs import GraphDataset
from .model import Classifier, forward


def kmeans_labels(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if k > len(points):
        raise ValueError(f"cannot form {k} clusters from {len(points)} points")
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, max_iter=300,
                random_state=seed)
    return km.fit_predict(points).astype(np.int64)


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information with arithmetic-mean entropy normalization."""
    a = np.asarray(labels_a, dtype=np.int64)
    b = np.asarray(labels_b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label arrays must be 1-D and of equal length")
    n = len(a)
    if n == 0:
        raise ValueError("label arrays are empty")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka, kb = ai.max() + 1, bi.max() + 1
    table = np.zeros((ka, kb))
    np.add.at(table, (ai, bi), 1.0)
    pij = table / n
    pa = pij.sum(axis=1, keepdims=True)
    pb = pij.sum(axis=0, keepdims=True)
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / (pa @ pb)[nz])))
    ha = -float(np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    hb = -float(np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    if ha == 0.0 and hb == 0.0:
        return 1.0  # both partitions are single clusters, hence identical
    mean_h = 0.5 * (ha + hb)
    if mean_h == 0.0:
        return 0.0
    return mi / mean_h


def tangent_embeddings(model: Classifier, ds: GraphDataset) -> np.ndarray:
    """Origin log map of the trained layer's node embeddings."""
    emb = forward(model, ds).embeddings
    return gyro.logmap0(constant(emb.data), model.layer.curvature).data


def cluster_nmi(model: Classifier, ds: GraphDataset, seed: int,
                mask: np.ndarray | None = None) -> float:
    """Cluster the (test) embeddings into num_classes groups; NMI vs labels."""
    mask = ds.test_idx if mask is None else np.asarray(mask, dtype=np.int64)
    points = tangent_embeddings(model, ds)[mask]
    assigned = kmeans_labels(points, ds.num_classes, seed)
    return nmi(assigned, ds.labels[mask])

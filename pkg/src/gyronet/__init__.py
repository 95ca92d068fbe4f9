"""Poincare-ball gyrovector arithmetic and a hyperbolic graph attention
classifier with training, evaluation and benchmarking tools."""

from .autodiff import (Gradient, Tape, Tensor, backward, constant,
                       finite_difference_check)
from .ball import (BallPoint, TangentVector, conformal_factor, distance,
                   exp_map, log_map, mobius_add, mobius_matvec, mobius_neg,
                   mobius_scalar_mul, origin, project_to_ball)
from .clustering import cluster_nmi, kmeans_labels, nmi
from .graphs import (Adjacency, DatasetError, GraphDataset, adjacency_from_edges,
                     balanced_tree, generate_synthetic, load_dataset,
                     preferential_attachment, save_dataset, star, two_cliques,
                     validate)
from .layer import (LayerParams, aggregate_accelerated, aggregate_serial,
                    attention_scores, layer_forward, normalize_attention,
                    project_features)
from .model import (Classifier, EpochStats, TrainConfig, evaluate_accuracy,
                    forward, init_classifier, loss_cross_entropy, train)

__version__ = "0.1.0"

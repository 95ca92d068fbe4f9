"""Classifier forward, cross-entropy, training loop semantics."""

import numpy as np
import pytest

import gyronet.autodiff as ad
from gyronet.autodiff import Tape, backward
from gyronet.graphs import two_cliques
from gyronet.layer import LayerParams
from gyronet.model import (Classifier, TrainConfig, accuracy_from_logits,
                           evaluate_accuracy, forward, init_classifier,
                           loss_cross_entropy, train)

import reference


def toy_config(**kw):
    base = dict(dim=4, dropout=0.0, weight_decay=0.0, max_epochs=50,
                patience=50, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def test_zero_parameters_give_zero_logits(toyclique):
    layer = LayerParams(weight=np.zeros((4, toyclique.num_features)))
    model = Classifier(layer=layer, w_out=np.zeros((2, 4)), b_out=np.zeros(2))
    out = forward(model, toyclique)
    assert np.array_equal(out.logits.data, np.zeros((toyclique.num_nodes, 2)))


def test_zero_features_give_origin_embeddings(toyclique):
    zeroed = type(toyclique)(
        features=np.zeros_like(toyclique.features), labels=toyclique.labels,
        adjacency=toyclique.adjacency, train_idx=toyclique.train_idx,
        val_idx=toyclique.val_idx, test_idx=toyclique.test_idx,
        num_classes=toyclique.num_classes)
    rng = np.random.default_rng(4)
    model = init_classifier(zeroed.num_features, 2, toy_config(dim=2), rng)
    emb = forward(model, zeroed).embeddings.data
    assert np.array_equal(emb, np.zeros((zeroed.num_nodes, 2)))


def test_single_class_softmax_probability_one(toyclique):
    rng = np.random.default_rng(0)
    layer = LayerParams(weight=rng.uniform(-0.1, 0.1, (4, toyclique.num_features)))
    model = Classifier(layer=layer, w_out=rng.uniform(-1, 1, (1, 4)),
                       b_out=np.zeros(1))
    logits = forward(model, toyclique).logits
    lse = ad.row_logsumexp(logits)
    probs = np.exp(logits.data - lse.data)
    assert np.allclose(probs, 1.0, atol=1e-15)


def test_cross_entropy_golden_values():
    # ln(1 + e^-2) for logits (2, 0) with label 0
    logits = ad.constant(np.array([[2.0, 0.0]]))
    loss = loss_cross_entropy(logits, np.array([0]), np.array([0]))
    assert abs(loss.item() - 0.12692801104297263) < 1e-15

    uniform = ad.constant(np.zeros((5, 7)))
    loss = loss_cross_entropy(uniform, np.zeros(5, dtype=int), np.arange(5))
    assert abs(loss.item() - np.log(7.0)) < 1e-15

    margin = np.full((3, 4), -100.0)
    margin[np.arange(3), [1, 2, 0]] = 100.0
    loss = loss_cross_entropy(ad.constant(margin), np.array([1, 2, 0]),
                              np.arange(3))
    assert loss.item() >= 0.0
    assert loss.item() < 1e-40


def test_cross_entropy_rejects_empty_mask():
    with pytest.raises(ValueError):
        loss_cross_entropy(ad.constant(np.zeros((2, 2))), np.array([0, 1]),
                           np.array([], dtype=int))


def test_label_permutation_equivariance(toyclique):
    rng = np.random.default_rng(1)
    config = toy_config()
    model = init_classifier(toyclique.num_features, 2, config, rng)
    base_loss = loss_cross_entropy(forward(model, toyclique).logits,
                                   toyclique.labels, toyclique.train_idx).item()
    permuted = Classifier(layer=model.layer, w_out=model.w_out[::-1].copy(),
                          b_out=model.b_out[:, ::-1].copy())
    flipped_labels = 1 - toyclique.labels
    perm_loss = loss_cross_entropy(forward(permuted, toyclique).logits,
                                   flipped_labels, toyclique.train_idx).item()
    assert abs(base_loss - perm_loss) < 1e-12


def test_gradient_of_full_loss_matches_fd():
    ds = two_cliques(clique_size=5, feature_dim=6, seed=11, train_per_class=2)
    rng = np.random.default_rng(2)
    config = toy_config(dim=3)
    model = init_classifier(ds.num_features, ds.num_classes, config, rng)

    for agg in ("accelerated", "serial"):
        model.layer.aggregation = agg
        for target in ("weight", "w_out"):
            tape = Tape()
            result = forward(model, ds, tape=tape)
            loss = loss_cross_entropy(result.logits, ds.labels, ds.train_idx)
            analytic = backward(loss, tape)[result.params[target]].data

            original = getattr(model, target) if target == "w_out" \
                else model.layer.weight

            def eval_at(p):
                saved = original.copy()
                original[...] = p
                out = loss_cross_entropy(forward(model, ds).logits, ds.labels,
                                         ds.train_idx).item()
                original[...] = saved
                return out

            fd = reference.central_difference(eval_at, original)
            rel = np.max(np.abs(fd - analytic) / np.maximum(1.0, np.abs(analytic)))
            assert rel < 1e-4, f"{agg}/{target}: rel err {rel}"


def test_train_reaches_perfect_accuracy_on_separable_toy(toyclique):
    config = toy_config(max_epochs=200, patience=200)
    model, history = train(toyclique, config)
    assert any(h.train_acc == 1.0 for h in history)
    assert evaluate_accuracy(model, toyclique, toyclique.test_idx) == 1.0


def test_patience_zero_runs_exactly_one_epoch(toyclique):
    _, history = train(toyclique, toy_config(patience=0))
    assert len(history) == 1


def test_same_seed_bitwise_identical(toyclique):
    m1, h1 = train(toyclique, toy_config(max_epochs=20, patience=20))
    m2, h2 = train(toyclique, toy_config(max_epochs=20, patience=20))
    assert np.array_equal(m1.layer.weight, m2.layer.weight)
    assert np.array_equal(m1.w_out, m2.w_out)
    assert np.array_equal(m1.b_out, m2.b_out)
    assert [s.val_acc for s in h1] == [s.val_acc for s in h2]
    assert [s.train_loss for s in h1] == [s.train_loss for s in h2]


def test_training_loss_non_increasing_first_epochs(toyclique):
    _, history = train(toyclique, toy_config(max_epochs=10, patience=10))
    losses = [s.train_loss for s in history]
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))


def test_best_validation_checkpoint_returned(toyclique):
    model, history = train(toyclique, toy_config(max_epochs=30, patience=30))
    best = max(s.val_acc for s in history)
    assert evaluate_accuracy(model, toyclique, toyclique.val_idx) == best


def test_divergence_raises_numeric_error(toyclique):
    # lr * weight_decay > 1 makes the decoupled decay term explode geometrically
    config = toy_config(learning_rate=1e200, weight_decay=0.5,
                        max_epochs=50, patience=50)
    with pytest.raises(FloatingPointError, match="epoch"), \
            np.errstate(all="ignore"):
        train(toyclique, config)


def test_accuracy_ties_break_to_lowest_class():
    logits = np.zeros((4, 3))
    labels = np.array([0, 1, 0, 2])
    acc = accuracy_from_logits(logits, labels, np.arange(4))
    assert acc == 0.5  # argmax ties resolve to class 0
    with pytest.raises(ValueError):
        accuracy_from_logits(logits, labels, np.array([], dtype=int))


def test_constant_majority_prediction_accuracy():
    logits = np.tile([1.0, 0.0], (10, 1))
    labels = np.array([0] * 6 + [1] * 4)
    assert accuracy_from_logits(logits, labels, np.arange(10)) == 0.6


def test_concurrent_training_runs_are_independent(toyclique):
    # distinct tapes on distinct threads; results must equal sequential runs
    import concurrent.futures

    def run(seed):
        return train(toyclique, toy_config(max_epochs=15, patience=15,
                                           seed=seed))

    sequential = {seed: run(seed) for seed in (1, 2, 3)}
    with concurrent.futures.ThreadPoolExecutor(max_workers=3) as pool:
        parallel = dict(zip((1, 2, 3), pool.map(run, (1, 2, 3))))
    for seed in (1, 2, 3):
        m_seq, h_seq = sequential[seed]
        m_par, h_par = parallel[seed]
        assert np.array_equal(m_seq.layer.weight, m_par.layer.weight)
        assert np.array_equal(m_seq.w_out, m_par.w_out)
        assert [s.val_acc for s in h_seq] == [s.val_acc for s in h_par]


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(patience=11, max_epochs=10)
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)
    with pytest.raises(ValueError):
        TrainConfig(curvature=0.0)

import numpy as np
import pytest

from selfevoc.augment import AugmentedSet
from selfevoc.classifier import (accuracy, cross_entropy, finetune, init_classifier,
                                 load_classifier, predict_proba, predict_target,
                                 save_classifier)
from selfevoc.numerics import ContractError, finite_diff_check


def aug_from(X, y):
    X = np.asarray(X, dtype=float)
    return AugmentedSet(X, np.asarray(y), np.arange(len(y)), np.full((len(y), 3), np.nan))


def separable(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0.75).astype(int)
    keep = np.abs(X[:, 0] + 0.5 * X[:, 1] - 0.75) > 0.05   # margin
    return X[keep], y[keep]


def test_memorises_one_per_class():
    X = np.random.default_rng(0).random((4, 10))
    st = finetune(init_classifier(10, 4, (16,), seed=0), aug_from(X, [0, 1, 2, 3]), epochs=200)
    assert accuracy(st, X, [0, 1, 2, 3]) == 1.0


def test_lr_zero_unchanged():
    st = init_classifier(3, 2, (4,), seed=0)
    out = finetune(st, aug_from(np.eye(3)[:2], [0, 1]), lr=0.0)
    assert all(np.array_equal(a, b) for a, b in zip(st.net.params, out.net.params))


def test_separable_2d():
    X, y = separable()
    st = finetune(init_classifier(2, 2, (16, 8), seed=1), aug_from(X, y), epochs=200, batch=32,
                  lr=0.05, seed=0)
    assert accuracy(st, X, y) >= 0.99


def test_warm_start_and_loss_decrease():
    X, y = separable(seed=3)
    st = init_classifier(2, 2, (8,), seed=2)
    ce0 = cross_entropy(st, X, y)
    one = finetune(st, aug_from(X, y), epochs=5, seed=0)
    assert cross_entropy(one, X, y) < ce0
    two = finetune(one, aug_from(X, y), epochs=5, seed=0)
    assert two.epochs_seen == 10
    fresh = finetune(init_classifier(2, 2, (8,), seed=2), aug_from(X, y), epochs=5, seed=0)
    assert any(not np.array_equal(a, b) for a, b in zip(two.net.params, fresh.net.params))
    again = finetune(st, aug_from(X, y), epochs=5, seed=0)
    assert all(np.array_equal(a, b) for a, b in zip(one.net.params, again.net.params))


def test_bad_labels():
    st = init_classifier(2, 2, (4,), seed=0)
    with pytest.raises(ContractError):
        finetune(st, aug_from(np.zeros((1, 2)), [2]))
    with pytest.raises(ContractError):
        finetune(st, aug_from(np.zeros((0, 2)), np.zeros(0, int)))


def test_smoothing_examples():
    st = init_classifier(3, 2, (4,), seed=0)
    X = np.random.default_rng(0).random((6, 3))
    X[4] = X[1]
    P = predict_target(st, X, 0.05)
    hard = np.argmax(predict_proba(st, X), axis=1)
    np.testing.assert_allclose(P[np.arange(6), hard], 0.975)
    np.testing.assert_allclose(P[np.arange(6), 1 - hard], 0.025)
    np.testing.assert_array_equal(P[1], P[4])
    P0 = predict_target(st, X, 0.0)
    assert set(np.unique(P0)) == {0.0, 1.0}
    with pytest.raises(ContractError):
        predict_target(st, X, 0.7)


def test_target_bounds_and_argmax():
    st = init_classifier(5, 4, (8,), seed=4)
    X = np.random.default_rng(1).random((50, 5))
    P = predict_target(st, X, 0.2)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert P.min() >= 0.2 / 4 - 1e-15 and P.max() <= 1 - 0.2 * 3 / 4 + 1e-15
    np.testing.assert_array_equal(np.argmax(P, 1), np.argmax(predict_proba(st, X), 1))


@pytest.mark.parametrize("seed", range(5))
def test_backprop_fd(seed):
    rng = np.random.default_rng(seed)
    st = init_classifier(4, 3, (5,), seed=seed)
    for b in st.net.biases:
        b[...] = rng.normal(scale=0.5, size=b.shape)
    X = rng.random((3, 4))
    y = rng.integers(3, size=3)
    for k, p in enumerate(st.net.params):
        def f(v, k=k):
            s = st.copy()
            s.net.params[k][...] = v
            return cross_entropy(s, X, y)

        def g(v, k=k):
            from selfevoc.classifier import softmax
            s = st.copy()
            s.net.params[k][...] = v
            logits, cache = s.net.forward(X, keep=True)
            d = softmax(logits)
            d[np.arange(3), y] -= 1
            return s.net.backward(cache, d / 3)[0][k]
        assert finite_diff_check(f, g, p.copy()) <= 1e-4


def test_checkpoint_round_trip(tmp_path):
    st = init_classifier(6, 3, (5, 4), seed=0)
    save_classifier(st, tmp_path / "c.sevc")
    back = load_classifier(tmp_path / "c.sevc")
    X = np.random.default_rng(0).random((4, 6))
    np.testing.assert_array_equal(predict_proba(back, X), predict_proba(st, X))

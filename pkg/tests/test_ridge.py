import numpy as np
import pytest

from rmtransfer.gmm import LabeledDataset, sample_class_data, substream
from rmtransfer.ridge import (
    LinearClassifier,
    decision_scores,
    empirical_accuracy,
    fine_tune,
    fine_tune_multi,
    load_classifier,
    predict_labels,
    save_classifier,
    train_ridge,
)


def _random_dataset(p, m, seed):
    rng = substream(seed)
    feats = rng.standard_normal((p, m))
    labels = np.where(rng.standard_normal(m) > 0, 1.0, -1.0)
    if np.all(labels == labels[0]):
        labels[0] = -labels[0]
    return LabeledDataset(features=feats, labels=labels)


def test_train_ridge_single_sample_rank_one():
    # one sample: (xx' + g I)^{-1} x y = y x / (g + ||x||^2)
    x = np.array([1.0, -2.0, 0.5])
    data = LabeledDataset(features=x[:, None], labels=np.array([1.0]))
    for gamma in (0.1, 1.0, 7.5):
        w = train_ridge(data, gamma)
        np.testing.assert_allclose(w.weights, x / (gamma + x @ x), rtol=1e-12)


def test_train_ridge_huge_gamma_shrinks_to_zero():
    data = _random_dataset(10, 30, 1)
    gamma = 1e9
    w = train_ridge(data, gamma)
    bound = np.linalg.norm(data.features @ data.labels) / (data.m * gamma)
    assert np.linalg.norm(w.weights) <= bound * (1 + 1e-9)


def test_train_ridge_matches_generic_solver():
    data = _random_dataset(20, 50, 2)
    gamma = 0.7
    X, y = data.features, data.labels
    oracle = np.linalg.solve(X @ X.T / 50 + gamma * np.eye(20), X @ y) / 50
    w = train_ridge(data, gamma)
    np.testing.assert_allclose(w.weights, oracle, rtol=1e-10)


@pytest.mark.parametrize("p,m", [(30, 80), (80, 30), (64, 64), (200, 150)])
def test_primal_dual_equivalence(p, m):
    data = _random_dataset(p, m, p * 1000 + m)
    wp = train_ridge(data, 0.3, route="primal")
    wd = train_ridge(data, 0.3, route="dual")
    err = np.linalg.norm(wp.weights - wd.weights) / np.linalg.norm(wp.weights)
    assert err <= 1e-10


def test_train_ridge_rejects_bad_gamma():
    data = _random_dataset(4, 6, 3)
    with pytest.raises(ValueError):
        train_ridge(data, 0.0)
    with pytest.raises(ValueError):
        train_ridge(data, -1.0)


def test_fine_tune_alpha_zero_is_no_ft():
    target = _random_dataset(15, 25, 4)
    source = LinearClassifier(weights=substream(5).standard_normal(15))
    w0 = train_ridge(target, 0.5)
    wa = fine_tune(source, target, 0.5, 0.0)
    np.testing.assert_allclose(wa.weights, w0.weights, rtol=1e-14)


def test_fine_tune_equals_adapter_route():
    # w + a*g*Q w_src must equal a*w_src + adapter with the adapter solving
    # the residual ridge problem (1/n) Q (X y - a X X' w_src)
    target = _random_dataset(12, 20, 6)
    source = LinearClassifier(weights=substream(7).standard_normal(12))
    gamma, alpha = 0.8, 1.7
    X, y, n = target.features, target.labels, target.m
    Q = np.linalg.inv(X @ X.T / n + gamma * np.eye(12))
    adapter = Q @ (X @ y - alpha * X @ (X.T @ source.weights)) / n
    expected = alpha * source.weights + adapter
    got = fine_tune(source, target, gamma, alpha)
    np.testing.assert_allclose(got.weights, expected, rtol=1e-10)


def test_fine_tune_vanishing_gamma_in_source_span():
    # with the source trained on the same sample, gamma -> 0 removes the
    # alpha dependence even for p > n (the update stays in the data range)
    target = _random_dataset(60, 20, 8)
    source = train_ridge(target, 2.0)
    w0 = fine_tune(source, target, 1e-8, 0.0)
    for alpha in (-5.0, -1.0, 2.0, 5.0):
        wa = fine_tune(source, target, 1e-8, alpha)
        rel = np.linalg.norm(wa.weights - w0.weights) / np.linalg.norm(w0.weights)
        assert rel <= 1e-4


def test_fine_tune_affine_in_alpha():
    target = _random_dataset(10, 14, 9)
    source = LinearClassifier(weights=substream(10).standard_normal(10))
    w0 = fine_tune(source, target, 1.0, 0.0)
    w1 = fine_tune(source, target, 1.0, 1.0)
    for alpha in (-3.0, 0.25, 2.0):
        wa = fine_tune(source, target, 1.0, alpha)
        expected = w0.weights + alpha * (w1.weights - w0.weights)
        np.testing.assert_allclose(wa.weights, expected, rtol=1e-10, atol=1e-14)


def test_fine_tune_dimension_mismatch():
    target = _random_dataset(5, 8, 11)
    with pytest.raises(ValueError):
        fine_tune(LinearClassifier(weights=np.ones(6)), target, 1.0, 1.0)


def test_fine_tune_multi_single_source_reduction():
    target = _random_dataset(9, 12, 12)
    source = LinearClassifier(weights=substream(13).standard_normal(9))
    a = fine_tune(source, target, 0.6, 1.9)
    b = fine_tune_multi([source], np.array([1.9]), target, 0.6)
    np.testing.assert_allclose(b.weights, a.weights, rtol=1e-12)


def test_fine_tune_multi_zero_alphas():
    target = _random_dataset(9, 12, 14)
    sources = [LinearClassifier(weights=substream(s).standard_normal(9)) for s in (1, 2)]
    got = fine_tune_multi(sources, np.zeros(2), target, 0.6)
    np.testing.assert_allclose(got.weights, train_ridge(target, 0.6).weights, rtol=1e-12)


def test_fine_tune_multi_linearity():
    target = _random_dataset(11, 16, 15)
    sources = [LinearClassifier(weights=substream(s).standard_normal(11)) for s in (3, 4, 5)]
    a1 = np.array([0.5, -1.0, 2.0])
    a2 = np.array([1.5, 0.3, -0.7])
    w0 = fine_tune_multi(sources, np.zeros(3), target, 0.9).weights
    wsum = fine_tune_multi(sources, a1 + a2, target, 0.9).weights
    w1 = fine_tune_multi(sources, a1, target, 0.9).weights
    w2 = fine_tune_multi(sources, a2, target, 0.9).weights
    np.testing.assert_allclose(wsum - w0, (w1 - w0) + (w2 - w0), rtol=1e-10, atol=1e-13)


def test_fine_tune_multi_empty_sources():
    target = _random_dataset(5, 6, 16)
    with pytest.raises(ValueError):
        fine_tune_multi([], np.array([]), target, 1.0)


def test_decision_scores_and_sign_convention():
    data = LabeledDataset(features=np.array([[2.0, 0.0], [0.0, 0.0]]),
                          labels=np.array([1.0, -1.0]))
    w = LinearClassifier(weights=np.array([1.0, 0.0]))
    np.testing.assert_allclose(decision_scores(w, data), [2.0, 0.0])
    # zero score classifies as +1
    np.testing.assert_allclose(predict_labels(w, data), [1.0, 1.0])
    zero = LinearClassifier(weights=np.zeros(2))
    np.testing.assert_allclose(predict_labels(zero, data), [1.0, 1.0])


def test_predictions_invariant_under_positive_scaling():
    data = _random_dataset(8, 40, 17)
    w = LinearClassifier(weights=substream(18).standard_normal(8))
    base = predict_labels(w, data)
    for c in (0.1, 3.0, 1e6):
        scaled = LinearClassifier(weights=c * w.weights)
        np.testing.assert_array_equal(predict_labels(scaled, data), base)


def test_convex_combination_equivalence():
    # for alpha > 0 the fine-tuned rule equals the convex mix
    # rho*w_src + (1-rho)*adapter with rho = alpha/(1+alpha), up to the
    # positive factor (1+alpha) -- identical predictions on every input
    target = _random_dataset(10, 15, 19)
    source = LinearClassifier(weights=substream(20).standard_normal(10))
    gamma, alpha = 0.4, 2.3
    wa = fine_tune(source, target, gamma, alpha)
    adapter = wa.weights - alpha * source.weights
    rho = alpha / (1.0 + alpha)
    mix = LinearClassifier(weights=rho * source.weights + (1 - rho) * adapter)
    probe = _random_dataset(10, 200, 21)
    np.testing.assert_array_equal(predict_labels(wa, probe), predict_labels(mix, probe))


def test_empirical_accuracy_zero_model_balanced():
    data = sample_class_data(100, np.ones(4), substream(22))
    zero = LinearClassifier(weights=np.zeros(4))
    assert empirical_accuracy(zero, data) == pytest.approx(0.5)


def test_empirical_accuracy_separable():
    mu = np.array([2.0, 0.0])
    feats = np.column_stack([mu, -mu])
    data = LabeledDataset(features=feats, labels=np.array([1.0, -1.0]))
    w = LinearClassifier(weights=mu)
    assert empirical_accuracy(w, data) == 1.0


def test_empirical_accuracy_empty():
    with pytest.raises(ValueError):
        empirical_accuracy(
            LinearClassifier(weights=np.ones(2)),
            LabeledDataset(features=np.zeros((2, 0)), labels=np.zeros(0)),
        )


def test_classifier_csv_roundtrip(tmp_path):
    w = LinearClassifier(weights=np.array([0.1, -2.5e-17, 3.0, 1 / 3]))
    path = tmp_path / "w.csv"
    save_classifier(w, path)
    back = load_classifier(path)
    np.testing.assert_array_equal(back.weights, w.weights)


def test_classifier_rejects_nonfinite():
    with pytest.raises(ValueError):
        LinearClassifier(weights=np.array([1.0, np.nan]))

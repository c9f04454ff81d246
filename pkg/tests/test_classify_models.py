import json

import numpy as np
import pytest
from conftest import separable_blobs
from hypothesis import given
from hypothesis import strategies as st

from murmurscale.classify import (
    EvalReport,
    ModelSpec,
    Standardizer,
    TrainedModel,
    auc_score,
    confusion_counts,
    evaluate,
    train,
)
from murmurscale.classify.models import _kernel, nn_init, nn_loss_and_grad, smo_solve

KIND_NAMES = ("LogisticRegression", "SVM", "KNN", "NeuralNet")


def _concordance(y, s):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def _split(X, y, rng, frac=0.3):
    idx = rng.permutation(len(y))
    k = int(frac * len(y))
    return X[idx[k:]], y[idx[k:]], X[idx[:k]], y[idx[:k]]


# ------------------------------------------------------------------ spec


def test_spec_validation_and_aliases():
    assert ModelSpec("lr").kind == "LogisticRegression"
    assert ModelSpec("nn").params["hidden"] == (10, 8, 4, 2)
    with pytest.raises(ValueError, match="unknown hyperparameters"):
        ModelSpec("KNN", {"C": 1.0})
    with pytest.raises(ValueError):
        ModelSpec("forest")
    with pytest.raises(ValueError):
        ModelSpec("SVM", class_weights=(1.0, 0.0))
    spec = ModelSpec("SVM", class_weights={"absent": 1, "present": 4})
    assert spec.class_weights == (1.0, 4.0)


def test_spec_round_trip():
    spec = ModelSpec("NeuralNet", {"hidden": (6, 3), "epochs": 5}, (0.62, 2.54), seed=9)
    assert ModelSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
    changed = spec.with_params(epochs=7, seed=1)
    assert changed.params["epochs"] == 7 and changed.seed == 1 and spec.params["epochs"] == 5


# --------------------------------------------------------------- metrics


def test_confusion_arithmetic():
    rep = EvalReport.from_confusion({"tp": 50, "fn": 10, "tn": 80, "fp": 20})
    assert rep.sensitivity == pytest.approx(0.8333, abs=1e-4)
    assert rep.specificity == pytest.approx(0.8)
    assert rep.accuracy == pytest.approx(0.8125)
    assert rep.f1_present == pytest.approx(100 / 130)
    assert rep.f1_absent == pytest.approx(160 / 190)
    assert rep.youden == pytest.approx(0.6333, abs=1e-4)
    assert EvalReport.from_dict(json.loads(rep.to_json())) == rep


def test_auc_edge_cases():
    assert auc_score([0, 0, 1, 1], [0.1, 0.2, 0.3, 0.4]) == 1.0
    assert auc_score([0, 0, 1, 1], [0.4, 0.3, 0.2, 0.1]) == 0.0
    assert auc_score([1, 1, 1], [0.1, 0.5, 0.9]) is None
    assert auc_score([0, 1], [0.5, 0.5]) == 0.5


def test_auc_shuffled_labels_as_scores():
    rng = np.random.default_rng(11)
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    s = rng.permutation(y).astype(float)
    assert auc_score(y, s) == pytest.approx(_concordance(y, s), abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(-5, 5)), min_size=2, max_size=200))
def test_auc_equals_concordance(pairs):
    y = np.array([p[0] for p in pairs])
    s = np.array([p[1] for p in pairs], dtype=float)
    if len(set(y.tolist())) < 2:
        assert auc_score(y, s) is None
    else:
        assert auc_score(y, s) == _concordance(y, s)


@given(st.lists(st.integers(-100, 100), min_size=4, max_size=40),
       st.randoms(use_true_random=False))
def test_auc_invariant_to_increasing_transform(scores, rnd):
    y = np.array([i % 2 for i in range(len(scores))])
    rnd.shuffle(y)
    s = np.array(scores, dtype=float)
    # integer scores keep the transform strictly increasing in floating point
    assert auc_score(y, np.exp(s / 25.0)) == auc_score(y, s)
    assert auc_score(y, s ** 3) == auc_score(y, s)


def test_single_class_test_set_keeps_other_metrics():
    rng = np.random.default_rng(0)
    X, y = separable_blobs(rng, n=30, d=2)
    model = train(ModelSpec("lr"), X, y)
    rep = evaluate(model, X[y == 1], y[y == 1])
    assert rep.auc is None and rep.sensitivity == 1.0 and rep.n_test == 30


# ---------------------------------------------------------- classifiers


@pytest.mark.parametrize("kind", KIND_NAMES)
def test_separable_blobs(kind):
    for seed in range(3):
        rng = np.random.default_rng(seed)
        X, y = separable_blobs(rng, n=100, d=10)
        Xt, yt = separable_blobs(rng, n=100, d=10)
        model = train(ModelSpec(kind, seed=seed), X, y)
        assert evaluate(model, Xt, yt).accuracy >= 0.98


@pytest.mark.parametrize("kind", KIND_NAMES)
def test_null_data_auc_is_chance(kind):
    aucs = []
    for seed in range(12):
        rng = np.random.default_rng(1000 + seed)
        X = rng.normal(size=(160, 5))
        y = np.r_[np.zeros(80, int), np.ones(80, int)]
        y = rng.permutation(y)
        Xtr, ytr, Xte, yte = X[:110], y[:110], X[110:], y[110:]
        params = {"epochs": 40} if kind == "NeuralNet" else {}
        aucs.append(evaluate(train(ModelSpec(kind, params, seed=seed), Xtr, ytr), Xte, yte).auc)
    assert abs(np.mean(aucs) - 0.5) <= 0.05


def test_weighted_lr_trades_specificity_for_sensitivity():
    rng = np.random.default_rng(5)
    n0, n1 = 800, 200
    X = np.vstack([rng.normal(0.0, 1.0, (n0, 2)), rng.normal(1.0, 1.0, (n1, 2))])
    y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    Xtr, ytr, Xte, yte = _split(X, y, rng)
    plain = evaluate(train(ModelSpec("lr", {"C": 0.1}), Xtr, ytr), Xte, yte)
    weighted = evaluate(train(ModelSpec("lr", {"C": 0.1}, (1.0, 4.5)), Xtr, ytr), Xte, yte)
    assert weighted.sensitivity > plain.sensitivity
    assert weighted.specificity < plain.specificity


def test_knn_one_neighbour_recovers_training_labels():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 4))
    y = rng.integers(0, 2, 50)
    y[:2] = [0, 1]
    model = train(ModelSpec("knn", {"n_neighbors": 1}), X, y)
    np.testing.assert_array_equal(model.predict(X).labels, y)


def test_knn_k_larger_than_training_set():
    X = np.arange(12, dtype=float)[:, None]
    y = np.r_[np.zeros(4, int), np.ones(8, int)]
    model = train(ModelSpec("knn", {"n_neighbors": 1000}), X, y)
    np.testing.assert_allclose(model.decision(X), 8 / 12)
    assert model.info["effective_k"] == 12


def test_nn_zero_input_gives_interior_probability():
    rng = np.random.default_rng(3)
    X, y = separable_blobs(rng, n=40, d=4, gap=1.0)
    model = train(ModelSpec("nn", {"epochs": 10}), X, y)
    s = model.decision(model.standardization.mean[None, :])[0]
    assert np.isfinite(s) and 0.0 < s < 1.0


def test_lr_monotone_in_single_feature():
    rng = np.random.default_rng(4)
    x = rng.normal(size=300)
    y = (x + rng.normal(scale=0.8, size=300) > 0).astype(int)
    model = train(ModelSpec("lr"), x[:, None], y)
    assert model.parameters["coef"][0] > 0
    grid = np.linspace(-3, 3, 41)[:, None]
    assert np.all(np.diff(model.decision(grid)) > 0)
    flipped = train(ModelSpec("lr"), x[:, None], 1 - y)
    assert np.all(np.diff(flipped.decision(grid)) < 0)


def test_lr_matches_reference_solver():
    lm = pytest.importorskip("sklearn.linear_model")
    rng = np.random.default_rng(6)
    X = rng.normal(size=(200, 4))
    y = (X @ [1.5, -1.0, 0.0, 0.3] + rng.normal(size=200) > 0).astype(int)
    model = train(ModelSpec("lr", {"C": 0.5}), X, y)
    Z = model.standardization.transform(X)
    ref = lm.LogisticRegression(penalty="l1", C=0.5, solver="liblinear", tol=1e-10,
                                intercept_scaling=1e4, max_iter=10_000).fit(Z, y)
    np.testing.assert_allclose(model.parameters["coef"], ref.coef_[0], atol=2e-3)
    assert model.info["converged"] and model.info["gradient_mapping"] <= 1e-6


def test_lr_l1_zeroes_irrelevant_features():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(400, 6))
    y = (X[:, 0] > 0).astype(int)
    coef = train(ModelSpec("lr", {"C": 0.01}), X, y).parameters["coef"]
    assert coef[0] > 0 and np.all(coef[1:] == 0)


def test_svm_matches_reference_solver():
    svm = pytest.importorskip("sklearn.svm")
    rng = np.random.default_rng(8)
    X = rng.normal(size=(120, 3))
    y = (np.sum(X**2, axis=1) > 3).astype(int)
    spec = ModelSpec("SVM", {"kernel": "rbf", "gamma": 0.5, "C": 4.0, "tol": 1e-6})
    model = train(spec, X, y)
    Z = model.standardization.transform(X)
    ref = svm.SVC(kernel="rbf", gamma=0.5, C=4.0, tol=1e-6).fit(Z, y)
    np.testing.assert_allclose(model.decision(X), ref.decision_function(Z), atol=1e-3)


def test_smo_kkt_and_monotone_dual():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(80, 2))
    ysgn = np.where(X[:, 0] + 0.5 * rng.normal(size=80) > 0, 1.0, -1.0)
    K = _kernel(X, X, "rbf", 1.0)
    C = np.where(ysgn > 0, 3.0, 1.0)
    alpha, rho, info = smo_solve(K, ysgn, C, tol=1e-3, track=True)
    assert info["converged"] and info["kkt_gap"] <= 1e-3
    dual = np.array(info["dual_objective"])
    assert np.all(np.diff(dual) >= -1e-10)
    assert abs(alpha @ ysgn) < 1e-9
    assert np.all(alpha >= 0) and np.all(alpha <= C + 1e-12)
    # independent KKT residual from the final multipliers
    margin = ysgn * (K @ (alpha * ysgn) - rho)
    free = (alpha > 1e-8) & (alpha < C - 1e-8)
    assert np.all(np.abs(margin[free] - 1.0) <= 1e-3)
    assert np.all(margin[alpha <= 1e-8] >= 1.0 - 1e-3)
    assert np.all(margin[alpha >= C - 1e-8] <= 1.0 + 1e-3)


def test_svm_linear_ignores_gamma():
    rng = np.random.default_rng(10)
    X, y = separable_blobs(rng, n=40, d=3, gap=1.5)
    a = train(ModelSpec("svm", {"gamma": 0.01}), X, y).decision(X)
    b = train(ModelSpec("svm", {"gamma": 5.0}), X, y).decision(X)
    np.testing.assert_array_equal(a, b)


def test_nn_gradient_check():
    rng = np.random.default_rng(12)
    params = nn_init([6, 10, 8, 4, 2, 1], rng)
    X = rng.normal(size=(10, 6))
    y = rng.integers(0, 2, 10).astype(float)
    sw = rng.uniform(0.5, 3.0, 10)
    _, grads = nn_loss_and_grad(params, X, y, sw)
    h = 1e-6
    worst = 0.0
    for k, w in enumerate(params):
        num = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            old = w[idx]
            w[idx] = old + h
            up, _ = nn_loss_and_grad(params, X, y, sw)
            w[idx] = old - h
            down, _ = nn_loss_and_grad(params, X, y, sw)
            w[idx] = old
            num[idx] = (up - down) / (2 * h)
        scale = max(np.abs(num).max(), np.abs(grads[k]).max(), 1e-8)
        worst = max(worst, np.abs(num - grads[k]).max() / scale)
    assert worst <= 1e-5


def test_nn_external_validation_is_used():
    rng = np.random.default_rng(13)
    X, y = separable_blobs(rng, n=60, d=3, gap=1.0)
    Xv, yv = separable_blobs(rng, n=20, d=3, gap=1.0)
    model = train(ModelSpec("nn", {"epochs": 15}), X, y, validation=(Xv, yv))
    assert model.info["epochs"] <= 15 and 0.5 <= model.info["best_val_auc"] <= 1.0


# ----------------------------------------------------------- plumbing


@pytest.mark.parametrize("kind", KIND_NAMES)
def test_training_is_deterministic(kind):
    rng = np.random.default_rng(14)
    X, y = separable_blobs(rng, n=40, d=3, gap=1.0)
    params = {"epochs": 20} if kind == "NeuralNet" else {}
    a = train(ModelSpec(kind, params, seed=3), X, y).decision(X)
    b = train(ModelSpec(kind, params, seed=3), X, y).decision(X)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", KIND_NAMES)
def test_json_round_trip(kind):
    rng = np.random.default_rng(15)
    X, y = separable_blobs(rng, n=30, d=3, gap=1.0)
    params = {"epochs": 5} if kind == "NeuralNet" else {}
    model = train(ModelSpec(kind, params), X, y, feature_names=("a", "b", "c"))
    back = TrainedModel.from_json(model.to_json())
    np.testing.assert_array_equal(back.decision(X), model.decision(X))
    assert back.feature_names == ("a", "b", "c") and back.threshold == model.threshold


def test_thresholds_follow_score_type():
    rng = np.random.default_rng(16)
    X, y = separable_blobs(rng, n=20, d=2)
    assert train(ModelSpec("svm"), X, y).threshold == 0.0
    assert train(ModelSpec("lr"), X, y).threshold == 0.5
    m = train(ModelSpec("lr"), X, y, threshold=0.9)
    np.testing.assert_array_equal(m.predict(X).labels, (m.decision(X) > 0.9).astype(int))


@pytest.mark.parametrize("kind", ("LogisticRegression", "SVM", "KNN"))
def test_double_standardization_is_noop(kind):
    rng = np.random.default_rng(17)
    X = rng.normal(3.0, 5.0, size=(60, 4))
    y = (X[:, 0] + rng.normal(scale=4.0, size=60) > 3).astype(int)
    Z = Standardizer.fit(X).transform(X)
    inner = Standardizer.fit(Z)
    np.testing.assert_allclose(inner.mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(inner.scale, 1.0, atol=1e-12)
    # a tight solver tolerance keeps the comparison about the pipeline
    spec = ModelSpec(kind, {"tol": 1e-9}) if kind == "SVM" else ModelSpec(kind)
    a = train(spec, X, y).decision(X)
    b = train(spec, Z, y).decision(Z)
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_constant_feature_does_not_break_standardization():
    X = np.c_[np.arange(10.0), np.full(10, 2.0)]
    y = np.r_[np.zeros(5, int), np.ones(5, int)]
    model = train(ModelSpec("lr"), X, y)
    assert model.standardization.scale[1] == 1.0
    assert np.isfinite(model.decision(X)).all()


def test_input_errors():
    X = np.random.default_rng(18).normal(size=(10, 3))
    y = np.r_[np.zeros(5, int), np.ones(5, int)]
    with pytest.raises(ValueError, match="single class"):
        train(ModelSpec("lr"), X, np.zeros(10, int))
    with pytest.raises(ValueError, match="two rows"):
        train(ModelSpec("lr"), X, np.r_[np.zeros(9, int), 1])
    bad = X.copy()
    bad[7, 1] = np.inf
    with pytest.raises(ValueError, match="row 7"):
        train(ModelSpec("lr"), bad, y)
    model = train(ModelSpec("lr"), X, y)
    with pytest.raises(ValueError, match="expects 3 features"):
        model.predict(X[:, :2])
    with pytest.raises(ValueError, match="labels"):
        train(ModelSpec("lr"), X, np.r_[np.zeros(5, int), np.full(5, 2)])


def test_confusion_counts_orientation():
    c = confusion_counts([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert c == {"tp": 2, "fn": 1, "tn": 1, "fp": 1}

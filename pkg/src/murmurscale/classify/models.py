"""Self-contained classifiers: L1 logistic regression, SMO support vector machine,
k-nearest neighbours and a small fully connected network.

Every model standardises its inputs with statistics from the training rows
and exposes a score where larger values mean "murmur present" (label 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .metrics import auc_score

__all__ = [
    "ModelSpec",
    "TrainedModel",
    "Prediction",
    "Standardizer",
    "KINDS",
    "train",
    "predict",
    "nn_init",
    "nn_loss_and_grad",
]

KINDS: dict[str, dict[str, Any]] = {
    "LogisticRegression": {"C": 1.0, "penalty": "l1", "tol": 1e-6, "max_iter": 100_000},
    "SVM": {"kernel": "linear", "C": 1.0, "gamma": 1.0, "tol": 1e-3, "max_iter": None},
    "KNN": {"n_neighbors": 5, "p": 2.0},
    "NeuralNet": {
        "hidden": (10, 8, 4, 2),
        "learning_rate": 1e-3,
        "decay": 1e-6,
        "batch_size": 32,
        "epochs": 200,
        "patience": 20,
        "validation_fraction": 0.2,
    },
}

_ALIASES = {
    "lr": "LogisticRegression", "logistic": "LogisticRegression",
    "logisticregression": "LogisticRegression",
    "svm": "SVM", "knn": "KNN",
    "nn": "NeuralNet", "neuralnet": "NeuralNet", "mlp": "NeuralNet",
}

_LABEL_KEYS = {0: 0, 1: 1, "0": 0, "1": 1, "absent": 0, "present": 1}


def _canonical_kind(kind: str) -> str:
    if kind in KINDS:
        return kind
    key = kind.lower().replace("_", "").replace("-", "")
    if key in _ALIASES:
        return _ALIASES[key]
    raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(KINDS)}")


def _weights_tuple(w) -> tuple[float, float]:
    if isinstance(w, dict):
        out = [None, None]
        for k, v in w.items():
            if k not in _LABEL_KEYS:
                raise ValueError(f"class weight key {k!r} is not a label")
            out[_LABEL_KEYS[k]] = float(v)
        if None in out:
            raise ValueError("class weights must be given for both labels")
        w = out
    w = tuple(float(v) for v in w)
    if len(w) != 2 or not all(np.isfinite(v) and v > 0 for v in w):
        raise ValueError(f"class weights must be two positive numbers, got {w}")
    return w


@dataclass(frozen=True)
class ModelSpec:
    """Classifier kind, hyperparameters, class weights ``(absent, present)`` and seed."""

    kind: str
    hyperparameters: dict = field(default_factory=dict)
    class_weights: tuple = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        kind = _canonical_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.hyperparameters) - set(KINDS[kind])
        if unknown:
            raise ValueError(
                f"unknown hyperparameters {sorted(unknown)} for {kind}; "
                f"valid names are {sorted(KINDS[kind])}"
            )
        object.__setattr__(self, "hyperparameters", dict(self.hyperparameters))
        object.__setattr__(self, "class_weights", _weights_tuple(self.class_weights))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def params(self) -> dict:
        return {**KINDS[self.kind], **self.hyperparameters}

    def with_params(self, **updates) -> "ModelSpec":
        """Copy with hyperparameters (and optionally ``class_weights``/``seed``) replaced."""
        top = {k: updates.pop(k) for k in ("class_weights", "seed") if k in updates}
        return replace(self, hyperparameters={**self.hyperparameters, **updates}, **top)

    def to_dict(self) -> dict:
        hp = {k: list(v) if isinstance(v, tuple) else v for k, v in self.hyperparameters.items()}
        return {"kind": self.kind, "hyperparameters": hp,
                "class_weights": list(self.class_weights), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        hp = dict(d.get("hyperparameters", {}))
        if "hidden" in hp:
            hp["hidden"] = tuple(hp["hidden"])
        return cls(d["kind"], hp, d.get("class_weights", (1.0, 1.0)), d.get("seed", 0))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass(frozen=True)
class Prediction:
    scores: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    parameters: dict
    standardization: Standardizer
    n_features: int
    threshold: float
    feature_names: tuple | None = None
    info: dict = field(default_factory=dict, compare=False)

    def decision(self, X) -> np.ndarray:
        X = _check_features(X, self.n_features)
        Z = self.standardization.transform(X)
        return _SCORERS[self.spec.kind](self, Z)

    def predict(self, X) -> Prediction:
        s = self.decision(X)
        return Prediction(s, (s > self.threshold).astype(int))

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, np.ndarray):
                return {"__array__": v.tolist()}
            if isinstance(v, list):
                return [enc(x) for x in v]
            return v

        return {
            "spec": self.spec.to_dict(),
            "parameters": {k: enc(v) for k, v in self.parameters.items()},
            "mean": self.standardization.mean.tolist(),
            "scale": self.standardization.scale.tolist(),
            "n_features": self.n_features,
            "threshold": self.threshold,
            "feature_names": None if self.feature_names is None else list(self.feature_names),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        def dec(v):
            if isinstance(v, dict) and "__array__" in v:
                return np.asarray(v["__array__"], dtype=float)
            if isinstance(v, list):
                return [dec(x) for x in v]
            return v

        names = d.get("feature_names")
        return cls(
            spec=ModelSpec.from_dict(d["spec"]),
            parameters={k: dec(v) for k, v in d["parameters"].items()},
            standardization=Standardizer(np.asarray(d["mean"]), np.asarray(d["scale"])),
            n_features=int(d["n_features"]),
            threshold=float(d["threshold"]),
            feature_names=None if names is None else tuple(names),
        )

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def _check_features(X, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("feature array must be two-dimensional")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"model expects {n_features} features, got {X.shape[1]}")
    bad = np.where(~np.all(np.isfinite(X), axis=1))[0]
    if len(bad):
        raise ValueError(f"non-finite feature values in row {int(bad[0])}")
    return X


def _check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 (absent) or 1 (present)")
    y = y.astype(int)
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise ValueError("training data contains a single class")
    if counts.min() < 2:
        raise ValueError("training needs at least two rows of each class")
    return y


# ---------------------------------------------------------------- logistic


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _fit_logistic(Z, y, sw, p):
    """Weighted logistic loss plus penalty, by accelerated proximal gradient.

    The objective ``C * sum_i w_i loss_i + ||beta||_1`` is divided by
    ``C * sum_i w_i`` so the smooth part is a weighted mean.  The intercept
    is not penalised.  Iteration stops once the gradient mapping has
    sup-norm at most ``tol``.
    """
    n, d = Z.shape
    A = np.hstack([Z, np.ones((n, 1))])
    s = sw / sw.sum()
    lam = 1.0 / (p["C"] * sw.sum())
    penalty = p["penalty"]
    if penalty not in ("l1", "l2", "none"):
        raise ValueError(f"penalty must be l1, l2 or none, got {penalty!r}")
    ridge = lam if penalty == "l2" else 0.0
    lipschitz = 0.25 * np.linalg.eigvalsh((A * s[:, None]).T @ A)[-1] + ridge
    step = 1.0 / lipschitz
    mask = np.r_[np.ones(d), 0.0]

    def grad(x):
        z = A @ x
        prob = 0.5 * (1.0 + np.tanh(0.5 * z))
        return A.T @ (s * (prob - y)) + ridge * mask * x

    def prox(v):
        if penalty != "l1":
            return v
        out = _soft_threshold(v, step * lam)
        out[-1] = v[-1]
        return out

    x = np.zeros(d + 1)
    v, t = x.copy(), 1.0
    converged, it, gap = False, 0, np.inf
    for it in range(1, int(p["max_iter"]) + 1):
        g = grad(v)
        x_new = prox(v - step * g)
        # gradient-mapping norm at the extrapolated point
        gap = np.max(np.abs(v - x_new)) / step
        if gap <= p["tol"]:
            x = x_new
            converged = True
            break
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if (v - x_new) @ (x_new - x) > 0:  # adaptive restart
            t_new, v = 1.0, x_new.copy()
        else:
            v = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
    return {"coef": x[:d], "intercept": float(x[d])}, {
        "iterations": it, "converged": converged, "gradient_mapping": float(gap)}


def _score_logistic(model, Z):
    z = Z @ model.parameters["coef"] + model.parameters["intercept"]
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# --------------------------------------------------------------------- SVM


def _kernel(A, B, kind: str, gamma: float) -> np.ndarray:
    if kind == "linear":
        return A @ B.T
    if kind == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"kernel must be 'linear' or 'rbf', got {kind!r}")


def smo_solve(K, ysgn, Cvec, tol=1e-3, max_iter=None, track=False):
    """Sequential minimal optimisation of the soft-margin dual.

    Minimises ``0.5 a'Qa - sum(a)`` with ``Q = yy' * K``, ``0 <= a_i <= C_i``
    and ``y'a = 0``, choosing working pairs by second-order information.
    Returns ``(alpha, rho, info)``; the decision function is
    ``sum_i a_i y_i K(x_i, x) - rho``.  With ``track=True`` the dual
    objective after every step is kept in ``info["dual_objective"]``.
    """
    n = len(ysgn)
    kd = np.diag(K).copy()
    alpha = np.zeros(n)
    # yg holds -y_t * G_t where G = Qa - 1 is the gradient
    yg = ysgn.copy()
    pos = ysgn > 0
    up = np.ones(n, dtype=bool)  # a_t may move in the +y_t direction
    low = np.ones(n, dtype=bool)  # a_t may move in the -y_t direction
    up[~pos] = False
    low[pos] = False
    max_iter = max(1_000_000, 100 * n) if max_iter is None else int(max_iter)
    history = []
    tau = 1e-12
    neg_inf = np.full(n, -np.inf)
    pos_inf = np.full(n, np.inf)
    it, gap = 0, np.inf
    for it in range(max_iter):
        i = int(np.argmax(np.where(up, yg, neg_inf)))
        m = yg[i]
        cand = low & (yg < m)
        M = np.min(np.where(low, yg, pos_inf))
        gap = m - M
        if track:
            # sum(a) - a'Qa/2 with a'Qa = a'(G + 1) = sum(a) - sum(a y yg)
            history.append(float(0.5 * (alpha.sum() + alpha @ (ysgn * yg))))
        if gap <= tol:
            break
        Ki = K[i]
        b = m - yg
        a = kd[i] + kd - 2.0 * Ki
        a = np.where(a > 0, a, tau)
        j = int(np.argmin(np.where(cand, -(b * b) / a, pos_inf)))

        Ci, Cj = Cvec[i], Cvec[j]
        ai_old, aj_old = alpha[i], alpha[j]
        yi, yj = ysgn[i], ysgn[j]
        Gi, Gj = -yi * yg[i], -yj * yg[j]
        quad = max(kd[i] + kd[j] - 2.0 * Ki[j], tau)
        if yi != yj:
            delta = (-Gi - Gj) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0 and aj < 0:
                aj, ai = 0.0, diff
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > Ci - Cj and ai > Ci:
                ai, aj = Ci, Ci - diff
            elif diff <= Ci - Cj and aj > Cj:
                aj, ai = Cj, Cj + diff
        else:
            delta = (Gi - Gj) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > Ci and ai > Ci:
                ai, aj = Ci, total - Ci
            elif total <= Ci and aj < 0:
                aj, ai = 0.0, total
            if total > Cj and aj > Cj:
                aj, ai = Cj, total - Cj
            elif total <= Cj and ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        yg -= (yi * (ai - ai_old)) * Ki + (yj * (aj - aj_old)) * K[j]
        for t in (i, j):
            below, above = alpha[t] < Cvec[t], alpha[t] > 0
            up[t] = below if pos[t] else above
            low[t] = above if pos[t] else below

    ygrad = -yg  # y_t * G_t
    free = (alpha > 0) & (alpha < Cvec)
    if np.any(free):
        rho = float(ygrad[free].mean())
    else:
        at_upper = alpha >= Cvec
        ub_mask = at_upper != pos
        ub = ygrad[ub_mask].min() if ub_mask.any() else np.inf
        lb = ygrad[~ub_mask].max() if (~ub_mask).any() else -np.inf
        rho = float(0.5 * (ub + lb)) if np.isfinite(ub + lb) else 0.0
    info = {"iterations": it, "kkt_gap": float(gap), "converged": bool(gap <= tol)}
    if track:
        info["dual_objective"] = history
    return alpha, rho, info


def _fit_svm(Z, y, sw, p):
    if p["kernel"] not in ("linear", "rbf"):
        raise ValueError(f"kernel must be 'linear' or 'rbf', got {p['kernel']!r}")
    ysgn = np.where(y == 1, 1.0, -1.0)
    K = _kernel(Z, Z, p["kernel"], p["gamma"])
    alpha, rho, info = smo_solve(K, ysgn, p["C"] * sw, p["tol"], p["max_iter"])
    sv = alpha > 0
    params = {"support": Z[sv], "dual_coef": alpha[sv] * ysgn[sv], "rho": rho}
    return params, info


def _score_svm(model, Z):
    p = model.spec.params
    K = _kernel(Z, model.parameters["support"], p["kernel"], p["gamma"])
    return K @ model.parameters["dual_coef"] - model.parameters["rho"]


# --------------------------------------------------------------------- KNN


def _fit_knn(Z, y, sw, p):
    k = int(p["n_neighbors"])
    if k < 1:
        raise ValueError("n_neighbors must be at least 1")
    if p["p"] < 1:
        raise ValueError("Minkowski order p must be >= 1")
    return {"train": Z, "labels": y.astype(float), "weights": sw}, {"effective_k": min(k, len(y))}


def _score_knn(model, Z):
    p = model.spec.params
    train = model.parameters["train"]
    lab = model.parameters["labels"]
    w = model.parameters["weights"]
    k = min(int(p["n_neighbors"]), len(lab))
    order = float(p["p"])
    out = np.empty(len(Z))
    for r, z in enumerate(Z):
        diff = np.abs(train - z)
        dist = np.sqrt((diff * diff).sum(1)) if order == 2 else (diff**order).sum(1) ** (1 / order)
        nn = np.argsort(dist, kind="stable")[:k]
        out[r] = np.sum(w[nn] * lab[nn]) / np.sum(w[nn])
    return out


# ---------------------------------------------------------------------- NN


def nn_init(layer_sizes, rng) -> list[np.ndarray]:
    """He-initialised weights and zero biases as a flat list ``[W1, b1, W2, b2, ...]``."""
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        params.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        params.append(np.zeros(fan_out))
    return params


def _nn_logit(params, X):
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        h = np.maximum(z, 0.0) if k < n_layers - 1 else z
    return h[:, 0]


def nn_loss_and_grad(params, X, y, sw):
    """Weighted binary cross-entropy ``sum_i w_i bce_i / n`` and its gradient."""
    n = len(y)
    acts = [X]
    pre = []
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        pre.append(z)
        h = np.maximum(z, 0.0) if k < n_layers - 1 else z
        acts.append(h)
    logit = acts[-1][:, 0]
    loss = float(np.sum(sw * (np.logaddexp(0.0, logit) - y * logit)) / n)
    prob = 0.5 * (1.0 + np.tanh(0.5 * logit))
    delta = (sw * (prob - y) / n)[:, None]
    grads = [None] * len(params)
    for k in range(n_layers - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(0)
        if k:
            delta = (delta @ params[2 * k].T) * (pre[k - 1] > 0)
    return loss, grads


def _stratified_holdout(y, fraction, rng):
    val = []
    for c in (0, 1):
        idx = rng.permutation(np.where(y == c)[0])
        val.extend(idx[: max(1, int(round(fraction * len(idx))))])
    val = np.sort(np.array(val))
    train = np.setdiff1d(np.arange(len(y)), val)
    return train, val


def _fit_nn(Z, y, sw, p, rng, validation, sw_pair):
    sizes = [Z.shape[1], *[int(h) for h in p["hidden"]], 1]
    if validation is None:
        tr, va = _stratified_holdout(y, p["validation_fraction"], rng)
        Zv, yv = Z[va], y[va]
        Z, y, sw = Z[tr], y[tr], sw[tr]
    else:
        Zv, yv = validation
    swv = np.where(yv == 1, sw_pair[1], sw_pair[0]).astype(float)
    params = nn_init(sizes, rng)
    m1 = [np.zeros_like(w) for w in params]
    m2 = [np.zeros_like(w) for w in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    lr0, decay = p["learning_rate"], p["decay"]
    bs = int(p["batch_size"])
    best, best_auc, best_loss, stale, t = [w.copy() for w in params], -np.inf, np.inf, 0, 0
    epochs_run = 0
    yf = y.astype(float)
    for epoch in range(int(p["epochs"])):
        epochs_run = epoch + 1
        perm = rng.permutation(len(y))
        for start in range(0, len(y), bs):
            b = perm[start:start + bs]
            _, grads = nn_loss_and_grad(params, Z[b], yf[b], sw[b])
            lr = lr0 / (1.0 + decay * t)
            t += 1
            for k, g in enumerate(grads):
                m1[k] = beta1 * m1[k] + (1 - beta1) * g
                m2[k] = beta2 * m2[k] + (1 - beta2) * g * g
                mh = m1[k] / (1 - beta1**t)
                vh = m2[k] / (1 - beta2**t)
                params[k] = params[k] - lr * mh / (np.sqrt(vh) + eps)
        logit_v = _nn_logit(params, Zv)
        auc = auc_score(yv, logit_v) if len(yv) else None
        if auc is None:
            best = [w.copy() for w in params]
            continue
        # AUC saturates on easy data; equal AUC with lower loss still counts
        val_loss = np.sum(swv * (np.logaddexp(0.0, logit_v) - yv * logit_v)) / len(yv)
        if auc > best_auc or (auc == best_auc and val_loss < best_loss):
            best_auc, best_loss, best, stale = auc, val_loss, [w.copy() for w in params], 0
        else:
            stale += 1
            if stale >= int(p["patience"]):
                break
    return {"layers": best}, {"epochs": epochs_run, "best_val_auc": float(best_auc)}


def _score_nn(model, Z):
    z = _nn_logit(model.parameters["layers"], Z)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


_SCORERS = {
    "LogisticRegression": _score_logistic,
    "SVM": _score_svm,
    "KNN": _score_knn,
    "NeuralNet": _score_nn,
}

_THRESHOLDS = {"LogisticRegression": 0.5, "SVM": 0.0, "KNN": 0.5, "NeuralNet": 0.5}


def train(spec: ModelSpec, X, y, validation=None, feature_names=None,
          threshold: float | None = None) -> TrainedModel:
    """Fit ``spec`` on rows ``X`` with labels ``y`` (1 = present).

    ``validation`` is an optional ``(X_val, y_val)`` pair used by the
    network for early stopping; without it the network holds out a
    stratified fraction of the training rows.  Other kinds ignore it.
    """
    X = _check_features(X)
    y = _check_labels(y, len(X))
    std = Standardizer.fit(X)
    Z = std.transform(X)
    sw = np.where(y == 1, spec.class_weights[1], spec.class_weights[0])
    p = spec.params
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "LogisticRegression":
        params, info = _fit_logistic(Z, y, sw, p)
    elif spec.kind == "SVM":
        params, info = _fit_svm(Z, y, sw, p)
    elif spec.kind == "KNN":
        params, info = _fit_knn(Z, y, sw, p)
    else:
        if validation is not None:
            Xv = _check_features(validation[0], X.shape[1])
            validation = (std.transform(Xv), np.asarray(validation[1]).astype(int))
        params, info = _fit_nn(Z, y, sw, p, rng, validation, spec.class_weights)
    return TrainedModel(
        spec=spec,
        parameters=params,
        standardization=std,
        n_features=X.shape[1],
        threshold=_THRESHOLDS[spec.kind] if threshold is None else float(threshold),
        feature_names=None if feature_names is None else tuple(feature_names),
        info=info,
    )


def predict(model: TrainedModel, X) -> Prediction:
    return model.predict(X)

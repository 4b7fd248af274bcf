"""Linear SoftmaxLog classifiers, the Adam solver, and the linear SVM selector."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, _pykernels
from .dataset import StandardizationStats, apply_standardizer, fit_standardizer

MODEL_MAGIC = b"MSEL"
MODEL_VERSION = 1
KIND_LINEAR = 0
KIND_SELECTOR = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class TrainHyper:
    batch_size: int = 60
    epochs: int = 50
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8
    weight_decay: float = 1e-4
    reg_lambda: float = 1e-2
    selector_iters: int = 2000
    seed: int = 42

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.selector_iters < 1:
            raise ValueError("batch_size, epochs and selector_iters must be >= 1")
        if self.learning_rate <= 0 or self.adam_eps <= 0 or self.reg_lambda <= 0:
            raise ValueError("learning_rate, adam_eps and reg_lambda must be > 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass(frozen=True)
class LinearModel:
    """Scores ``weights.T @ x + bias`` over ``class_ids`` in that order."""

    class_ids: tuple[int, ...]
    weights: np.ndarray  # (d, k)
    bias: np.ndarray  # (k,)

    def __post_init__(self):
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        bias = np.ascontiguousarray(self.bias, dtype=np.float64).ravel()
        ids = tuple(int(c) for c in self.class_ids)
        if weights.ndim != 2 or weights.shape[1] != len(ids) or bias.shape[0] != len(ids):
            raise ModelError("weights must be (d, k) and bias (k,) with k == len(class_ids)")
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate class id")
        object.__setattr__(self, "class_ids", ids)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def label_index(self, labels) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.class_ids)}
        try:
            return np.array([lookup[int(c)] for c in np.ravel(labels)], dtype=np.intp)
        except KeyError as exc:
            raise ModelError(f"label {exc.args[0]} is not among the model's class_ids") from None


@dataclass(frozen=True)
class SelectorModel:
    weight: np.ndarray  # (d,)
    bias: float
    stats: StandardizationStats

    @property
    def dim(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class AdamState:
    m: tuple
    v: tuple
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> AdamState:
        zeros = tuple(np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params)
        return cls(m=zeros, v=tuple(z.copy() for z in zeros), t=0)


def _check_dim(x, dim, what="model"):
    if x.shape[-1] != dim:
        raise ModelError(f"dimension mismatch: input has {x.shape[-1]}, {what} expects {dim}")


def score_linear(model: LinearModel, x) -> np.ndarray:
    """Class scores for one point ``(d,)`` or a batch ``(n, d)``."""
    x = np.asarray(x, dtype=np.float64)
    _check_dim(x, model.dim)
    return x @ model.weights + model.bias


def softmax_ce_loss_grad(model: LinearModel, features, labels, weight_decay: float):
    """Mean softmax cross-entropy with L2 penalty, and its exact gradients.

    Returns ``(loss, grad_weights, grad_bias)``.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ModelError("batch must be a non-empty (n, d) array")
    _check_dim(features, model.dim)
    y_idx = model.label_index(labels)
    return _pykernels.softmax_ce_grad(model.weights, model.bias, features, y_idx, weight_decay)


def adam_step(state: AdamState, params, grads, hyper: TrainHyper):
    """One bias-corrected Adam update. Pure: returns ``(new_state, new_params)``."""
    t = state.t + 1
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        p = np.array(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape or m.shape != p.shape:
            raise ModelError("parameter, gradient and moment shapes disagree")
        m, v = m.copy(), v.copy()
        _pykernels.adam_update(p, g, m, v, t, hyper.learning_rate,
                               hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps)
        new_m.append(m)
        new_v.append(v)
        new_p.append(p)
    return AdamState(tuple(new_m), tuple(new_v), t), new_p


def train_softmax(features, labels, class_ids, hyper: TrainHyper = TrainHyper(),
                  history: list | None = None, backend=None) -> LinearModel:
    """Mini-batch Adam on the softmax cross-entropy.

    Weights start Uniform(-0.01, 0.01) and biases at zero; each epoch visits a
    fresh seeded permutation in batches of ``hyper.batch_size`` (the last
    batch may be short). Mean batch loss per epoch is appended to ``history``
    when given.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ModelError("empty split")
    class_ids = tuple(int(c) for c in class_ids)
    k = len(class_ids)
    model = LinearModel(class_ids, np.zeros((X.shape[1], k)), np.zeros(k))
    y_idx = model.label_index(labels)
    if y_idx.shape[0] != X.shape[0]:
        raise ModelError("features and labels disagree on count")
    impl = kernels if backend is None else kernels.get_backend(backend)

    rng = np.random.default_rng(hyper.seed)
    W = rng.uniform(-0.01, 0.01, size=(X.shape[1], k))
    b = np.zeros(k)
    mW, vW = np.zeros_like(W), np.zeros_like(W)
    mb, vb = np.zeros_like(b), np.zeros_like(b)
    t = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(X.shape[0]).astype(np.intp)
        t, loss = impl.softmax_adam_epoch(
            W, b, mW, vW, mb, vb, X, y_idx, order, hyper.batch_size,
            hyper.learning_rate, hyper.adam_beta1, hyper.adam_beta2,
            hyper.adam_eps, hyper.weight_decay, t)
        if history is not None:
            history.append(loss)
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
        raise ModelError("training diverged: non-finite parameters")
    return LinearModel(class_ids, W, b)


def balanced_hinge_weights(y) -> np.ndarray:
    """Per-sample weights giving each side equal total weight, mean weight 1."""
    y = np.asarray(y)
    n, n_pos = y.shape[0], int(np.sum(y > 0))
    return np.where(y > 0, n / (2.0 * n_pos), n / (2.0 * (n - n_pos)))


def train_selector(originals, auxiliaries, hyper: TrainHyper = TrainHyper(),
                   history: list | None = None, backend=None) -> SelectorModel:
    """Linear SVM separating originals (+1) from auxiliaries (-1).

    Inputs are standardized with statistics fit on both sides together. The
    hinge loss is class-balanced; solver is full-batch subgradient descent
    with step ``1/(lambda t)`` for ``hyper.selector_iters`` iterations.
    """
    pos = np.asarray(originals, dtype=np.float64)
    neg = np.asarray(auxiliaries, dtype=np.float64)
    if pos.ndim != 2 or neg.ndim != 2 or pos.shape[0] == 0 or neg.shape[0] == 0:
        raise ModelError("selector needs non-empty originals and auxiliaries")
    if pos.shape[1] != neg.shape[1]:
        raise ModelError("originals and auxiliaries disagree on dim")

    both = np.concatenate([pos, neg])
    stats = fit_standardizer(both)
    X = np.ascontiguousarray(apply_standardizer(both, stats))
    y = np.concatenate([np.ones(pos.shape[0]), -np.ones(neg.shape[0])])
    c = balanced_hinge_weights(y)
    impl = kernels if backend is None else kernels.get_backend(backend)
    w, b, objective = impl.hinge_descent(X, y, c, hyper.reg_lambda, hyper.selector_iters)
    if history is not None:
        history.extend(np.asarray(objective).tolist())
    return SelectorModel(weight=np.asarray(w), bias=float(b), stats=stats)


def selector_score(selector: SelectorModel, x):
    """``w . standardize(x) + b``; scalar for one point, array for a batch."""
    x = np.asarray(x, dtype=np.float64)
    _check_dim(x, selector.dim, "selector")
    s = apply_standardizer(x, selector.stats) @ selector.weight + selector.bias
    return float(s) if np.ndim(s) == 0 else s


# --- persistence ------------------------------------------------------------

def save_model(model, path) -> None:
    head = MODEL_MAGIC + struct.pack("<I", MODEL_VERSION)
    if isinstance(model, LinearModel):
        body = [
            struct.pack("<B2I", KIND_LINEAR, model.dim, len(model.class_ids)),
            np.asarray(model.class_ids, dtype="<u4").tobytes(),
            # column-major d x k: one contiguous column per class
            np.ascontiguousarray(model.weights.T, dtype="<f8").tobytes(),
            model.bias.astype("<f8").tobytes(),
        ]
    elif isinstance(model, SelectorModel):
        body = [
            struct.pack("<BI", KIND_SELECTOR, model.dim),
            model.weight.astype("<f8").tobytes(),
            struct.pack("<d", model.bias),
            model.stats.mean.astype("<f8").tobytes(),
            model.stats.std.astype("<f8").tobytes(),
        ]
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    Path(path).write_bytes(head + b"".join(body))


def load_model(path):
    buf = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise ModelError(f"{path}: truncated model file")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    def f64(count):
        return np.frombuffer(take(8 * count), dtype="<f8").astype(np.float64)

    if take(4) != MODEL_MAGIC:
        raise ModelError(f"{path}: bad magic, not a model file")
    (version,) = struct.unpack("<I", take(4))
    if version != MODEL_VERSION:
        raise ModelError(f"{path}: version mismatch ({version} != {MODEL_VERSION})")
    (kind,) = struct.unpack("<B", take(1))
    if kind == KIND_LINEAR:
        d, k = struct.unpack("<2I", take(8))
        ids = np.frombuffer(take(4 * k), dtype="<u4").tolist()
        weights = f64(d * k).reshape(k, d).T
        model = LinearModel(tuple(ids), weights, f64(k))
    elif kind == KIND_SELECTOR:
        (d,) = struct.unpack("<I", take(4))
        weight = f64(d)
        (bias,) = struct.unpack("<d", take(8))
        stats = StandardizationStats(mean=f64(d), std=f64(d))
        model = SelectorModel(weight=weight, bias=bias, stats=stats)
    else:
        raise ModelError(f"{path}: unknown model kind {kind}")
    if pos != len(buf):
        raise ModelError(f"{path}: trailing bytes after model payload")
    return model


# --- the four models of one run ---------------------------------------------

@dataclass(frozen=True)
class ModelSet:
    selector: SelectorModel
    seen: LinearModel
    unseen: LinearModel
    joint: LinearModel | None = None


def train_models(dataset, hyper: TrainHyper = TrainHyper(), joint_uses_aux: bool = True,
                 backend=None) -> ModelSet:
    """Train selector, seen, unseen and joint models on one dataset.

    Models share no parameters. With ``joint_uses_aux=False`` the joint model
    sees only the real seen data and scores the seen classes alone (the
    seen-only baseline).
    """
    cat = dataset.catalog
    train, aux = dataset["train_seen"], dataset["aux_unseen"]
    seen = train_softmax(train.features, train.labels, cat.seen_ids, hyper, backend=backend)
    unseen = train_softmax(aux.features, aux.labels, cat.unseen_ids, hyper, backend=backend)
    if joint_uses_aux:
        joint = train_softmax(np.concatenate([train.features, aux.features]),
                              np.concatenate([train.labels, aux.labels]),
                              cat.all_ids, hyper, backend=backend)
    else:
        joint = train_softmax(train.features, train.labels, cat.seen_ids, hyper, backend=backend)
    selector = train_selector(train.features, aux.features, hyper, backend=backend)
    return ModelSet(selector=selector, seen=seen, unseen=unseen, joint=joint)

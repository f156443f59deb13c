"""One-hidden-layer softmax classifier trained with scaled conjugate gradient.

The network is tanh(W1 x + b1) -> softmax(W2 h + b2) with mean cross-entropy
loss, trained full-batch by Moller's SCG (a Hessian-free conjugate-gradient
variant that needs no line search). Inputs are min-max normalized to [-1, 1]
with statistics fitted on the training split only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import FeatureSet


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    hidden_dim: int = 1000
    max_epochs: int = 1000
    val_patience: int = 6
    scg_sigma: float = 5e-5
    scg_lambda0: float = 5e-7
    grad_tol: float = 1e-7

    def __post_init__(self):
        if self.hidden_dim <= 0 or self.max_epochs <= 0 or self.val_patience <= 0:
            raise ValueError("hidden_dim, max_epochs and val_patience must be positive")
        if self.scg_sigma <= 0 or self.scg_lambda0 <= 0 or self.grad_tol <= 0:
            raise ValueError("scg_sigma, scg_lambda0 and grad_tol must be positive")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    stop_reason: str = ""


class TrainingDiverged(RuntimeError):
    def __init__(self, history: TrainHistory):
        super().__init__("training diverged to a non-finite loss")
        self.history = history


@dataclass
class MlpModel:
    w1: np.ndarray                # (hidden, input)
    b1: np.ndarray                # (hidden,)
    w2: np.ndarray                # (output, hidden)
    b2: np.ndarray                # (output,)
    norm_min: np.ndarray          # (input,) training-set feature minima
    norm_max: np.ndarray          # (input,) training-set feature maxima
    label_space: tuple
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2", "norm_min", "norm_max"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            setattr(self, name, arr)
        if self.w1.shape[0] != self.b1.shape[0] or self.w2.shape != (self.b2.shape[0], self.w1.shape[0]):
            raise ValueError("layer shapes are inconsistent")
        if self.norm_min.shape != (self.input_dim,) or self.norm_max.shape != (self.input_dim,):
            raise ValueError("normalization stats must match the input dimension")
        if np.any(self.norm_max < self.norm_min):
            raise ValueError("norm_max must be >= norm_min")
        self.label_space = tuple(self.label_space)
        if len(self.label_space) != self.output_dim:
            raise ValueError("label_space size must equal the output dimension")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[0]

    def label_index(self, label) -> int:
        try:
            return self.label_space.index(label)
        except ValueError:
            raise ValueError(f"label {label!r} not in the model's label space") from None


def normalize(x, model: MlpModel) -> np.ndarray:
    """Min-max map each feature to [-1, 1] using the training statistics.

    Zero-range features map to 0; out-of-range inputs are not clipped.
    """
    x = np.asarray(x, dtype=float)
    span = model.norm_max - model.norm_min
    safe = np.where(span > 0, span, 1.0)
    out = 2.0 * (x - model.norm_min) / safe - 1.0
    return np.where(span > 0, out, 0.0)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: MlpModel, x_norm) -> np.ndarray:
    """Class probabilities for normalized input(s); rows sum to 1."""
    x = np.asarray(x_norm, dtype=float)
    if x.shape[-1] != model.input_dim:
        raise ValueError(f"input has {x.shape[-1]} features, model expects {model.input_dim}")
    h = np.tanh(x @ model.w1.T + model.b1)
    return _softmax(h @ model.w2.T + model.b2)


def loss_and_gradient(model: MlpModel, x_norm, labels) -> tuple:
    """Mean cross-entropy loss and its gradient for a batch.

    `labels` are label values (mapped through model.label_space) or
    pre-mapped integer indices. Returns (loss, {"w1","b1","w2","b2"}).
    """
    x = np.atleast_2d(np.asarray(x_norm, dtype=float))
    if len(labels) == 0 or x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if x.shape[0] != len(labels):
        raise ValueError("batch size mismatch between inputs and labels")
    y = _label_indices(model, labels)

    z1 = x @ model.w1.T + model.b1
    h = np.tanh(z1)
    z2 = h @ model.w2.T + model.b2
    # log-softmax keeps the loss finite even for confident logits
    zs = z2 - z2.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(zs).sum(axis=1))
    n = x.shape[0]
    loss = float(np.mean(log_norm - zs[np.arange(n), y]))

    p = np.exp(zs - log_norm[:, None])
    p[np.arange(n), y] -= 1.0
    p /= n                                   # dL/dz2
    g_w2 = p.T @ h
    g_b2 = p.sum(axis=0)
    dh = (p @ model.w2) * (1.0 - h * h)      # dL/dz1
    g_w1 = dh.T @ x
    g_b1 = dh.sum(axis=0)
    return loss, {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}


def _label_indices(model: MlpModel, labels) -> np.ndarray:
    labels = list(labels)
    if all(isinstance(l, (int, np.integer)) and 0 <= l < model.output_dim for l in labels) \
            and not all(isinstance(l, (int, np.integer)) for l in model.label_space):
        return np.asarray(labels, dtype=int)
    return np.asarray([model.label_index(l) for l in labels], dtype=int)


# ---------------------------------------------------------------------------
# flat-vector plumbing for the optimizer

def _pack(model: MlpModel) -> np.ndarray:
    return np.concatenate([model.w1.ravel(), model.b1, model.w2.ravel(), model.b2])


def _unpack(model: MlpModel, w: np.ndarray) -> None:
    i, h, o = model.input_dim, model.hidden_dim, model.output_dim
    ofs = 0
    model.w1 = w[ofs:ofs + h * i].reshape(h, i).copy(); ofs += h * i
    model.b1 = w[ofs:ofs + h].copy(); ofs += h
    model.w2 = w[ofs:ofs + o * h].reshape(o, h).copy(); ofs += o * h
    model.b2 = w[ofs:ofs + o].copy()


def _pack_grad(grad: dict) -> np.ndarray:
    return np.concatenate([grad["w1"].ravel(), grad["b1"], grad["w2"].ravel(), grad["b2"]])


def init_model(input_dim: int, hidden_dim: int, label_space: Sequence,
               seed: int, norm_min=None, norm_max=None) -> MlpModel:
    """Seeded uniform(-r, r) weight init with r = 1/sqrt(fan-in); zero biases."""
    rng = np.random.default_rng(seed)
    out = len(label_space)
    r1 = 1.0 / np.sqrt(input_dim)
    r2 = 1.0 / np.sqrt(hidden_dim)
    return MlpModel(
        w1=rng.uniform(-r1, r1, size=(hidden_dim, input_dim)),
        b1=np.zeros(hidden_dim),
        w2=rng.uniform(-r2, r2, size=(out, hidden_dim)),
        b2=np.zeros(out),
        norm_min=np.zeros(input_dim) if norm_min is None else norm_min,
        norm_max=np.ones(input_dim) if norm_max is None else norm_max,
        label_space=tuple(label_space),
    )


def train_scg(train: FeatureSet, val: FeatureSet, cfg: TrainConfig,
              label_space: Optional[Sequence] = None) -> tuple:
    """Train with Moller's scaled conjugate gradient on the full batch.

    Stops on `val_patience` consecutive validation-loss increases, on
    gradient-norm convergence (< cfg.grad_tol), or at cfg.max_epochs. The
    returned model carries the weights with the lowest validation loss seen
    (including the initial ones). Deterministic given cfg.seed.
    """
    if len(train) == 0 or len(val) == 0:
        raise ValueError("train and validation sets must be non-empty")
    if label_space is None:
        label_space = sorted(set(train.labels) | set(val.labels))
    label_space = tuple(label_space)

    norm_min = train.x.min(axis=0)
    norm_max = train.x.max(axis=0)
    model = init_model(train.x.shape[1], cfg.hidden_dim, label_space, cfg.seed,
                       norm_min=norm_min, norm_max=norm_max)
    model.config = {
        "seed": cfg.seed, "hidden_dim": cfg.hidden_dim, "max_epochs": cfg.max_epochs,
        "val_patience": cfg.val_patience, "scg_sigma": cfg.scg_sigma,
        "scg_lambda0": cfg.scg_lambda0, "grad_tol": cfg.grad_tol,
    }
    xt = normalize(train.x, model)
    yt = _label_indices(model, train.labels)
    xv = normalize(val.x, model)
    yv = _label_indices(model, val.labels)

    def eval_loss_grad(w):
        _unpack(model, w)
        loss, grad = loss_and_gradient(model, xt, yt)
        return loss, _pack_grad(grad)

    def eval_loss(w):
        _unpack(model, w)
        zz = np.tanh(xt @ model.w1.T + model.b1) @ model.w2.T + model.b2
        zs = zz - zz.max(axis=1, keepdims=True)
        return float(np.mean(np.log(np.exp(zs).sum(axis=1)) - zs[np.arange(len(yt)), yt]))

    def val_loss_at(w):
        _unpack(model, w)
        zz = np.tanh(xv @ model.w1.T + model.b1) @ model.w2.T + model.b2
        zs = zz - zz.max(axis=1, keepdims=True)
        return float(np.mean(np.log(np.exp(zs).sum(axis=1)) - zs[np.arange(len(yv)), yv]))

    history = TrainHistory()
    w = _pack(model)
    n_params = w.size

    loss, grad = eval_loss_grad(w)
    vloss = val_loss_at(w)
    history.train_loss.append(loss)
    history.val_loss.append(vloss)
    if not np.isfinite(loss) or not np.isfinite(vloss):
        raise TrainingDiverged(history)
    best_w, best_val = w.copy(), vloss

    r = -grad
    p = r.copy()
    lam, lam_bar = cfg.scg_lambda0, 0.0
    success = True
    delta = mu = 0.0
    increases = 0
    stop = ""

    for k in range(1, cfg.max_epochs + 1):
        if np.linalg.norm(r) < cfg.grad_tol:
            stop = "gradient_converged"
            break
        p_sq = float(p @ p)
        if p_sq == 0.0:
            stop = "gradient_converged"
            break
        if success:
            sigma_k = cfg.scg_sigma / np.sqrt(p_sq)
            _, grad_shift = eval_loss_grad(w + sigma_k * p)
            s = (grad_shift - grad) / sigma_k
            delta = float(p @ s)
            mu = float(p @ r)
        delta += (lam - lam_bar) * p_sq
        if delta <= 0:                         # force positive definiteness
            lam_bar = 2.0 * (lam - delta / p_sq)
            delta = -delta + lam * p_sq
            lam = lam_bar
        alpha = mu / delta
        loss_new = eval_loss(w + alpha * p)
        if not np.isfinite(loss_new):
            history.stop_reason = "diverged"
            raise TrainingDiverged(history)
        comparison = 2.0 * delta * (loss - loss_new) / (mu * mu) if mu != 0 else -1.0

        if comparison >= 0:                    # successful step
            w = w + alpha * p
            loss, grad_new = eval_loss_grad(w)
            r_new = -grad_new
            lam_bar = 0.0
            success = True
            if k % n_params == 0:
                p = r_new.copy()               # periodic restart
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                p = r_new + beta * p
            r, grad = r_new, grad_new
            if comparison >= 0.75:
                lam = max(lam * 0.25, 1e-300)
        else:
            lam_bar = lam
            success = False
        if comparison < 0.25:
            lam += delta * (1.0 - comparison) / p_sq
        if lam > 1e100:                        # step sizes have collapsed
            stop = "gradient_converged"
        vloss = val_loss_at(w)
        history.train_loss.append(loss)
        history.val_loss.append(vloss)
        if not np.isfinite(loss) or not np.isfinite(vloss):
            history.stop_reason = "diverged"
            raise TrainingDiverged(history)
        if vloss < best_val:
            best_val = vloss
            best_w = w.copy()
        if history.val_loss[-1] > history.val_loss[-2]:
            increases += 1
        else:
            increases = 0
        if increases >= cfg.val_patience:
            stop = "val_patience"
            break
        if stop:
            break
    if not stop:
        stop = "max_epochs"
    history.stop_reason = stop
    _unpack(model, best_w)
    return model, history


def predict_topk(model: MlpModel, x, k: int) -> list:
    """Labels of the k highest-probability classes for one raw feature vector,
    descending; exact ties resolve to the lower label-space index."""
    if not 1 <= k <= model.output_dim:
        raise ValueError(f"k must be in 1..{model.output_dim}, got {k}")
    p = forward(model, normalize(np.asarray(x, dtype=float), model))
    order = np.argsort(-p, kind="stable")
    return [model.label_space[i] for i in order[:k]]


def predict_proba(model: MlpModel, x) -> np.ndarray:
    """Probabilities for raw (unnormalized) feature rows."""
    return forward(model, normalize(np.asarray(x, dtype=float), model))


# ---------------------------------------------------------------------------
# model (de)serialization: JSON, lossless for finite doubles

def model_to_dict(model: MlpModel) -> dict:
    return {
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "output_dim": model.output_dim,
        "w1": model.w1.ravel().tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.ravel().tolist(),
        "b2": model.b2.tolist(),
        "norm_min": model.norm_min.tolist(),
        "norm_max": model.norm_max.tolist(),
        "label_space": list(model.label_space),
        "config": model.config,
    }


def model_from_dict(obj: dict) -> MlpModel:
    i, h, o = obj["input_dim"], obj["hidden_dim"], obj["output_dim"]
    return MlpModel(
        w1=np.asarray(obj["w1"], dtype=float).reshape(h, i),
        b1=np.asarray(obj["b1"], dtype=float),
        w2=np.asarray(obj["w2"], dtype=float).reshape(o, h),
        b2=np.asarray(obj["b2"], dtype=float),
        norm_min=np.asarray(obj["norm_min"], dtype=float),
        norm_max=np.asarray(obj["norm_max"], dtype=float),
        label_space=tuple(obj["label_space"]),
        config=dict(obj.get("config", {})),
    )


def save_model(model: MlpModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))

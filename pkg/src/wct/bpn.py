"""One-hidden-layer sigmoid network trained by full-batch backpropagation with momentum.

Targets are 1.0 for abnormal (+1) and 0.0 for normal (-1). Each epoch sums the
per-example gradients of ``0.5 * (output - target)**2`` and applies

    delta_w = -learning_rate * grad + momentum * previous_delta_w

Training stops once the mean squared error over the epoch is at most
``target_error``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import LabeledDataset, NormalizationParams

MODEL_VERSION = 1


class BpnError(ValueError):
    pass


def hidden_size_rule(input_dim: int) -> int:
    """Hidden units = 2 * inputs + 1."""
    if input_dim < 1:
        raise BpnError(f"input_dim must be >= 1, got {input_dim}")
    return 2 * input_dim + 1


def sigmoid(t):
    with np.errstate(over="ignore"):  # exp overflow saturates to 0, which is the right limit
        return 1.0 / (1.0 + np.exp(-t))


@dataclass(frozen=True)
class BpnConfig:
    learning_rate: float = 0.4
    momentum: float = 0.2
    target_error: float = 0.01
    max_epochs: int = 5000
    init_range: float = 0.5
    rng_seed: int = 0
    hidden_learning_rate: float | None = None
    output_learning_rate: float | None = None

    def __post_init__(self):
        for name in ("learning_rate", "momentum", "init_range"):
            if getattr(self, name) < 0:
                raise BpnError(f"{name} must be >= 0")
        if not self.target_error > 0:
            raise BpnError("target_error must be > 0")
        if self.max_epochs < 1:
            raise BpnError("max_epochs must be >= 1")

    @property
    def rates(self) -> tuple[float, float]:
        lr_h = self.learning_rate if self.hidden_learning_rate is None else self.hidden_learning_rate
        lr_o = self.learning_rate if self.output_learning_rate is None else self.output_learning_rate
        return lr_h, lr_o


@dataclass
class BpnModel:
    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (hidden,)
    b2: float
    feature_subset: tuple[int, ...] | None = None
    normalization: NormalizationParams | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.W1 = np.atleast_2d(np.asarray(self.W1, dtype=float))
        self.b1 = np.asarray(self.b1, dtype=float).ravel()
        self.W2 = np.asarray(self.W2, dtype=float).ravel()
        self.b2 = float(self.b2)
        h = self.W1.shape[0]
        if self.b1.shape != (h,) or self.W2.shape != (h,):
            raise BpnError("inconsistent layer shapes")
        params = (self.W1, self.b1, self.W2, np.array([self.b2]))
        if not all(np.all(np.isfinite(p)) for p in params):
            raise BpnError("non-finite weights")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @classmethod
    def initialize(cls, input_dim: int, hidden_dim: int | None = None, init_range: float = 0.5, rng=None) -> BpnModel:
        rng = np.random.default_rng(rng)
        h = hidden_size_rule(input_dim) if hidden_dim is None else hidden_dim
        u = lambda *shape: rng.uniform(-init_range, init_range, size=shape)
        return cls(u(h, input_dim), u(h), u(h), float(u()))

    def hidden(self, X) -> np.ndarray:
        return sigmoid(X @ self.W1.T + self.b1)

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.input_dim:
            raise BpnError(f"dimension mismatch: model expects {self.input_dim}, got {X.shape[1]}")
        return sigmoid(self.hidden(X) @ self.W2 + self.b2)

    # scores() is the ROC score for this classifier
    decision_function = scores

    def to_dict(self) -> dict:
        return {
            "format": "wct-bpn",
            "version": MODEL_VERSION,
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "W1": self.W1.tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": self.b2,
            "feature_subset": None if self.feature_subset is None else list(self.feature_subset),
            "normalization": None if self.normalization is None else self.normalization.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> BpnModel:
        if d.get("format") != "wct-bpn" or d.get("version") != MODEL_VERSION:
            raise BpnError(f"unsupported model document: {d.get('format')!r} v{d.get('version')!r}")
        norm = d.get("normalization")
        subset = d.get("feature_subset")
        return cls(
            np.array(d["W1"]),
            np.array(d["b1"]),
            np.array(d["W2"]),
            d["b2"],
            feature_subset=None if subset is None else tuple(subset),
            normalization=None if norm is None else NormalizationParams.from_dict(norm),
            metadata=dict(d.get("metadata", {})),
        )


def forward(model: BpnModel, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(model.scores(x[None, :])[0])


def targets(y) -> np.ndarray:
    return (np.asarray(y) > 0).astype(float)


def loss(model: BpnModel, X, t) -> float:
    """Half the summed squared error; the quantity whose gradient training follows."""
    o = model.scores(X)
    return float(0.5 * np.sum((o - t) ** 2))


def gradients(model: BpnModel, X, t) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Backpropagated gradients of ``loss`` w.r.t. (W1, b1, W2, b2)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    h = model.hidden(X)
    o = sigmoid(h @ model.W2 + model.b2)
    d_out = (o - t) * o * (1.0 - o)
    d_hid = np.outer(d_out, model.W2) * h * (1.0 - h)
    return d_hid.T @ X, d_hid.sum(axis=0), h.T @ d_out, float(d_out.sum())


def train(data: LabeledDataset, cfg: BpnConfig = BpnConfig(), hidden_dim: int | None = None) -> tuple[BpnModel, int, float]:
    """Returns (model, epochs used, final mean squared error)."""
    if len(data) == 0:
        raise BpnError("cannot train on an empty dataset")
    X, t = data.X, targets(data.y)
    rng = np.random.default_rng(cfg.rng_seed)
    model = BpnModel.initialize(data.dim, hidden_dim, cfg.init_range, rng)
    lr_h, lr_o = cfg.rates
    vel = [np.zeros_like(model.W1), np.zeros_like(model.b1), np.zeros_like(model.W2), 0.0]
    mse = float(np.mean((model.scores(X) - t) ** 2))
    epochs = 0
    while mse > cfg.target_error and epochs < cfg.max_epochs:
        gW1, gb1, gW2, gb2 = gradients(model, X, t)
        vel = [
            -lr_h * gW1 + cfg.momentum * vel[0],
            -lr_h * gb1 + cfg.momentum * vel[1],
            -lr_o * gW2 + cfg.momentum * vel[2],
            -lr_o * gb2 + cfg.momentum * vel[3],
        ]
        model.W1 = model.W1 + vel[0]
        model.b1 = model.b1 + vel[1]
        model.W2 = model.W2 + vel[2]
        model.b2 = model.b2 + vel[3]
        epochs += 1
        weights_ok = all(np.all(np.isfinite(v)) for v in (model.W1, model.b1, model.W2, model.b2))
        with np.errstate(invalid="ignore"):
            mse = float(np.mean((model.scores(X) - t) ** 2))
        if not (weights_ok and np.isfinite(mse)):
            raise BpnError(f"training diverged at epoch {epochs}")
    model.metadata = {
        "learning_rate": cfg.learning_rate,
        "momentum": cfg.momentum,
        "target_error": cfg.target_error,
        "seed": cfg.rng_seed,
        "epochs": epochs,
        "mse": mse,
    }
    return model, epochs, mse


def predict(model: BpnModel, x) -> tuple[int, float]:
    """(label, score); a score of exactly 0.5 counts as abnormal."""
    score = forward(model, x)
    return (1 if score >= 0.5 else -1), score

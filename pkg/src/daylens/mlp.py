"""Small feed-forward regression network trained with AdamW.

Architecture is fixed at two hidden layers of 16 and 8 units with leaky-ReLU
activations and a single linear output. Everything runs full-batch in double
precision; gradients are backpropagated by hand and are exact, which the
finite-difference tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange, ShapeMismatch
from .elasticnet import expanding_folds

HIDDEN_SIZES = (16, 8)
LEAKY_SLOPE = 0.01


@dataclass
class Network:
    weights: list[np.ndarray]  # per layer, shape (fan_in, fan_out)
    biases: list[np.ndarray]  # per layer, shape (fan_out,)
    negative_slope: float = LEAKY_SLOPE

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def parameters(self) -> list[np.ndarray]:
        """Flat list of parameter arrays, weights and biases interleaved."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "Network":
        return Network(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            negative_slope=self.negative_slope,
        )

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "negative_slope": self.negative_slope,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        return cls(
            weights=[np.asarray(w, dtype=float) for w in d["weights"]],
            biases=[np.asarray(b, dtype=float) for b in d["biases"]],
            negative_slope=float(d["negative_slope"]),
        )


def init_network(
    d_in: int,
    seed: int,
    hidden: tuple[int, ...] = HIDDEN_SIZES,
    negative_slope: float = LEAKY_SLOPE,
) -> Network:
    """Seeded Glorot-uniform weights, zero biases."""
    if d_in < 1:
        raise OutOfRange("d_in must be >= 1")
    rng = np.random.default_rng(seed)
    sizes = [d_in, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(weights=weights, biases=biases, negative_slope=negative_slope)


def leaky_relu(x, slope: float = LEAKY_SLOPE):
    """x for x >= 0, slope * x otherwise (elementwise)."""
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0.0, x, slope * x)


def forward(net: Network, x) -> np.ndarray:
    """Predictions for a batch (n, d_in) or a single row (d_in,)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != net.weights[0].shape[0]:
        raise ShapeMismatch(f"expected {net.weights[0].shape[0]} inputs, got {x.shape[1]}")
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = leaky_relu(h, net.negative_slope)
    return h[:, 0]


def loss_and_gradients(net: Network, X, y):
    """Full-batch MSE and exact gradients for every parameter.

    Returns (mse, grads) with grads ordered like Network.parameters().
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"{X.shape[0]} rows vs {y.shape[0]} targets")
    if X.shape[1] != net.weights[0].shape[0]:
        raise ShapeMismatch(f"expected {net.weights[0].shape[0]} inputs, got {X.shape[1]}")

    last = len(net.weights) - 1
    pre: list[np.ndarray] = []  # pre-activation per layer
    acts: list[np.ndarray] = [X]  # layer inputs
    h = X
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = leaky_relu(z, net.negative_slope) if i < last else z
        acts.append(h)

    residual = acts[-1][:, 0] - y
    n = y.shape[0]
    mse = float(residual @ residual) / n

    d_z = (2.0 / n) * residual[:, None]
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))
    for i in range(last, -1, -1):
        grads[2 * i] = acts[i].T @ d_z
        grads[2 * i + 1] = d_z.sum(axis=0)
        if i > 0:
            d_h = d_z @ net.weights[i].T
            slope_mask = np.where(pre[i - 1] >= 0.0, 1.0, net.negative_slope)
            d_z = d_h * slope_mask
    return mse, grads


@dataclass
class OptimizerState:
    """AdamW moment accumulators, one pair per parameter array."""

    learning_rate: float = 1e-4
    weight_decay: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def init_optimizer(
    net: Network, learning_rate: float = 1e-4, weight_decay: float = 1.0
) -> OptimizerState:
    params = net.parameters()
    return OptimizerState(
        learning_rate=learning_rate,
        weight_decay=weight_decay,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adamw_step(params: list[np.ndarray], grads: list[np.ndarray], state: OptimizerState) -> None:
    """One AdamW update in place: Adam on the gradient, decoupled decay on p."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        # decay is decoupled and applies to the pre-update parameter value
        p -= state.learning_rate * (
            m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * p
        )


def train(
    net: Network,
    X,
    y,
    epochs: int,
    learning_rate: float = 1e-4,
    weight_decay: float = 1.0,
    X_val=None,
    y_val=None,
    patience: int | None = None,
):
    """Train full-batch for up to `epochs`; returns (losses, val_losses).

    With validation data and a patience, training stops once the validation
    MSE has not improved for `patience` consecutive epochs.
    """
    state = init_optimizer(net, learning_rate, weight_decay)
    params = net.parameters()
    losses: list[float] = []
    val_losses: list[float] = []
    best_val = np.inf
    since_best = 0
    for _ in range(epochs):
        mse, grads = loss_and_gradients(net, X, y)
        adamw_step(params, grads, state)
        losses.append(mse)
        if X_val is not None:
            res = forward(net, X_val) - np.asarray(y_val, dtype=float)
            val_mse = float(res @ res) / len(res)
            val_losses.append(val_mse)
            if val_mse < best_val:
                best_val = val_mse
                since_best = 0
            else:
                since_best += 1
                if patience is not None and since_best >= patience:
                    break
    return losses, val_losses


@dataclass
class TrainResult:
    network: Network
    chosen_epochs: int
    curve: list[tuple[int, float, float]]  # (epoch, mean train MSE, mean val MSE)


def train_early_stopping(
    X_train,
    y_train,
    folds: int = 5,
    max_epochs: int = 2000,
    seed: int = 0,
    learning_rate: float = 1e-4,
    weight_decay: float = 1.0,
    patience: int = 500,
    hidden: tuple[int, ...] = HIDDEN_SIZES,
) -> TrainResult:
    """Pick the epoch count by expanding-window CV, then retrain on all rows.

    Each fold trains a fresh network, recording validation MSE per epoch; the
    chosen epoch minimizes the mean validation curve over the epochs all
    folds reached. The final network trains on every row for exactly that
    many epochs from the base seed.
    """
    X = np.asarray(X_train, dtype=float)
    y = np.asarray(y_train, dtype=float)
    d_in = X.shape[1]
    fold_train: list[list[float]] = []
    fold_val: list[list[float]] = []
    for k, (tr, va) in enumerate(expanding_folds(len(y), folds)):
        net = init_network(d_in, seed=seed + k + 1, hidden=hidden)
        losses, val_losses = train(
            net, X[tr], y[tr], epochs=max_epochs,
            learning_rate=learning_rate, weight_decay=weight_decay,
            X_val=X[va], y_val=y[va], patience=patience,
        )
        fold_train.append(losses)
        fold_val.append(val_losses)

    common = min(len(v) for v in fold_val)
    mean_train = np.mean([t[:common] for t in fold_train], axis=0)
    mean_val = np.mean([v[:common] for v in fold_val], axis=0)
    chosen = int(np.argmin(mean_val)) + 1

    final = init_network(d_in, seed=seed, hidden=hidden)
    train(final, X, y, epochs=chosen, learning_rate=learning_rate, weight_decay=weight_decay)
    curve = [
        (e + 1, float(mean_train[e]), float(mean_val[e])) for e in range(common)
    ]
    return TrainResult(network=final, chosen_epochs=chosen, curve=curve)

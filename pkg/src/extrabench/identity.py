"""Learning the identity function on 5-bit binary codes.

Train on the even numbers, test on the odds: the test inputs are displaced
perpendicular to the training manifold (the least significant bit is
constant 0 in training), so a plain linear layer cannot generalise while
models with the right global structure can.

Five parameterizations:

- ``slp``    plain linear map, W x
- ``flip``   linear map in the complemented encoding, 1 - W (1 - x)
- ``ortho``  orthonormality-constrained linear map with |W x| output
- ``conv``   single 1-d filter slid across bit positions (zero padded)
- ``proj``   project bits to an n-vector r = A x with A_ij = e^{beta (j - i)},
             learn an n-to-n map on r, decode by pseudo-inverse

Bit order is LSB-first: bits[0] is the least significant digit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import SeededRng, orthonormal_retraction

MODEL_KINDS = ("slp", "flip", "ortho", "conv", "proj")

# Full-batch gradient descent step sizes, tuned once on the default task and
# frozen.  Keyed by model kind.
DEFAULT_LEARNING_RATES = {
    "slp": 0.3,
    "flip": 0.2,
    "ortho": 0.15,
    "conv": 0.15,
    "proj": 0.001,
}


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    learning_rate: Optional[float] = None  # None picks the per-kind default
    seed: int = 0
    width: int = 5

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class EvalReport:
    train_mse: float
    test_mse: float
    # Extra decoded-bit-space numbers, populated for proj only (its primary
    # MSE lives in the projected space).
    decoded_train_mse: Optional[float] = None
    decoded_test_mse: Optional[float] = None


@dataclass(frozen=True)
class IdentityDataset:
    train_inputs: np.ndarray   # (n_train, width) floats in {0, 1}
    train_targets: np.ndarray
    test_inputs: np.ndarray
    test_targets: np.ndarray


def int_to_bits(value: int, width: int = 5) -> np.ndarray:
    """Binary code of `value`, LSB at index 0."""
    if not 0 <= value < 2 ** width:
        raise ValueError(f"value {value} does not fit in {width} bits")
    return np.array([(value >> j) & 1 for j in range(width)], dtype=np.float64)


def bits_to_int(bits: np.ndarray) -> int:
    bits = np.asarray(bits)
    return int(sum(int(round(b)) << j for j, b in enumerate(bits)))


def flip_encode(bits: np.ndarray) -> np.ndarray:
    """Complement encoding: digit 1 becomes value 0 and vice versa."""
    return 1.0 - np.asarray(bits, dtype=np.float64)


def make_dataset(width: int = 5) -> IdentityDataset:
    """Identity task: evens for training, odds for testing, input == target."""
    evens = np.stack([int_to_bits(v, width) for v in range(0, 2 ** width, 2)])
    odds = np.stack([int_to_bits(v, width) for v in range(1, 2 ** width, 2)])
    return IdentityDataset(evens, evens.copy(), odds, odds.copy())


def make_scaling_dataset(width: int = 5, factor: int = 2) -> IdentityDataset:
    """Multiplication task: map x to factor * x (mod 2^width), evens -> odds split."""
    def code(v):
        return int_to_bits(v, width)

    evens = list(range(0, 2 ** width, 2))
    odds = list(range(1, 2 ** width, 2))
    return IdentityDataset(
        np.stack([code(v) for v in evens]),
        np.stack([code((factor * v) % 2 ** width) for v in evens]),
        np.stack([code(v) for v in odds]),
        np.stack([code((factor * v) % 2 ** width) for v in odds]),
    )


def proj_matrix(beta: float, n: int, width: int = 5) -> np.ndarray:
    """Projection with entries A[i, j] = e^{beta (j - i)}.

    With beta = ln 2 and n = 1 the single row is (1, 2, 4, ...): the
    projection of an LSB-first code is the integer it encodes.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(n)[:, None]
    j = np.arange(width)[None, :]
    return np.exp(beta * (j - i)).astype(np.float64)


def batch_mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Squared error summed over output units, averaged over examples."""
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    return float(np.mean(np.sum((pred - target) ** 2, axis=1)))


# ---------------------------------------------------------------------------
# Models.  Each exposes: params (list of live arrays), forward_batch (original
# digit representation), train_loss_grads (loss + gradients of the training
# objective), eval_mse, and a post_step hook for manifold constraints.
# ---------------------------------------------------------------------------


class SlpModel:
    kind = "slp"

    def __init__(self, weight: np.ndarray):
        self.weight = np.asarray(weight, dtype=np.float64)

    @classmethod
    def init(cls, rng: SeededRng, width: int = 5) -> "SlpModel":
        return cls(rng.uniform_array((width, width), -0.1, 0.1))

    @property
    def params(self):
        return [self.weight]

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight.T

    def train_loss_grads(self, x, y):
        pred = self.forward_batch(x)
        resid = pred - y
        loss = float(np.mean(np.sum(resid ** 2, axis=1)))
        grad = (2.0 / x.shape[0]) * resid.T @ x
        return loss, [grad]

    def eval_mse(self, x, y) -> float:
        return batch_mse(self.forward_batch(x), y)

    def post_step(self):
        pass


class FlipModel:
    """Linear map trained entirely in the complemented encoding."""

    kind = "flip"

    def __init__(self, weight: np.ndarray):
        self.weight = np.asarray(weight, dtype=np.float64)

    @classmethod
    def init(cls, rng: SeededRng, width: int = 5) -> "FlipModel":
        return cls(rng.uniform_array((width, width), -0.1, 0.1))

    @property
    def params(self):
        return [self.weight]

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        # Predict in flipped space, decode back to the original digits.
        return 1.0 - (1.0 - x) @ self.weight.T

    def train_loss_grads(self, x, y):
        xf = 1.0 - x
        yf = 1.0 - y
        resid = xf @ self.weight.T - yf
        loss = float(np.mean(np.sum(resid ** 2, axis=1)))
        grad = (2.0 / x.shape[0]) * resid.T @ xf
        return loss, [grad]

    def eval_mse(self, x, y) -> float:
        # Identical in either encoding: (1 - a) - (1 - b) = b - a.
        return batch_mse(self.forward_batch(x), y)

    def post_step(self):
        pass


class OrthoModel:
    """Linear map kept orthonormal by Gram-Schmidt retraction, |W x| output."""

    kind = "ortho"

    def __init__(self, weight: np.ndarray):
        self.weight = np.asarray(weight, dtype=np.float64)

    @classmethod
    def init(cls, rng: SeededRng, width: int = 5) -> "OrthoModel":
        return cls(orthonormal_retraction(rng.uniform_array((width, width), -0.1, 0.1)))

    @property
    def params(self):
        return [self.weight]

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        return np.abs(x @ self.weight.T)

    def train_loss_grads(self, x, y):
        z = x @ self.weight.T
        resid = np.abs(z) - y
        loss = float(np.mean(np.sum(resid ** 2, axis=1)))
        grad = (2.0 / x.shape[0]) * (resid * np.sign(z)).T @ x
        return loss, [grad]

    def eval_mse(self, x, y) -> float:
        return batch_mse(self.forward_batch(x), y)

    def post_step(self):
        self.weight[...] = orthonormal_retraction(self.weight)


class ConvModel:
    """One linear filter slid across bit positions; zero padding keeps length."""

    kind = "conv"

    def __init__(self, filter: np.ndarray):
        self.filter = np.asarray(filter, dtype=np.float64)

    @classmethod
    def init(cls, rng: SeededRng, width: int = 5) -> "ConvModel":
        return cls(rng.uniform_array(width, -0.1, 0.1))

    @property
    def params(self):
        return [self.filter]

    def _padded(self, x: np.ndarray) -> np.ndarray:
        half = self.filter.shape[0] // 2
        return np.pad(np.atleast_2d(x), ((0, 0), (half, half)))

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        xp = self._padded(x)
        f = self.filter
        width = x.shape[1]
        out = np.zeros_like(x)
        for k in range(f.shape[0]):
            out += f[k] * xp[:, k:k + width]
        return out

    def train_loss_grads(self, x, y):
        pred = self.forward_batch(x)
        resid = pred - y
        loss = float(np.mean(np.sum(resid ** 2, axis=1)))
        xp = self._padded(x)
        width = x.shape[1]
        grad = np.zeros_like(self.filter)
        for k in range(self.filter.shape[0]):
            grad[k] = (2.0 / x.shape[0]) * np.sum(resid * xp[:, k:k + width])
        return loss, [grad]

    def eval_mse(self, x, y) -> float:
        return batch_mse(self.forward_batch(x), y)

    def post_step(self):
        pass


class ProjModel:
    """Dimensionality-reduction model: learn an n-to-n map on r = A x.

    Training and the primary MSE live in the projected space (loss between
    M (A x) and A y).  `forward_batch` decodes back to bit space through the
    pseudo-inverse of A; `decode_bits` rounds the n = 1 projection to the
    nearest integer and re-expands its binary code.
    """

    kind = "proj"

    def __init__(self, layer: np.ndarray, projection: np.ndarray):
        self.layer = np.atleast_2d(np.asarray(layer, dtype=np.float64))
        self.projection = np.asarray(projection, dtype=np.float64)  # fixed, never trained
        self._pinv = np.linalg.pinv(self.projection)

    @classmethod
    def init(cls, rng: SeededRng, width: int = 5, beta: Optional[float] = None, n: int = 1) -> "ProjModel":
        beta = np.log(2.0) if beta is None else beta
        a = proj_matrix(beta, n, width)
        return cls(rng.uniform_array((n, n), -0.1, 0.1), a)

    @property
    def params(self):
        return [self.layer]

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ self.projection.T

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        # Continuous decode (before any rounding).
        return self.project(x) @ self.layer.T @ self._pinv.T

    def decode_bits(self, x: np.ndarray) -> np.ndarray:
        """Round the learned projection to an integer and emit its bits (n = 1)."""
        if self.layer.shape != (1, 1):
            raise ValueError("integer decoding is defined for the n = 1 model only")
        width = self.projection.shape[1]
        r = self.project(x) @ self.layer.T
        values = np.clip(np.rint(r[:, 0]), 0, 2 ** width - 1).astype(int)
        return np.stack([int_to_bits(v, width) for v in values])

    def train_loss_grads(self, x, y):
        r = self.project(x)
        s = self.project(y)
        resid = r @ self.layer.T - s
        loss = float(np.mean(np.sum(resid ** 2, axis=1)))
        grad = (2.0 / x.shape[0]) * resid.T @ r
        return loss, [grad]

    def eval_mse(self, x, y) -> float:
        """Primary metric: MSE in the projected space."""
        return batch_mse(self.project(x) @ self.layer.T, self.project(y))

    def decoded_mse(self, x, y) -> float:
        return batch_mse(self.decode_bits(x), y)

    def post_step(self):
        pass


_MODEL_CLASSES = {
    "slp": SlpModel,
    "flip": FlipModel,
    "ortho": OrthoModel,
    "conv": ConvModel,
    "proj": ProjModel,
}


def init_model(kind: str, rng: SeededRng, width: int = 5):
    if kind not in _MODEL_CLASSES:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    return _MODEL_CLASSES[kind].init(rng, width)


def forward(model, bits: np.ndarray) -> np.ndarray:
    """Single-input prediction in the original digit representation."""
    return model.forward_batch(np.atleast_2d(np.asarray(bits, dtype=np.float64)))[0]


def train(kind: str, config: TrainConfig = TrainConfig(),
          dataset: Optional[IdentityDataset] = None):
    """Full-batch gradient descent on the train split; returns (model, report)."""
    if dataset is None:
        dataset = make_dataset(config.width)
    lr = config.learning_rate if config.learning_rate is not None else DEFAULT_LEARNING_RATES[kind]
    # Each kind gets its own child stream so the five models never share an
    # initial draw (and a bad draw for one kind cannot shadow another).
    rng = SeededRng(config.seed)
    for _ in range(MODEL_KINDS.index(kind) + 1):
        rng = rng.spawn()
    model = init_model(kind, rng, config.width)
    x, y = dataset.train_inputs, dataset.train_targets

    for epoch in range(config.epochs):
        loss, grads = model.train_loss_grads(x, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"{kind} training diverged at epoch {epoch} with learning rate {lr}")
        for p, g in zip(model.params, grads):
            p -= lr * g
        model.post_step()

    report_kwargs = dict(
        train_mse=model.eval_mse(dataset.train_inputs, dataset.train_targets),
        test_mse=model.eval_mse(dataset.test_inputs, dataset.test_targets),
    )
    if kind == "proj":
        report_kwargs["decoded_train_mse"] = model.decoded_mse(dataset.train_inputs, dataset.train_targets)
        report_kwargs["decoded_test_mse"] = model.decoded_mse(dataset.test_inputs, dataset.test_targets)
    return model, EvalReport(**report_kwargs)


def run_table1(configs: Optional[dict] = None, seed: int = 0):
    """Train all five models and report train/test MSE in a fixed row order.

    `configs` optionally maps kind -> TrainConfig; missing kinds get defaults
    with the given seed.  Returns a list of (kind, EvalReport).
    """
    rows = []
    for kind in MODEL_KINDS:
        cfg = (configs or {}).get(kind, TrainConfig(seed=seed))
        _, report = train(kind, cfg)
        rows.append((kind, report))
    return rows

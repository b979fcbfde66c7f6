"""Shared numerical kernel: seeded RNG, activations, orthonormalization,
and finite-difference gradient checking.

All floating point work is float64.  Randomness flows exclusively through
:class:`SeededRng` so every experiment is bit-reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    """SplitMix64 finalizer (Steele, Lea & Vigna; also Java's SplittableRandom)."""
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SeededRng:
    """Deterministic 64-bit generator based on the published SplitMix64 scheme.

    The state advances by a fixed odd constant (the golden-ratio gamma) and
    each output is the SplitMix64 finalizer of the new state.  Because the
    update is a pure counter increment, block generation (`uniform_array`)
    produces exactly the same stream as repeated scalar calls.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        return _mix64(self.state)

    def _next_block(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        states = np.uint64(self.state) + steps * np.uint64(_GAMMA)
        self.state = (self.state + n * _GAMMA) & _MASK64
        z = states
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        """Uniform double in [low, high) with 53 random bits."""
        u = (self.next_u64() >> 11) * 2.0 ** -53
        return low + (high - low) * u

    def uniform_array(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self._next_block(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return (low + (high - low) * u).reshape(shape)

    def randint(self, bound: int) -> int:
        """Integer in [0, bound).  Modulo bias is < bound/2^64, irrelevant here."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        return self.next_u64() % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def spawn(self) -> "SeededRng":
        """Child generator with an independent, deterministically derived stream."""
        return SeededRng(self.next_u64())


@dataclass(frozen=True)
class GradCheckReport:
    max_abs_diff: float
    max_rel_diff: float
    n_params: int


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Dense matrix-vector product with an explicit shape contract."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1:
        raise ValueError(f"matvec needs a 2-d matrix and 1-d vector, got {m.shape} and {v.shape}")
    if m.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: matrix is {m.shape}, vector has length {v.shape[0]}")
    return m @ v


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shift-by-max softmax; invariant under adding a constant to all inputs."""
    x = np.asarray(x, dtype=np.float64)
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def sigmoid(x):
    """Numerically stable logistic function; returns a float for scalar input."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def orthonormal_retraction(m: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """Nearest-in-spirit orthonormal matrix via modified Gram-Schmidt on rows.

    Rows are orthonormalized in order, with a second projection sweep per row
    so that the result satisfies ||R R^T - I||_inf at machine precision even
    for poorly conditioned input.  Raises on (numerically) rank-deficient input.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    q = np.array(m, copy=True)
    for i in range(n):
        for _ in range(2):  # re-orthogonalization pass ("twice is enough")
            for j in range(i):
                q[i] -= (q[j] @ q[i]) * q[j]
        norm = np.linalg.norm(q[i])
        if norm <= rank_tol * max(1.0, np.linalg.norm(m[i])):
            raise ValueError(f"rank-deficient input: row {i} vanishes under Gram-Schmidt")
        q[i] /= norm
    return q


def finite_diff_gradcheck(
    loss_fn: Callable[[Sequence[np.ndarray]], float],
    grad_fn: Callable[[Sequence[np.ndarray]], Sequence[np.ndarray]],
    params: Sequence[np.ndarray],
    epsilon: float = 1e-5,
    zero_tol: float = 1e-8,
) -> GradCheckReport:
    """Compare an analytic gradient against central finite differences.

    For each scalar parameter p the numeric gradient is
    (loss(p + eps) - loss(p - eps)) / (2 eps).  Entries where both gradients
    are below `zero_tol` count as agreeing; otherwise the relative difference
    is measured against the numeric value, so an analytic gradient that is
    wrong by a factor of two reports max_rel_diff ~= 1.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    params = [np.array(p, dtype=np.float64, copy=True) for p in params]
    analytic = [np.asarray(g, dtype=np.float64) for g in grad_fn(params)]
    if len(analytic) != len(params):
        raise ValueError("grad_fn returned a different number of arrays than params")

    max_abs = 0.0
    max_rel = 0.0
    n_params = 0
    for k, p in enumerate(params):
        if analytic[k].shape != p.shape:
            raise ValueError(f"gradient {k} has shape {analytic[k].shape}, expected {p.shape}")
        flat_p = p.reshape(-1)
        flat_g = analytic[k].reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + epsilon
            up = float(loss_fn(params))
            flat_p[i] = orig - epsilon
            down = float(loss_fn(params))
            flat_p[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ValueError(f"non-finite loss while perturbing parameter {k}[{i}]")
            numeric = (up - down) / (2.0 * epsilon)
            a = flat_g[i]
            abs_diff = abs(a - numeric)
            max_abs = max(max_abs, abs_diff)
            if max(abs(a), abs(numeric)) >= zero_tol:
                max_rel = max(max_rel, abs_diff / max(abs(numeric), zero_tol))
            n_params += 1
    return GradCheckReport(max_abs_diff=max_abs, max_rel_diff=max_rel, n_params=n_params)

"""Pure-Python/numpy implementations of the hot kernels.

These define the reference behaviour. The compiled module must agree with
them exactly for hashes and to rounding for floating-point reductions.
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GOLDEN = 0x9E3779B97F4A7C15
MASK64 = 0xFFFFFFFFFFFFFFFF

_U_GOLDEN = np.uint64(GOLDEN)
_U_M1 = np.uint64(0xBF58476D1CE4E5B9)
_U_M2 = np.uint64(0x94D049BB133111EB)


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def key_hash(key: bytes, seed: int) -> int:
    return fnv1a64(key) ^ mix64(seed & MASK64)


def _mix_array(x: np.ndarray) -> np.ndarray:
    z = x + _U_GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _U_M1
    z = (z ^ (z >> np.uint64(27))) * _U_M2
    return z ^ (z >> np.uint64(31))


def hashed_embedding(key: bytes, seed: int, dim: int) -> np.ndarray:
    """Unit-norm sign vector for ``key``: component i is +-1/sqrt(dim)."""
    h = key_hash(key, seed)
    steps = np.arange(dim, dtype=np.uint64) * _U_GOLDEN
    with np.errstate(over="ignore"):
        z = _mix_array(np.uint64(h) + steps)
    negative = (z >> np.uint64(63)).astype(bool)
    out = np.full(dim, 1.0 / np.sqrt(dim))
    out[negative] *= -1.0
    return out


def embed_keys(keys: list[bytes], seed: int, dim: int) -> np.ndarray:
    out = np.empty((len(keys), dim))
    for row, key in enumerate(keys):
        out[row] = hashed_embedding(key, seed, dim)
    return out


def rank_hinge(pred: np.ndarray, gold: np.ndarray, margin: float) -> tuple[float, np.ndarray]:
    """Mean margin-ranking hinge over ordered pairs with distinct gold scores.

    Returns the loss and its gradient with respect to ``pred``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    r = np.sign(gold[:, None] - gold[None, :])
    valid = r != 0
    n_pairs = int(valid.sum())
    grad = np.zeros_like(pred)
    if n_pairs == 0:
        return 0.0, grad
    diff = pred[:, None] - pred[None, :]
    hinge = -r * diff + margin
    active = valid & (hinge > 0)
    loss = float(hinge[active].sum()) / n_pairs
    # d/d pred_i of -r_ij (pred_i - pred_j) is -r_ij; of the (j, i) term it is +r_ji
    coef = np.where(active, -r, 0.0)
    grad = (coef.sum(axis=1) - coef.sum(axis=0)) / n_pairs
    return loss, grad

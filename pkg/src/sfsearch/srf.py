"""Symmetry-related features (SRF) and the 22-2-1 performance predictor."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .blocks import BlockSF

__all__ = [
    "BASE_PATTERNS",
    "base_patterns",
    "assignments",
    "srf",
    "srf_string",
    "check_c1",
    "Predictor",
    "predictor_fit",
    "predictor_score",
]

BASE_PATTERNS: tuple[tuple[int, int, int, int], ...] = (
    (1, 2, 3, 4),
    (1, 1, 2, 2),
    (1, 1, 2, 3),
    (1, 1, 1, 2),
    (1, 1, 1, 1),
    (0, 1, 2, 3),
    (0, 1, 1, 2),
    (0, 1, 1, 1),
    (0, 0, 1, 2),
    (0, 0, 1, 1),
    (0, 0, 0, 1),
)


def base_patterns() -> list[np.ndarray]:
    return [np.array(p, dtype=np.int64) for p in BASE_PATTERNS]


@lru_cache(maxsize=None)
def _assignment_array(case_index: int) -> np.ndarray:
    base = BASE_PATTERNS[case_index - 1]
    out = set()
    for perm in itertools.permutations(base):
        nonzero = [n for n, v in enumerate(perm) if v]
        for signs in itertools.product((1, -1), repeat=len(nonzero)):
            v = list(perm)
            for n, s in zip(nonzero, signs):
                v[n] *= s
            out.add(tuple(v))
    arr = np.array(sorted(out), dtype=np.int64)
    arr.setflags(write=False)
    return arr


def assignments(case_index: int) -> set[tuple[int, ...]]:
    """Distinct permutations/sign flips of base pattern ``case_index`` (1..11)."""
    if not 1 <= case_index <= len(BASE_PATTERNS):
        raise ValueError(f"case_index must be in 1..{len(BASE_PATTERNS)}")
    return {tuple(int(x) for x in row) for row in _assignment_array(case_index)}


def _substituted(sf: BlockSF, values: np.ndarray) -> np.ndarray:
    """``g(v)`` for each row of ``values``: shape ``(n, 4, 4)``."""
    a = np.asarray(sf.entries, dtype=np.int64)
    labels = np.clip(np.abs(a) - 1, 0, 3)
    g = np.sign(a) * values[:, labels]
    return g.reshape(-1, 4, 4)


@lru_cache(maxsize=65536)
def _srf_bits(sf: BlockSF) -> tuple[int, ...]:
    bits = []
    for case in range(1, len(BASE_PATTERNS) + 1):
        g = _substituted(sf, _assignment_array(case))
        gt = g.transpose(0, 2, 1)
        bits.append(int((g == gt).all(axis=(1, 2)).any()))
        bits.append(int((g == -gt).all(axis=(1, 2)).any()))
    return tuple(bits)


def srf(sf: BlockSF) -> np.ndarray:
    """22 binary features ordered (S1.sym, S1.skew, ..., S11.sym, S11.skew)."""
    return np.array(_srf_bits(sf), dtype=np.int64)


def srf_string(sf: BlockSF) -> str:
    return "".join(str(b) for b in _srf_bits(sf))


def check_c1(sf: BlockSF) -> tuple[bool, bool]:
    """(can be symmetric, can be skew-symmetric) under some SRF assignment."""
    bits = _srf_bits(sf)
    return any(bits[0::2]), any(bits[1::2])


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class Predictor:
    """Fully connected 22 -> 2 -> 1 network with a sigmoid hidden layer."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def forward(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        hidden = _sigmoid(x @ self.w1 + self.b1)
        return hidden @ self.w2 + self.b2


def predictor_fit(
    records: list[tuple[np.ndarray, float]],
    seed: int = 0,
    hidden: int = 2,
    lr: float = 0.5,
    epochs: int = 3000,
) -> Predictor:
    """Fit from scratch by full-batch gradient descent on mean squared error."""
    if not records:
        raise ValueError("predictor_fit needs at least one record")
    x = np.array([np.asarray(f, dtype=np.float64) for f, _ in records])
    y = np.array([float(m) for _, m in records])
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, 0.5, size=(x.shape[1], hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, 0.5, size=hidden)
    b2 = float(y.mean())
    n = len(y)
    for _ in range(epochs):
        z = x @ w1 + b1
        a = _sigmoid(z)
        err = a @ w2 + b2 - y
        g_out = 2.0 * err / n
        g_w2 = a.T @ g_out
        g_b2 = g_out.sum()
        g_a = np.outer(g_out, w2)
        g_z = g_a * a * (1.0 - a)
        g_w1 = x.T @ g_z
        g_b1 = g_z.sum(axis=0)
        w1 -= lr * g_w1
        b1 -= lr * g_b1
        w2 -= lr * g_w2
        b2 -= lr * g_b2
    return Predictor(w1, b1, w2, float(b2))


def predictor_score(p: Predictor, sf: BlockSF) -> float:
    return float(p.forward(srf(sf))[0])

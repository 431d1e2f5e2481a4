"""Embedding training with the multi-class loss and Adagrad."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .blocks import BlockSF, EmbeddingTable, relation_col_vector, relation_row_vector
from .equivalence import check_c2
from .kgdata import TripleStore

__all__ = [
    "ConfigError",
    "NumericError",
    "TrainConfig",
    "TrainResult",
    "Gradients",
    "init_embeddings",
    "batch_loss_grad",
    "train",
]

log = logging.getLogger(__name__)

ADAGRAD_EPS = 1e-10


class ConfigError(ValueError):
    pass


class NumericError(ArithmeticError):
    def __init__(self, message: str, triple: tuple[int, int, int] | None = None):
        super().__init__(message)
        self.triple = triple


@dataclass(frozen=True)
class TrainConfig:
    d: int = 64
    lr: float = 0.1
    l2: float = 1e-3
    batch: int = 512
    decay: float = 0.995
    epochs: int = 100
    seed: int = 0
    init_scale: float = 1e-2

    def __post_init__(self) -> None:
        if self.d <= 0 or self.d % 4:
            raise ConfigError(f"d must be a positive multiple of 4, got {self.d}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be >= 0, got {self.l2}")
        if self.batch <= 0:
            raise ConfigError(f"batch must be positive, got {self.batch}")
        if not 0.99 <= self.decay <= 1.0:
            raise ConfigError(f"decay must lie in [0.99, 1.0], got {self.decay}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.init_scale < 0:
            raise ConfigError(f"init_scale must be >= 0, got {self.init_scale}")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls.from_dict(data.get("train", data))

    def replace(self, **changes) -> "TrainConfig":
        return TrainConfig(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    table: EmbeddingTable
    loss_history: list[float] = field(default_factory=list)
    wall_time: float = 0.0


@dataclass
class Gradients:
    """Row-sparse gradients: ``entity[n]`` belongs to row ``entity_rows[n]``."""

    entity_rows: np.ndarray
    entity: np.ndarray
    relation_rows: np.ndarray
    relation: np.ndarray


def init_embeddings(store: TripleStore, config: TrainConfig) -> EmbeddingTable:
    rng = np.random.default_rng(config.seed)
    s = config.init_scale
    entity = rng.uniform(-s, s, size=(store.n_entities, config.d))
    relation = rng.uniform(-s, s, size=(store.n_relations, config.d))
    return EmbeddingTable(entity, relation)


def _softmax_xent(scores: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row cross-entropy and ``softmax - onehot``."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(target))
    loss = lse - shifted[rows, target]
    delta = np.exp(shifted - lse[:, None])
    delta[rows, target] -= 1.0
    return loss, delta


def _chunked(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], 4, -1)


def batch_loss_grad(
    sf: BlockSF, table: EmbeddingTable, batch: np.ndarray, l2: float
) -> tuple[float, Gradients]:
    """Mean two-direction cross-entropy over all entities plus L2 on touched rows.

    Every entity receives a gradient through the softmax normaliser, so
    ``entity_rows`` covers the whole table; relation gradients are
    restricted to relations present in the batch.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    n = len(batch)
    if n == 0:
        raise ValueError("batch must be non-empty")
    E = np.asarray(table.entity, dtype=np.float64)
    Rel = np.asarray(table.relation, dtype=np.float64)
    hs, rs, ts = batch[:, 0], batch[:, 1], batch[:, 2]
    H, R, T = E[hs], Rel[rs], E[ts]

    with np.errstate(over="ignore", invalid="ignore"):
        Q = relation_row_vector(sf, H, R)  # tail queries
        P = relation_col_vector(sf, T, R)  # head queries
        tail_scores = Q @ E.T
        head_scores = P @ E.T
    if not (np.isfinite(tail_scores).all() and np.isfinite(head_scores).all()):
        bad = ~(np.isfinite(tail_scores).all(axis=1) & np.isfinite(head_scores).all(axis=1))
        triple = tuple(int(x) for x in batch[np.argmax(bad)])
        raise NumericError(f"non-finite score for triple {triple}", triple)

    loss_t, d_tail = _softmax_xent(tail_scores, ts)
    loss_h, d_head = _softmax_xent(head_scores, hs)
    scale = 1.0 / (2 * n)
    d_tail *= scale
    d_head *= scale

    sq = (H * H).sum(axis=1) + (R * R).sum(axis=1) + (T * T).sum(axis=1)
    reg_scale = l2 / (3 * n)
    loss = float((loss_t.sum() + loss_h.sum()) * scale + reg_scale * sq.sum())

    # candidate-side gradient over the whole entity table
    g_E = d_tail.T @ Q + d_head.T @ P
    dQ = _chunked(d_tail @ E)
    dP = _chunked(d_head @ E)
    Hc, Rc, Tc = _chunked(H), _chunked(R), _chunked(T)
    dH = np.zeros_like(Hc)
    dT = np.zeros_like(Tc)
    dR = np.zeros_like(Rc)
    for i, j, k, s in sf.terms:
        # q_j += s * h_i * r_k
        dH[:, i] += s * dQ[:, j] * Rc[:, k]
        dR[:, k] += s * dQ[:, j] * Hc[:, i]
        # p_i += s * r_k * t_j
        dT[:, j] += s * dP[:, i] * Rc[:, k]
        dR[:, k] += s * dP[:, i] * Tc[:, j]
    dH = dH.reshape(n, -1) + 2 * reg_scale * H
    dT = dT.reshape(n, -1) + 2 * reg_scale * T
    dR = dR.reshape(n, -1) + 2 * reg_scale * R

    np.add.at(g_E, hs, dH)
    np.add.at(g_E, ts, dT)
    rel_rows, inverse = np.unique(rs, return_inverse=True)
    g_R = np.zeros((len(rel_rows), table.dim))
    np.add.at(g_R, inverse, dR)
    grads = Gradients(np.arange(table.n_entities), g_E, rel_rows, g_R)
    return loss, grads


def train(store: TripleStore, sf: BlockSF, config: TrainConfig) -> TrainResult:
    """Mini-batch Adagrad over shuffled training triples.

    The step size is ``lr * decay**epoch``; runs are deterministic for a
    fixed config.
    """
    if not check_c2(sf):
        log.warning("scoring function %s violates constraint C2; training anyway", sf)
    start = time.perf_counter()
    table = init_embeddings(store, config)
    result = TrainResult(table)
    if config.epochs == 0 or len(store.train) == 0:
        result.wall_time = time.perf_counter() - start
        return result

    rng = np.random.default_rng(config.seed + 1)
    acc_E = np.zeros_like(table.entity)
    acc_R = np.zeros_like(table.relation)
    triples = store.train
    lr = config.lr
    for epoch in range(config.epochs):
        order = rng.permutation(len(triples))
        total, count = 0.0, 0
        for b, lo in enumerate(range(0, len(order), config.batch)):
            batch = triples[order[lo : lo + config.batch]]
            try:
                loss, g = batch_loss_grad(sf, table, batch, config.l2)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, batch {b}: {exc}", exc.triple) from exc
            # entity gradients are dense (softmax over all candidates)
            acc_E += g.entity**2
            table.entity -= lr * g.entity / (np.sqrt(acc_E) + ADAGRAD_EPS)
            acc_R[g.relation_rows] += g.relation**2
            table.relation[g.relation_rows] -= (
                lr * g.relation / (np.sqrt(acc_R[g.relation_rows]) + ADAGRAD_EPS)
            )
            total += loss * len(batch)
            count += len(batch)
        mean = total / count
        if not np.isfinite(mean):
            raise NumericError(f"epoch {epoch}: non-finite mean loss")
        result.loss_history.append(mean)
        lr *= config.decay
    result.wall_time = time.perf_counter() - start
    return result

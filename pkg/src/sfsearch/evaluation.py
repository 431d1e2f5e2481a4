"""Filtered link prediction and triplet classification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockSF, EmbeddingTable, relation_col_vector, relation_row_vector
from .kgdata import TripleStore

__all__ = [
    "RankReport",
    "LabeledTriples",
    "link_prediction",
    "triple_scores",
    "classification_thresholds",
    "triplet_classification",
    "negative_sampling_for_classification",
    "ThresholdFit",
]


@dataclass
class RankReport:
    """Ranks are stored per triple as ``[head_rank, tail_rank]`` pairs."""

    ranks: np.ndarray

    @property
    def n(self) -> int:
        return int(self.ranks.size)

    @property
    def mrr(self) -> float:
        return float(np.mean(1.0 / self.ranks)) if self.ranks.size else 0.0

    def hits(self, k: int) -> float:
        return float(np.mean(self.ranks <= k)) if self.ranks.size else 0.0

    @property
    def hits1(self) -> float:
        return self.hits(1)

    @property
    def hits10(self) -> float:
        return self.hits(10)

    def to_json(self) -> dict:
        return {"mrr": self.mrr, "hits1": self.hits1, "hits10": self.hits10, "n": self.n}


def _pessimistic_ranks(scores: np.ndarray, target: np.ndarray, exclude: list) -> np.ndarray:
    """Rank of ``target`` per row, ties counted ahead, ``exclude[n]`` removed."""
    rows = np.arange(len(target))
    true_scores = scores[rows, target]
    for n, others in enumerate(exclude):
        if others:
            scores[n, list(others)] = -np.inf
    scores[rows, target] = -np.inf
    return 1 + (scores >= true_scores[:, None]).sum(axis=1)


def link_prediction(
    store: TripleStore,
    sf: BlockSF,
    table: EmbeddingTable,
    split: str | np.ndarray = "test",
    chunk: int = 256,
) -> RankReport:
    """Filtered head and tail ranks for every triple of ``split``.

    ``split`` is a split name or an explicit ``(n, 3)`` triple array.
    """
    if table.n_entities != store.n_entities or table.n_relations != store.n_relations:
        raise ValueError(
            f"table shape ({table.n_entities}, {table.n_relations}) does not match store "
            f"({store.n_entities}, {store.n_relations})"
        )
    triples = store.split(split) if isinstance(split, str) else np.asarray(split, dtype=np.int64).reshape(-1, 3)
    E = np.asarray(table.entity, dtype=np.float64)
    Rel = np.asarray(table.relation, dtype=np.float64)
    ranks = np.empty((len(triples), 2), dtype=np.int64)
    for lo in range(0, len(triples), chunk):
        part = triples[lo : lo + chunk]
        hs, rs, ts = part[:, 0], part[:, 1], part[:, 2]
        tail_scores = relation_row_vector(sf, E[hs], Rel[rs]) @ E.T
        head_scores = relation_col_vector(sf, E[ts], Rel[rs]) @ E.T
        tail_excl = [store.tails_of.get((h, r), ()) for h, r in zip(hs.tolist(), rs.tolist())]
        head_excl = [store.heads_of.get((t, r), ()) for t, r in zip(ts.tolist(), rs.tolist())]
        ranks[lo : lo + len(part), 1] = _pessimistic_ranks(tail_scores, ts, tail_excl)
        ranks[lo : lo + len(part), 0] = _pessimistic_ranks(head_scores, hs, head_excl)
    return RankReport(ranks.ravel())


@dataclass
class LabeledTriples:
    triples: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.triples = np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=bool)
        if len(self.triples) != len(self.labels):
            raise ValueError("triples and labels differ in length")

    def __len__(self) -> int:
        return len(self.labels)


def triple_scores(sf: BlockSF, table: EmbeddingTable, triples: np.ndarray) -> np.ndarray:
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    E = np.asarray(table.entity, dtype=np.float64)
    q = relation_row_vector(sf, E[triples[:, 0]], table.relation[triples[:, 1]])
    return np.einsum("nd,nd->n", q, E[triples[:, 2]])


def _best_threshold(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Threshold with maximal accuracy of ``score > sigma``; ties pick the smallest."""
    values = np.unique(scores)
    candidates = np.concatenate(
        [[-np.inf], (values[:-1] + values[1:]) / 2.0, [np.inf]]
    )
    pred = scores[None, :] > candidates[:, None]
    acc = (pred == labels[None, :]).mean(axis=1)
    best = int(np.argmax(acc))  # first max = smallest threshold
    return float(candidates[best]), float(acc[best])


@dataclass
class ThresholdFit:
    thresholds: dict[int, float]
    accuracy: dict[int, float] = field(default_factory=dict)
    fallback: set[int] = field(default_factory=set)

    def __getitem__(self, relation: int) -> float:
        return self.thresholds[relation]


def classification_thresholds(
    valid: LabeledTriples,
    sf: BlockSF,
    table: EmbeddingTable,
    store: TripleStore | None = None,
) -> ThresholdFit:
    """Per-relation thresholds maximising validation accuracy.

    With ``store`` given, relations lacking validation examples fall back
    to the median score of their training triples (0.0 if they have none).
    """
    scores = triple_scores(sf, table, valid.triples)
    fit = ThresholdFit({})
    rels = valid.triples[:, 1]
    for r in np.unique(rels).tolist():
        mask = rels == r
        sigma, acc = _best_threshold(scores[mask], valid.labels[mask])
        fit.thresholds[r] = sigma
        fit.accuracy[r] = acc
    if store is not None:
        train_scores = triple_scores(sf, table, store.train) if len(store.train) else np.empty(0)
        for r in range(store.n_relations):
            if r in fit.thresholds:
                continue
            mask = store.train[:, 1] == r
            fit.thresholds[r] = float(np.median(train_scores[mask])) if mask.any() else 0.0
            fit.fallback.add(r)
    return fit


def triplet_classification(
    test: LabeledTriples,
    thresholds: ThresholdFit | dict[int, float],
    sf: BlockSF,
    table: EmbeddingTable,
) -> float:
    """Fraction of test triples where ``score > sigma_r`` matches the label."""
    if len(test) == 0:
        return 0.0
    mapping = thresholds.thresholds if isinstance(thresholds, ThresholdFit) else thresholds
    scores = triple_scores(sf, table, test.triples)
    sigma = np.array([mapping.get(r, 0.0) for r in test.triples[:, 1].tolist()])
    return float(np.mean((scores > sigma) == test.labels))


def negative_sampling_for_classification(
    store: TripleStore, seed: int = 0, max_tries: int = 1000
) -> tuple[LabeledTriples, LabeledTriples]:
    """One corrupted negative per positive valid/test triple.

    Head or tail is replaced (fair coin) by a uniform entity, resampling
    until the triple is absent from every split.
    """
    rng = np.random.default_rng(seed)
    out = []
    for name in ("valid", "test"):
        pos = store.split(name)
        neg = np.empty_like(pos)
        for n, (h, r, t) in enumerate(pos.tolist()):
            for _ in range(max_tries):
                e = int(rng.integers(store.n_entities))
                cand = (e, r, t) if rng.random() < 0.5 else (h, r, e)
                if not store.contains(*cand):
                    neg[n] = cand
                    break
            else:
                raise RuntimeError(
                    f"could not corrupt {name} triple {(h, r, t)} after {max_tries} tries"
                )
        triples = np.concatenate([pos, neg])
        labels = np.concatenate([np.ones(len(pos), bool), np.zeros(len(neg), bool)])
        out.append(LabeledTriples(triples, labels))
    return out[0], out[1]

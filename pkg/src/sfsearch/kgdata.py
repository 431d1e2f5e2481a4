"""Benchmark split loading, filtered-candidate index and relation statistics."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DatasetLoadError",
    "TripleStore",
    "RelationStat",
    "load_dataset",
    "relation_stats",
    "filtered_candidates",
    "SPLITS",
]

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")


class DatasetLoadError(Exception):
    """Missing split file or malformed line."""


class Vocab:
    """Bidirectional name <-> index map in first-appearance order."""

    def __init__(self, names: Iterable[str] = ()) -> None:
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self.index.get(name)
        if idx is None:
            idx = len(self.names)
            self.index[name] = idx
            self.names.append(name)
        return idx

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, name: str) -> int:
        return self.index[name]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.names == other.names


@dataclass
class TripleStore:
    entities: Vocab
    relations: Vocab
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    warnings: list[str] = field(default_factory=list)
    tails_of: dict[tuple[int, int], frozenset[int]] = field(init=False, repr=False)
    heads_of: dict[tuple[int, int], frozenset[int]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in SPLITS:
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 3)
            arr.setflags(write=False)
            setattr(self, name, arr)
            if len(arr):
                if arr[:, [0, 2]].min() < 0 or arr[:, [0, 2]].max() >= self.n_entities:
                    raise ValueError(f"{name}: entity index out of range")
                if arr[:, 1].min() < 0 or arr[:, 1].max() >= self.n_relations:
                    raise ValueError(f"{name}: relation index out of range")
        tails: dict[tuple[int, int], set[int]] = defaultdict(set)
        heads: dict[tuple[int, int], set[int]] = defaultdict(set)
        for h, r, t in self.all_triples().tolist():
            tails[(h, r)].add(t)
            heads[(t, r)].add(h)
        self.tails_of = {k: frozenset(v) for k, v in tails.items()}
        self.heads_of = {k: frozenset(v) for k, v in heads.items()}

    @classmethod
    def from_named_triples(
        cls,
        train: Sequence[tuple[str, str, str]],
        valid: Sequence[tuple[str, str, str]] = (),
        test: Sequence[tuple[str, str, str]] = (),
    ) -> "TripleStore":
        """Index string triples; vocabulary order is first appearance."""
        entities, relations = Vocab(), Vocab()
        arrays = []
        for split in (train, valid, test):
            rows = []
            for h, r, t in split:
                rows.append((entities.add(h), relations.add(r), entities.add(t)))
            arrays.append(np.array(rows, dtype=np.int64).reshape(-1, 3))
        return cls(entities, relations, *arrays)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def all_triples(self) -> np.ndarray:
        return np.concatenate([self.train, self.valid, self.test])

    def contains(self, h: int, r: int, t: int) -> bool:
        return t in self.tails_of.get((h, r), ())

    def names_of(self, triples: np.ndarray) -> list[tuple[str, str, str]]:
        e, r = self.entities.names, self.relations.names
        return [(e[a], r[b], e[c]) for a, b, c in np.asarray(triples).tolist()]


def _read_split(path: Path) -> tuple[list[tuple[str, str, str]], int]:
    if not path.is_file():
        raise DatasetLoadError(f"missing split file: {path}")
    rows: list[tuple[str, str, str]] = []
    seen: set[tuple[str, str, str]] = set()
    dropped = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                raise DatasetLoadError(
                    f"{path}:{lineno}: expected 'head<TAB>relation<TAB>tail', got {line!r}"
                )
            triple = (parts[0].strip(), parts[1].strip(), parts[2].strip())
            if triple in seen:
                dropped += 1
                continue
            seen.add(triple)
            rows.append(triple)
    return rows, dropped


def load_dataset(dir_path: str | Path) -> TripleStore:
    """Load ``train.txt``/``valid.txt``/``test.txt`` from ``dir_path``."""
    root = Path(dir_path)
    splits = {}
    warnings: list[str] = []
    for name in SPLITS:
        rows, dropped = _read_split(root / f"{name}.txt")
        if dropped:
            warnings.append(f"{name}: dropped {dropped} duplicate line(s)")
        splits[name] = rows
    store = TripleStore.from_named_triples(splits["train"], splits["valid"], splits["test"])

    train_ents = {x for h, _, t in splits["train"] for x in (h, t)}
    train_rels = {r for _, r, _ in splits["train"]}
    for name in ("valid", "test"):
        ents = {x for h, _, t in splits[name] for x in (h, t)} - train_ents
        rels = {r for _, r, _ in splits[name]} - train_rels
        if ents:
            warnings.append(f"{name}: {len(ents)} entit(y/ies) absent from train")
        if rels:
            warnings.append(f"{name}: {len(rels)} relation(s) absent from train")
    store.warnings.extend(warnings)
    for w in warnings:
        log.warning("%s: %s", root, w)
    return store


def filtered_candidates(store: TripleStore, query: tuple[int, int, None] | tuple[None, int, int]) -> frozenset[int]:
    """Entities completing ``(h, r, ?)`` or ``(?, r, t)`` to a known triple.

    ``query`` is ``(h, r, None)`` for tails or ``(None, r, t)`` for heads.
    """
    h, r, t = query
    if (h is None) == (t is None):
        raise ValueError("query must leave exactly one of head/tail as None")
    if not 0 <= r < store.n_relations:
        raise ValueError(f"relation index {r} out of range")
    anchor = h if t is None else t
    if not 0 <= anchor < store.n_entities:
        raise ValueError(f"entity index {anchor} out of range")
    if t is None:
        return store.tails_of.get((h, r), frozenset())
    return store.heads_of.get((t, r), frozenset())


@dataclass(frozen=True)
class RelationStat:
    relation: str
    n: int
    kind: str  # symmetric | anti-symmetric | inverse | general
    inverse_partner: str | None = None

    def to_json(self) -> dict:
        return {
            "relation": self.relation,
            "n": self.n,
            "class": self.kind,
            "inverse_partner": self.inverse_partner,
        }


def relation_stats(
    store: TripleStore, sym_threshold: float = 0.9, anti_threshold: float = 0.1
) -> list[RelationStat]:
    """Classify every relation; the first matching rule wins.

    (i) symmetric if more than ``sym_threshold * n_r`` triples have their
    reverse under the same relation; (ii) anti-symmetric if none do and the
    head and tail sets share at least ``anti_threshold * n_r`` entities;
    (iii) inverse if another relation holds at least ``sym_threshold * n_r``
    of the reversed triples; (iv) general otherwise.
    """
    by_rel: dict[int, set[tuple[int, int]]] = defaultdict(set)
    for h, r, t in store.all_triples().tolist():
        by_rel[r].add((h, t))

    # reversed pairs of r found under r2: count (h,t) in r with (t,h) in r2
    owners: dict[tuple[int, int], list[int]] = defaultdict(list)
    for r, pairs in by_rel.items():
        for pair in pairs:
            owners[pair].append(r)

    names = store.relations.names
    out = []
    for r in range(store.n_relations):
        pairs = by_rel.get(r, set())
        n = len(pairs)
        if n == 0:
            out.append(RelationStat(names[r], 0, "general"))
            continue
        reversed_in: Counter[int] = Counter()
        for h, t in pairs:
            for r2 in owners.get((t, h), ()):
                reversed_in[r2] += 1
        n_self = reversed_in.get(r, 0)
        if n_self > sym_threshold * n:
            out.append(RelationStat(names[r], n, "symmetric"))
            continue
        heads = {h for h, _ in pairs}
        tails = {t for _, t in pairs}
        if n_self == 0 and len(heads & tails) >= anti_threshold * n:
            out.append(RelationStat(names[r], n, "anti-symmetric"))
            continue
        partners = [
            (count, -r2) for r2, count in reversed_in.items()
            if r2 != r and count >= sym_threshold * n
        ]
        if partners:
            _, neg = max(partners)
            out.append(RelationStat(names[r], n, "inverse", names[-neg]))
            continue
        out.append(RelationStat(names[r], n, "general"))
    return out

"""Unified 4x4 block representation of bilinear scoring functions.

A scoring function is stored as a 4x4 matrix of small signed integers.
Entry ``a[i, j] = s * k`` (``k`` in 1..4, ``s`` in {+1, -1}) means block
``(i, j)`` of the relation matrix holds ``s * diag(r_k)``; zero means an
empty block.  Embeddings of width ``d`` are split into four chunks of
width ``d // 4`` and the score is

    sum_{i,j} s_ij * <h_i, r_|a_ij|, t_j>.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

__all__ = [
    "BlockSF",
    "EmbeddingTable",
    "SFParseError",
    "known_sf",
    "parse_sf",
    "format_sf",
    "resolve_sf",
    "score",
    "relation_row_vector",
    "relation_col_vector",
    "score_all_tails",
    "score_all_heads",
    "KNOWN_SFS",
]


class SFParseError(ValueError):
    """Raised for malformed scoring-function text."""


@dataclass(frozen=True)
class BlockSF:
    """Immutable 4x4 signed substitute matrix, stored row-major."""

    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        entries = tuple(int(v) for v in self.entries)
        if len(entries) != 16:
            raise ValueError(f"BlockSF needs 16 entries, got {len(entries)}")
        if any(abs(v) > 4 for v in entries):
            raise ValueError(f"BlockSF entries must lie in {{0, ±1..±4}}: {entries}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_matrix(cls, matrix) -> "BlockSF":
        arr = np.asarray(matrix)
        if arr.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {arr.shape}")
        return cls(tuple(int(v) for v in arr.ravel()))

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[int, int, int]]) -> "BlockSF":
        """Build from ``(i, j, signed_k)`` triples with 1-based block indices."""
        entries = [0] * 16
        for i, j, k in terms:
            entries[(i - 1) * 4 + (j - 1)] = k
        return cls(tuple(entries))

    @classmethod
    def zeros(cls) -> "BlockSF":
        return cls((0,) * 16)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(4, 4)

    @property
    def block_count(self) -> int:
        return sum(1 for v in self.entries if v != 0)

    @cached_property
    def terms(self) -> tuple[tuple[int, int, int, int], ...]:
        """Nonzero blocks as 0-based ``(row, col, label, sign)``, row-major."""
        out = []
        for p, v in enumerate(self.entries):
            if v:
                out.append((p // 4, p % 4, abs(v) - 1, 1 if v > 0 else -1))
        return tuple(out)

    def transpose(self) -> "BlockSF":
        return BlockSF.from_matrix(self.matrix.T)

    def __str__(self) -> str:
        return format_sf(self)


@dataclass
class EmbeddingTable:
    """Entity and relation embeddings sharing one width ``d``."""

    entity: np.ndarray
    relation: np.ndarray

    def __post_init__(self) -> None:
        if self.entity.ndim != 2 or self.relation.ndim != 2:
            raise ValueError("embedding matrices must be 2-D")
        if self.entity.shape[1] != self.relation.shape[1]:
            raise ValueError(
                f"entity width {self.entity.shape[1]} != relation width {self.relation.shape[1]}"
            )
        if self.dim % 4:
            raise ValueError(f"embedding width must be divisible by 4, got {self.dim}")

    @property
    def dim(self) -> int:
        return int(self.entity.shape[1])

    @property
    def n_entities(self) -> int:
        return int(self.entity.shape[0])

    @property
    def n_relations(self) -> int:
        return int(self.relation.shape[0])

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.entity.copy(), self.relation.copy())


KNOWN_SFS: dict[str, BlockSF] = {
    "distmult": BlockSF.from_terms([(1, 1, 1), (2, 2, 2), (3, 3, 3), (4, 4, 4)]),
    "complex": BlockSF.from_terms(
        [
            (1, 1, 1), (1, 3, 3), (3, 1, -3), (3, 3, 1),
            (2, 2, 2), (2, 4, 4), (4, 2, -4), (4, 4, 2),
        ]
    ),
    "analogy": BlockSF.from_terms(
        [(1, 1, 1), (2, 2, 2), (3, 3, 3), (3, 4, 4), (4, 3, -4), (4, 4, 3)]
    ),
    "simple": BlockSF.from_terms([(1, 3, 1), (2, 4, 2), (3, 1, 3), (4, 2, 4)]),
}


def known_sf(name: str) -> BlockSF:
    try:
        return KNOWN_SFS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown scoring function {name!r}; choose from {sorted(KNOWN_SFS)}"
        ) from None


def format_sf(sf: BlockSF) -> str:
    """Canonical sparse text: ``i,j,±k`` terms sorted by ``(i, j)``, ``;``-joined."""
    parts = []
    for p, v in enumerate(sf.entries):
        if v:
            parts.append(f"{p // 4 + 1},{p % 4 + 1},{'+' if v > 0 else '-'}{abs(v)}")
    return ";".join(parts)


_TERM_RE = re.compile(r"^\s*(\d+)\s*,\s*(\d+)\s*,\s*([+-]?)\s*(\d+)\s*$")


def parse_sf(text: str) -> BlockSF:
    """Inverse of :func:`format_sf`; terms may appear in any order."""
    entries = [0] * 16
    seen: set[tuple[int, int]] = set()
    text = text.strip()
    if not text:
        return BlockSF.zeros()
    for n, term in enumerate(text.split(";"), start=1):
        m = _TERM_RE.match(term)
        if m is None:
            raise SFParseError(f"term {n} ({term!r}) is not of the form 'i,j,±k'")
        i, j, sign, k = int(m.group(1)), int(m.group(2)), m.group(3), int(m.group(4))
        if not (1 <= i <= 4 and 1 <= j <= 4):
            raise SFParseError(f"term {n} ({term!r}): block indices must be in 1..4")
        if not 1 <= k <= 4:
            raise SFParseError(f"term {n} ({term!r}): relation chunk must be in 1..4")
        if (i, j) in seen:
            raise SFParseError(f"term {n} ({term!r}): duplicate block ({i},{j})")
        seen.add((i, j))
        entries[(i - 1) * 4 + (j - 1)] = -k if sign == "-" else k
    return BlockSF(tuple(entries))


def resolve_sf(text: str) -> BlockSF:
    """Accept either a known model name or sparse SF text."""
    if text.strip().lower() in KNOWN_SFS:
        return KNOWN_SFS[text.strip().lower()]
    return parse_sf(text)


def _chunks(x: np.ndarray) -> np.ndarray:
    d = x.shape[-1]
    if d % 4:
        raise ValueError(f"embedding width must be divisible by 4, got {d}")
    return x.reshape(x.shape[:-1] + (4, d // 4))


def _check_same_width(*arrays: np.ndarray) -> None:
    widths = {a.shape[-1] for a in arrays}
    if len(widths) != 1:
        raise ValueError(f"embedding widths differ: {sorted(widths)}")


def relation_row_vector(sf: BlockSF, h: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Return ``q = h^T g(r)`` so that ``q @ t == score(sf, h, r, t)``.

    Works on single vectors or on leading batch axes.
    """
    h = np.asarray(h, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    _check_same_width(h, r)
    hc, rc = _chunks(h), _chunks(r)
    q = np.zeros(np.broadcast_shapes(hc.shape, rc.shape))
    for i, j, k, s in sf.terms:
        if s > 0:
            q[..., j, :] += hc[..., i, :] * rc[..., k, :]
        else:
            q[..., j, :] -= hc[..., i, :] * rc[..., k, :]
    return q.reshape(q.shape[:-2] + (-1,))


def relation_col_vector(sf: BlockSF, t: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Return ``p = g(r) t`` so that ``h @ p == score(sf, h, r, t)``."""
    t = np.asarray(t, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    _check_same_width(t, r)
    tc, rc = _chunks(t), _chunks(r)
    p = np.zeros(np.broadcast_shapes(tc.shape, rc.shape))
    for i, j, k, s in sf.terms:
        if s > 0:
            p[..., i, :] += rc[..., k, :] * tc[..., j, :]
        else:
            p[..., i, :] -= rc[..., k, :] * tc[..., j, :]
    return p.reshape(p.shape[:-2] + (-1,))


def score(sf: BlockSF, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> float:
    h = np.asarray(h, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    _check_same_width(h, r, t)
    if h.ndim != 1 or t.ndim != 1:
        raise ValueError("score expects single vectors; use score_all_tails for batches")
    return float(relation_row_vector(sf, h, r) @ t)


def score_all_tails(
    sf: BlockSF, h: np.ndarray, r: np.ndarray, table: EmbeddingTable
) -> np.ndarray:
    """Scores of ``(h, r, e)`` for every entity ``e`` in the table."""
    if np.shape(h)[-1] != table.dim:
        raise ValueError(f"query width {np.shape(h)[-1]} != table width {table.dim}")
    return relation_row_vector(sf, h, r) @ table.entity.astype(np.float64, copy=False).T


def score_all_heads(
    sf: BlockSF, t: np.ndarray, r: np.ndarray, table: EmbeddingTable
) -> np.ndarray:
    """Scores of ``(e, r, t)`` for every entity ``e`` in the table."""
    if np.shape(t)[-1] != table.dim:
        raise ValueError(f"query width {np.shape(t)[-1]} != table width {table.dim}")
    return relation_col_vector(sf, t, r) @ table.entity.astype(np.float64, copy=False).T

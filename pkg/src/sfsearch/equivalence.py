"""Constraint C2, the 9,216-element invariance group, canonical forms, filter.

Group elements act on a substitute matrix ``a`` by

* permuting block rows and columns simultaneously (entity chunks),
* relabeling relation chunks ``|a_ij| -> sigma(|a_ij|)``,
* flipping the sign of every entry carrying a given relation chunk.

Scoring functions in the same orbit train to identical models, so search
keeps one representative per orbit: the orbit member whose sparse text is
lexicographically smallest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .blocks import BlockSF, format_sf

__all__ = [
    "GroupElement",
    "GROUP_SIZE",
    "apply",
    "all_elements",
    "random_element",
    "orbit",
    "orbit_size",
    "check_c2",
    "canonical_form",
    "canonical_key",
    "filter_accept",
    "enumerate_b4",
]

_PERMS = tuple(itertools.permutations(range(4)))
_FLIPS = tuple(itertools.product((False, True), repeat=4))
GROUP_SIZE = len(_PERMS) * len(_PERMS) * len(_FLIPS)


@dataclass(frozen=True)
class GroupElement:
    """One invariance transformation; all tuples are 0-based.

    ``entity_perm[i]`` is the new position of block row/column ``i``,
    ``relation_perm[k]`` the new label (0-based) of relation chunk ``k``,
    and ``sign_flips[k]`` whether entries using chunk ``k`` change sign.
    """

    entity_perm: tuple[int, ...] = (0, 1, 2, 3)
    relation_perm: tuple[int, ...] = (0, 1, 2, 3)
    sign_flips: tuple[bool, ...] = (False, False, False, False)

    def __post_init__(self) -> None:
        if sorted(self.entity_perm) != [0, 1, 2, 3]:
            raise ValueError(f"entity_perm is not a permutation of 0..3: {self.entity_perm}")
        if sorted(self.relation_perm) != [0, 1, 2, 3]:
            raise ValueError(f"relation_perm is not a permutation of 0..3: {self.relation_perm}")
        if len(self.sign_flips) != 4:
            raise ValueError("sign_flips needs 4 entries")

    def inverse(self) -> "GroupElement":
        ent = [0] * 4
        rel = [0] * 4
        for i, p in enumerate(self.entity_perm):
            ent[p] = i
        for k, p in enumerate(self.relation_perm):
            rel[p] = k
        flips = [self.sign_flips[rel[k]] for k in range(4)]
        return GroupElement(tuple(ent), tuple(rel), tuple(flips))


def apply(elem: GroupElement, sf: BlockSF) -> BlockSF:
    out = [0] * 16
    for p, v in enumerate(sf.entries):
        if not v:
            continue
        i, j = divmod(p, 4)
        k = abs(v) - 1
        sign = (1 if v > 0 else -1) * (-1 if elem.sign_flips[k] else 1)
        out[elem.entity_perm[i] * 4 + elem.entity_perm[j]] = sign * (elem.relation_perm[k] + 1)
    return BlockSF(tuple(out))


def all_elements() -> list[GroupElement]:
    """All 9,216 elements, ordered to match the rows of :func:`orbit`."""
    return [
        GroupElement(ep, rp, fl)
        for ep in _PERMS
        for rp in _PERMS
        for fl in _FLIPS
    ]


def random_element(rng: np.random.Generator) -> GroupElement:
    return GroupElement(
        tuple(int(x) for x in rng.permutation(4)),
        tuple(int(x) for x in rng.permutation(4)),
        tuple(bool(x) for x in rng.integers(0, 2, size=4)),
    )


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    # position gather index per entity permutation: out_flat = in_flat[gather]
    gather = np.empty((len(_PERMS), 16), dtype=np.int64)
    for n, perm in enumerate(_PERMS):
        for i in range(4):
            for j in range(4):
                gather[n, perm[i] * 4 + perm[j]] = i * 4 + j
    # value map per (relation perm, flips): new value indexed by old value + 4
    value_map = np.zeros((len(_PERMS) * len(_FLIPS), 9), dtype=np.int64)
    for n, (perm, flips) in enumerate(itertools.product(_PERMS, _FLIPS)):
        for v in range(-4, 5):
            if v:
                k = abs(v) - 1
                sign = (1 if v > 0 else -1) * (-1 if flips[k] else 1)
                value_map[n, v + 4] = sign * (perm[k] + 1)
    return gather, value_map


_GATHER, _VALUE_MAP = _build_tables()


def orbit(sf: BlockSF) -> np.ndarray:
    """All 9,216 images of ``sf`` as a ``(9216, 16)`` array (with repeats)."""
    flat = np.asarray(sf.entries, dtype=np.int64)
    moved = flat[_GATHER] + 4  # (24, 16)
    images = _VALUE_MAP[:, moved]  # (384, 24, 16)
    return images.transpose(1, 0, 2).reshape(GROUP_SIZE, 16)


def orbit_size(sf: BlockSF) -> int:
    return int(np.unique(orbit(sf), axis=0).shape[0])


def _text_order_codes(rows: np.ndarray, n_blocks: int) -> np.ndarray:
    """Per-row term codes whose lexicographic order equals sparse-text order.

    A term ``i,j,±k`` compares by position first, then '+' before '-', then
    ``k``; every orbit member has the same number of terms.
    """
    pos = np.arange(16, dtype=np.int64)
    codes = pos * 16 + (rows < 0) * 4 + (np.abs(rows) - 1)
    codes = np.where(rows != 0, codes, np.iinfo(np.int64).max)
    codes.sort(axis=1)
    return codes[:, :n_blocks]


@lru_cache(maxsize=65536)
def canonical_form(sf: BlockSF) -> BlockSF:
    b = sf.block_count
    if b == 0:
        return sf
    images = orbit(sf)
    codes = _text_order_codes(images, b)
    best = np.lexsort(codes.T[::-1])[0]
    return BlockSF(tuple(int(v) for v in images[best]))


def canonical_key(sf: BlockSF) -> str:
    return format_sf(canonical_form(sf))


def check_c2(sf: BlockSF) -> bool:
    """No zero block rows/columns, every chunk used, no repeated rows/columns.

    A row equal to the negation of another counts as repeated.
    """
    a = sf.matrix
    if not (a != 0).any(axis=1).all() or not (a != 0).any(axis=0).all():
        return False
    if set(np.abs(a[a != 0]).tolist()) != {1, 2, 3, 4}:
        return False
    for m in (a, a.T):
        for x, y in itertools.combinations(range(4), 2):
            if np.array_equal(m[x], m[y]) or np.array_equal(m[x], -m[y]):
                return False
    return True


def filter_accept(sf: BlockSF, pending: set[str], history: set[str]) -> bool:
    """Keep ``sf`` only if it satisfies C2 and no equivalent was seen."""
    if not check_c2(sf):
        return False
    key = canonical_key(sf)
    return key not in pending and key not in history


def enumerate_b4() -> list[BlockSF]:
    """Exhaustive list of inequivalent 4-block scoring functions passing C2."""
    seen: set[bytes] = set()
    found: list[BlockSF] = []
    for positions in itertools.combinations(range(16), 4):
        rows = {p // 4 for p in positions}
        cols = {p % 4 for p in positions}
        # zero row/column test depends on positions only
        if len(rows) < 4 or len(cols) < 4:
            continue
        for labels in itertools.product(range(1, 5), repeat=4):
            for signs in itertools.product((1, -1), repeat=4):
                entries = [0] * 16
                for p, k, s in zip(positions, labels, signs):
                    entries[p] = s * k
                flat = np.asarray(entries, dtype=np.int64)
                if flat.tobytes() in seen:
                    continue
                sf = BlockSF(tuple(entries))
                if not check_c2(sf):
                    continue
                seen.update(row.tobytes() for row in orbit(sf))
                found.append(canonical_form(sf))
    return sorted(found, key=format_sf)

"""Seeded synthetic knowledge graph with known relation patterns.

Entities are split into equal groups and every relation links whole
groups, so held-out triples are predictable from group structure:

* ``similar_to`` symmetric: groups are paired and linked both ways;
* ``precedes`` anti-symmetric: group ``g`` links to group ``g + 1`` on a cycle;
* ``part_of`` / ``has_part`` inverse pair between the two halves of the groups;
* ``related_to`` general: links within a group plus ``g -> g + 2``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .kgdata import TripleStore

__all__ = ["RELATION_ROLES", "synthetic_triples", "synthetic_store", "write_dataset"]

RELATION_ROLES = {
    "similar_to": "symmetric",
    "precedes": "anti-symmetric",
    "part_of": "inverse",
    "has_part": "inverse",
    "related_to": "general",
}


def synthetic_triples(
    n_entities: int = 200, group_size: int = 5, seed: int = 0
) -> list[tuple[str, str, str]]:
    if n_entities % group_size:
        raise ValueError("n_entities must be a multiple of group_size")
    n_groups = n_entities // group_size
    if n_groups < 6 or n_groups % 2:
        raise ValueError("need an even number of groups, at least 6")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_entities)
    groups = [perm[g * group_size : (g + 1) * group_size].tolist() for g in range(n_groups)]
    name = [f"e{n:04d}" for n in range(n_entities)]

    triples: list[tuple[str, str, str]] = []

    def link(rel: str, src: int, dst: int, skip_self: bool = False) -> None:
        for a in groups[src]:
            for b in groups[dst]:
                if skip_self and a == b:
                    continue
                triples.append((name[a], rel, name[b]))

    order = rng.permutation(n_groups).tolist()
    for a, b in zip(order[0::2], order[1::2]):
        link("similar_to", a, b)
        link("similar_to", b, a)
    for g in range(n_groups):
        link("precedes", g, (g + 1) % n_groups)
    half = n_groups // 2
    targets = (half + rng.permutation(half)).tolist()
    for g in range(half):
        link("part_of", g, targets[g])
        link("has_part", targets[g], g)
    for g in range(n_groups):
        link("related_to", g, g, skip_self=True)
        link("related_to", g, (g + 2) % n_groups)
    return triples


def synthetic_store(
    n_entities: int = 200,
    group_size: int = 5,
    holdout: float = 0.2,
    seed: int = 0,
) -> TripleStore:
    """Split the synthetic triples; ``holdout`` is shared equally by valid and test."""
    triples = synthetic_triples(n_entities, group_size, seed)
    rng = np.random.default_rng(seed + 7919)
    order = rng.permutation(len(triples))
    n_hold = int(round(holdout * len(triples)))
    n_valid = n_hold // 2
    valid = [triples[i] for i in order[:n_valid]]
    test = [triples[i] for i in order[n_valid:n_hold]]
    train = [triples[i] for i in order[n_hold:]]
    return TripleStore.from_named_triples(train, valid, test)


def write_dataset(store: TripleStore, dir_path: str | Path) -> Path:
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    for split in ("train", "valid", "test"):
        with (root / f"{split}.txt").open("w", encoding="utf-8") as fh:
            for h, r, t in store.names_of(store.split(split)):
                fh.write(f"{h}\t{r}\t{t}\n")
    return root

"""Progressive greedy search over block scoring functions, plus random search."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .blocks import BlockSF, format_sf, parse_sf
from .equivalence import canonical_form, canonical_key, enumerate_b4, filter_accept
from .evaluation import link_prediction
from .kgdata import TripleStore
from .srf import Predictor, predictor_fit, predictor_score, srf_string
from .training import ConfigError, NumericError, TrainConfig, train

__all__ = [
    "SearchConfig",
    "SearchRecord",
    "evaluate_sf",
    "generate_candidates",
    "greedy_search",
    "random_search",
    "read_log",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    B: int = 6
    K1: int = 8
    K2: int = 8
    N: int = 256
    budget: int = 256
    seed: int = 0
    stall_factor: int = 10
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.B < 4 or self.B % 2:
            raise ConfigError(f"B must be even and >= 4, got {self.B}")
        if min(self.K1, self.K2, self.N, self.budget, self.stall_factor) <= 0:
            raise ConfigError("K1, K2, N, budget and stall_factor must be positive")
        if self.K2 > self.N:
            raise ConfigError(f"K2 ({self.K2}) must not exceed N ({self.N})")

    @classmethod
    def from_dict(cls, data: dict) -> "SearchConfig":
        data = dict(data)
        train_cfg = TrainConfig.from_dict(data.pop("train", {}))
        known = {f.name for f in fields(cls)} - {"train"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown search config keys: {sorted(unknown)}")
        return cls(train=train_cfg, **data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["train"] = self.train.to_dict()
        return out


@dataclass
class SearchRecord:
    sf: BlockSF
    b: int
    val_mrr: float
    srf: str
    wall_time: float = field(default=0.0, compare=False)
    stage: int = 0
    seed: int = 0
    error: str | None = None

    def to_json(self) -> dict:
        out = {
            "sf": format_sf(self.sf),
            "b": self.b,
            "val_mrr": self.val_mrr,
            "srf": self.srf,
            "wall_time": self.wall_time,
            "stage": self.stage,
            "seed": self.seed,
        }
        if self.error:
            out["error"] = self.error
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SearchRecord":
        return cls(
            sf=parse_sf(data["sf"]),
            b=int(data["b"]),
            val_mrr=float(data["val_mrr"]),
            srf=str(data["srf"]),
            wall_time=float(data.get("wall_time", 0.0)),
            stage=int(data.get("stage", 0)),
            seed=int(data.get("seed", 0)),
            error=data.get("error"),
        )


def evaluate_sf(sf: BlockSF, store: TripleStore, train_config: TrainConfig) -> SearchRecord:
    """Train the canonical representative of ``sf`` and score it by validation MRR."""
    canon = canonical_form(sf)
    start = time.perf_counter()
    try:
        result = train(store, canon, train_config)
        mrr = link_prediction(store, canon, result.table, "valid").mrr
        error = None
    except NumericError as exc:
        log.warning("training %s failed: %s", format_sf(canon), exc)
        mrr, error = 0.0, str(exc)
    return SearchRecord(
        sf=canon,
        b=canon.block_count,
        val_mrr=float(mrr),
        srf=srf_string(canon),
        wall_time=time.perf_counter() - start,
        seed=train_config.seed,
        error=error,
    )


def _evaluate_job(args: tuple[BlockSF, TripleStore, TrainConfig]) -> SearchRecord:
    return evaluate_sf(*args)


def read_log(path: str | Path) -> list[SearchRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(SearchRecord.from_json(json.loads(line)))
    return records


class _Runner:
    """Evaluates candidate batches in candidate order, reusing logged results."""

    def __init__(
        self,
        store: TripleStore,
        config: SearchConfig,
        workers: int,
        log_path: str | Path | None,
    ) -> None:
        self.store = store
        self.config = config
        self.workers = max(1, workers)
        self.log_path = Path(log_path) if log_path else None
        self.replay: dict[str, SearchRecord] = {}
        if self.log_path and self.log_path.exists():
            for rec in read_log(self.log_path):
                self.replay[format_sf(rec.sf)] = rec
        self.pool = ProcessPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()

    def evaluate(self, sfs: Sequence[BlockSF], stage: int) -> list[SearchRecord]:
        keys = [canonical_key(sf) for sf in sfs]
        todo = [sf for sf, k in zip(sfs, keys) if k not in self.replay]
        jobs = [(sf, self.store, self.config.train) for sf in todo]
        if self.pool is not None:
            fresh = list(self.pool.map(_evaluate_job, jobs))
        else:
            fresh = [_evaluate_job(job) for job in jobs]
        fresh_by_key = {format_sf(rec.sf): rec for rec in fresh}
        out = []
        for k in keys:
            if k in self.replay:
                out.append(self.replay[k])
                continue
            rec = fresh_by_key[k]
            rec.stage = stage
            rec.seed = self.config.seed
            out.append(rec)
            if self.log_path:
                with self.log_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec.to_json()) + "\n")
        return out


def _draw_terms(
    base: BlockSF, n_terms: int, rng: np.random.Generator
) -> BlockSF | None:
    free = [p for p, v in enumerate(base.entries) if v == 0]
    if len(free) < n_terms:
        return None
    entries = list(base.entries)
    for p in rng.choice(free, size=n_terms, replace=False).tolist():
        k = int(rng.integers(1, 5))
        s = 1 if rng.random() < 0.5 else -1
        entries[p] = s * k
    return BlockSF(tuple(entries))


def generate_candidates(
    parents: Sequence[BlockSF],
    N: int,
    pending: set[str],
    history: set[str],
    rng: np.random.Generator,
    stall_limit: int | None = None,
) -> list[BlockSF]:
    """Grow random top parents by two signed terms on empty blocks.

    Accepted candidates are added to ``pending`` by canonical key.  Stops
    after ``N`` acceptances or ``stall_limit`` consecutive rejections
    (default ``10 * N``).
    """
    if not parents:
        raise ValueError("generate_candidates needs at least one parent")
    b = parents[0].block_count
    if any(p.block_count != b for p in parents):
        raise ValueError("all parents must have the same block count")
    stall_limit = 10 * N if stall_limit is None else stall_limit
    out: list[BlockSF] = []
    misses = 0
    while len(out) < N and misses < stall_limit:
        parent = parents[int(rng.integers(len(parents)))]
        cand = _draw_terms(parent, 2, rng)
        if cand is None or not filter_accept(cand, pending, history):
            misses += 1
            continue
        misses = 0
        pending.add(canonical_key(cand))
        out.append(cand)
    if len(out) < N:
        log.warning("candidate generation stalled with %d of %d candidates", len(out), N)
    return out


def _fit(records: Iterable[SearchRecord], seed: int) -> Predictor | None:
    data = [(np.array([int(c) for c in r.srf]), r.val_mrr) for r in records]
    return predictor_fit(data, seed=seed) if data else None


def _best_first(history: list[SearchRecord]) -> list[SearchRecord]:
    return sorted(history, key=lambda r: -r.val_mrr)


def greedy_search(
    store: TripleStore,
    config: SearchConfig,
    workers: int = 1,
    log_path: str | Path | None = None,
    progress: Callable[[SearchRecord], None] | None = None,
) -> list[SearchRecord]:
    """Run the progressive greedy search; returns the history, best first.

    With ``log_path`` every new record is appended as one JSON line, and an
    existing log is replayed so an interrupted run resumes where it stopped.
    """
    rng = np.random.default_rng(config.seed)
    runner = _Runner(store, config, workers, log_path)
    history: list[SearchRecord] = []
    keys: set[str] = set()

    def commit(records: list[SearchRecord]) -> None:
        for rec in records:
            history.append(rec)
            keys.add(format_sf(rec.sf))
            if progress:
                progress(rec)

    try:
        commit(runner.evaluate(enumerate_b4(), stage=0))
        predictor = _fit(history, config.seed)
        for b in range(6, config.B + 1, 2):
            parents = [
                r.sf for r in _best_first([r for r in history if r.b == b - 2 and r.error is None])
            ][: config.K1]
            if not parents:
                log.warning("no usable parents with %d blocks; stopping", b - 2)
                break
            spent = 0
            stage = 0
            while spent < config.budget:
                pool = generate_candidates(
                    parents, config.N, set(), keys, rng, config.stall_factor * config.N
                )
                if not pool:
                    break
                scores = [predictor_score(predictor, sf) for sf in pool]
                order = sorted(range(len(pool)), key=lambda n: -scores[n])
                take = min(config.K2, config.budget - spent)
                picked = [pool[n] for n in order[:take]]
                commit(runner.evaluate(picked, stage=stage))
                spent += len(picked)
                stage += 1
                predictor = _fit(history, config.seed)
    finally:
        runner.close()
    return _best_first(history)


def _random_sf(n_blocks: int, rng: np.random.Generator) -> BlockSF:
    return _draw_terms(BlockSF.zeros(), n_blocks, rng)


def random_search(
    store: TripleStore,
    config: SearchConfig,
    workers: int = 1,
    log_path: str | Path | None = None,
    progress: Callable[[SearchRecord], None] | None = None,
) -> list[SearchRecord]:
    """Evaluate ``config.budget`` distinct random B-block SFs passing C2."""
    rng = np.random.default_rng(config.seed)
    runner = _Runner(store, config, workers, log_path)
    history: list[SearchRecord] = []
    keys: set[str] = set()
    stall_limit = config.stall_factor * config.N
    try:
        while len(history) < config.budget:
            batch: list[BlockSF] = []
            misses = 0
            want = min(config.K2, config.budget - len(history))
            while len(batch) < want and misses < stall_limit:
                sf = _random_sf(config.B, rng)
                if not filter_accept(sf, keys, set()):
                    misses += 1
                    continue
                misses = 0
                keys.add(canonical_key(sf))
                batch.append(sf)
            if not batch:
                log.warning("random sampling stalled after %d records", len(history))
                break
            for rec in runner.evaluate(batch, stage=len(history) // config.K2):
                history.append(rec)
                if progress:
                    progress(rec)
    finally:
        runner.close()
    return _best_first(history)

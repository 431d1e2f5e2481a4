"""Command-line entry point: ``sfsearch <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import struct
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .blocks import EmbeddingTable, SFParseError, format_sf, resolve_sf
from .equivalence import enumerate_b4
from .evaluation import (
    classification_thresholds,
    link_prediction,
    negative_sampling_for_classification,
    triplet_classification,
)
from .kgdata import DatasetLoadError, TripleStore, load_dataset, relation_stats
from .search import SearchConfig, greedy_search, random_search
from .srf import check_c1, srf_string
from .synthetic import synthetic_store
from .training import ConfigError, NumericError, TrainConfig, train

__all__ = ["RunManifest", "main", "load_config", "write_embeddings", "read_embeddings"]

log = logging.getLogger("sfsearch")

EXIT_OK = 0
EXIT_LOAD = 3
EXIT_CONFIG = 4
EXIT_NUMERIC = 5
EXIT_PARSE = 6

DUMP_HEADER = struct.Struct("<qqq")


@dataclass
class RunManifest:
    command: str
    dataset: str | None
    config: dict
    seed: int
    started: str
    finished: str = ""
    artifacts: dict[str, str] = field(default_factory=dict)
    argv: list[str] = field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / f"{self.command}-manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")
        return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def load_config(spec: str | None) -> dict:
    """Read a config file, a packaged config name, or a run manifest.

    The result always has ``train`` and ``search`` keys.
    """
    if spec is None:
        spec = "default"
    path = Path(spec)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        try:
            text = resources.files("sfsearch.configs").joinpath(f"{spec}.json").read_text("utf-8")
        except FileNotFoundError:
            raise ConfigError(f"no config file or packaged config named {spec!r}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{spec}: invalid JSON ({exc})") from None
    if "command" in data and "config" in data:
        data = data["config"]
    unknown = set(data) - {"train", "search"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return {"train": dict(data.get("train", {})), "search": dict(data.get("search", {}))}


def _resolve_configs(args: argparse.Namespace) -> tuple[TrainConfig, SearchConfig, dict]:
    raw = load_config(args.config)
    if args.seed is not None:
        raw["train"]["seed"] = args.seed
        raw["search"]["seed"] = args.seed
    if getattr(args, "B", None) is not None:
        raw["search"]["B"] = args.B
    train_cfg = TrainConfig.from_dict(raw["train"])
    search_cfg = SearchConfig.from_dict({**raw["search"], "train": train_cfg.to_dict()})
    snapshot = {"train": train_cfg.to_dict(), "search": {k: v for k, v in search_cfg.to_dict().items() if k != "train"}}
    return train_cfg, search_cfg, snapshot


def _load_store(dataset: str | None) -> TripleStore:
    if dataset is None:
        raise DatasetLoadError("--dataset is required")
    if dataset == "synthetic":
        return synthetic_store()
    store = load_dataset(dataset)
    for warning in store.warnings:
        log.warning(warning)
    return store


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Header ``(|E|, |R|, d)`` as little-endian int64, then float64 rows."""
    with open(path, "wb") as fh:
        fh.write(DUMP_HEADER.pack(table.n_entities, table.n_relations, table.dim))
        fh.write(np.ascontiguousarray(table.entity, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(table.relation, dtype="<f8").tobytes())


def read_embeddings(path: str | Path) -> EmbeddingTable:
    data = Path(path).read_bytes()
    n_e, n_r, d = DUMP_HEADER.unpack_from(data)
    body = np.frombuffer(data, dtype="<f8", offset=DUMP_HEADER.size)
    if body.size != (n_e + n_r) * d:
        raise ValueError(f"{path}: expected {(n_e + n_r) * d} floats, found {body.size}")
    return EmbeddingTable(body[: n_e * d].reshape(n_e, d).copy(), body[n_e * d :].reshape(n_r, d).copy())


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_stats(args, manifest: RunManifest, out: Path) -> None:
    store = _load_store(args.dataset)
    stats = relation_stats(store)
    classes = {k: 0 for k in ("symmetric", "anti-symmetric", "inverse", "general")}
    for s in stats:
        classes[s.kind] += 1
    result = {
        "entities": store.n_entities,
        "relations": store.n_relations,
        "train": len(store.train),
        "valid": len(store.valid),
        "test": len(store.test),
        "classes": classes,
        "per_relation": [s.to_json() for s in stats],
    }
    path = out / "stats.json"
    path.write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    manifest.artifacts["stats"] = str(path)
    _emit(result)


def cmd_train(args, manifest: RunManifest, out: Path) -> None:
    sf = resolve_sf(args.sf)
    train_cfg, _, snapshot = _resolve_configs(args)
    manifest.config, manifest.seed = snapshot, train_cfg.seed
    store = _load_store(args.dataset)
    result = train(store, sf, train_cfg)
    report = link_prediction(store, sf, result.table, "test")
    emb_path, report_path, log_path = out / "embeddings.bin", out / "report.json", out / "train.jsonl"
    write_embeddings(result.table, emb_path)
    body = {"sf": format_sf(sf), **report.to_json(), "wall_time": result.wall_time}
    report_path.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
    with log_path.open("a", encoding="utf-8") as fh:
        for epoch, loss in enumerate(result.loss_history):
            fh.write(json.dumps({"sf": format_sf(sf), "epoch": epoch, "loss": loss}) + "\n")
    manifest.artifacts.update(embeddings=str(emb_path), report=str(report_path), log=str(log_path))
    _emit(body)


def cmd_search(args, manifest: RunManifest, out: Path) -> None:
    _, search_cfg, snapshot = _resolve_configs(args)
    manifest.config, manifest.seed = snapshot, search_cfg.seed
    store = _load_store(args.dataset)
    log_path = out / f"search-{args.strategy}.jsonl"
    run = greedy_search if args.strategy == "greedy" else random_search
    history = run(store, search_cfg, workers=args.workers, log_path=log_path)
    manifest.artifacts["log"] = str(log_path)
    if not history:
        raise NumericError("search produced no records")
    print(format_sf(history[0].sf))


def cmd_srf(args, manifest: RunManifest, out: Path) -> None:
    sf = resolve_sf(args.sf)
    sym, skew = check_c1(sf)
    _emit({"sf": format_sf(sf), "srf": srf_string(sf), "symmetric": sym, "skew_symmetric": skew})


def cmd_enumerate(args, manifest: RunManifest, out: Path) -> None:
    if args.blocks != 4:
        raise ConfigError("only --blocks 4 has a closed-form enumeration")
    for sf in enumerate_b4():
        print(format_sf(sf))


def cmd_classify(args, manifest: RunManifest, out: Path) -> None:
    sf = resolve_sf(args.sf)
    train_cfg, _, snapshot = _resolve_configs(args)
    manifest.config, manifest.seed = snapshot, train_cfg.seed
    store = _load_store(args.dataset)
    table = train(store, sf, train_cfg).table
    valid, test = negative_sampling_for_classification(store, seed=train_cfg.seed)
    fit = classification_thresholds(valid, sf, table, store)
    result = {
        "sf": format_sf(sf),
        "accuracy": triplet_classification(test, fit, sf, table),
        "valid_accuracy": triplet_classification(valid, fit, sf, table),
        "fallback_relations": sorted(fit.fallback),
    }
    path = out / "classify.json"
    path.write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    manifest.artifacts["report"] = str(path)
    _emit(result)


COMMANDS = {
    "stats": cmd_stats,
    "train": cmd_train,
    "search": cmd_search,
    "srf": cmd_srf,
    "enumerate": cmd_enumerate,
    "classify": cmd_classify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfsearch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, dataset=False, sf=False, config=False) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", default=os.environ.get("AUTOSF_OUT", "runs"), help="output directory")
        p.add_argument("--seed", type=int, default=None)
        if dataset:
            p.add_argument("--dataset", help="directory with train/valid/test.txt, or 'synthetic'")
        if sf:
            p.add_argument("--sf", required=True, help="known name or 'i,j,+k;...' text")
        if config:
            p.add_argument("--config", help="config JSON path, packaged config name or run manifest")
        return p

    add("stats", "dataset counts and relation classes", dataset=True)
    add("train", "train and evaluate one scoring function", dataset=True, sf=True, config=True)
    p = add("search", "search scoring functions", dataset=True, config=True)
    p.add_argument("--strategy", choices=("greedy", "random"), default="greedy")
    p.add_argument("--B", type=int, default=None, help="target block count")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    add("srf", "symmetry-related features and C1 verdict", sf=True)
    p = add("enumerate", "canonical 4-block candidates")
    p.add_argument("--blocks", type=int, default=4)
    add("classify", "triplet classification accuracy", dataset=True, sf=True, config=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    manifest = RunManifest(
        command=args.command,
        dataset=getattr(args, "dataset", None),
        config={},
        seed=args.seed if args.seed is not None else 0,
        started=_now(),
        argv=argv,
    )
    code = EXIT_OK
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, manifest, out)
    except DatasetLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_LOAD
    except SFParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_PARSE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    finally:
        manifest.finished = _now()
        if out.is_dir():
            manifest.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())

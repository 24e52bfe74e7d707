"""Command-line surface.

Commands: ``synth`` (generate a synthetic corpus), ``pretrain`` (dual
contrastive pretraining to a checkpoint), ``finetune`` (fine-tune a
checkpoint on a held-out dataset across the protocol grid), ``eval`` (the
same grid plus a random-init control), ``embed-table-check`` (validate a TSV
embedding table).

Configuration is a plain-text file of dotted keys (``model.d = 64``);
``--set key=value`` flags override file values, and the ``DOMUS_SEED``
environment variable overrides the seed everywhere. All outputs are written
atomically (temp file + rename). Exit codes: 0 success, 1 usage error,
2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from .checkpoint import CheckpointError
from .downstream import FinetuneSettings, FinetuneStrategy
from .embeddings import load_table_tsv
from .evaluation import EvalProtocol, LodoConfig, MetricReport, grid_run, kfold_splits
from .event_encoder import ModelConfig
from .ingest import (
    ActivityScript,
    Dataset,
    ParseError,
    SyntheticHomeSpec,
    SyntheticSensor,
    Visit,
    generate_synthetic_corpus,
    parse_event_csv,
    write_event_csv,
)
from .model import Model
from .nn import NumericError
from .pretraining import PretrainConfig, loss_history_csv, pretrain
from .segmentation import segment_events

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(ValueError):
    pass


DEFAULTS: dict[str, object] = {
    "seed": 0,
    "model.d": 64,
    "model.heads": 4,
    "model.layers": 2,
    "model.harmonics": 4,
    "model.seconds_buckets": 60,
    "model.context_enabled": True,
    "segmentation.n": 30,
    "segmentation.overlap": 29,
    "pretrain.p_event_select": 0.3,
    "pretrain.p_event_mask": 0.15,
    "pretrain.temperature": 0.1,
    "pretrain.batch_size": 64,
    "pretrain.epochs_phase1": 3,
    "pretrain.epochs_phase2": 3,
    "pretrain.lr": 1e-3,
    "pretrain.windows_per_dataset": 0,  # 0: size of the largest dataset
    "pretrain.symmetric": True,
    "finetune.strategy": "full",
    "finetune.epochs": 10,
    "finetune.batch_size": 64,
    "finetune.lr": 1e-3,
    "finetune.count_loss_weight": 1.0,
    "protocol.held_out": "",
    "protocol.pcts": [5.0, 10.0, 15.0, 30.0],
    "protocol.folds": 5,
    "protocol.k": [10, 30],
    "protocol.seeds": [0],
    "paths.datasets": [],
    "paths.embedding_table": "",
    "paths.out_dir": "out",
}


def _coerce(key: str, raw: str):
    default = DEFAULTS[key]
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise UsageError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError as exc:
            raise UsageError(f"{key}: expected an integer, got {raw!r}") from exc
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError as exc:
            raise UsageError(f"{key}: expected a number, got {raw!r}") from exc
    if isinstance(default, list):
        if not raw:
            return []
        items = [part.strip() for part in raw.split(",")]
        if default and isinstance(default[0], float):
            return [float(p) for p in items]
        if default and isinstance(default[0], int):
            return [int(p) for p in items]
        return items
    return raw


def load_config(path: str | None, overrides: list[str]) -> dict:
    """Dotted-key config file plus --set overrides, on top of the defaults."""
    config = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.read().split("\n")
        except OSError as exc:
            raise UsageError(f"cannot read config {path!r}: {exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise UsageError(f"{path}:{lineno}: expected `key = value`")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            config[key] = _coerce(key, raw)
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set needs key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise UsageError(f"--set: unknown config key {key!r}")
        config[key] = _coerce(key, raw)
    env_seed = os.environ.get("DOMUS_SEED")
    if env_seed is not None:
        config["seed"] = _coerce("seed", env_seed)
    return config


def atomic_write(path: str, data: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".out-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- config -> objects ---------------------------------------------------------


def model_config(config: dict) -> ModelConfig:
    return ModelConfig(
        d=config["model.d"], heads=config["model.heads"], layers=config["model.layers"],
        harmonics=config["model.harmonics"],
        seconds_buckets=config["model.seconds_buckets"],
        n_window=config["segmentation.n"],
        context_enabled=config["model.context_enabled"],
    )


def pretrain_config(config: dict) -> PretrainConfig:
    return PretrainConfig(
        p_event_select=config["pretrain.p_event_select"],
        p_event_mask=config["pretrain.p_event_mask"],
        temperature=config["pretrain.temperature"],
        batch_size=config["pretrain.batch_size"],
        epochs_phase1=config["pretrain.epochs_phase1"],
        epochs_phase2=config["pretrain.epochs_phase2"],
        lr=config["pretrain.lr"],
        windows_per_dataset=config["pretrain.windows_per_dataset"] or None,
        symmetric=config["pretrain.symmetric"],
        seed=config["seed"],
    )


def finetune_settings(config: dict) -> FinetuneSettings:
    return FinetuneSettings(
        strategy=FinetuneStrategy(config["finetune.strategy"]),
        epochs=config["finetune.epochs"],
        batch_size=config["finetune.batch_size"],
        lr=config["finetune.lr"],
        count_loss_weight=config["finetune.count_loss_weight"],
        seed=config["seed"],
    )


def load_datasets(config: dict) -> list[Dataset]:
    paths = config["paths.datasets"]
    if not paths:
        raise UsageError("paths.datasets is empty; list at least one event CSV")
    datasets = []
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            with open(path, "rb") as fh:
                datasets.append(parse_event_csv(fh.read(), name=name))
        except OSError as exc:
            raise ParseError(f"cannot read dataset {path!r}: {exc}") from exc
    return datasets


def load_table(config: dict):
    path = config["paths.embedding_table"]
    if not path:
        return None
    try:
        with open(path, "rb") as fh:
            return load_table_tsv(fh.read())
    except OSError as exc:
        raise ParseError(f"cannot read embedding table {path!r}: {exc}") from exc


def build_model(config: dict, seed: int | None = None) -> Model:
    return Model.init(model_config(config), load_table(config),
                      seed=config["seed"] if seed is None else seed)


# -- home spec JSON --------------------------------------------------------------


def home_spec_from_json(blob: bytes) -> SyntheticHomeSpec:
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"home spec is not valid JSON: {exc}") from exc
    try:
        sensors = tuple(SyntheticSensor(
            id=s["id"], sensor_type=s["sensor_type"],
            house_item=s.get("house_item"), room=s.get("room"),
        ) for s in doc["sensors"])
        activities = tuple(ActivityScript(
            name=a["name"],
            visits=tuple(Visit(room=v["room"], item=v.get("item"),
                               dwell=tuple(v.get("dwell", (60, 300))))
                         for v in a["visits"]),
            hour_ranges=tuple(tuple(r) for r in a["hour_ranges"]),
            weekday_weights=tuple(a.get("weekday_weights", (1.0,) * 7)),
        ) for a in doc["activities"])
        return SyntheticHomeSpec(
            name=doc.get("name", "synthetic"),
            rooms=tuple(doc["rooms"]),
            sensors=sensors,
            activities=activities,
            noise_rate=doc.get("noise_rate", 0.0),
            duration_days=doc.get("duration_days", 7),
            seed=doc.get("seed", 0),
            start=doc.get("start", "2025-01-06T00:00:00"),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"home spec missing or malformed field: {exc}") from exc


# -- commands --------------------------------------------------------------------


def cmd_synth(args) -> int:
    try:
        with open(args.spec, "rb") as fh:
            spec = home_spec_from_json(fh.read())
    except OSError as exc:
        print(f"error: cannot read spec {args.spec!r}: {exc}", file=sys.stderr)
        return EXIT_DATA
    env_seed = os.environ.get("DOMUS_SEED")
    if args.seed is not None or env_seed is not None:
        seed = args.seed if args.seed is not None else int(env_seed)
        spec = SyntheticHomeSpec(**{**spec.__dict__, "seed": seed})
    dataset = generate_synthetic_corpus(spec)
    atomic_write(args.out, write_event_csv(dataset))
    print(f"wrote {args.out}: {len(dataset.stream)} events, "
          f"{len(dataset.sensors)} sensors, {len(dataset.activity_set)} activities")
    return EXIT_OK


def cmd_embed_table_check(args) -> int:
    with open(args.table, "rb") as fh:
        table = load_table_tsv(fh.read())
    print(f"ok: {len(table.vectors)} tokens (reserved included), d_text={table.d_text}")
    return EXIT_OK


def _segment_all(datasets, config):
    n, overlap = config["segmentation.n"], config["segmentation.overlap"]
    return {ds.name: segment_events(ds.stream, n, overlap, dataset=ds.name)
            for ds in datasets}


def cmd_pretrain(args, config: dict) -> int:
    datasets = load_datasets(config)
    model = build_model(config)
    for ds in datasets:
        model.add_stream_features(ds.name, ds.stream.events)
    windows = _segment_all(datasets, config)
    empty = [name for name, ws in windows.items() if not ws]
    if empty:
        raise ParseError(f"datasets too short to segment: {empty}")
    result = pretrain(windows, pretrain_config(config), model)
    out_dir = config["paths.out_dir"]
    ckpt = os.path.join(out_dir, "pretrained.ckpt")
    os.makedirs(out_dir, exist_ok=True)
    model.save(ckpt)
    atomic_write(os.path.join(out_dir, "pretrain_loss.csv"),
                 loss_history_csv(result.history).encode("utf-8"))
    print(f"pretrained on {sorted(result.seen_datasets)}; "
          f"final loss {result.history[-1].loss:.4f}")
    print(f"checkpoint: {ckpt}")
    return EXIT_OK


def _lodo_config(config: dict, held_out: str) -> LodoConfig:
    protocol = EvalProtocol(
        held_out=held_out,
        train_pcts=tuple(config["protocol.pcts"]),
        folds=config["protocol.folds"],
        k_values=tuple(config["protocol.k"]),
        seeds=tuple(config["protocol.seeds"]),
    )
    return LodoConfig(
        model=model_config(config),
        protocol=protocol,
        pretrain=pretrain_config(config),
        finetune=finetune_settings(config),
        overlap=config["segmentation.overlap"],
    )


def _checkpoint_grid(args, config: dict, with_control: bool) -> int:
    held_out = args.held_out or config["protocol.held_out"]
    if not held_out:
        raise UsageError("--held-out (or protocol.held_out) is required")
    datasets = load_datasets(config)
    names = [ds.name for ds in datasets]
    if held_out not in names:
        raise ParseError(f"held-out dataset {held_out!r} not among {names}")
    lodo = _lodo_config(config, held_out)
    held = next(ds for ds in datasets if ds.name == held_out)

    model = build_model(config)
    meta = model.load(args.checkpoint)  # validates shapes before any mutation
    if meta.get("config", {}).get("d") not in (None, lodo.model.d):
        raise CheckpointError(f"checkpoint was trained at d={meta['config']['d']}, "
                              f"config says d={lodo.model.d}")
    for ds in datasets:
        model.add_stream_features(ds.name, ds.stream.events)
    windows = segment_events(held.stream, lodo.model.n_window, lodo.overlap,
                             dataset=held.name)
    splits = kfold_splits(windows, lodo.protocol.folds)
    report = MetricReport()
    for seed in lodo.protocol.seeds:
        variants = [("", model)]
        if with_control:
            control = Model.init(lodo.model, load_table(config), seed=seed + 104729)
            control.features = model.features
            variants.append(("_control", control))
        grid_run(report, variants, held, splits, lodo, seed,
                 progress=(print if args.verbose else None))
    out_name = "eval_metrics.csv" if with_control else "finetune_metrics.csv"
    out_path = os.path.join(config["paths.out_dir"], out_name)
    atomic_write(out_path, report.to_csv().encode("utf-8"))
    _print_aggregates(report)
    print(f"metrics: {out_path}")
    return EXIT_OK


def _print_aggregates(report: MetricReport):
    print(f"{'task':<10} {'pct':>5} {'metric':<24} {'mean':>8}")
    for row in report.aggregate():
        print(f"{row.task:<10} {row.pct:>5g} {row.metric:<24} {row.value:>8.4f}")


def cmd_finetune(args, config: dict) -> int:
    return _checkpoint_grid(args, config, with_control=False)


def cmd_eval(args, config: dict) -> int:
    return _checkpoint_grid(args, config, with_control=True)


# -- entry point -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def make_parser() -> _Parser:
    parser = _Parser(prog="domusfm",
                     description="Smart-home event-stream representation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus CSV from a home spec")
    p.add_argument("--spec", required=True, help="home spec JSON file")
    p.add_argument("--out", required=True, help="output event CSV path")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")

    for name in ("pretrain", "finetune", "eval"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="dotted-key config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value")
        p.add_argument("--verbose", action="store_true")
        if name != "pretrain":
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--held-out", default="", dest="held_out")

    p = sub.add_parser("embed-table-check", help="validate a TSV embedding table")
    p.add_argument("table")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "synth":
            return cmd_synth(args)
        if args.command == "embed-table-check":
            return cmd_embed_table_check(args)
        config = load_config(args.config, args.set)
        if args.command == "pretrain":
            return cmd_pretrain(args, config)
        if args.command == "finetune":
            return cmd_finetune(args, config)
        return cmd_eval(args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

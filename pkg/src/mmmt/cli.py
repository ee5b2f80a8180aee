"""Command-line entry point.

Subcommands: gen, train, ablate, eval, predict, gradcheck. Exit codes:
0 success, 1 runtime/data failure, 2 usage or config failure. Every run
that produces artifacts also writes a manifest (config snapshot, input
digests, seed, artifact paths, final metrics) sufficient to reproduce it.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

from . import data_io, evaluation, model as model_mod
from .data_io import HEADS, MODALITIES
from .errors import ConfigError, MmmtError
from .evaluation import ABLATION_ORDER, format_report, reference_tables
from .model import ModelConfig, init_model, load_model, save_model
from .rng import RngState
from .tensor_core import grad_check
from .training import TrainConfig, train, train_config_to_dict

_TABLE_KEYS = ("table2", "table3", "table5", "table7")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_digest(model_cfg: ModelConfig, train_cfg: TrainConfig,
                   exclude: tuple[str, ...] = ()) -> str:
    blob = {
        "model": dataclasses.asdict(model_cfg),
        "train": train_config_to_dict(train_cfg),
    }
    for key in exclude:
        blob["train"].pop(key, None)
    return hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(raw) - {"model", "train"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return raw


def _build_configs(args) -> tuple[ModelConfig, TrainConfig]:
    """Precedence: command-line flag > config file > default."""
    raw = _load_config_file(getattr(args, "config", None))
    try:
        model_cfg = ModelConfig(**raw.get("model", {}))
    except TypeError as e:
        raise ConfigError(f"model config: {e}")
    train_raw = dict(raw.get("train", {}))
    for flag, key in (("seed", "seed"), ("epochs", "max_epochs"),
                      ("batch_size", "batch_size"), ("patience", "early_stop_patience_epochs"),
                      ("oversample", "oversample_mode")):
        v = getattr(args, flag, None)
        if v is not None:
            train_raw[key] = v
    if getattr(args, "heads", None):
        train_raw["head_mask"] = args.heads
    if getattr(args, "modalities", None):
        train_raw["modality_mask"] = args.modalities
    try:
        train_cfg = TrainConfig(**train_raw)
    except TypeError as e:
        raise ConfigError(f"train config: {e}")
    model_cfg.validate()
    train_cfg.validate()
    return model_cfg, train_cfg


def _write_json(obj, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen(args) -> int:
    weights = None
    labels = None
    if args.weights != "uniform":
        if args.weights.startswith("table1-"):
            split = args.weights.removeprefix("table1-")
            labels = data_io.split_label_assignment(split, args.n, args.seed)
        else:
            try:
                with open(args.weights) as f:
                    weights = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read weights spec: {e}")
    dims = (args.d_image, args.d_clip, args.d_text)
    records = data_io.generate_synthetic(
        args.n, args.seed, args.separability, class_weights=weights,
        labels=labels, dims=dims)
    data_io.write_feature_file(records, dims, args.out)
    stats = data_io.compute_stats(records)
    print(f"wrote {len(records)} records to {args.out} "
          f"(sha256 {_sha256(args.out)[:16]})")
    for h in HEADS:
        print(f"  {h}: {list(map(int, stats.counts[h]))}")
    return 0


def _train_one(model_cfg: ModelConfig, train_cfg: TrainConfig,
               train_records, val_records):
    model = init_model(model_cfg, RngState(train_cfg.seed))
    result = train(model, train_records, val_records, train_cfg)
    report = evaluation.evaluate_model(result.model, val_records,
                                       train_cfg.modality_mask)
    return result, report


def cmd_train(args) -> int:
    model_cfg, train_cfg = _build_configs(args)
    train_records, train_dims = data_io.read_feature_file(args.train)
    val_records, _ = data_io.read_feature_file(args.val)
    _check_dims(model_cfg, train_dims, args.train)
    os.makedirs(args.out_dir, exist_ok=True)

    result, report = _train_one(model_cfg, train_cfg, train_records, val_records)

    ckpt_path = os.path.join(args.out_dir, "checkpoint.mmt1")
    save_model(result.model, ckpt_path, extra_meta={
        "modality_mask": list(train_cfg.modality_mask),
        "head_mask": list(train_cfg.head_mask),
    })
    log_path = os.path.join(args.out_dir, "epochs.jsonl")
    tmp = log_path + ".tmp"
    with open(tmp, "w") as f:
        for entry in result.log:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
    os.replace(tmp, log_path)
    metrics_path = os.path.join(args.out_dir, "metrics.json")
    _write_json(report.as_dict(), metrics_path)

    manifest = {
        "command": "train",
        "config": {"model": dataclasses.asdict(model_cfg),
                   "train": train_config_to_dict(train_cfg)},
        "config_digest": _config_digest(model_cfg, train_cfg),
        "seed": train_cfg.seed,
        "inputs": {"train": {"path": args.train, "sha256": _sha256(args.train)},
                   "val": {"path": args.val, "sha256": _sha256(args.val)}},
        "artifacts": {"checkpoint": ckpt_path, "epoch_log": log_path,
                      "metrics": metrics_path},
        "best_epoch": result.best_epoch,
        "best_metric": result.best_metric,
        "metrics": report.as_dict(),
    }
    _write_json(manifest, os.path.join(args.out_dir, "manifest.json"))

    print(f"trained {len(result.log)} epochs; best epoch {result.best_epoch} "
          f"(mean val F1 {result.best_metric:.4f})")
    print(format_report(report))
    return 0


def cmd_ablate(args) -> int:
    model_cfg, train_cfg = _build_configs(args)
    train_records, train_dims = data_io.read_feature_file(args.train)
    val_records, _ = data_io.read_feature_file(args.val)
    _check_dims(model_cfg, train_dims, args.train)
    os.makedirs(args.out_dir, exist_ok=True)

    # the modality mask is the controlled variable: digest everything else
    digest = _config_digest(model_cfg, train_cfg, exclude=("modality_mask",))
    rows = []
    for subset in ABLATION_ORDER:
        run_cfg = dataclasses.replace(train_cfg, modality_mask=subset)
        result, report = _train_one(model_cfg, run_cfg, train_records, val_records)
        rows.append({
            "modalities": list(subset),
            "task_a": report.task_a,
            "task_b": report.task_b,
            "task_c": report.task_c,
            "mean": report.mean,
            "config_digest": digest,
            "best_epoch": result.best_epoch,
        })
        name = "+".join(subset)
        print(f"{name:<16} task_a {report.task_a:.4f}  task_b {report.task_b:.4f}  "
              f"task_c {report.task_c:.4f}  mean {report.mean:.4f}")

    table_path = os.path.join(args.out_dir, "ablation.json")
    _write_json(rows, table_path)
    manifest = {
        "command": "ablate",
        "config": {"model": dataclasses.asdict(model_cfg),
                   "train": train_config_to_dict(train_cfg)},
        "config_digest": digest,
        "seed": train_cfg.seed,
        "inputs": {"train": {"path": args.train, "sha256": _sha256(args.train)},
                   "val": {"path": args.val, "sha256": _sha256(args.val)}},
        "artifacts": {"table": table_path},
        "rows": rows,
    }
    _write_json(manifest, os.path.join(args.out_dir, "manifest.json"))
    return 0


def _check_dims(model_cfg: ModelConfig, dims, path: str) -> None:
    expected = (model_cfg.d_image, model_cfg.d_clip, model_cfg.d_text)
    if tuple(dims) != expected:
        raise MmmtError(f"feature file {path} dims {tuple(dims)} != model dims "
                        f"{expected}")


def _load_checkpoint(path: str):
    model, meta = load_model(path)
    modality_mask = tuple(meta.get("modality_mask", MODALITIES))
    return model, meta, modality_mask


def cmd_eval(args) -> int:
    model, meta, modality_mask = _load_checkpoint(args.checkpoint)
    records, dims = data_io.read_feature_file(args.data)
    _check_dims(model.config, dims, args.data)
    report = evaluation.evaluate_model(model, records, modality_mask)
    print(format_report(report))
    if args.compare:
        _print_comparison(args.compare, report)
    if args.json:
        _write_json(report.as_dict(), args.json)
    return 0


def _print_comparison(table: str, report) -> None:
    ref = reference_tables()[table]
    print(f"\nreference {table}:")
    if table == "table7":
        for row in ref:
            cells = "  ".join("N/A" if row[k] is None else f"{row[k]:.4f}"
                              for k in ("task_a", "task_b", "task_c", "mean"))
            print(f"  {row['team']:<16} {cells}")
        ours = [report.task_a, report.task_b, report.task_c, report.mean]
        blue = ref[0]
        deltas = []
        for k, v in zip(("task_a", "task_b", "task_c", "mean"), ours):
            deltas.append("N/A" if v is None else f"{v - blue[k]:+.4f}")
        print(f"  {'(this run - BLUE)':<16} {'  '.join(deltas)}")
    elif table == "table5":
        for row in ref:
            print(f"  {'+'.join(row['modalities']):<16} {row['task_a']:.4f}  "
                  f"{row['task_b']:.4f}  {row['task_c']:.4f}  {row['mean']:.4f}")
    elif table == "table3":
        for row in ref:
            print(f"  {row['model']:<10} {row['task_a']:.4f}  {row['task_b']:.4f}  "
                  f"{row['task_c']:.4f}  {row['mean']:.4f}")
    else:
        for row in ref:
            print(f"  {row['emotion']:<11} task {row['task']:<2} "
                  f"only_text {row['only_text']:.4f}  mmmt {row['mmmt']:.4f}")


def cmd_predict(args) -> int:
    model, meta, modality_mask = _load_checkpoint(args.checkpoint)
    records, dims = data_io.read_feature_file(args.data)
    _check_dims(model.config, dims, args.data)
    outputs = model_mod.forward(model, records, modality_mask, training=False)
    preds = model_mod.predict(outputs)
    labels = [data_io.LabelSet(**{h: int(preds[h][i]) for h in HEADS})
              for i in range(len(records))]
    data_io.write_label_manifest([r.id for r in records], labels, args.out)
    print(f"wrote {len(records)} predictions to {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    raw = _load_config_file(args.config)
    try:
        model_cfg = ModelConfig(**raw.get("model", {}))
    except TypeError as e:
        raise ConfigError(f"model config: {e}")
    model_cfg.validate()

    records = data_io.generate_synthetic(
        args.batch, seed=args.seed, separability=0.5,
        dims=(model_cfg.d_image, model_cfg.d_clip, model_cfg.d_text))
    net = init_model(model_cfg, RngState(args.seed))
    labels = data_io.gather_labels(records)

    def loss() -> float:
        outputs = model_mod.forward(net, records, MODALITIES, training=False)
        total, _ = model_mod.multitask_loss(outputs, labels, HEADS)
        return total

    net.zero_grads()
    model_mod.loss_and_grads(net, records, MODALITIES, HEADS, labels,
                             training=False)
    err = grad_check(loss, net.parameters(), eps=args.eps,
                     max_elements_per_param=args.max_elements,
                     rng=RngState(args.seed))
    print(f"max relative gradient error: {err:.3e} "
          f"({'all' if args.max_elements is None else args.max_elements} "
          f"elements/parameter, eps {args.eps})")
    return 0 if err < 1e-4 else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mmmt",
        description="Multi-modal multi-task meme affect classifier")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic feature file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--separability", type=float, default=0.5)
    g.add_argument("--weights", default="uniform",
                   help="'uniform', 'table1-{train,val,test}', or a JSON file "
                        "of per-task class weights")
    g.add_argument("--out", required=True)
    g.add_argument("--d-image", type=int, default=data_io.DEFAULT_DIMS[0])
    g.add_argument("--d-clip", type=int, default=data_io.DEFAULT_DIMS[1])
    g.add_argument("--d-text", type=int, default=data_io.DEFAULT_DIMS[2])
    g.set_defaults(func=cmd_gen)

    for name, func in (("train", cmd_train), ("ablate", cmd_ablate)):
        t = sub.add_parser(name, help=f"{name} on feature files")
        t.add_argument("--config", help="JSON config file with model/train sections")
        t.add_argument("--train", required=True, dest="train")
        t.add_argument("--val", required=True)
        t.add_argument("--out-dir", required=True)
        t.add_argument("--seed", type=int)
        t.add_argument("--epochs", type=int)
        t.add_argument("--batch-size", type=int)
        t.add_argument("--patience", type=int)
        t.add_argument("--oversample")
        t.add_argument("--heads", nargs="+", choices=HEADS)
        if name == "train":
            t.add_argument("--modalities", nargs="+", choices=MODALITIES)
        t.set_defaults(func=func)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a feature file")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--compare", choices=_TABLE_KEYS)
    e.add_argument("--json", help="also write the report as JSON")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("predict", help="write per-id predictions as CSV")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_predict)

    c = sub.add_parser("gradcheck", help="finite-difference gradient check")
    c.add_argument("--config", help="JSON config file (model section)")
    c.add_argument("--eps", type=float, default=1e-5)
    c.add_argument("--batch", type=int, default=2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--max-elements", type=int, default=48,
                   help="coordinates checked per parameter (0 = all)")
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "max_elements", None) == 0:
        args.max_elements = None
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except MmmtError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Experiment runner: dataset generation, view extraction, training, ablations.

Run configs are flat `key = value` text files with every hyperparameter
present under its usual symbol (tau, mu, lambda_u, eta, W, ...). Unknown
keys are rejected; every run writes its resolved config next to its
metrics. Exit codes: 0 ok, 1 config/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import model as mdl
from . import tensorlab as tl
from . import trainer as tr
from .data import (
    Dataset,
    MotionShapesSpec,
    extract_views,
    generate,
    load_dataset,
    make_splits,
    save_dataset,
)
from .model import ModelConfig
from .presets import (
    desk_train_config,
    table_method_variants,
    table_strategy_variants,
    table_view_variants,
    table_warmup_variants,
    with_seed,
)
from .ssl_core import StrategyConfig
from .trainer import TrainConfig, evaluate, prepare_training_data, run_training

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# flat key=value run configs

_BOOL = {"true": True, "false": False}


def _parse_bool(v: str) -> bool:
    if v.lower() not in _BOOL:
        raise ConfigError(f"expected true/false, got {v!r}")
    return _BOOL[v.lower()]


def _parse_str_list(v: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in v.split(",") if s.strip())


def _parse_int_list(v: str) -> tuple[int, ...]:
    return tuple(int(s) for s in _parse_str_list(v))


def _parse_float_list(v: str) -> tuple[float, ...]:
    return tuple(float(s) for s in _parse_str_list(v))


# key -> (parser, default); None default means "must be provided"
CONFIG_KEYS: dict = {
    "data": (str, None),
    "out": (str, None),
    "seed": (int, 0),
    "tau": (float, 0.3),
    "mu": (int, 3),
    "lambda_u": (float, 1.0),
    "eta": (float, 0.8),
    "W": (int, 0),
    "epochs": (int, 60),
    "lr_ramp_epochs": (float, 34.0),
    "momentum": (float, 0.9),
    "weight_decay": (float, 1e-4),
    "batch_size": (int, 8),
    "views_enabled": (_parse_str_list, ("rgb", "flow", "tg")),
    "strategy": (str, "aggregated"),
    "bijection": (_parse_int_list, ()),
    "strategy_weights": (_parse_float_list, ()),
    "exclusion": (_parse_bool, False),
    "strategy_seed": (int, 0),
    "method": (str, "fixmatch"),
    "sharpen_temperature": (float, 0.5),
    "masked": (_parse_bool, True),
    "crop_size": (int, 24),
    "scale_min": (float, 256 / 224),
    "scale_max": (float, 320 / 224),
    "eval_clips": (int, 2),
    "eval_crops": (int, 1),
    "eval_every": (int, 1),
    "model_widths": (_parse_int_list, (16, 32, 64)),
    "model_dropout": (float, 0.5),
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        parser, _ = CONFIG_KEYS[key]
        try:
            values[key] = parser(value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    for key, (_, default) in CONFIG_KEYS.items():
        if key not in values:
            if default is None:
                raise ConfigError(f"{source}: missing required key {key!r}")
            values[key] = default
    return values


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def resolved_config_text(values: dict) -> str:
    lines = [f"{key} = {_fmt_value(values[key])}" for key in sorted(CONFIG_KEYS)]
    return "\n".join(lines) + "\n"


def config_from_values(values: dict) -> tuple[TrainConfig, tuple[int, ...], float]:
    strategy = StrategyConfig(
        strategy=values["strategy"],
        bijection=values["bijection"] or None,
        weights=values["strategy_weights"] or None,
        exclusion=values["exclusion"],
        seed=values["strategy_seed"],
    )
    train = TrainConfig(
        mu=values["mu"],
        tau=values["tau"],
        lambda_u=values["lambda_u"],
        strategy=strategy,
        method=values["method"],
        sharpen_temperature=values["sharpen_temperature"],
        masked=values["masked"],
        epochs=values["epochs"],
        warmup_epochs=values["W"],
        lr_base=values["eta"],
        lr_ramp_epochs=values["lr_ramp_epochs"],
        momentum=values["momentum"],
        weight_decay=values["weight_decay"],
        batch_size=values["batch_size"],
        seed=values["seed"],
        views_enabled=values["views_enabled"],
        crop_size=values["crop_size"],
        scale_range=(values["scale_min"], values["scale_max"]),
        eval_clips=values["eval_clips"],
        eval_crops=values["eval_crops"],
        eval_every=values["eval_every"],
    )
    return train, values["model_widths"], values["model_dropout"]


def values_from_config(train: TrainConfig, data: str, out: str,
                       model: ModelConfig) -> dict:
    """Inverse of config_from_values, for writing resolved ablate configs."""
    return {
        "data": data,
        "out": out,
        "seed": train.seed,
        "tau": train.tau,
        "mu": train.mu,
        "lambda_u": train.lambda_u,
        "eta": train.lr_base,
        "W": train.warmup_epochs,
        "epochs": train.epochs,
        "lr_ramp_epochs": train.lr_ramp_epochs,
        "momentum": train.momentum,
        "weight_decay": train.weight_decay,
        "batch_size": train.batch_size,
        "views_enabled": train.views_enabled,
        "strategy": train.strategy.strategy,
        "bijection": train.strategy.bijection or (),
        "strategy_weights": train.strategy.weights or (),
        "exclusion": train.strategy.exclusion,
        "strategy_seed": train.strategy.seed,
        "method": train.method,
        "sharpen_temperature": train.sharpen_temperature,
        "masked": train.masked,
        "crop_size": train.crop_size,
        "scale_min": train.scale_range[0],
        "scale_max": train.scale_range[1],
        "eval_clips": train.eval_clips,
        "eval_crops": train.eval_crops,
        "eval_every": train.eval_every,
        "model_widths": model.widths,
        "model_dropout": model.dropout_rate,
    }


# ---------------------------------------------------------------------------
# verbs


def _require_fresh_dir(path: Path, force: bool) -> None:
    if path.exists():
        if not force:
            raise ConfigError(f"output directory {path} exists; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def _load_dataset_checked(path: str) -> Dataset:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"dataset file {p} does not exist")
    return load_dataset(p)


def cmd_gen_data(args) -> int:
    spec = MotionShapesSpec(
        frames=args.frames,
        height=args.height,
        width=args.width,
        noise_sigma=args.noise_sigma,
    )
    out = Path(args.out)
    if out.exists() and not args.force:
        raise ConfigError(f"output file {out} exists; pass --force to overwrite")
    dataset = generate(spec, args.n_per_class, args.seed, eval_per_class=args.eval_per_class)
    manifest = make_splits(dataset.manifest, args.labeled_fraction, args.split_seed)
    dataset = dataset.with_manifest(manifest)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(out, dataset)
    n_train = len(manifest.train_ids())
    n_labeled = len(manifest.labeled_train_ids())
    n_eval = len(manifest.eval_ids())
    print(f"wrote {out}: {n_train} train clips ({n_labeled} labeled), {n_eval} eval clips")
    return EXIT_OK


def cmd_extract_views(args) -> int:
    dataset = _load_dataset_checked(args.data)
    from .views import FlowParams

    params = FlowParams(
        alpha=args.alpha, iterations=args.iterations, pyramid_levels=args.levels
    )
    dataset = extract_views(dataset, params)
    target = Path(args.out) if args.out else Path(args.data)
    tmp = target.with_suffix(target.suffix + ".tmp")
    save_dataset(tmp, dataset)
    os.replace(tmp, target)
    print(f"wrote {target} with precomputed views for {len(dataset.clips)} clips")
    return EXIT_OK


def _train_one(
    dataset: Dataset,
    train_cfg: TrainConfig,
    model_cfg: ModelConfig,
    out_dir: Path,
    values: dict,
) -> tr.TrainResult:
    missing_views = (
        any(v in train_cfg.views_enabled for v in ("flow", "tg")) and not dataset.has_views()
    )
    if missing_views:
        print(
            "warning: container has no precomputed views; computing flow/tg on the fly "
            "(run extract-views to cache them)",
            file=sys.stderr,
        )
    result = run_training(dataset, train_cfg, model_cfg)
    (out_dir / "metrics.csv").write_text(result.metrics_csv())
    (out_dir / "config.resolved").write_text(resolved_config_text(values))
    mdl.save_checkpoint(out_dir / "model.mvpl", result.state)
    return result


def cmd_train(args) -> int:
    cfg_path = Path(args.config)
    if not cfg_path.exists():
        raise ConfigError(f"config file {cfg_path} does not exist")
    values = parse_config_text(cfg_path.read_text(), source=str(cfg_path))
    if args.out:
        values["out"] = args.out
    train_cfg, widths, dropout = config_from_values(values)
    dataset = _load_dataset_checked(values["data"])
    spec = dataset.manifest.spec
    model_cfg = ModelConfig(
        input_shape=(spec.frames, train_cfg.crop_size, train_cfg.crop_size),
        widths=widths,
        dropout_rate=dropout,
    )
    out_dir = Path(values["out"])
    _require_fresh_dir(out_dir, args.force)
    result = _train_one(dataset, train_cfg, model_cfg, out_dir, values)
    print(f"final top-1 {result.final_top1:.4f}; metrics in {out_dir / 'metrics.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint {ckpt} does not exist")
    state = mdl.load_checkpoint(ckpt)
    dataset = _load_dataset_checked(args.data)
    manifest = dataset.manifest
    clips = [dataset.clip(i) for i in manifest.eval_ids()]
    labels = [manifest.record(i).label for i in manifest.eval_ids()]
    top1 = evaluate(state, clips, labels, clips_per_video=args.clips, crops=args.crops)
    print(f"top-1 {top1:.4f} over {len(clips)} eval videos")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    reports = tl.gradient_suite(eps=args.eps, tol=args.tol)
    reports += mdl.gradient_suite(eps=args.eps, tol=args.tol)
    all_ok = True
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"{status}  {r.name}: max relative error {r.max_rel_error:.3e} (tol {r.tol:g})")
        all_ok &= r.passed
    return EXIT_OK if all_ok else EXIT_RUNTIME


ABLATE_TABLES = {
    "methods": table_method_variants,
    "views": table_view_variants,
    "strategies": table_strategy_variants,
    "warmup": table_warmup_variants,
}


def cmd_ablate(args) -> int:
    if args.table not in ABLATE_TABLES:
        raise ConfigError(f"unknown table {args.table!r}; expected {sorted(ABLATE_TABLES)}")
    if args.table == "warmup" and args.warmups:
        variants = table_warmup_variants(tuple(int(w) for w in args.warmups.split(",")))
    else:
        variants = ABLATE_TABLES[args.table]()
    seeds = tuple(int(s) for s in args.seeds.split(","))
    dataset = _load_dataset_checked(args.data)
    out_dir = Path(args.out)
    _require_fresh_dir(out_dir, args.force)
    spec = dataset.manifest.spec

    summary = ["variant," + ",".join(f"top1_seed{s}" for s in seeds) + ",top1_mean"]
    for name, base_cfg in variants:
        if args.epochs:
            base_cfg = dataclasses.replace(base_cfg, epochs=args.epochs)
        if args.batch_size:
            base_cfg = dataclasses.replace(base_cfg, batch_size=args.batch_size)
        if args.crop_size:
            base_cfg = dataclasses.replace(base_cfg, crop_size=args.crop_size)
        accs = []
        for seed in seeds:
            cfg = with_seed(base_cfg, seed)
            model_cfg = ModelConfig(
                input_shape=(spec.frames, cfg.crop_size, cfg.crop_size),
                widths=args.model_widths,
            )
            run_dir = out_dir / name.replace("/", "_") / f"seed{seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            values = values_from_config(cfg, args.data, str(run_dir), model_cfg)
            result = _train_one(dataset, cfg, model_cfg, run_dir, values)
            accs.append(result.final_top1)
            print(f"{name} seed {seed}: top-1 {result.final_top1:.4f}")
        mean = float(np.mean(accs))
        summary.append(
            name + "," + ",".join(repr(a) for a in accs) + f",{mean!r}"
        )
    (out_dir / "summary.csv").write_text("\n".join(summary) + "\n")
    print(f"summary in {out_dir / 'summary.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvpl", description="Multiview pseudo-labeling experiment runner"
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic motion dataset container")
    g.add_argument("--out", required=True)
    g.add_argument("--n-per-class", type=int, default=100)
    g.add_argument("--eval-per-class", type=int, default=16)
    g.add_argument("--frames", type=int, default=8)
    g.add_argument("--height", type=int, default=32)
    g.add_argument("--width", type=int, default=32)
    g.add_argument("--noise-sigma", type=float, default=4.0)
    g.add_argument("--labeled-fraction", type=float, default=0.1)
    g.add_argument("--split-seed", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--force", action="store_true")
    g.set_defaults(fn=cmd_gen_data)

    x = sub.add_parser("extract-views", help="precompute flow/tg views into the container")
    x.add_argument("--data", required=True)
    x.add_argument("--out", default=None, help="defaults to rewriting --data in place")
    x.add_argument("--alpha", type=float, default=15.0)
    x.add_argument("--iterations", type=int, default=100)
    x.add_argument("--levels", type=int, default=3)
    x.set_defaults(fn=cmd_extract_views)

    t = sub.add_parser("train", help="run one training job from a key=value config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", default=None, help="override the config's out directory")
    t.add_argument("--force", action="store_true")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's eval split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--clips", type=int, default=2)
    e.add_argument("--crops", type=int, default=1)
    e.set_defaults(fn=cmd_eval)

    c = sub.add_parser("gradcheck", help="finite-difference checks for every op and the model")
    c.add_argument("--eps", type=float, default=1e-5)
    c.add_argument("--tol", type=float, default=1e-4)
    c.set_defaults(fn=cmd_gradcheck)

    a = sub.add_parser("ablate", help="run an ablation grid and write a summary CSV")
    a.add_argument("--table", required=True, choices=sorted(ABLATE_TABLES))
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--seeds", default="0,1,2")
    a.add_argument("--epochs", type=int, default=None)
    a.add_argument("--batch-size", type=int, default=None)
    a.add_argument("--crop-size", type=int, default=None)
    a.add_argument("--warmups", default=None, help="comma list for --table warmup")
    a.add_argument("--model-widths", type=_parse_int_list, default=(8, 16, 24))
    a.add_argument("--force", action="store_true")
    a.set_defaults(fn=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures get a distinct exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

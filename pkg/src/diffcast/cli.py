"""Command-line product surface: generate / train / evaluate / compare /
intervene / serve. Exit status 0 on success, 1 on runtime failures
(missing checkpoint, bad data), 2 on invalid usage or configuration."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .causal import InterventionSpec, counterfactual_predict
from .checkpoint import ModelCheckpoint, model_from_checkpoint
from .config import load_kv_file, section
from .dataset_io import export_dataset, load_dataset
from .errors import ConfigError, DiffcastError, SchemaError
from .models import ModelConfig
from .synth import GeneratorConfig, generate_dataset
from .training import (
    EvalReport,
    LossConfig,
    TrainConfig,
    compare,
    evaluate,
    loss_curve_csv,
    render_comparison,
    run_baseline,
    train,
)


class CliError(Exception):
    def __init__(self, code: str, message: str, exit_code: int = 1):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code


def _fail(code: str, message: str, exit_code: int = 1) -> "CliError":
    return CliError(code, message, exit_code)


def _load_bundle(path: str):
    root = Path(path)
    if not root.is_dir():
        raise _fail("schema_error", f"dataset directory not found: {root}")
    try:
        return load_dataset(root)
    except FileNotFoundError as exc:
        raise _fail("schema_error", f"dataset incomplete: {exc}")
    except SchemaError as exc:
        raise _fail("schema_error", str(exc))


def _load_checkpoint(path: str) -> ModelCheckpoint:
    file = Path(path)
    if not file.is_file():
        raise _fail("not_trained", f"checkpoint not found: {file}")
    try:
        return ModelCheckpoint.load(file)
    except SchemaError as exc:
        raise _fail("not_trained", str(exc))


def _kv_config(path: str | None) -> dict:
    if not path:
        return {}
    file = Path(path)
    if not file.is_file():
        raise _fail("schema_error", f"config file not found: {file}", exit_code=2)
    try:
        return load_kv_file(file)
    except ConfigError as exc:
        raise _fail("schema_error", f"bad config file: {exc}", exit_code=2)


def cmd_generate(args) -> int:
    kv = _kv_config(args.config)
    overrides = section(kv, "generator")
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = GeneratorConfig.from_dict({**GeneratorConfig().to_dict(), **overrides})
    except ConfigError as exc:
        raise _fail("schema_error", str(exc), exit_code=2)
    bundle = generate_dataset(cfg)
    paths = export_dataset(bundle, args.out)
    print(f"wrote {len(paths)} files to {args.out} "
          f"({bundle.data.n_series} series x {bundle.data.steps} steps, {bundle.graph.n} nodes)")
    return 0


def _build_configs(args, kv: dict) -> tuple[ModelConfig, TrainConfig, LossConfig]:
    model_overrides = section(kv, "model")
    train_overrides = section(kv, "train")
    loss_overrides = section(kv, "loss")
    if args.model:
        model_overrides["kind"] = args.model
    for key, value in (
        ("epochs", args.epochs),
        ("batch_size", args.batch),
        ("lr", args.lr),
        ("seed", args.seed),
    ):
        if value is not None:
            train_overrides[key] = value
    try:
        model_cfg = ModelConfig.from_dict({**ModelConfig().to_dict(), **model_overrides})
        train_cfg = TrainConfig(**{**TrainConfig().to_dict(), **train_overrides})
        loss_cfg = LossConfig(**{**LossConfig().to_dict(), **loss_overrides})
    except (ConfigError, TypeError) as exc:
        raise _fail("schema_error", str(exc), exit_code=2)
    return model_cfg, train_cfg, loss_cfg


def cmd_train(args) -> int:
    kv = _kv_config(args.config)
    model_cfg, train_cfg, loss_cfg = _build_configs(args, kv)
    bundle = _load_bundle(args.data)
    result = train(model_cfg.kind, bundle, model_cfg, train_cfg, loss_cfg)
    result.checkpoint.save(args.out)
    if args.curve:
        Path(args.curve).write_text(loss_curve_csv(result.curve), encoding="utf-8")
    first, last = result.curve[0], result.curve[-1]
    print(
        f"trained {model_cfg.kind} for {result.epochs_run} epochs in {result.wall_seconds:.1f}s; "
        f"train loss {first.train_loss:.4f} -> {last.train_loss:.4f}, "
        f"best val {result.best_val_loss:.4f} @ epoch {result.best_epoch}"
    )
    print(f"checkpoint saved to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    checkpoint = _load_checkpoint(args.ckpt)
    bundle = _load_bundle(args.data)
    model = model_from_checkpoint(checkpoint)
    report = evaluate(model, bundle)
    payload = report.to_dict()
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
        print(f"report written to {args.report}")
    metrics = {k: payload[k] for k in ("rmse", "mae", "f1", "r2", "ate_error", "ccs")}
    print(json.dumps(metrics, indent=1))
    return 0


def cmd_baseline(args) -> int:
    bundle = _load_bundle(args.data)
    report = run_baseline(args.kind, bundle)
    payload = report.to_dict()
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
        print(f"report written to {args.report}")
    print(json.dumps({k: payload[k] for k in ("model_kind", "rmse", "mae", "f1")}, indent=1))
    return 0


def cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        file = Path(path)
        if not file.is_file():
            raise _fail("schema_error", f"report not found: {file}")
        reports.append(EvalReport.from_dict(json.loads(file.read_text(encoding="utf-8"))))
    rows = compare(reports)
    print(render_comparison(rows))
    return 0


def cmd_intervene(args) -> int:
    checkpoint = _load_checkpoint(args.ckpt)
    bundle = _load_bundle(args.data)
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise _fail("schema_error", f"intervention spec not found: {spec_path}")
    try:
        spec = InterventionSpec.from_dict(json.loads(spec_path.read_text(encoding="utf-8")))
    except (KeyError, ValueError, DiffcastError) as exc:
        raise _fail("schema_error", f"bad intervention spec: {exc}", exit_code=2)
    model = model_from_checkpoint(checkpoint)
    end = args.t if args.t is not None else bundle.data.steps - 1
    pair = counterfactual_predict(model, bundle, args.series, end, spec)
    payload = {
        "trajectory_a0": [float(v) for v in pair.low.values],
        "trajectory_a1": [float(v) for v in pair.high.values],
        "ace_rollout": pair.rollout_effect,
        "per_step_delta": [float(v) for v in pair.delta],
        "window_end_t": end,
    }
    text = json.dumps(payload, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"counterfactuals written to {args.out}")
    else:
        print(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    checkpoint = _load_checkpoint(args.ckpt)
    bundle = _load_bundle(args.data) if args.data else None
    port = args.port if args.port is not None else int(os.environ.get("DSS_PORT", "8000"))
    app = create_app(checkpoint, bundle)
    print(f"serving on http://{args.host}:{port} (model loaded, data={'yes' if bundle else 'no'})")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffcast",
        description="Market growth forecasting and intervention analysis over diffusion data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--config", help="key=value config file (generator.* keys)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, help="override generator seed")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train a forecaster on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=["hybrid", "gru"])
    p.add_argument("--config", help="key=value config file (model.*, train.*, loss.*)")
    p.add_argument("--curve", help="write the loss curve CSV here")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="produce the six-metric report")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", help="write the full report JSON here")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("baseline", help="evaluate a persistence or GRU baseline")
    p.add_argument("--kind", choices=["persistence", "gru"], required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("compare", help="rank evaluation reports")
    p.add_argument("--reports", nargs="+", required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("intervene", help="counterfactual forecasts for an intervention spec")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--spec", required=True, help="JSON: {treatment, a0, a1, covariates[]}")
    p.add_argument("--data", required=True)
    p.add_argument("--series", type=int, default=0)
    p.add_argument("--t", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_intervene)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--port", type=int, help="default: $DSS_PORT or 8000")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data", help="dataset directory for series-based requests")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return exc.exit_code
    except ConfigError as exc:
        print(f"error (schema_error): {exc}", file=sys.stderr)
        return 2
    except DiffcastError as exc:
        print(f"error (internal): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

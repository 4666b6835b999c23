"""End-to-end training with the composite loss, evaluation, and baselines.

The composite objective is lambda_forecast * MSE on the k-step forecast
plus lambda_anomaly * binary cross-entropy on per-step anomaly
probabilities. Series are split 70/15/15 along the time axis; a window
belongs to the split that contains its forecast targets, so no window's
targets cross a boundary.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .causal import InterventionSpec, binarize_treatment, ccs_score, counterfactual_predict, estimate_ace, fit_propensity
from .checkpoint import ModelCheckpoint, checkpoint_from_model, model_from_checkpoint
from .errors import (
    ComparabilityError,
    ConfigError,
    ContractError,
    DimensionError,
    NumericError,
    TrainingDiverged,
)
from .models import HybridModel, ModelConfig, build_model
from .numerics import Tensor, backward, clip, grad_of, log, make_optimizer, mean
from .synth import AD_FEATURES, CONSUMER_FEATURES, DatasetBundle, rng_for

_PURPOSE_INIT = 10
_PURPOSE_SAMPLER = 11

PROB_EPS = 1e-12


@dataclass
class LossConfig:
    lambda_forecast: float = 1.0
    lambda_anomaly: float = 0.5
    anomaly_class_weight: float = 3.0  # upweights the rare positive class

    def __post_init__(self):
        if self.lambda_forecast < 0 or self.lambda_anomaly < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.lambda_forecast == 0 and self.lambda_anomaly == 0:
            raise ConfigError("at least one loss weight must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-4
    optimizer: str = "adamw"  # adam | adamw
    weight_decay: float = 0.01
    patience: int = 10
    val_fraction: float = 0.15
    seed: int = 0
    windows_per_series: int = 4
    eval_windows_per_series: int = 2
    eval_series_cap: int = 200

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0.0 < self.val_fraction < 0.5:
            raise ConfigError("validation fraction must be in (0, 0.5)")
        if self.optimizer not in ("adam", "adamw"):
            raise ConfigError(f"unknown optimizer '{self.optimizer}'")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def composite_loss(
    forecast: Tensor,
    targets: np.ndarray,
    anomaly_probs: Tensor,
    anomaly_labels: np.ndarray,
    cfg: LossConfig | None = None,
) -> Tensor:
    """lambda_forecast * MSE + lambda_anomaly * class-weighted BCE (scalar)."""
    cfg = cfg or LossConfig()
    targets = np.asarray(targets, dtype=np.float64)
    labels = np.asarray(anomaly_labels, dtype=np.float64)
    if forecast.shape != targets.shape:
        raise DimensionError(f"forecast shape {forecast.shape} != targets {targets.shape}")
    if anomaly_probs.shape != labels.shape:
        raise DimensionError(f"anomaly shape {anomaly_probs.shape} != labels {labels.shape}")
    err = forecast - targets
    loss = cfg.lambda_forecast * mean(err * err)
    if cfg.lambda_anomaly > 0:
        probs = clip(anomaly_probs, PROB_EPS, 1.0 - PROB_EPS)
        ce = -mean(cfg.anomaly_class_weight * labels * log(probs) + (1.0 - labels) * log(1.0 - probs))
        loss = loss + cfg.lambda_anomaly * ce
    return loss


# -- splits and window bookkeeping -------------------------------------------


def split_bounds(steps: int, val_fraction: float) -> tuple[int, int]:
    """(train_end, val_end): train steps [0, train_end), val [train_end, val_end),
    test [val_end, steps). Time order is never shuffled."""
    train_end = int(steps * (1.0 - 2.0 * val_fraction))
    val_end = int(steps * (1.0 - val_fraction))
    return train_end, val_end


def split_window_ends(steps: int, window: int, horizon: int, val_fraction: float) -> dict[str, list[int]]:
    """Valid window-end indices per split; a window's targets t+1..t+horizon
    must fall inside its split, and its history must fit in the series."""
    train_end, val_end = split_bounds(steps, val_fraction)
    first = window - 1

    def ends(lo_target: int, hi_target: int) -> list[int]:
        # targets t+1 .. t+horizon must fit in [lo_target, hi_target)
        lo = max(first, lo_target - 1)
        hi = hi_target - 1 - horizon
        return list(range(lo, hi + 1)) if hi >= lo else []

    return {
        "train": ends(1, train_end),
        "val": ends(train_end, val_end),
        "test": ends(val_end, steps),
    }


def gather_windows(bundle: DatasetBundle, pairs: list[tuple[int, int]], window: int, horizon: int):
    """Slice feature windows and targets for (series, end) pairs.

    Returns (unique_series, series_pos, ad, cons, targets, labels) where
    ad is (B, window, ad_dim), targets (B, horizon), labels (B, window).
    """
    data = bundle.data
    uniq = sorted({s for s, _ in pairs})
    pos_of = {s: i for i, s in enumerate(uniq)}
    B = len(pairs)
    ad = np.empty((B, window, data.ad.shape[2]))
    cons = np.empty((B, window, data.consumer.shape[2]))
    targets = np.empty((B, horizon))
    labels = np.empty((B, window))
    series_pos = np.empty(B, dtype=np.intp)
    for i, (s, t) in enumerate(pairs):
        lo = t - window + 1
        ad[i] = data.ad[s, lo : t + 1]
        cons[i] = data.consumer[s, lo : t + 1]
        targets[i] = data.y[s, t + 1 : t + 1 + horizon]
        labels[i] = data.anomaly[s, lo : t + 1]
        series_pos[i] = pos_of[s]
    return np.array(uniq, dtype=np.intp), series_pos, ad, cons, targets, labels


def _forward_batch(model, bundle: DatasetBundle, pairs, window: int, horizon: int):
    uniq, series_pos, ad, cons, targets, labels = gather_windows(bundle, pairs, window, horizon)
    if isinstance(model, HybridModel):
        feats = bundle.node_features_batch(uniq)
        forecast, anom, _ = model.forward(bundle.graph, feats, series_pos, ad, cons)
    else:
        forecast, anom = model.forward(np.concatenate([ad, cons], axis=-1))
    return forecast, anom, targets, labels


# -- training -----------------------------------------------------------------


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    checkpoint: ModelCheckpoint
    curve: list[EpochStats]
    best_epoch: int
    best_val_loss: float
    epochs_run: int
    optimizer_steps: int
    wall_seconds: float

    def curve_rows(self) -> list[tuple[int, float, float]]:
        return [(e.epoch, e.train_loss, e.val_loss) for e in self.curve]


def _epoch_batches(
    series_order: np.ndarray,
    ends_by_series: list[np.ndarray],
    windows_per_series: int,
    batch_size: int,
    rng: np.random.Generator,
) -> list[list[tuple[int, int]]]:
    """Group windows from a few series per batch so each graph is encoded once."""
    per = max(1, windows_per_series)
    chunk = max(1, batch_size // per)
    batches = []
    for i in range(0, len(series_order), chunk):
        pairs: list[tuple[int, int]] = []
        for s in series_order[i : i + chunk]:
            ends = ends_by_series[s]
            if len(ends) > per:
                ends = rng.choice(ends, size=per, replace=False)
            pairs.extend((int(s), int(t)) for t in ends)
        if pairs:
            batches.append(pairs)
    return batches


def _spread(vals: list[int], count: int) -> list[int]:
    if len(vals) <= count:
        return list(vals)
    idx = np.linspace(0, len(vals) - 1, count).round().astype(int)
    return [vals[i] for i in sorted(set(idx.tolist()))]


def _eval_loss(model, bundle, pairs, window, horizon, loss_cfg, batch_size) -> float:
    total, weight = 0.0, 0
    for i in range(0, len(pairs), batch_size):
        chunk = pairs[i : i + batch_size]
        forecast, anom, targets, labels = _forward_batch(model, bundle, chunk, window, horizon)
        loss = composite_loss(forecast, targets, anom, labels, loss_cfg)
        total += loss.item() * len(chunk)
        weight += len(chunk)
    return total / max(weight, 1)


def train(
    model_kind: str,
    bundle: DatasetBundle,
    model_cfg: ModelConfig | None = None,
    train_cfg: TrainConfig | None = None,
    loss_cfg: LossConfig | None = None,
) -> TrainResult:
    """Mini-batch training with early stopping on validation loss.

    Returns the best-validation checkpoint and the per-epoch loss curve
    (epoch 0 is the pre-training loss on the first epoch's batches).
    """
    train_cfg = train_cfg or TrainConfig()
    loss_cfg = loss_cfg or LossConfig()
    data = bundle.data
    if model_cfg is None:
        model_cfg = ModelConfig(kind=model_kind)
    elif model_cfg.kind != model_kind:
        raise ConfigError(f"model_cfg.kind '{model_cfg.kind}' != requested '{model_kind}'")
    if model_cfg.ad_dim != data.ad.shape[2] or model_cfg.consumer_dim != data.consumer.shape[2]:
        raise ConfigError("model feature dims do not match the dataset")

    window, horizon = model_cfg.window, model_cfg.horizon
    if data.steps < window + horizon:
        raise ConfigError(f"series too short ({data.steps}) for window+horizon {window + horizon}")
    ends = split_window_ends(data.steps, window, horizon, train_cfg.val_fraction)
    if not ends["train"] or not ends["val"]:
        raise ConfigError("not enough steps for non-empty train and validation splits")

    started = time.perf_counter()
    model = build_model(model_cfg, rng_for(train_cfg.seed, _PURPOSE_INIT))
    params = model.params()
    optimizer = make_optimizer(train_cfg.optimizer, params, train_cfg.lr, train_cfg.weight_decay)
    sampler = rng_for(train_cfg.seed, _PURPOSE_SAMPLER)

    n_series = data.n_series
    train_ends = [np.array(ends["train"], dtype=np.intp)] * n_series
    val_series = _spread(list(range(n_series)), train_cfg.eval_series_cap)
    val_pairs = [
        (s, t)
        for s in val_series
        for t in _spread(ends["val"], train_cfg.eval_windows_per_series)
    ]

    curve: list[EpochStats] = []
    best_val = np.inf
    best_epoch = 0
    best_tensors: dict[str, np.ndarray] = {k: p.data.copy() for k, p in params.items()}
    stale = 0
    epochs_run = 0

    for epoch in range(train_cfg.epochs + 1):
        order = sampler.permutation(n_series)
        batches = _epoch_batches(order, train_ends, train_cfg.windows_per_series, train_cfg.batch_size, sampler)
        total, count = 0.0, 0
        for pairs in batches:
            try:
                forecast, anom, targets, labels = _forward_batch(model, bundle, pairs, window, horizon)
                loss = composite_loss(forecast, targets, anom, labels, loss_cfg)
            except NumericError as exc:
                raise TrainingDiverged(
                    f"non-finite values at epoch {epoch} after "
                    f"{optimizer.state.step_count} optimizer steps (lr={train_cfg.lr}): {exc}"
                )
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, after {optimizer.state.step_count} steps"
                )
            total += value * len(pairs)
            count += len(pairs)
            if epoch > 0:
                grads = backward(loss, params.values())
                optimizer.step({k: grad_of(grads, p) for k, p in params.items()})
        train_loss = total / max(count, 1)
        val_loss = _eval_loss(model, bundle, val_pairs, window, horizon, loss_cfg, train_cfg.batch_size)
        curve.append(EpochStats(epoch=epoch, train_loss=train_loss, val_loss=val_loss))
        if epoch == 0:
            best_val = val_loss
            continue
        epochs_run = epoch
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_epoch = epoch
            best_tensors = {k: p.data.copy() for k, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= train_cfg.patience:
                break

    for k, p in params.items():
        p.data[...] = best_tensors[k]

    wall = time.perf_counter() - started
    feature_ranges = {
        name: [float(data.ad[:, :, i].min()), float(data.ad[:, :, i].max())]
        for i, name in enumerate(AD_FEATURES)
    }
    feature_ranges.update(
        {
            name: [float(data.consumer[:, :, i].min()), float(data.consumer[:, :, i].max())]
            for i, name in enumerate(CONSUMER_FEATURES)
        }
    )
    checkpoint = checkpoint_from_model(
        model,
        config_extra={
            "train": train_cfg.to_dict(),
            "loss": loss_cfg.to_dict(),
            "data": {
                "fingerprint": bundle.manifest.get("fingerprint"),
                "ad_features": AD_FEATURES,
                "consumer_features": CONSUMER_FEATURES,
                "feature_ranges": feature_ranges,
                "treatment": bundle.truth.treatment if bundle.truth else "spend",
                "treatment_levels": [bundle.truth.a0, bundle.truth.a1] if bundle.truth else [0.0, 1.0],
            },
        },
        metadata={
            "seed": train_cfg.seed,
            "epochs_run": epochs_run,
            "best_epoch": best_epoch,
            "best_val_loss": best_val,
        },
    )
    return TrainResult(
        checkpoint=checkpoint,
        curve=curve,
        best_epoch=best_epoch,
        best_val_loss=best_val,
        epochs_run=epochs_run,
        optimizer_steps=optimizer.state.step_count,
        wall_seconds=wall,
    )


# -- metrics -------------------------------------------------------------------


def rmse(errors: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(errors))))


def mae(errors: np.ndarray) -> float:
    return float(np.mean(np.abs(errors)))


def r2_score(targets: np.ndarray, predictions: np.ndarray) -> float | None:
    sse = float(np.sum(np.square(targets - predictions)))
    sst = float(np.sum(np.square(targets - targets.mean())))
    if sst < 1e-12:
        return None
    return 1.0 - sse / sst


def f1_score(predicted: np.ndarray, actual: np.ndarray) -> float:
    tp = int(np.sum((predicted == 1) & (actual == 1)))
    fp = int(np.sum((predicted == 1) & (actual == 0)))
    fn = int(np.sum((predicted == 0) & (actual == 1)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


@dataclass
class EvalReport:
    model_kind: str
    rmse: float
    mae: float
    f1: float
    r2: float | None
    ate_error: float | None
    ccs: float | None
    dataset_fingerprint: str
    wall_clock_seconds: float
    loss_curve: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in known})


def _anomaly_f1(probs: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    return f1_score((probs > threshold).astype(int), labels.astype(int))


_CCS_SERIES_CAP = 48


def _causal_metrics(model, bundle: DatasetBundle, test_ends: list[int]) -> tuple[float | None, float | None, list[str]]:
    truth = bundle.truth
    notes: list[str] = []
    if truth is None:
        return None, None, ["no ground truth: ATE error and CCS skipped"]
    spec = InterventionSpec(
        treatment=truth.treatment, a0=truth.a0, a1=truth.a1, covariates=[truth.confounder]
    )
    samples = binarize_treatment(bundle.data, spec)
    estimate = estimate_ace(samples, fit_propensity(samples))
    ate_error = abs(estimate.ace - truth.planted_ate)

    ccs = None
    if test_ends:
        end = test_ends[-1]
        horizon = model.cfg.horizon
        series = sorted(set(np.linspace(0, bundle.data.n_series - 1, _CCS_SERIES_CAP).astype(int).tolist()))
        preds, trues = [], []
        for s in series:
            pair = counterfactual_predict(model, bundle, s, end, spec)
            preds.append(pair.low.values)
            trues.append(truth.cf_low[s, end + 1 : end + 1 + horizon])
            preds.append(pair.high.values)
            trues.append(truth.cf_high[s, end + 1 : end + 1 + horizon])
        ccs = ccs_score(np.concatenate(preds), np.concatenate(trues))
    else:
        notes.append("no test windows: CCS skipped")
    return ate_error, ccs, notes


def evaluate(
    model,
    bundle: DatasetBundle,
    loss_curve: list[EpochStats] | None = None,
    val_fraction: float = 0.15,
    batch_size: int = 256,
) -> EvalReport:
    """Six-metric report on the held-out test region of the series."""
    started = time.perf_counter()
    data = bundle.data
    window, horizon = model.cfg.window, model.cfg.horizon
    ends = split_window_ends(data.steps, window, horizon, val_fraction)
    test_ends = ends["test"]
    if not test_ends:
        raise ConfigError("no test windows: series too short for the configured split")
    pairs = [(s, t) for s in range(data.n_series) for t in test_ends]

    all_fore, all_targets, all_probs, all_labels = [], [], [], []
    for i in range(0, len(pairs), batch_size):
        chunk = pairs[i : i + batch_size]
        forecast, anom, targets, labels = _forward_batch(model, bundle, chunk, window, horizon)
        all_fore.append(forecast.data)
        all_targets.append(targets)
        all_probs.append(anom.data)
        all_labels.append(labels)
    forecasts = np.concatenate(all_fore)
    targets = np.concatenate(all_targets)
    probs = np.concatenate(all_probs)
    labels = np.concatenate(all_labels)

    errors = forecasts - targets
    r2 = r2_score(targets, forecasts)
    notes = [] if r2 is not None else ["constant targets: R^2 undefined"]
    ate_error, ccs, causal_notes = _causal_metrics(model, bundle, test_ends)
    notes.extend(causal_notes)

    return EvalReport(
        model_kind=model.cfg.kind,
        rmse=rmse(errors),
        mae=mae(errors),
        f1=_anomaly_f1(probs, labels),
        r2=r2,
        ate_error=ate_error,
        ccs=ccs,
        dataset_fingerprint=str(bundle.manifest.get("fingerprint", "")),
        wall_clock_seconds=time.perf_counter() - started,
        loss_curve=[asdict(e) for e in loss_curve] if loss_curve else [],
        notes=notes,
    )


def evaluate_checkpoint(checkpoint: ModelCheckpoint, bundle: DatasetBundle, **kw) -> EvalReport:
    return evaluate(model_from_checkpoint(checkpoint), bundle, **kw)


# -- baselines -----------------------------------------------------------------


class PersistenceModel:
    """Forecasts the last observed target for every horizon step."""

    kind = "persistence"

    def __init__(self, window: int = 16, horizon: int = 4):
        self.cfg = ModelConfig(kind="gru", window=window, horizon=horizon)


def _evaluate_persistence(bundle: DatasetBundle, window: int, horizon: int, val_fraction: float) -> EvalReport:
    started = time.perf_counter()
    data = bundle.data
    ends = split_window_ends(data.steps, window, horizon, val_fraction)
    test_ends = ends["test"]
    if not test_ends:
        raise ConfigError("no test windows for the persistence baseline")
    forecasts, targets = [], []
    for s in range(data.n_series):
        for t in test_ends:
            forecasts.append(np.repeat(data.y[s, t], horizon))
            targets.append(data.y[s, t + 1 : t + 1 + horizon])
    forecasts = np.stack(forecasts)
    targets = np.stack(targets)
    errors = forecasts - targets
    labels = np.stack([data.anomaly[s, t - window + 1 : t + 1] for s in range(data.n_series) for t in test_ends])
    r2 = r2_score(targets, forecasts)
    return EvalReport(
        model_kind="persistence",
        rmse=rmse(errors),
        mae=mae(errors),
        f1=_anomaly_f1(np.zeros_like(labels, dtype=float), labels),
        r2=r2,
        ate_error=None,
        ccs=None,
        dataset_fingerprint=str(bundle.manifest.get("fingerprint", "")),
        wall_clock_seconds=time.perf_counter() - started,
        notes=["persistence baseline: no anomaly model, no causal rollouts"],
    )


def run_baseline(
    kind: str,
    bundle: DatasetBundle,
    model_cfg: ModelConfig | None = None,
    train_cfg: TrainConfig | None = None,
    loss_cfg: LossConfig | None = None,
) -> EvalReport:
    """Evaluate a reference forecaster: 'persistence' or trained 'gru'."""
    if kind == "persistence":
        cfg = model_cfg or ModelConfig(kind="gru")
        vf = (train_cfg or TrainConfig()).val_fraction
        return _evaluate_persistence(bundle, cfg.window, cfg.horizon, vf)
    if kind == "gru":
        cfg = model_cfg or ModelConfig(kind="gru")
        result = train("gru", bundle, cfg, train_cfg, loss_cfg)
        report = evaluate_checkpoint(result.checkpoint, bundle, loss_curve=result.curve)
        return report
    raise ConfigError(f"unknown baseline kind '{kind}'")


# -- comparison ----------------------------------------------------------------


def compare(reports: list[EvalReport]) -> list[dict]:
    """Rank reports by RMSE ascending, ties by MAE; input order breaks ties."""
    if len(reports) < 2:
        raise ContractError("compare needs at least two reports")
    prints = {r.dataset_fingerprint for r in reports}
    if len(prints) > 1:
        raise ComparabilityError(f"reports span different datasets: {sorted(prints)}")
    indexed = list(enumerate(reports))
    indexed.sort(key=lambda pair: (pair[1].rmse, pair[1].mae, pair[0]))
    return [
        {
            "rank": rank + 1,
            "model": r.model_kind,
            "rmse": r.rmse,
            "mae": r.mae,
            "f1": r.f1,
            "r2": r.r2,
            "ate_error": r.ate_error,
            "ccs": r.ccs,
        }
        for rank, (_, r) in enumerate(indexed)
    ]


def render_comparison(rows: list[dict]) -> str:
    def fmt(v):
        if v is None:
            return "-"
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    headers = ["rank", "model", "rmse", "mae", "f1", "r2", "ate_error", "ccs"]
    table = [headers] + [[fmt(row[h]) for h in headers] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def loss_curve_csv(curve: list[EpochStats]) -> str:
    lines = ["epoch,train_loss,val_loss"]
    lines += [f"{e.epoch},{e.train_loss!r},{e.val_loss!r}" for e in curve]
    return "\n".join(lines) + "\n"

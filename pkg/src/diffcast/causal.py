"""Causal effect estimation for marketing interventions.

Observational records are dichotomized into treatment arms by nearest
level, a logistic propensity model is fit by gradient descent, and the
average causal effect comes from self-normalized (Hajek) inverse
propensity weighting. Model-side what-ifs rerun the forecaster with the
treatment column forced to each level.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateArmError, SchemaError, UnsupportedDatasetError
from .forecaster import ForecastResult
from .numerics import Adam, Tensor, backward, clip, grad_of, log, mean, sigmoid
from .synth import AD_FEATURES, CONSUMER_FEATURES, SOCIAL_FEATURES, DatasetBundle, TimeSeriesDataset

PROPENSITY_BOUNDS = (0.05, 0.95)

_ALL_COLUMNS = [*SOCIAL_FEATURES, *AD_FEATURES, *CONSUMER_FEATURES]


@dataclass
class InterventionSpec:
    """Treatment column, its two levels, and the adjustment covariates."""

    treatment: str
    a0: float
    a1: float
    covariates: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.a0 == self.a1:
            raise ContractError("intervention levels a0 and a1 must differ")
        if self.treatment not in AD_FEATURES:
            raise SchemaError(
                f"treatment '{self.treatment}' is not an ad feature; choose from {AD_FEATURES}"
            )
        for c in self.covariates:
            if c not in _ALL_COLUMNS:
                raise SchemaError(f"unknown covariate column '{c}'")

    def to_dict(self) -> dict:
        return {"treatment": self.treatment, "a0": self.a0, "a1": self.a1, "covariates": self.covariates}

    @classmethod
    def from_dict(cls, d: dict) -> "InterventionSpec":
        return cls(
            treatment=d["treatment"],
            a0=float(d["a0"]),
            a1=float(d["a1"]),
            covariates=list(d.get("covariates", [])),
        )


@dataclass
class LabeledSamples:
    """Per-record arm labels with outcomes and covariates."""

    treated: np.ndarray  # (N,) bool
    outcome: np.ndarray  # (N,)
    covariates: np.ndarray  # (N, p)
    levels: np.ndarray  # (N,) observed continuous treatment values

    @property
    def n(self) -> int:
        return self.outcome.shape[0]


@dataclass
class PropensityModel:
    """Logistic model over standardized covariates, with clipped outputs."""

    coef: np.ndarray  # (p,)
    intercept: float
    mean: np.ndarray  # (p,) standardization offsets
    scale: np.ndarray  # (p,)
    bounds: tuple[float, float] = PROPENSITY_BOUNDS

    def predict(self, covariates: np.ndarray) -> np.ndarray:
        x = (covariates - self.mean) / self.scale
        logits = x @ self.coef + self.intercept
        raw = 1.0 / (1.0 + np.exp(-logits))
        return np.clip(raw, *self.bounds)

    def predict_raw(self, covariates: np.ndarray) -> np.ndarray:
        x = (covariates - self.mean) / self.scale
        return 1.0 / (1.0 + np.exp(-(x @ self.coef + self.intercept)))


@dataclass
class CausalEstimate:
    ace: float
    treated_mean: float
    control_mean: float
    n_treated: int
    n_control: int
    propensity_min: float
    propensity_max: float
    propensity_mean: float

    def to_dict(self) -> dict:
        return {
            "ace": self.ace,
            "treated_mean": self.treated_mean,
            "control_mean": self.control_mean,
            "n_treated": self.n_treated,
            "n_control": self.n_control,
            "propensity": {
                "min": self.propensity_min,
                "max": self.propensity_max,
                "mean": self.propensity_mean,
            },
        }


def binarize_treatment(data: TimeSeriesDataset, spec: InterventionSpec) -> LabeledSamples:
    """Label each record by the nearer treatment level; ties go to control."""
    levels = data.column(spec.treatment).reshape(-1)
    treated = np.abs(levels - spec.a1) < np.abs(levels - spec.a0)
    outcome = data.y.reshape(-1)
    if spec.covariates:
        cols = [data.column(c).reshape(-1) for c in spec.covariates]
        covariates = np.column_stack(cols)
    else:
        covariates = np.zeros((outcome.shape[0], 0))
    if treated.all() or not treated.any():
        raise DegenerateArmError("all samples fall into one treatment arm")
    return LabeledSamples(treated=treated, outcome=outcome, covariates=covariates, levels=levels)


def fit_propensity(
    samples: LabeledSamples,
    iterations: int = 300,
    lr: float = 0.1,
) -> PropensityModel:
    """Logistic regression by full-batch Adam on the numerics module."""
    if not samples.treated.any() or samples.treated.all():
        raise DegenerateArmError("both arms must be non-empty to fit a propensity model")
    x = samples.covariates
    p = x.shape[1]
    mu = x.mean(axis=0) if p else np.zeros(0)
    sd = x.std(axis=0) if p else np.zeros(0)
    sd = np.where(sd < 1e-9, 1.0, sd)
    xs = (x - mu) / sd if p else x
    labels = samples.treated.astype(np.float64).reshape(-1, 1)

    design = Tensor(np.column_stack([xs, np.ones(samples.n)]))
    weights = Tensor(np.zeros((p + 1, 1)), requires_grad=True)
    optimizer = Adam({"w": weights}, lr=lr)
    y = Tensor(labels)
    for _ in range(iterations):
        probs = clip(sigmoid(design @ weights), 1e-12, 1.0 - 1e-12)
        loss = -mean(y * log(probs) + (1.0 - y) * log(1.0 - probs))
        grads = backward(loss, [weights])
        optimizer.step({"w": grad_of(grads, weights)})

    model = PropensityModel(
        coef=weights.data[:p, 0].copy(),
        intercept=float(weights.data[p, 0]),
        mean=mu,
        scale=sd,
    )
    raw = model.predict_raw(x)
    clipped_frac = np.mean((raw < model.bounds[0]) | (raw > model.bounds[1]))
    if clipped_frac >= 0.5:
        warnings.warn(
            f"propensity model saturated: {clipped_frac:.0%} of fitted propensities "
            "fall outside the clipping bounds (possible perfect separation)",
            RuntimeWarning,
            stacklevel=2,
        )
    return model


def estimate_ace(samples: LabeledSamples, model: PropensityModel) -> CausalEstimate:
    """Hajek (self-normalized) IPW contrast of the two arms."""
    treated = samples.treated
    if not treated.any() or treated.all():
        raise DegenerateArmError("cannot estimate an effect with an empty arm")
    e = model.predict(samples.covariates)
    y = samples.outcome
    w_t = 1.0 / e[treated]
    w_c = 1.0 / (1.0 - e[~treated])
    treated_mean = float(np.sum(w_t * y[treated]) / np.sum(w_t))
    control_mean = float(np.sum(w_c * y[~treated]) / np.sum(w_c))
    return CausalEstimate(
        ace=treated_mean - control_mean,
        treated_mean=treated_mean,
        control_mean=control_mean,
        n_treated=int(treated.sum()),
        n_control=int((~treated).sum()),
        propensity_min=float(e.min()),
        propensity_max=float(e.max()),
        propensity_mean=float(e.mean()),
    )


def naive_difference(samples: LabeledSamples) -> float:
    """Unweighted arm-mean difference, for diagnostics against the IPW estimate."""
    return float(samples.outcome[samples.treated].mean() - samples.outcome[~samples.treated].mean())


@dataclass
class CounterfactualPair:
    """Forecasts under the two forced treatment levels and their gap."""

    low: ForecastResult  # treatment forced to a0
    high: ForecastResult  # treatment forced to a1
    delta: np.ndarray  # high - low, per horizon step

    @property
    def rollout_effect(self) -> float:
        return float(self.delta.mean())


def counterfactual_predict(
    model,
    bundle: DatasetBundle,
    series: int,
    end: int,
    spec: InterventionSpec,
) -> CounterfactualPair:
    """Run the forecaster twice with the treatment column forced to each level.

    The window covers steps (end - window + 1 .. end) of the given series.
    """
    data = bundle.data
    cfg = model.cfg
    start = end - cfg.window + 1
    if start < 0 or end >= data.steps:
        raise ContractError(f"window end {end} out of range for {data.steps} steps")
    col = AD_FEATURES.index(spec.treatment)
    ad = data.ad[series, start : end + 1].copy()
    cons = data.consumer[series, start : end + 1]

    results = []
    for level in (spec.a0, spec.a1):
        forced = ad.copy()
        forced[:, col] = level
        if model.kind == "hybrid":
            result = model.forecast_one(bundle.graph, bundle.node_features(series), forced, cons, end=end)
        else:
            result = model.forecast_one(forced, cons, end=end)
        results.append(result)
    low, high = results
    return CounterfactualPair(low=low, high=high, delta=high.values - low.values)


def ccs_score(predicted: np.ndarray, true: np.ndarray) -> float:
    """Counterfactual consistency: mean over units of
    max(0, 1 - |pred - true| / max(|true|, 0.1)), always in [0, 1].
    """
    pred = np.asarray(predicted, dtype=np.float64).reshape(-1)
    actual = np.asarray(true, dtype=np.float64).reshape(-1)
    if pred.size == 0 or pred.shape != actual.shape:
        raise UnsupportedDatasetError(
            "counterfactual scoring needs aligned, non-empty prediction/truth pairs"
        )
    denom = np.maximum(np.abs(actual), 0.1)
    return float(np.mean(np.maximum(0.0, 1.0 - np.abs(pred - actual) / denom)))

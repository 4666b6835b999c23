import numpy as np
import pytest

from diffcast.causal import (
    InterventionSpec,
    LabeledSamples,
    binarize_treatment,
    ccs_score,
    counterfactual_predict,
    estimate_ace,
    fit_propensity,
    naive_difference,
)
from diffcast.checkpoint import model_from_checkpoint
from diffcast.errors import ContractError, DegenerateArmError, SchemaError, UnsupportedDatasetError
from diffcast.synth import AD_FEATURES, GeneratorConfig, TimeSeriesDataset, generate_dataset

from conftest import TINY_MODEL


def toy_dataset(spend, y, sentiment=None):
    """Single-series dataset with the named columns filled, rest zero."""
    spend = np.asarray(spend, dtype=float)
    steps = spend.shape[0]
    social = np.zeros((1, steps, 4))
    if sentiment is not None:
        social[0, :, 2] = sentiment
    ad = np.zeros((1, steps, 5))
    ad[0, :, 0] = spend
    return TimeSeriesDataset(
        social=social,
        ad=ad,
        consumer=np.zeros((1, steps, 3)),
        y=np.asarray(y, dtype=float).reshape(1, steps),
        anomaly=np.zeros((1, steps), dtype=np.int64),
    )


def spec_for(covariates=("sentiment",)):
    return InterventionSpec(treatment="spend", a0=0.0, a1=1.0, covariates=list(covariates))


def test_spec_rejects_equal_levels():
    with pytest.raises(ContractError):
        InterventionSpec(treatment="spend", a0=1.0, a1=1.0)


def test_spec_rejects_unknown_columns():
    with pytest.raises(SchemaError):
        InterventionSpec(treatment="not_a_column", a0=0.0, a1=1.0)
    with pytest.raises(SchemaError):
        InterventionSpec(treatment="spend", a0=0.0, a1=1.0, covariates=["nope"])


def test_binarize_binary_column_is_identity():
    labels = np.array([0, 1, 1, 0, 1], dtype=float)
    data = toy_dataset(labels, np.zeros(5))
    samples = binarize_treatment(data, spec_for(()))
    np.testing.assert_array_equal(samples.treated, labels.astype(bool))


def test_binarize_tie_goes_to_control():
    data = toy_dataset([0.5, 1.0], np.zeros(2))
    samples = binarize_treatment(data, spec_for(()))
    assert samples.treated.tolist() == [False, True]


def test_binarize_continuous_hand_count():
    spend = [0.1, 0.9, 0.45, 0.55, 0.2, 0.8, 0.5, 0.49, 0.51, 1.2]
    # nearer to 1.0: 0.9, 0.55, 0.8, 0.51, 1.2 -> 5 treated (0.5 ties to control)
    samples = binarize_treatment(toy_dataset(spend, np.zeros(10)), spec_for(()))
    assert int(samples.treated.sum()) == 5
    assert int((~samples.treated).sum()) == 5


def test_binarize_degenerate_arm():
    with pytest.raises(DegenerateArmError):
        binarize_treatment(toy_dataset(np.ones(4), np.zeros(4)), spec_for(()))


def _samples(treated, outcome, covariates=None):
    treated = np.asarray(treated, dtype=bool)
    outcome = np.asarray(outcome, dtype=float)
    if covariates is None:
        covariates = np.zeros((outcome.size, 0))
    return LabeledSamples(
        treated=treated,
        outcome=outcome,
        covariates=np.asarray(covariates, dtype=float),
        levels=treated.astype(float),
    )


def test_propensity_balanced_independent_treatment():
    rng = np.random.default_rng(0)
    treated = rng.random(1000) < 0.5
    x = rng.normal(size=(1000, 2))
    model = fit_propensity(_samples(treated, np.zeros(1000), x))
    fitted = model.predict(x)
    assert abs(fitted.mean() - 0.5) < 0.05
    assert fitted.max() - fitted.min() < 0.2


def test_propensity_intercept_only_matches_empirical_fraction():
    treated = np.array([True] * 30 + [False] * 70)
    model = fit_propensity(_samples(treated, np.zeros(100)), iterations=3000, lr=0.05)
    fitted = model.predict(np.zeros((100, 0)))
    np.testing.assert_allclose(fitted, 0.3, atol=0.01)


def test_propensity_recovers_planted_confounding():
    rng = np.random.default_rng(1)
    sentiment = rng.normal(size=4000)
    prob = 1.0 / (1.0 + np.exp(-1.5 * sentiment))
    treated = rng.random(4000) < prob
    model = fit_propensity(_samples(treated, np.zeros(4000), sentiment.reshape(-1, 1)))
    fitted = model.predict(sentiment.reshape(-1, 1))
    assert np.corrcoef(fitted, sentiment)[0, 1] > 0.9


def test_propensity_outputs_stay_clipped():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(500, 1)) * 5.0
    treated = x[:, 0] > 0
    with pytest.warns(RuntimeWarning, match="saturated"):
        model = fit_propensity(_samples(treated, np.zeros(500), x), iterations=2000, lr=0.3)
    fitted = model.predict(x)
    assert fitted.min() >= 0.05 and fitted.max() <= 0.95


def test_ace_constant_half_propensity_is_mean_difference():
    samples = _samples([True, True, False, False], [2.0, 4.0, 1.0, 1.0])
    model = fit_propensity(samples, iterations=200)
    model.coef[...] = 0.0
    model.intercept = 0.0  # propensity exactly 0.5 everywhere
    estimate = estimate_ace(samples, model)
    assert estimate.ace == pytest.approx(2.0, abs=1e-12)
    assert estimate.ace == pytest.approx(naive_difference(samples), abs=1e-12)


def test_ace_identical_outcomes_is_zero():
    samples = _samples([True, False, True, False], np.full(4, 3.3))
    model = fit_propensity(samples, iterations=100)
    assert estimate_ace(samples, model).ace == pytest.approx(0.0, abs=1e-12)


def test_ace_shift_and_scale_equivariance():
    rng = np.random.default_rng(3)
    treated = rng.random(300) < 0.5
    x = rng.normal(size=(300, 1))
    y = rng.normal(size=300) + treated * 1.0
    base_samples = _samples(treated, y, x)
    model = fit_propensity(base_samples)
    base = estimate_ace(base_samples, model).ace
    shifted = estimate_ace(_samples(treated, y + 11.0, x), model).ace
    scaled = estimate_ace(_samples(treated, y * -2.5, x), model).ace
    assert shifted == pytest.approx(base, abs=1e-9)
    assert scaled == pytest.approx(-2.5 * base, abs=1e-9)


def test_ace_empty_arm_rejected():
    samples = _samples([True, True], [1.0, 2.0])
    model_source = _samples([True, False], [1.0, 2.0])
    model = fit_propensity(model_source, iterations=50)
    with pytest.raises(DegenerateArmError):
        estimate_ace(samples, model)


@pytest.fixture(scope="module")
def confounded_bundle():
    return generate_dataset(GeneratorConfig(seed=11, node_count=50, series_count=120, steps=120))


def test_ipw_recovers_planted_effect_where_naive_fails(confounded_bundle):
    spec = spec_for()
    samples = binarize_treatment(confounded_bundle.data, spec)
    estimate = estimate_ace(samples, fit_propensity(samples))
    ipw_error = abs(estimate.ace - 1.5)
    naive_error = abs(naive_difference(samples) - 1.5)
    assert ipw_error <= 0.15
    assert naive_error > 0.3
    assert naive_error > 2.0 * ipw_error
    assert 0.05 <= estimate.propensity_min and estimate.propensity_max <= 0.95


def test_counterfactual_zero_weight_feature_gives_identical_paths(small_bundle, tiny_train_result):
    model = model_from_checkpoint(tiny_train_result.checkpoint)
    col = AD_FEATURES.index("cpc")
    offset = TINY_MODEL.graph_dim + col  # fused layout: [graph || ad || consumer]
    model.tf.w_in.data[offset, :] = 0.0
    spec = InterventionSpec(treatment="cpc", a0=0.0, a1=1.0)
    pair = counterfactual_predict(model, small_bundle, series=0, end=small_bundle.data.steps - 1, spec=spec)
    np.testing.assert_array_equal(pair.delta, np.zeros_like(pair.delta))


def test_counterfactual_effect_sign_matches_planted(small_bundle, tiny_train_result):
    model = model_from_checkpoint(tiny_train_result.checkpoint)
    spec = spec_for()
    deltas = []
    for series in range(0, 12, 3):
        pair = counterfactual_predict(model, small_bundle, series, small_bundle.data.steps - 1, spec)
        deltas.append(pair.rollout_effect)
    assert np.mean(deltas) > 0  # planted effect is +1.5


def test_counterfactual_window_bounds(small_bundle, tiny_train_result):
    model = model_from_checkpoint(tiny_train_result.checkpoint)
    with pytest.raises(ContractError):
        counterfactual_predict(model, small_bundle, 0, end=2, spec=spec_for())


def test_ccs_perfect_prediction():
    assert ccs_score([1.0, -2.0, 0.0], [1.0, -2.0, 0.0]) == 1.0


def test_ccs_saturated_errors_hit_zero():
    assert ccs_score([2.0, 0.2], [1.0, 0.0]) == 0.0


def test_ccs_single_unit_example():
    assert ccs_score([1.1], [1.0]) == pytest.approx(0.9)


def test_ccs_stays_in_unit_interval():
    rng = np.random.default_rng(4)
    for _ in range(50):
        pred = rng.normal(size=20) * rng.uniform(0.1, 10)
        true = rng.normal(size=20)
        value = ccs_score(pred, true)
        assert 0.0 <= value <= 1.0


def test_ccs_requires_aligned_pairs():
    with pytest.raises(UnsupportedDatasetError):
        ccs_score([], [])
    with pytest.raises(UnsupportedDatasetError):
        ccs_score([1.0], [1.0, 2.0])

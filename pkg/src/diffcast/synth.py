"""Synthetic multi-source market data with exported causal ground truth.

Per dataset: one influence graph; per series: an independent-cascade run
from a series-specific seed set, AR(1) demand and sentiment streams, a
sentiment-confounded binary ad-spend treatment, and an outcome combining
cascade reach, demand, sentiment, and the planted treatment effect.
Counterfactual outcome trajectories are recomputed with the treatment
forced to each level while holding every noise draw fixed.

Reproducibility: every random stream is derived from the config seed via
``np.random.SeedSequence(seed, spawn_key=(purpose, index))`` so per-series
generation can run serially or in parallel with identical output.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .graph_encoder import DiffusionGraph, Edge, Node

SOCIAL_FEATURES = ["engagement_rate", "share_count", "sentiment", "volatility"]
AD_FEATURES = ["spend", "impressions", "ctr", "cpc", "conversion_rate"]
CONSUMER_FEATURES = ["purchase_freq", "dwell_time", "conversion_prob"]

NODE_KIND_SPLIT = (("user", 0.7), ("brand", 0.1), ("content", 0.2))
EDGE_KIND_SPLIT = (("follow", 0.6), ("share", 0.25), ("mention", 0.15))

STATIC_NODE_ATTRS = 7  # activity, engagement, sentiment, kind one-hot (3), out-degree
NODE_FEATURE_DIM = STATIC_NODE_ATTRS + 1  # plus the per-series seed flag

SCHEMA_VERSION = 1

_PURPOSE_GRAPH = 0
_PURPOSE_SERIES = 1
_PURPOSE_OUTCOME = 2


def rng_for(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Deterministic child generator for (seed, purpose, index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose, index)))


@dataclass
class GeneratorConfig:
    seed: int = 42
    node_count: int = 200
    graph_kind: str = "erdos_renyi"  # erdos_renyi | preferential
    edge_prob: float = 0.02
    pa_attach: int = 4
    series_count: int = 500
    steps: int = 200
    anomaly_rate: float = 0.05
    treatment_effect: float = 1.5  # outcome shift between treatment levels
    confounding: float = 1.0  # sentiment -> treatment and sentiment -> outcome strength
    noise_scale: float = 0.1  # latent outcome noise sigma
    ic_prob: float = 0.3  # per-edge transmission probability
    reach_replicates: int = 32  # cascade runs behind the expected-reach signal
    max_seed_nodes: int = 10
    window: int = 16
    horizon: int = 4
    a0: float = 0.0
    a1: float = 1.0
    anomaly_magnitude: float = 0.5
    reach_coef: float = 3.0  # weight of cascade reach in the outcome
    demand_scale: float = 1.0  # scales the latent demand component

    def __post_init__(self):
        for name in ("edge_prob", "anomaly_rate", "ic_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.node_count < 2:
            raise ConfigError("node_count must be >= 2")
        if self.series_count < 1:
            raise ConfigError("series_count must be >= 1")
        if self.steps < self.window + self.horizon:
            raise ConfigError(
                f"steps={self.steps} must cover window + horizon = {self.window + self.horizon}"
            )
        if self.a0 == self.a1:
            raise ConfigError("treatment levels a0 and a1 must differ")
        if self.graph_kind not in ("erdos_renyi", "preferential"):
            raise ConfigError(f"unknown graph_kind '{self.graph_kind}'")
        if self.max_seed_nodes < 1 or self.max_seed_nodes > self.node_count:
            raise ConfigError("max_seed_nodes must be in [1, node_count]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class TimeSeriesDataset:
    """Aligned per-series per-step feature blocks, target, and anomaly labels."""

    social: np.ndarray  # (S, T, 4)
    ad: np.ndarray  # (S, T, 5)
    consumer: np.ndarray  # (S, T, 3)
    y: np.ndarray  # (S, T)
    anomaly: np.ndarray  # (S, T) in {0, 1}

    def __post_init__(self):
        shape = self.y.shape
        for block, width in ((self.social, 4), (self.ad, 5), (self.consumer, 3)):
            if block.shape != (*shape, width):
                raise ConfigError(f"misaligned feature block {block.shape} for series shape {shape}")
        if self.anomaly.shape != shape:
            raise ConfigError("anomaly labels misaligned with targets")
        if not set(np.unique(self.anomaly)) <= {0, 1}:
            raise ConfigError("anomaly labels must be binary")

    @property
    def n_series(self) -> int:
        return self.y.shape[0]

    @property
    def steps(self) -> int:
        return self.y.shape[1]

    def column(self, name: str) -> np.ndarray:
        """(S, T) view of one named feature column."""
        for block, names in ((self.social, SOCIAL_FEATURES), (self.ad, AD_FEATURES), (self.consumer, CONSUMER_FEATURES)):
            if name in names:
                return block[:, :, names.index(name)]
        raise KeyError(name)


@dataclass
class GroundTruth:
    """Planted causal quantities the estimator is scored against."""

    planted_ate: float
    cf_low: np.ndarray  # (S, T) outcomes under do(A = a0)
    cf_high: np.ndarray  # (S, T) outcomes under do(A = a1)
    anomaly_steps: list[list[int]]
    a0: float
    a1: float
    treatment: str
    confounder: str
    reach: np.ndarray  # (S,) realized cascade reach fraction


@dataclass
class CascadeSet:
    """Per-series independent-cascade traces on the shared graph."""

    new_counts: np.ndarray  # (S, T) newly activated node counts, realized run
    reach: np.ndarray  # (S,) expected reach fraction (Monte Carlo over replicates)
    seeds: list[list[int]]


@dataclass
class DatasetBundle:
    graph: DiffusionGraph
    node_attrs: np.ndarray  # (n, STATIC_NODE_ATTRS)
    series_seeds: list[list[int]]
    data: TimeSeriesDataset
    truth: GroundTruth | None
    manifest: dict = field(default_factory=dict)

    def node_features(self, series: int) -> np.ndarray:
        """(n, NODE_FEATURE_DIM) static attrs plus this series' seed flags."""
        flag = np.zeros((self.graph.n, 1))
        flag[self.series_seeds[series], 0] = 1.0
        return np.concatenate([self.node_attrs, flag], axis=1)

    def node_features_batch(self, series: list[int] | np.ndarray) -> np.ndarray:
        return np.stack([self.node_features(int(s)) for s in series])


def _assign_kinds(rng: np.random.Generator, count: int, split) -> list[str]:
    kinds = [k for k, _ in split]
    probs = np.array([p for _, p in split])
    return [kinds[i] for i in rng.choice(len(kinds), size=count, p=probs / probs.sum())]


def generate_graph(config: GeneratorConfig) -> tuple[DiffusionGraph, np.ndarray]:
    """Seeded random influence graph plus static node attributes."""
    rng = rng_for(config.seed, _PURPOSE_GRAPH)
    n = config.node_count
    node_kinds = _assign_kinds(rng, n, NODE_KIND_SPLIT)
    pairs: list[tuple[int, int]] = []
    if config.graph_kind == "erdos_renyi":
        draw = rng.random((n, n))
        for i in range(n):
            for j in range(n):
                if i != j and draw[i, j] < config.edge_prob:
                    pairs.append((i, j))
    else:
        in_degree = np.ones(n)
        for node in range(1, n):
            existing = np.arange(node)
            weights = in_degree[:node] / in_degree[:node].sum()
            m = min(config.pa_attach, node)
            targets = rng.choice(existing, size=m, replace=False, p=weights)
            for t in targets:
                pairs.append((node, int(t)))
                in_degree[t] += 1
    edge_kinds = _assign_kinds(rng, len(pairs), EDGE_KIND_SPLIT)
    nodes = [Node(id=i, kind=node_kinds[i]) for i in range(n)]
    edges = [Edge(src=s, dst=d, kind=k) for (s, d), k in zip(pairs, edge_kinds)]
    graph = DiffusionGraph(nodes=nodes, edges=edges)

    out_deg = np.zeros(n)
    for s, _ in pairs:
        out_deg[s] += 1.0
    deg_norm = out_deg / max(out_deg.max(), 1.0)
    kind_onehot = np.zeros((n, 3))
    kind_index = {"user": 0, "brand": 1, "content": 2}
    for i, k in enumerate(node_kinds):
        kind_onehot[i, kind_index[k]] = 1.0
    attrs = np.column_stack(
        [
            rng.uniform(0.0, 1.0, n),  # activity
            rng.uniform(0.0, 1.0, n),  # engagement propensity
            rng.uniform(-0.5, 0.5, n),  # resting sentiment
            kind_onehot,
            deg_norm,
        ]
    )
    return graph, attrs


def run_cascade(
    graph: DiffusionGraph,
    seeds: list[int],
    prob: float,
    rng: np.random.Generator,
    max_steps: int,
) -> tuple[np.ndarray, set[int]]:
    """Time-stepped independent cascade: each new activation gets one shot
    per out-neighbor on the following step. Returns per-step new-activation
    counts (length max_steps) and the final activated set (node positions).
    """
    active = set(seeds)
    frontier = list(seeds)
    counts = np.zeros(max_steps)
    counts[0] = len(seeds)
    out_nbrs = graph.out_neighbors
    for t in range(1, max_steps):
        if not frontier:
            break
        fresh = []
        for src in frontier:
            for dst in out_nbrs[src]:
                if dst not in active and rng.random() < prob:
                    active.add(dst)
                    fresh.append(dst)
        counts[t] = len(fresh)
        frontier = fresh
    return counts, active


def simulate_cascades(graph: DiffusionGraph, config: GeneratorConfig) -> CascadeSet:
    """One realized cascade per series plus a Monte Carlo expected reach.

    The realized run drives the engagement streams; the expected reach (mean
    activated fraction over `reach_replicates` fresh runs from the same seed
    set) is the systematic network-amplification signal fed to the outcome.
    """
    n = graph.n
    new_counts = np.zeros((config.series_count, config.steps))
    reach = np.zeros(config.series_count)
    seeds: list[list[int]] = []
    for s in range(config.series_count):
        rng = rng_for(config.seed, _PURPOSE_SERIES, s)
        size = int(rng.integers(1, config.max_seed_nodes + 1))
        seed_nodes = sorted(int(v) for v in rng.choice(n, size=size, replace=False))
        counts, _ = run_cascade(graph, seed_nodes, config.ic_prob, rng, config.steps)
        new_counts[s] = counts
        sizes = [
            len(run_cascade(graph, seed_nodes, config.ic_prob, rng, min(config.steps, 64))[1])
            for _ in range(config.reach_replicates)
        ]
        reach[s] = float(np.mean(sizes)) / n
        seeds.append(seed_nodes)
    return CascadeSet(new_counts=new_counts, reach=reach, seeds=seeds)


def _ar1(rng: np.random.Generator, steps: int, rho: float, sigma: float, clip_to=None) -> np.ndarray:
    out = np.zeros(steps)
    value = rng.normal(0.0, sigma / max(np.sqrt(1.0 - rho * rho), 1e-6))
    for t in range(steps):
        value = rho * value + rng.normal(0.0, sigma)
        out[t] = value
    if clip_to is not None:
        out = np.clip(out, *clip_to)
    return out


def _rolling_std(x: np.ndarray, window: int = 10) -> np.ndarray:
    out = np.zeros_like(x)
    for t in range(len(x)):
        lo = max(0, t - window + 1)
        out[t] = x[lo : t + 1].std()
    return out


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# sentiment -> treatment and sentiment -> outcome pathway strengths (scaled by
# the confounding knob); calibrated so the naive arm-mean gap is visibly biased
# while true propensities stay inside the clipping bounds
_TREAT_LOGIT_SCALE = 2.5
_CONFOUND_OUTCOME_SCALE = 1.75


def generate_outcomes(cascades: CascadeSet, config: GeneratorConfig) -> tuple[TimeSeriesDataset, GroundTruth]:
    """Structural outcome model over the cascade streams.

    signal_t = 0.5 + reach_coef * reach + demand_t + 1.75 * confounding * sentiment_t + noise_t
    y_t      = signal_t * (1 + magnitude * anomaly_t) + effect * treated_t
    with P(treated_t) = sigmoid(2.5 * confounding * sentiment_t). Counterfactual
    trajectories replace treated_t by each fixed level, reusing all noise.
    """
    S, T = config.series_count, config.steps
    if cascades.new_counts.shape != (S, T):
        raise ConfigError(
            f"cascade streams shaped {cascades.new_counts.shape}, expected {(S, T)}"
        )
    n = config.node_count
    social = np.zeros((S, T, 4))
    ad = np.zeros((S, T, 5))
    consumer = np.zeros((S, T, 3))
    y = np.zeros((S, T))
    cf_low = np.zeros((S, T))
    cf_high = np.zeros((S, T))
    anomaly = np.zeros((S, T), dtype=np.int64)
    anomaly_steps: list[list[int]] = []
    level_gap = config.a1 - config.a0

    for s in range(S):
        rng = rng_for(config.seed, _PURPOSE_OUTCOME, s)
        new_frac = cascades.new_counts[s] / n
        ema = np.zeros(T)
        acc = 0.0
        for t in range(T):
            acc = 0.5 * acc + 0.5 * new_frac[t]
            ema[t] = acc
        engagement = 4.0 * ema + 0.05 + rng.normal(0.0, 0.01, T)
        share = new_frac + np.abs(rng.normal(0.0, 0.005, T))
        sentiment = _ar1(rng, T, rho=0.95, sigma=0.1, clip_to=(-1.0, 1.0))
        volatility = _rolling_std(engagement)
        demand = config.demand_scale * _ar1(rng, T, rho=0.9, sigma=0.05)

        treat_prob = _sigmoid(_TREAT_LOGIT_SCALE * config.confounding * sentiment)
        treated = (rng.random(T) < treat_prob).astype(float)
        spend = config.a0 + treated * level_gap + rng.normal(0.0, 0.03 * abs(level_gap), T)
        impressions = 0.3 + 0.4 * treated + rng.normal(0.0, 0.02, T)
        ctr = 0.1 + 0.05 * sentiment + rng.normal(0.0, 0.01, T)
        cpc = 0.5 - 0.1 * treated + rng.normal(0.0, 0.02, T)
        conversion_rate = 0.2 + 0.3 * demand + rng.normal(0.0, 0.02, T)

        spikes = (rng.random(T) < config.anomaly_rate).astype(np.int64)
        purchase = 0.5 + 0.8 * demand + rng.normal(0.0, 0.02, T)
        dwell = 0.5 + 0.6 * demand + 0.8 * config.anomaly_magnitude * spikes + rng.normal(0.0, 0.02, T)
        conv_prob = np.clip(0.3 + 0.5 * demand + rng.normal(0.0, 0.02, T), 0.0, 1.0)

        noise = rng.normal(0.0, config.noise_scale, T)
        signal = (
            0.5
            + config.reach_coef * cascades.reach[s]
            + demand
            + _CONFOUND_OUTCOME_SCALE * config.confounding * sentiment
            + noise
        )
        spiked = signal * (1.0 + config.anomaly_magnitude * spikes)
        y[s] = spiked + config.treatment_effect * treated
        cf_low[s] = spiked  # treated fixed at level a0
        cf_high[s] = spiked + config.treatment_effect
        anomaly[s] = spikes
        anomaly_steps.append([int(t) for t in np.flatnonzero(spikes)])

        social[s] = np.column_stack([engagement, share, sentiment, volatility])
        ad[s] = np.column_stack([spend, impressions, ctr, cpc, conversion_rate])
        consumer[s] = np.column_stack([purchase, dwell, conv_prob])

    data = TimeSeriesDataset(social=social, ad=ad, consumer=consumer, y=y, anomaly=anomaly)
    truth = GroundTruth(
        planted_ate=config.treatment_effect,
        cf_low=cf_low,
        cf_high=cf_high,
        anomaly_steps=anomaly_steps,
        a0=config.a0,
        a1=config.a1,
        treatment="spend",
        confounder="sentiment",
        reach=cascades.reach.copy(),
    )
    return data, truth


def generate_dataset(config: GeneratorConfig) -> DatasetBundle:
    """Full pipeline: graph, cascades, outcomes, manifest."""
    graph, attrs = generate_graph(config)
    cascades = simulate_cascades(graph, config)
    data, truth = generate_outcomes(cascades, config)
    manifest = build_manifest(config, graph, data)
    return DatasetBundle(
        graph=graph,
        node_attrs=attrs,
        series_seeds=cascades.seeds,
        data=data,
        truth=truth,
        manifest=manifest,
    )


def build_manifest(config: GeneratorConfig, graph: DiffusionGraph, data: TimeSeriesDataset) -> dict:
    import hashlib
    import json

    body = {
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "config": config.to_dict(),
        "nodes": graph.n,
        "edges": len(graph.edges),
        "series": data.n_series,
        "steps": data.steps,
    }
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    body["fingerprint"] = hashlib.sha256(canonical.encode()).hexdigest()[:16]
    return body

"""Model assembly: the hybrid graph+temporal forecaster and a GRU baseline.

Both expose named parameter dicts (checkpoint surface) and batched forward
passes returning differentiable forecast / anomaly tensors.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .forecaster import (
    ForecastResult,
    TransformerLayerParams,
    TransformerParams,
    build_window,
    forecast_window,
    init_transformer_params,
    predict_tensors,
    transformer_encode,
)
from .graph_encoder import DiffusionGraph, GnnLayerParams, GnnParams, encode_graph, init_gnn_params
from .numerics import Tensor, broadcast_to, concat, reshape, sigmoid, take, tanh


@dataclass
class ModelConfig:
    """Hyperparameters for either model family; echoed into checkpoints."""

    kind: str = "hybrid"  # hybrid | gru
    window: int = 16
    horizon: int = 4
    node_dim: int = 8
    gnn_hidden: list[int] = field(default_factory=lambda: [64, 64])
    leaky_alpha: float = 0.2
    neighborhood: str = "in"
    d_model: int = 64
    heads: int = 4
    tf_layers: int = 2
    ff_dim: int = 128
    max_positions: int = 64
    period: int | None = None
    ad_dim: int = 5
    consumer_dim: int = 3
    gru_hidden: int = 32

    def __post_init__(self):
        if self.kind not in ("hybrid", "gru"):
            raise ConfigError(f"unknown model kind '{self.kind}'")
        if isinstance(self.gnn_hidden, int):
            self.gnn_hidden = [self.gnn_hidden]
        if self.window < 1 or self.horizon < 1:
            raise ConfigError("window and horizon must be >= 1")
        if self.max_positions < self.window:
            raise ConfigError("max_positions must cover the window length")

    @property
    def graph_dim(self) -> int:
        return self.gnn_hidden[-1]

    @property
    def fused_dim(self) -> int:
        return self.graph_dim + self.ad_dim + self.consumer_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


class HybridModel:
    """Graph-attention encoder fused into the temporal attention forecaster."""

    kind = "hybrid"

    def __init__(self, cfg: ModelConfig, gnn: GnnParams, tf: TransformerParams):
        self.cfg = cfg
        self.gnn = gnn
        self.tf = tf

    @classmethod
    def build(cls, cfg: ModelConfig, rng: np.random.Generator) -> "HybridModel":
        gnn = init_gnn_params(rng, [cfg.node_dim, *cfg.gnn_hidden], cfg.leaky_alpha)
        tf = init_transformer_params(
            rng,
            fused_dim=cfg.fused_dim,
            d_model=cfg.d_model,
            heads=cfg.heads,
            layers=cfg.tf_layers,
            ff_dim=cfg.ff_dim,
            max_positions=cfg.max_positions,
            horizon=cfg.horizon,
            period=cfg.period,
        )
        return cls(cfg, gnn, tf)

    def params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, layer in enumerate(self.gnn.layers):
            out[f"gnn.layer{i}.w_self"] = layer.w_self
            out[f"gnn.layer{i}.w_neigh"] = layer.w_neigh
            out[f"gnn.layer{i}.attn"] = layer.attn
        tf = self.tf
        out["tf.w_in"] = tf.w_in
        out["tf.b_in"] = tf.b_in
        out["tf.pos_table"] = tf.pos_table
        if tf.period_table is not None:
            out["tf.period_table"] = tf.period_table
        for i, layer in enumerate(tf.layers):
            for name in ("wq", "wk", "wv", "wo", "w_ff1", "b_ff1", "w_ff2", "b_ff2"):
                out[f"tf.layer{i}.{name}"] = getattr(layer, name)
        out["tf.w_reg"] = tf.w_reg
        out["tf.b_reg"] = tf.b_reg
        out["tf.w_anom"] = tf.w_anom
        out["tf.b_anom"] = tf.b_anom
        return out

    @classmethod
    def from_tensors(cls, cfg: ModelConfig, tensors: dict[str, np.ndarray]) -> "HybridModel":
        def t(name):
            return Tensor(tensors[name], requires_grad=True)

        layers = []
        for i in range(len(cfg.gnn_hidden)):
            layers.append(
                GnnLayerParams(
                    w_self=t(f"gnn.layer{i}.w_self"),
                    w_neigh=t(f"gnn.layer{i}.w_neigh"),
                    attn=t(f"gnn.layer{i}.attn"),
                )
            )
        gnn = GnnParams(layers=layers, leaky_alpha=cfg.leaky_alpha)
        tf_layers = [
            TransformerLayerParams(
                **{name: t(f"tf.layer{i}.{name}") for name in ("wq", "wk", "wv", "wo", "w_ff1", "b_ff1", "w_ff2", "b_ff2")}
            )
            for i in range(cfg.tf_layers)
        ]
        tf = TransformerParams(
            w_in=t("tf.w_in"),
            b_in=t("tf.b_in"),
            pos_table=t("tf.pos_table"),
            layers=tf_layers,
            heads=cfg.heads,
            w_reg=t("tf.w_reg"),
            b_reg=t("tf.b_reg"),
            w_anom=t("tf.w_anom"),
            b_anom=t("tf.b_anom"),
            period_table=t("tf.period_table") if "tf.period_table" in tensors else None,
        )
        return cls(cfg, gnn, tf)

    def encode_series_graphs(self, graph: DiffusionGraph, node_feats: np.ndarray | Tensor) -> Tensor:
        """(S, n, node_dim) per-series node features -> (S, graph_dim) embeddings."""
        return encode_graph(graph, node_feats, self.gnn, self.cfg.neighborhood)

    def forward(
        self,
        graph: DiffusionGraph,
        node_feats: np.ndarray | Tensor,
        series_pos: np.ndarray,
        ad: np.ndarray,
        cons: np.ndarray,
    ):
        """Batched forward pass.

        node_feats (S, n, node_dim) covers the distinct series in the batch;
        series_pos (B,) indexes windows into those rows; ad (B, T, ad_dim)
        and cons (B, T, consumer_dim) are the window feature slices.
        Returns (forecast (B, k), anomaly (B, T), attention weights).
        """
        g_emb = self.encode_series_graphs(graph, node_feats)  # (S, dg)
        rows = take(g_emb, series_pos, axis=0)  # (B, dg)
        batch, steps = ad.shape[0], ad.shape[1]
        tiled = broadcast_to(reshape(rows, (batch, 1, self.cfg.graph_dim)), (batch, steps, self.cfg.graph_dim))
        fused = concat([tiled, Tensor(ad), Tensor(cons)], axis=-1)
        encoded, weights = transformer_encode(fused, self.tf)
        forecast, anom = predict_tensors(encoded, self.tf)
        return forecast, anom, weights

    def forecast_one(
        self,
        graph: DiffusionGraph,
        node_feats: np.ndarray,
        ad: np.ndarray,
        cons: np.ndarray,
        end: int = -1,
        k: int | None = None,
    ) -> ForecastResult:
        """Single-window inference path used by the CLI and HTTP service."""
        g_emb = encode_graph(graph, node_feats, self.gnn, self.cfg.neighborhood)
        window = build_window(g_emb, ad, cons, end=end)
        return forecast_window(window, self.tf, k)


class GruModel:
    """Single-layer gated recurrent forecaster over [ad || consumer] steps."""

    kind = "gru"

    def __init__(self, cfg: ModelConfig, tensors: dict[str, Tensor]):
        self.cfg = cfg
        self._p = tensors

    @classmethod
    def build(cls, cfg: ModelConfig, rng: np.random.Generator) -> "GruModel":
        d_in = cfg.ad_dim + cfg.consumer_dim
        h = cfg.gru_hidden

        def lin(n_in, n_out):
            scale = np.sqrt(2.0 / (n_in + n_out))
            return Tensor(rng.normal(0.0, scale, (n_in, n_out)), requires_grad=True)

        def bias(n):
            return Tensor(np.zeros(n), requires_grad=True)

        tensors = {
            "gru.w_z": lin(d_in + h, h),
            "gru.b_z": bias(h),
            "gru.w_r": lin(d_in + h, h),
            "gru.b_r": bias(h),
            "gru.w_h": lin(d_in + h, h),
            "gru.b_h": bias(h),
            "gru.w_reg": lin(h, cfg.horizon),
            "gru.b_reg": bias(cfg.horizon),
            "gru.w_anom": lin(h, 1),
            "gru.b_anom": bias(1),
        }
        return cls(cfg, tensors)

    @classmethod
    def from_tensors(cls, cfg: ModelConfig, tensors: dict[str, np.ndarray]) -> "GruModel":
        return cls(cfg, {k: Tensor(v, requires_grad=True) for k, v in tensors.items()})

    def params(self) -> dict[str, Tensor]:
        return dict(self._p)

    def forward(self, x: np.ndarray | Tensor):
        """x (B, T, d_in) -> forecast (B, k), anomaly probabilities (B, T)."""
        p = self._p
        xs = x if isinstance(x, Tensor) else Tensor(x)
        batch, steps = xs.shape[0], xs.shape[1]
        h = Tensor(np.zeros((batch, self.cfg.gru_hidden)))
        anom_cols = []
        for t in range(steps):
            xt = xs[:, t, :]
            joint = concat([xt, h], axis=1)
            z = sigmoid(joint @ p["gru.w_z"] + p["gru.b_z"])
            r = sigmoid(joint @ p["gru.w_r"] + p["gru.b_r"])
            cand = tanh(concat([xt, r * h], axis=1) @ p["gru.w_h"] + p["gru.b_h"])
            h = (1.0 - z) * h + z * cand
            anom_cols.append(sigmoid(h @ p["gru.w_anom"] + p["gru.b_anom"]))
        forecast = h @ p["gru.w_reg"] + p["gru.b_reg"]
        anom = concat(anom_cols, axis=1)
        return forecast, anom

    def forecast_one(self, ad: np.ndarray, cons: np.ndarray, end: int = -1, k: int | None = None) -> ForecastResult:
        x = np.concatenate([ad, cons], axis=-1)[None, :, :]
        forecast, anom = self.forward(x)
        kk = self.cfg.horizon if k is None else k
        return ForecastResult(
            horizon=kk,
            values=forecast.data[0, :kk].copy(),
            anomaly_probs=anom.data[0].copy(),
            attention=np.zeros((0, 0, ad.shape[0], ad.shape[0])),
            window_end=end,
        )


def build_model(cfg: ModelConfig, rng: np.random.Generator):
    if cfg.kind == "hybrid":
        return HybridModel.build(cfg, rng)
    return GruModel.build(cfg, rng)


def model_from_tensors(cfg: ModelConfig, tensors: dict[str, np.ndarray]):
    if cfg.kind == "hybrid":
        return HybridModel.from_tensors(cfg, tensors)
    return GruModel.from_tensors(cfg, tensors)

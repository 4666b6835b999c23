"""Self-attention forecaster over fused per-step feature windows.

A window row is the concatenation [graph embedding || ad features ||
consumer features] for one time step. The encoder stacks multi-head
self-attention and feed-forward blocks with residual connections (no
normalization layers); a regression head on the last position emits the
k-step forecast and a per-step head emits anomaly probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, CapacityError, ContractError, DimensionError
from .numerics import Tensor, concat, matmul, relu, sigmoid, softmax, transpose


@dataclass
class SequenceWindow:
    """Fused rows for T_w consecutive steps ending at index `end`."""

    rows: Tensor  # (T_w, fused_dim)
    end: int = -1

    @property
    def start(self) -> int:
        return self.end - self.length + 1

    @property
    def length(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def window_starts(length: int, window: int, horizon: int = 0, stride: int = 1) -> list[int]:
    """Start offsets of every full window (plus horizon) that fits in `length`."""
    last = length - window - horizon
    return list(range(0, last + 1, stride)) if last >= 0 else []


def build_window(
    graph_vec: Tensor | np.ndarray,
    ad_features: Tensor | np.ndarray,
    consumer_features: Tensor | np.ndarray,
    end: int = -1,
) -> SequenceWindow:
    """Concatenate per-step rows in the fixed order [graph || ad || consumer].

    The graph embedding is one vector shared by every step of the window;
    ad and consumer features are (T_w, d) aligned streams.
    """
    ad = ad_features if isinstance(ad_features, Tensor) else Tensor(ad_features)
    cons = consumer_features if isinstance(consumer_features, Tensor) else Tensor(consumer_features)
    if ad.ndim != 2 or cons.ndim != 2:
        raise DimensionError(f"expected 2-D feature streams, got {ad.shape} and {cons.shape}")
    if ad.shape[0] != cons.shape[0]:
        raise AlignmentError(
            f"misaligned streams: ad has {ad.shape[0]} steps, consumer has {cons.shape[0]}"
        )
    g = graph_vec if isinstance(graph_vec, Tensor) else Tensor(graph_vec)
    if g.ndim != 1:
        raise DimensionError(f"graph embedding must be a vector, got shape {g.shape}")
    steps = ad.shape[0]
    tiled = Tensor(np.ones((steps, 1))) @ g.reshape(1, g.shape[0])
    return SequenceWindow(rows=concat([tiled, ad, cons], axis=1), end=end)


@dataclass
class TransformerLayerParams:
    wq: Tensor  # (d_model, d_model)
    wk: Tensor
    wv: Tensor
    wo: Tensor
    w_ff1: Tensor  # (d_model, ff_dim)
    b_ff1: Tensor  # (ff_dim,)
    w_ff2: Tensor  # (ff_dim, d_model)
    b_ff2: Tensor  # (d_model,)


@dataclass
class TransformerParams:
    """Input projection, learned positional table, encoder stack, and heads."""

    w_in: Tensor  # (fused_dim, d_model)
    b_in: Tensor  # (d_model,)
    pos_table: Tensor  # (max_positions, d_model), learnable
    layers: list[TransformerLayerParams]
    heads: int
    w_reg: Tensor  # (d_model, horizon)
    b_reg: Tensor  # (horizon,)
    w_anom: Tensor  # (d_model, 1)
    b_anom: Tensor  # (1,)
    period_table: Tensor | None = None  # optional (period, d_model) additive table

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise DimensionError(f"d_model {self.d_model} not divisible by {self.heads} heads")

    @property
    def d_model(self) -> int:
        return self.w_in.shape[1]

    @property
    def fused_dim(self) -> int:
        return self.w_in.shape[0]

    @property
    def max_positions(self) -> int:
        return self.pos_table.shape[0]

    @property
    def horizon(self) -> int:
        return self.w_reg.shape[1]


def init_transformer_params(
    rng: np.random.Generator,
    fused_dim: int,
    d_model: int = 64,
    heads: int = 4,
    layers: int = 2,
    ff_dim: int = 128,
    max_positions: int = 64,
    horizon: int = 4,
    period: int | None = None,
) -> TransformerParams:
    def lin(n_in, n_out):
        scale = np.sqrt(2.0 / (n_in + n_out))
        return Tensor(rng.normal(0.0, scale, (n_in, n_out)), requires_grad=True)

    def bias(n):
        return Tensor(np.zeros(n), requires_grad=True)

    layer_params = [
        TransformerLayerParams(
            wq=lin(d_model, d_model),
            wk=lin(d_model, d_model),
            wv=lin(d_model, d_model),
            wo=lin(d_model, d_model),
            w_ff1=lin(d_model, ff_dim),
            b_ff1=bias(ff_dim),
            w_ff2=lin(ff_dim, d_model),
            b_ff2=bias(d_model),
        )
        for _ in range(layers)
    ]
    return TransformerParams(
        w_in=lin(fused_dim, d_model),
        b_in=bias(d_model),
        pos_table=Tensor(rng.normal(0.0, 0.02, (max_positions, d_model)), requires_grad=True),
        layers=layer_params,
        heads=heads,
        w_reg=lin(d_model, horizon),
        b_reg=bias(horizon),
        w_anom=lin(d_model, 1),
        b_anom=bias(1),
        period_table=(
            Tensor(rng.normal(0.0, 0.02, (period, d_model)), requires_grad=True) if period else None
        ),
    )


def positional_encode(
    x: Tensor,
    pos_table: Tensor,
    period_table: Tensor | None = None,
    start: int = 0,
) -> Tensor:
    """Add the learned absolute-position rows (and optional periodic rows)."""
    steps = x.shape[-2]
    if steps > pos_table.shape[0]:
        raise CapacityError(f"window length {steps} exceeds positional table {pos_table.shape[0]}")
    out = x + pos_table[:steps]
    if period_table is not None:
        period = period_table.shape[0]
        idx = [(start + t) % period for t in range(steps)]
        from .numerics import take

        out = out + take(period_table, idx, axis=0)
    return out


def _split_heads(x: Tensor, heads: int) -> list[Tensor]:
    d = x.shape[-1]
    dk = d // heads
    return [x[..., h * dk : (h + 1) * dk] for h in range(heads)]


def multi_head_attention(
    x: Tensor, layer: TransformerLayerParams, heads: int
) -> tuple[Tensor, np.ndarray]:
    """Scaled dot-product self-attention over the window positions.

    Returns the output-projected attended rows plus the per-head softmax
    matrices, stacked as (..., heads, T, T).
    """
    d_model = x.shape[-1]
    if d_model != layer.wq.shape[0]:
        raise DimensionError(f"input dim {d_model} != projection dim {layer.wq.shape[0]}")
    dk = d_model // heads
    scale = 1.0 / np.sqrt(dk)
    q, k, v = x @ layer.wq, x @ layer.wk, x @ layer.wv
    outputs = []
    weights = []
    for qh, kh, vh in zip(_split_heads(q, heads), _split_heads(k, heads), _split_heads(v, heads)):
        kt = transpose(kh) if kh.ndim == 2 else transpose(kh, (0, 2, 1))
        attn = softmax((qh @ kt) * scale, axis=-1)
        outputs.append(matmul(attn, vh))
        weights.append(attn.data)
    out = concat(outputs, axis=-1) @ layer.wo
    return out, np.stack(weights, axis=-3)


def _feed_forward(x: Tensor, layer: TransformerLayerParams) -> Tensor:
    return relu(x @ layer.w_ff1 + layer.b_ff1) @ layer.w_ff2 + layer.b_ff2


def transformer_encode(
    window: SequenceWindow | Tensor, params: TransformerParams
) -> tuple[Tensor, np.ndarray]:
    """Project, position-encode, and run the encoder stack.

    Accepts (T, fused) or batched (B, T, fused) rows. Returns the final
    sequence representation plus attention weights (..., layers, heads, T, T).
    """
    rows = window.rows if isinstance(window, SequenceWindow) else window
    if rows.shape[-1] != params.fused_dim:
        raise DimensionError(f"fused dim {rows.shape[-1]} != expected {params.fused_dim}")
    x = rows @ params.w_in + params.b_in
    x = positional_encode(x, params.pos_table, params.period_table)
    all_weights = []
    for layer in params.layers:
        attended, weights = multi_head_attention(x, layer, params.heads)
        x = x + attended
        x = x + _feed_forward(x, layer)
        all_weights.append(weights)
    return x, np.stack(all_weights, axis=-4)


@dataclass
class ForecastResult:
    """k-step forecast, per-step anomaly probabilities, and attention maps."""

    horizon: int
    values: np.ndarray  # (k,)
    anomaly_probs: np.ndarray  # (T_w,)
    attention: np.ndarray  # (layers, heads, T_w, T_w)
    window_end: int = -1


def predict_tensors(encoded: Tensor, params: TransformerParams, k: int | None = None):
    """Differentiable heads: (forecast, anomaly probabilities) as tensors."""
    k = params.horizon if k is None else k
    if k < 1:
        raise ContractError("horizon k must be >= 1")
    if k > params.horizon:
        raise ContractError(f"horizon k={k} exceeds regression head width {params.horizon}")
    last = encoded[..., -1, :]
    single = last.ndim == 1
    if single:
        last = last.reshape(1, last.shape[0])
    forecast = last @ params.w_reg + params.b_reg
    if single:
        forecast = forecast[0]
    if k < params.horizon:
        forecast = forecast[..., :k]
    anom = sigmoid(encoded @ params.w_anom + params.b_anom)
    return forecast, anom[..., 0]


def predict(
    encoded: Tensor,
    params: TransformerParams,
    k: int | None = None,
    attention: np.ndarray | None = None,
    window_end: int = -1,
) -> ForecastResult:
    forecast, anom = predict_tensors(encoded, params, k)
    steps = encoded.shape[-2]
    return ForecastResult(
        horizon=forecast.shape[-1],
        values=forecast.data.copy(),
        anomaly_probs=anom.data.copy(),
        attention=attention if attention is not None else np.zeros((0, params.heads, steps, steps)),
        window_end=window_end,
    )


def forecast_window(window: SequenceWindow, params: TransformerParams, k: int | None = None) -> ForecastResult:
    encoded, weights = transformer_encode(window, params)
    return predict(encoded, params, k, attention=weights, window_end=window.end)

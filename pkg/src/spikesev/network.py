"""The layer stack: shape inference, parameter accounting, forward/backward
through the whole network, binary cross-entropy with an L2 weight penalty,
and Adam updates.

The default architecture is four convolution/pool/dropout stages (128, 64,
64, 24 filters, kernel 4, pool 2, rate 0.166), a 64-unit LSTM, then dense
layers 64 (relu, followed by dropout), 32, 16 and a sigmoid output unit. At
input length 16,730 it has exactly 85,657 trainable parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    Conv1DSpec,
    DenseSpec,
    DropoutSpec,
    LayerSpec,
    LSTMSpec,
    MaxPool1DSpec,
    conv1d_backward,
    conv1d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    init_conv,
    init_dense,
    init_lstm,
    lstm_backward,
    lstm_forward,
    maxpool1d_backward,
    maxpool1d_forward,
    sample_dropout_mask,
)

BCE_EPSILON = 1e-7

DEFAULT_INPUT_LENGTH = 16730


class ShapeError(ValueError):
    pass


def build_architecture(
    conv_filters=(128, 64, 64, 24),
    kernel: int = 4,
    pool: int = 2,
    dropout_rate: float = 0.166,
    lstm_units: int = 64,
    dense_units=(64, 32, 16),
) -> list[LayerSpec]:
    """Conv/pool/dropout stages, an LSTM, dense stack (dropout after the
    first dense layer), sigmoid output unit."""
    specs: list[LayerSpec] = []
    for filters in conv_filters:
        specs.append(Conv1DSpec(filters, kernel))
        specs.append(MaxPool1DSpec(pool))
        specs.append(DropoutSpec(dropout_rate))
    specs.append(LSTMSpec(lstm_units))
    for j, units in enumerate(dense_units):
        specs.append(DenseSpec(units, "relu"))
        if j == 0:
            specs.append(DropoutSpec(dropout_rate))
    specs.append(DenseSpec(1, "sigmoid"))
    return specs


def default_architecture() -> list[LayerSpec]:
    return build_architecture()


def infer_shapes(specs: list[LayerSpec], input_length: int) -> list[tuple[int, ...]]:
    """Symbolic pass over the stack; one output shape per layer.

    Sequence layers report (length, channels); everything after the LSTM
    reports (features,). Raises ShapeError naming the first offending layer.
    """
    shapes: list[tuple[int, ...]] = []
    seq: tuple[int, int] | None = (input_length, 1)
    vec: int | None = None
    for idx, spec in enumerate(specs):
        name = f"layer {idx} ({type(spec).__name__})"
        if isinstance(spec, Conv1DSpec):
            if seq is None:
                raise ShapeError(f"{name}: convolution needs sequence input")
            out_len = seq[0] - spec.kernel + 1
            if out_len < 1:
                raise ShapeError(f"{name}: output length {out_len} < 1")
            seq = (out_len, spec.filters)
            shapes.append(seq)
        elif isinstance(spec, MaxPool1DSpec):
            if seq is None:
                raise ShapeError(f"{name}: pooling needs sequence input")
            out_len = seq[0] // spec.pool
            if out_len < 1:
                raise ShapeError(f"{name}: output length {out_len} < 1")
            seq = (out_len, seq[1])
            shapes.append(seq)
        elif isinstance(spec, DropoutSpec):
            shapes.append(seq if seq is not None else (vec,))
        elif isinstance(spec, LSTMSpec):
            if seq is None:
                raise ShapeError(f"{name}: lstm needs sequence input")
            seq, vec = None, spec.units
            shapes.append((vec,))
        elif isinstance(spec, DenseSpec):
            if vec is None:
                raise ShapeError(f"{name}: dense needs flat feature input")
            vec = spec.units
            shapes.append((vec,))
        else:
            raise ShapeError(f"{name}: unknown layer spec")
    return shapes


def _param_shapes(specs: list[LayerSpec], input_length: int) -> list[dict[str, tuple[int, ...]]]:
    shapes = infer_shapes(specs, input_length)
    out: list[dict[str, tuple[int, ...]]] = []
    seq_channels = 1
    features = None
    for spec, shape in zip(specs, shapes):
        if isinstance(spec, Conv1DSpec):
            out.append({"w": (spec.kernel, seq_channels, spec.filters), "b": (spec.filters,)})
            seq_channels = spec.filters
        elif isinstance(spec, LSTMSpec):
            out.append(
                {
                    "w": (seq_channels, 4 * spec.units),
                    "u": (spec.units, 4 * spec.units),
                    "b": (4 * spec.units,),
                }
            )
            features = spec.units
        elif isinstance(spec, DenseSpec):
            out.append({"w": (features, spec.units), "b": (spec.units,)})
            features = spec.units
        else:
            out.append({})
        if len(shape) == 2:
            seq_channels = shape[1]
    return out


def per_layer_param_counts(specs: list[LayerSpec], input_length: int) -> list[int]:
    return [
        sum(int(np.prod(s)) for s in layer.values())
        for layer in _param_shapes(specs, input_length)
    ]


def param_count(specs: list[LayerSpec], input_length: int) -> int:
    return sum(per_layer_param_counts(specs, input_length))


class Network:
    """An ordered layer stack with its parameter tensors."""

    def __init__(
        self,
        input_length: int,
        specs: list[LayerSpec] | None = None,
        seed: int = 0,
        dtype=np.float32,
    ):
        self.input_length = input_length
        self.specs = list(specs) if specs is not None else default_architecture()
        self.seed = seed
        self.dtype = dtype
        infer_shapes(self.specs, input_length)  # validate before allocating
        rng = np.random.default_rng(seed)
        self.params: list[dict[str, np.ndarray]] = []
        seq_channels = 1
        features = None
        for spec in self.specs:
            if isinstance(spec, Conv1DSpec):
                self.params.append(init_conv(spec, seq_channels, rng, dtype))
                seq_channels = spec.filters
            elif isinstance(spec, LSTMSpec):
                self.params.append(init_lstm(spec, seq_channels, rng, dtype))
                features = spec.units
            elif isinstance(spec, DenseSpec):
                self.params.append(init_dense(spec, features, rng, dtype))
                features = spec.units
            else:
                self.params.append({})

    def param_count(self) -> int:
        return param_count(self.specs, self.input_length)

    def zero_like_params(self) -> list[dict[str, np.ndarray]]:
        return [{k: np.zeros_like(v) for k, v in layer.items()} for layer in self.params]

    def weight_squared_sum(self) -> float:
        """Sum of squared weight-matrix entries; biases excluded."""
        total = 0.0
        for layer in self.params:
            for key, tensor in layer.items():
                if key != "b":
                    total += float((tensor.astype(np.float64) ** 2).sum())
        return total

    def forward(self, x: np.ndarray, train: bool = False, rng=None, masks=None, want_caches: bool = False):
        """Run the stack on a (batch, input_length) matrix.

        In train mode dropout masks are taken from `masks` when given,
        otherwise sampled from `rng`; caches hold everything the backward
        pass needs (conv inputs, pool argmaxes, gate activations, masks).
        """
        if x.ndim != 2 or x.shape[1] != self.input_length:
            raise ValueError(f"expected input (batch, {self.input_length}), got {x.shape}")
        cur = x.astype(self.dtype, copy=False)
        if not isinstance(self.specs[0], DenseSpec):
            cur = cur[:, :, None]
        caches = []
        mask_idx = 0
        for spec, params in zip(self.specs, self.params):
            if isinstance(spec, Conv1DSpec):
                cur, cache = conv1d_forward(cur, params["w"], params["b"])
                caches.append(cache)
            elif isinstance(spec, MaxPool1DSpec):
                cur, cache = maxpool1d_forward(cur, spec.pool)
                caches.append(cache)
            elif isinstance(spec, DropoutSpec):
                if train and spec.rate > 0.0:
                    if masks is not None:
                        mask = masks[mask_idx]
                    elif rng is not None:
                        mask = sample_dropout_mask(rng, cur.shape, spec.rate)
                    else:
                        raise ValueError("train-mode dropout needs an rng or explicit masks")
                    mask_idx += 1
                    cur = dropout_forward(cur, spec.rate, mask)
                    caches.append(mask)
                else:
                    caches.append(None)
            elif isinstance(spec, LSTMSpec):
                cur, cache = lstm_forward(cur, params["w"], params["u"], params["b"])
                caches.append(cache)
            else:  # DenseSpec
                cur, cache = dense_forward(cur, params["w"], params["b"], spec.activation)
                caches.append(cache)
        return (cur, caches) if want_caches else cur

    def dropout_masks_from_caches(self, caches) -> list:
        return [
            cache
            for spec, cache in zip(self.specs, caches)
            if isinstance(spec, DropoutSpec) and cache is not None
        ]

    def backward(self, dout: np.ndarray, caches) -> list[dict[str, np.ndarray]]:
        """Gradients of every parameter tensor given d(loss)/d(output)."""
        if caches is None or len(caches) != len(self.specs):
            raise ValueError("backward requires the caches of a completed forward pass")
        grads = self.zero_like_params()
        grad = dout
        for idx in range(len(self.specs) - 1, -1, -1):
            spec, params, cache = self.specs[idx], self.params[idx], caches[idx]
            if isinstance(spec, Conv1DSpec):
                grad, dw, db = conv1d_backward(grad, cache, params["w"])
                grads[idx]["w"], grads[idx]["b"] = dw, db
            elif isinstance(spec, MaxPool1DSpec):
                grad = maxpool1d_backward(grad, cache, spec.pool)
            elif isinstance(spec, DropoutSpec):
                if cache is not None:
                    grad = dropout_backward(grad, spec.rate, cache)
            elif isinstance(spec, LSTMSpec):
                grad, dw, du, db = lstm_backward(grad, cache, params["w"], params["u"])
                grads[idx]["w"], grads[idx]["u"], grads[idx]["b"] = dw, du, db
            else:
                grad, dw, db = dense_backward(grad, cache, params["w"], spec.activation)
                grads[idx]["w"], grads[idx]["b"] = dw, db
        return grads

    def add_l2_gradients(self, grads, lam: float) -> None:
        """Add d(lam * sum w^2)/dw = 2*lam*w to every weight gradient."""
        if lam == 0.0:
            return
        for layer_params, layer_grads in zip(self.params, grads):
            for key, tensor in layer_params.items():
                if key != "b":
                    layer_grads[key] = layer_grads[key] + 2.0 * lam * tensor

    def predict_scores(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Inference-mode scores in [0, 1], one per row."""
        scores = [
            self.forward(x[i : i + batch_size]).reshape(-1)
            for i in range(0, x.shape[0], batch_size)
        ]
        return np.concatenate(scores) if scores else np.zeros(0, dtype=self.dtype)


# ---------------------------------------------------------------------------
# Loss

def bce_l2_loss(prediction: float, label: int, network: Network, lam: float) -> float:
    """Binary cross-entropy (prediction clamped to [eps, 1-eps]) plus
    lam * sum of squared weight-matrix entries (biases excluded)."""
    p = min(max(float(prediction), BCE_EPSILON), 1.0 - BCE_EPSILON)
    bce = -(label * np.log(p) + (1 - label) * np.log(1.0 - p))
    return float(bce + lam * network.weight_squared_sum())


def batch_bce_l2(predictions: np.ndarray, labels: np.ndarray, network: Network, lam: float):
    """Mean BCE over the batch plus the L2 penalty; also returns
    d(loss)/d(predictions) evaluated at the clamped predictions."""
    p = np.clip(predictions.astype(np.float64), BCE_EPSILON, 1.0 - BCE_EPSILON)
    y = labels.astype(np.float64)
    n = p.shape[0]
    loss = float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean() + lam * network.weight_squared_sum())
    dpred = (p - y) / (p * (1.0 - p)) / n
    return loss, dpred


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list[dict[str, np.ndarray]] = field(default_factory=list)
    v: list[dict[str, np.ndarray]] = field(default_factory=list)

    @classmethod
    def for_network(cls, network: Network, learning_rate: float = 1e-3, **kwargs) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            m=network.zero_like_params(),
            v=network.zero_like_params(),
            **kwargs,
        )


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update, in place; returns the parameters."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for layer_p, layer_g, layer_m, layer_v in zip(params, grads, state.m, state.v):
        for key, p in layer_p.items():
            g = layer_g[key]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m = layer_m[key]
            v = layer_v[key]
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            m_hat = m / correction1
            v_hat = v / correction2
            p -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.dtype)
    return params

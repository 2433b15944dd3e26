"""From-scratch LSTM regression core: parameter container, seeded
initialization, batched forward pass with inter-layer dropout, and exact
backpropagation-through-time gradients.

Everything is float64 numpy.  The network maps a (batch, steps, features)
window to one scalar per sample via a linear head on the final hidden
state.  Gates are packed row-wise in i/f/g/o order: rows [0:H) input gate,
[H:2H) forget gate, [2H:3H) cell candidate, [3H:4H) output gate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import NumericError, SchemaError, StaleCacheError

GATE_NAMES = ("input", "forget", "cell", "output")

Gradients = dict[str, np.ndarray]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LayerWeights:
    """One recurrent layer's packed weights.

    w_x: (4H, D_in) input projection; w_h: (4H, H) recurrent projection;
    bias: (4H,).
    """

    w_x: np.ndarray
    w_h: np.ndarray
    bias: np.ndarray


@dataclass
class LSTMParams:
    """All trainable tensors plus structural metadata.

    ``version`` increments on every optimizer step; forward caches record
    it so a backward pass against mutated parameters is rejected instead of
    silently producing wrong gradients.
    """

    layers: list[LayerWeights]
    head_w: np.ndarray
    head_b: np.ndarray
    input_size: int
    hidden_size: int
    dropout: float
    version: int = 0

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """Deterministically ordered (name, array) pairs."""
        for index, layer in enumerate(self.layers):
            yield f"layer{index}.w_x", layer.w_x
            yield f"layer{index}.w_h", layer.w_h
            yield f"layer{index}.bias", layer.bias
        yield "head.w", self.head_w
        yield "head.b", self.head_b

    def bump_version(self) -> None:
        self.version += 1

    def copy(self) -> "LSTMParams":
        return LSTMParams(
            layers=[LayerWeights(l.w_x.copy(), l.w_h.copy(), l.bias.copy())
                    for l in self.layers],
            head_w=self.head_w.copy(),
            head_b=self.head_b.copy(),
            input_size=self.input_size,
            hidden_size=self.hidden_size,
            dropout=self.dropout,
            version=self.version,
        )

    def param_count(self) -> int:
        return sum(arr.size for _, arr in self.tensors())

    def validate_finite(self) -> None:
        for name, arr in self.tensors():
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"non-finite values in parameter tensor {name}")


def init_params(
    input_size: int,
    hidden_size: int,
    num_layers: int,
    dropout: float,
    rng: np.random.Generator,
) -> LSTMParams:
    """Seeded initialization: weights uniform in ±1/sqrt(hidden_size),
    biases zero except the forget-gate block, which starts at 1.0.
    """
    if input_size < 1 or hidden_size < 1 or num_layers < 1:
        raise ValueError(
            f"invalid dims: input={input_size} hidden={hidden_size} layers={num_layers}"
        )
    if not 0.0 <= dropout < 1.0:
        raise ValueError(f"dropout must be in [0, 1), got {dropout}")
    if num_layers == 1 and dropout != 0.0:
        raise ValueError("dropout requires >= 2 layers (applied between layers)")
    scale = 1.0 / np.sqrt(hidden_size)
    layers = []
    for index in range(num_layers):
        d_in = input_size if index == 0 else hidden_size
        bias = np.zeros(4 * hidden_size)
        bias[hidden_size: 2 * hidden_size] = 1.0
        layers.append(LayerWeights(
            w_x=rng.uniform(-scale, scale, size=(4 * hidden_size, d_in)),
            w_h=rng.uniform(-scale, scale, size=(4 * hidden_size, hidden_size)),
            bias=bias,
        ))
    return LSTMParams(
        layers=layers,
        head_w=rng.uniform(-scale, scale, size=hidden_size),
        head_b=np.zeros(1),
        input_size=input_size,
        hidden_size=hidden_size,
        dropout=dropout,
    )


@dataclass
class ForwardCache:
    """Activations retained for the exact BPTT backward pass."""

    params: LSTMParams
    params_version: int
    layer_inputs: list[np.ndarray]          # per layer: (B, T, D_in)
    gate_i: list[np.ndarray]                # per layer: (T, B, H)
    gate_f: list[np.ndarray]
    gate_g: list[np.ndarray]
    gate_o: list[np.ndarray]
    cell: list[np.ndarray]                  # c_t per layer: (T, B, H)
    cell_tanh: list[np.ndarray]
    dropout_masks: list[np.ndarray | None]  # per layer below the top
    final_hidden: np.ndarray                # (B, H)
    predictions: np.ndarray                 # (B,)
    train_mode: bool = field(default=False)


def _check_gates(z: np.ndarray, hidden: int, layer: int, step: int) -> None:
    if np.all(np.isfinite(z)):
        return
    for gate_index, name in enumerate(GATE_NAMES):
        block = z[:, gate_index * hidden: (gate_index + 1) * hidden]
        if not np.all(np.isfinite(block)):
            raise NumericError(
                f"non-finite {name}-gate activation at layer {layer}, step {step}"
            )


def lstm_forward(
    params: LSTMParams,
    windows: np.ndarray,
    train_mode: bool = False,
    seed: int | None = None,
    dropout_rng: np.random.Generator | None = None,
) -> ForwardCache:
    """Run the recurrence over a (batch, steps, features) array.

    Inter-layer inverted dropout is applied only in train mode, with masks
    drawn from ``dropout_rng`` (or a generator seeded by ``seed``), so the
    same seed reproduces the same masks.  Eval mode never touches the RNG.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim == 2:
        windows = windows[np.newaxis, :, :]
    if windows.ndim != 3:
        raise SchemaError(f"windows must be (batch, steps, features), got {windows.shape}")
    batch, steps, features = windows.shape
    if features != params.input_size:
        raise SchemaError(
            f"feature dim {features} does not match params input_size {params.input_size}"
        )
    if steps < 1:
        raise SchemaError("window must contain at least one step")
    hidden = params.hidden_size
    use_dropout = train_mode and params.dropout > 0.0 and params.num_layers > 1
    if use_dropout and dropout_rng is None:
        dropout_rng = np.random.default_rng(seed)

    layer_inputs: list[np.ndarray] = [windows]
    gate_i: list[np.ndarray] = []
    gate_f: list[np.ndarray] = []
    gate_g: list[np.ndarray] = []
    gate_o: list[np.ndarray] = []
    cell: list[np.ndarray] = []
    cell_tanh: list[np.ndarray] = []
    dropout_masks: list[np.ndarray | None] = []
    h_final = np.zeros((batch, hidden))

    x = windows
    for layer_index, layer in enumerate(params.layers):
        i_seq = np.empty((steps, batch, hidden))
        f_seq = np.empty((steps, batch, hidden))
        g_seq = np.empty((steps, batch, hidden))
        o_seq = np.empty((steps, batch, hidden))
        c_seq = np.empty((steps, batch, hidden))
        tanh_seq = np.empty((steps, batch, hidden))
        outputs = np.empty((batch, steps, hidden))
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        for t in range(steps):
            z = x[:, t, :] @ layer.w_x.T + h @ layer.w_h.T + layer.bias
            _check_gates(z, hidden, layer_index, t)
            i = _sigmoid(z[:, :hidden])
            f = _sigmoid(z[:, hidden: 2 * hidden])
            g = np.tanh(z[:, 2 * hidden: 3 * hidden])
            o = _sigmoid(z[:, 3 * hidden:])
            c = f * c + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            if not np.all(np.isfinite(h)):
                raise NumericError(
                    f"non-finite hidden state at layer {layer_index}, step {t}"
                )
            i_seq[t], f_seq[t], g_seq[t], o_seq[t] = i, f, g, o
            c_seq[t], tanh_seq[t] = c, tanh_c
            outputs[:, t, :] = h
        gate_i.append(i_seq)
        gate_f.append(f_seq)
        gate_g.append(g_seq)
        gate_o.append(o_seq)
        cell.append(c_seq)
        cell_tanh.append(tanh_seq)
        h_final = h

        if layer_index < params.num_layers - 1:
            if use_dropout:
                keep = 1.0 - params.dropout
                mask = (dropout_rng.random(outputs.shape) >= params.dropout) / keep
                dropout_masks.append(mask)
                x = outputs * mask
            else:
                dropout_masks.append(None)
                x = outputs
            layer_inputs.append(x)
        else:
            x = outputs

    predictions = h_final @ params.head_w + params.head_b[0]
    if not np.all(np.isfinite(predictions)):
        raise NumericError("non-finite prediction from the linear head")
    return ForwardCache(
        params=params,
        params_version=params.version,
        layer_inputs=layer_inputs,
        gate_i=gate_i,
        gate_f=gate_f,
        gate_g=gate_g,
        gate_o=gate_o,
        cell=cell,
        cell_tanh=cell_tanh,
        dropout_masks=dropout_masks,
        final_hidden=h_final,
        predictions=predictions,
        train_mode=train_mode,
    )


def lstm_backward(cache: ForwardCache, targets: np.ndarray) -> Gradients:
    """Exact gradients of the summed squared error Σ(pred − target)².

    Summed (not averaged) so duplicating a sample in the batch doubles
    every gradient; the trainer rescales to a mean.  Raises if the
    parameters changed since the forward pass.
    """
    params = cache.params
    if params.version != cache.params_version:
        raise StaleCacheError(
            f"cache built at params version {cache.params_version}, "
            f"now {params.version}"
        )
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if targets.shape != cache.predictions.shape:
        raise SchemaError(
            f"targets shape {targets.shape} does not match "
            f"predictions {cache.predictions.shape}"
        )
    hidden = params.hidden_size
    batch = targets.shape[0]
    steps = cache.layer_inputs[0].shape[1]

    grads: Gradients = {name: np.zeros_like(arr) for name, arr in params.tensors()}
    d_pred = 2.0 * (cache.predictions - targets)             # (B,)
    grads["head.w"] += cache.final_hidden.T @ d_pred
    grads["head.b"] += np.array([d_pred.sum()])

    # Gradient w.r.t. the top layer's output sequence: only the final
    # step's hidden state feeds the head.
    d_out = np.zeros((batch, steps, hidden))
    d_out[:, -1, :] = np.outer(d_pred, params.head_w)

    for layer_index in range(params.num_layers - 1, -1, -1):
        layer = params.layers[layer_index]
        x = cache.layer_inputs[layer_index]
        i_seq = cache.gate_i[layer_index]
        f_seq = cache.gate_f[layer_index]
        g_seq = cache.gate_g[layer_index]
        o_seq = cache.gate_o[layer_index]
        c_seq = cache.cell[layer_index]
        tanh_seq = cache.cell_tanh[layer_index]

        d_wx = grads[f"layer{layer_index}.w_x"]
        d_wh = grads[f"layer{layer_index}.w_h"]
        d_b = grads[f"layer{layer_index}.bias"]
        d_x = np.zeros_like(x)
        dh_rec = np.zeros((batch, hidden))
        dc_rec = np.zeros((batch, hidden))
        for t in range(steps - 1, -1, -1):
            i, f, g, o = i_seq[t], f_seq[t], g_seq[t], o_seq[t]
            tanh_c = tanh_seq[t]
            c_prev = c_seq[t - 1] if t > 0 else np.zeros((batch, hidden))
            h_prev = (o_seq[t - 1] * tanh_seq[t - 1]) if t > 0 \
                else np.zeros((batch, hidden))

            dh = d_out[:, t, :] + dh_rec
            do = dh * tanh_c
            dc = dc_rec + dh * o * (1.0 - tanh_c * tanh_c)
            di = dc * g
            df = dc * c_prev
            dg = dc * i

            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ], axis=1)                                       # (B, 4H)

            d_wx += dz.T @ x[:, t, :]
            d_wh += dz.T @ h_prev
            d_b += dz.sum(axis=0)
            d_x[:, t, :] = dz @ layer.w_x
            dh_rec = dz @ layer.w_h
            dc_rec = dc * f

        if layer_index > 0:
            mask = cache.dropout_masks[layer_index - 1]
            d_out = d_x if mask is None else d_x * mask
    return grads


def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> float:
    diff = np.asarray(predictions) - np.asarray(targets)
    return float(np.mean(diff * diff))


# ---------------------------------------------------------------------------
# Persistence: one flat float64 blob + a JSON shape manifest
# ---------------------------------------------------------------------------

MANIFEST_NAME = "params.json"
TENSORS_NAME = "params.bin"


def save_params(params: LSTMParams, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name, arr in params.tensors():
        flat = np.ascontiguousarray(arr, dtype="<f8").ravel()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += flat.size
        chunks.append(flat)
    (directory / TENSORS_NAME).write_bytes(np.concatenate(chunks).tobytes())
    manifest = {
        "input_size": params.input_size,
        "hidden_size": params.hidden_size,
        "num_layers": params.num_layers,
        "dropout": params.dropout,
        "dtype": "<f8",
        "tensors": entries,
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_params(directory: str | Path) -> LSTMParams:
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text())
    blob = np.frombuffer((directory / TENSORS_NAME).read_bytes(), dtype=manifest["dtype"])
    tensors: Mapping[str, np.ndarray] = {}
    arrays = {}
    for entry in manifest["tensors"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        arr = blob[entry["offset"]: entry["offset"] + size].reshape(entry["shape"]).copy()
        arrays[entry["name"]] = arr
    del tensors
    layers = []
    for index in range(manifest["num_layers"]):
        layers.append(LayerWeights(
            w_x=arrays[f"layer{index}.w_x"],
            w_h=arrays[f"layer{index}.w_h"],
            bias=arrays[f"layer{index}.bias"],
        ))
    params = LSTMParams(
        layers=layers,
        head_w=arrays["head.w"],
        head_b=arrays["head.b"],
        input_size=manifest["input_size"],
        hidden_size=manifest["hidden_size"],
        dropout=manifest["dropout"],
    )
    params.validate_finite()
    return params

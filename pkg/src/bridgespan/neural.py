"""Small convolutional Q-network in plain numpy.

Two strided 4x4 convolutions (16 and 32 filters, relu), a flatten, a
128-unit relu dense layer and a linear head with one output per action.
Images are NHWC.  Conv kernels are stored ``[out][in][kh][kw]`` and dense
weights ``[out][in]``, which is also the checkpoint order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DTYPE = np.float32

CONV, FLATTEN, DENSE = "conv", "flatten", "dense"
_KIND_CODES = {FLATTEN: 0, CONV: 1, DENSE: 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

CHECKPOINT_MAGIC = b"BSQN"
CHECKPOINT_VERSION = 1


class CheckpointFormatError(ValueError):
    """Checkpoint bytes are malformed or do not fit the expected network."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int = 0
    kernel: int = 0
    stride: int = 0
    activation: str = "linear"


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]

    @classmethod
    def q_network(
        cls,
        cell_pixels: int = 16,
        num_rows: int = 3,
        num_columns: int = 80,
        num_actions: int = 5,
        filters: tuple[int, int] = (16, 32),
        hidden: int = 128,
    ) -> "NetworkSpec":
        """The gridworld Q-network for a rendered ``num_rows x num_columns`` grid."""
        spec = cls(
            input_shape=(cell_pixels * num_rows, cell_pixels * num_columns, 3),
            layers=(
                LayerSpec(CONV, filters[0], 4, 4, "relu"),
                LayerSpec(CONV, filters[1], 4, 4, "relu"),
                LayerSpec(FLATTEN),
                LayerSpec(DENSE, hidden, activation="relu"),
                LayerSpec(DENSE, num_actions),
            ),
        )
        spec.output_shapes()
        return spec

    def output_shapes(self) -> list[tuple[int, ...]]:
        """Per-layer output shapes (batch axis omitted)."""
        shape: tuple[int, ...] = tuple(self.input_shape)
        shapes = []
        for i, layer in enumerate(self.layers):
            if layer.kind == CONV:
                if len(shape) != 3:
                    raise ValueError(f"layer {i}: conv needs an HxWxC input, got {shape}")
                h = (shape[0] - layer.kernel) // layer.stride + 1
                w = (shape[1] - layer.kernel) // layer.stride + 1
                if h < 1 or w < 1:
                    raise ValueError(
                        f"layer {i}: {layer.kernel}x{layer.kernel} kernel does not fit "
                        f"input {shape[0]}x{shape[1]}"
                    )
                shape = (h, w, layer.units)
            elif layer.kind == FLATTEN:
                shape = (int(np.prod(shape)),)
            elif layer.kind == DENSE:
                if len(shape) != 1:
                    raise ValueError(f"layer {i}: dense needs a flat input, got {shape}")
                shape = (layer.units,)
            else:
                raise ValueError(f"layer {i}: unknown kind {layer.kind!r}")
            shapes.append(shape)
        return shapes

    def param_shapes(self) -> list[tuple[tuple[int, ...], tuple[int, ...]] | None]:
        """``(weight_shape, bias_shape)`` per layer, ``None`` for flatten."""
        out = []
        prev: tuple[int, ...] = tuple(self.input_shape)
        for layer, shape in zip(self.layers, self.output_shapes()):
            if layer.kind == CONV:
                out.append(((layer.units, prev[2], layer.kernel, layer.kernel), (layer.units,)))
            elif layer.kind == DENSE:
                out.append(((layer.units, prev[0]), (layer.units,)))
            else:
                out.append(None)
            prev = shape
        return out

    @property
    def num_actions(self) -> int:
        return self.output_shapes()[-1][0]


def param_count(spec: NetworkSpec) -> tuple[list[int], int]:
    """Per-layer trainable parameter counts and their total."""
    counts = []
    for shapes in spec.param_shapes():
        if shapes is None:
            counts.append(0)
        else:
            w, b = shapes
            counts.append(int(np.prod(w)) + int(np.prod(b)))
    return counts, sum(counts)


@dataclass
class ParameterSet:
    spec: NetworkSpec
    weights: list[np.ndarray | None]
    biases: list[np.ndarray | None]

    def arrays(self) -> list[np.ndarray]:
        """All trainable arrays in canonical order (weights then bias, per layer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            if w is not None:
                out.extend((w, b))
        return out

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays())

    @property
    def dtype(self) -> np.dtype:
        return self.arrays()[0].dtype

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def copy(self) -> "ParameterSet":
        return self.astype(self.dtype)

    def astype(self, dtype) -> "ParameterSet":
        cast = lambda a: None if a is None else np.array(a, dtype=dtype)  # noqa: E731
        return ParameterSet(self.spec, [cast(w) for w in self.weights], [cast(b) for b in self.biases])

    def assign(self, other: "ParameterSet") -> None:
        """Copy ``other``'s values into this set's arrays in place."""
        for dst, src in zip(self.arrays(), other.arrays()):
            dst[...] = src

    def zeros_like(self) -> "ParameterSet":
        z = lambda a: None if a is None else np.zeros_like(a)  # noqa: E731
        return ParameterSet(self.spec, [z(w) for w in self.weights], [z(b) for b in self.biases])

    def equal(self, other: "ParameterSet") -> bool:
        mine, theirs = self.arrays(), other.arrays()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and a.dtype == b.dtype and a.tobytes() == b.tobytes()
            for a, b in zip(mine, theirs)
        )


def init_network(spec: NetworkSpec, seed: int | None = 0) -> ParameterSet:
    """He-uniform weights for relu layers, Glorot-uniform otherwise; zero biases."""
    rng = np.random.default_rng(seed)
    weights: list[np.ndarray | None] = []
    biases: list[np.ndarray | None] = []
    for layer, shapes in zip(spec.layers, spec.param_shapes()):
        if shapes is None:
            weights.append(None)
            biases.append(None)
            continue
        w_shape, b_shape = shapes
        receptive = int(np.prod(w_shape[2:])) if len(w_shape) == 4 else 1
        fan_in = w_shape[1] * receptive
        fan_out = w_shape[0] * receptive
        if layer.activation == "relu":
            limit = np.sqrt(6.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=w_shape).astype(DTYPE))
        biases.append(np.zeros(b_shape, dtype=DTYPE))
    return ParameterSet(spec, weights, biases)


# forward / backward ------------------------------------------------------------


def _patches(x: np.ndarray, kernel: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    """``(N, out_h, out_w, C*k*k)`` with the trailing axis ordered ``[C][kh][kw]``."""
    windows = sliding_window_view(x, (kernel, kernel), axis=(1, 2))
    windows = windows[:, : out_h * stride : stride, : out_w * stride : stride]
    n, c = x.shape[0], x.shape[3]
    return windows.reshape(n, out_h, out_w, c * kernel * kernel)


@dataclass
class ForwardCache:
    spec: NetworkSpec
    batch: int
    inputs: list[np.ndarray] = field(default_factory=list)  # per-layer input (patches for conv)
    pre: list[np.ndarray | None] = field(default_factory=list)  # pre-activation, relu layers only
    in_shapes: list[tuple[int, ...]] = field(default_factory=list)


def forward(
    params: ParameterSet, images: np.ndarray, keep_cache: bool = False
) -> np.ndarray | tuple[np.ndarray, ForwardCache]:
    """Q-values for one image ``(H, W, 3)`` or a batch ``(N, H, W, 3)``.

    Inputs are expected normalized to [0, 1].  With ``keep_cache`` the
    activations needed by :func:`backward` are returned as well.
    """
    spec = params.spec
    x = np.asarray(images)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.shape[1:] != tuple(spec.input_shape):
        raise ValueError(f"input shape {x.shape[1:]} does not match network {spec.input_shape}")
    x = x.astype(params.dtype, copy=False)
    cache = ForwardCache(spec, x.shape[0]) if keep_cache else None
    shapes = spec.output_shapes()
    for i, layer in enumerate(spec.layers):
        w, b = params.weights[i], params.biases[i]
        if cache is not None:
            cache.in_shapes.append(x.shape)
        if layer.kind == CONV:
            out_h, out_w, _ = shapes[i]
            cols = _patches(x, layer.kernel, layer.stride, out_h, out_w)
            z = cols @ w.reshape(w.shape[0], -1).T + b
            layer_input = cols
        elif layer.kind == DENSE:
            z = x @ w.T + b
            layer_input = x
        else:
            z = x.reshape(x.shape[0], -1)
            layer_input = None
        if layer.activation == "relu" and layer.kind != FLATTEN:
            x = np.maximum(z, 0)
        else:
            x = z
        if cache is not None:
            cache.inputs.append(layer_input)
            cache.pre.append(z if layer.activation == "relu" and layer.kind != FLATTEN else None)
    q = x[0] if single else x
    return (q, cache) if keep_cache else q


def backward(params: ParameterSet, cache: ForwardCache, dq: np.ndarray) -> ParameterSet:
    """Gradients of ``sum(dq * q)`` with respect to every parameter."""
    if cache is None or cache.spec != params.spec:
        raise RuntimeError("activation cache was not produced by this network")
    grad = np.asarray(dq, dtype=params.dtype)
    if grad.ndim == 1:
        grad = grad[None]
    if grad.shape != (cache.batch, params.spec.num_actions):
        raise RuntimeError(
            f"upstream gradient shape {grad.shape} does not match cached batch "
            f"({cache.batch}, {params.spec.num_actions})"
        )
    grads = params.zeros_like()
    for i in range(len(params.spec.layers) - 1, -1, -1):
        layer = params.spec.layers[i]
        if cache.pre[i] is not None:
            grad = grad * (cache.pre[i] > 0)
        if layer.kind == DENSE:
            w = params.weights[i]
            grads.weights[i][...] = grad.T @ cache.inputs[i]
            grads.biases[i][...] = grad.sum(axis=0)
            if i:
                grad = grad @ w
        elif layer.kind == CONV:
            w = params.weights[i]
            cols = cache.inputs[i]
            g2 = grad.reshape(-1, w.shape[0])
            grads.weights[i][...] = (g2.T @ cols.reshape(g2.shape[0], -1)).reshape(w.shape)
            grads.biases[i][...] = g2.sum(axis=0)
            if i:
                grad = _conv_input_grad(grad, w, layer, cache.in_shapes[i])
        else:
            grad = grad.reshape(cache.in_shapes[i])
    return grads


def _conv_input_grad(
    grad: np.ndarray, w: np.ndarray, layer: LayerSpec, in_shape: tuple[int, ...]
) -> np.ndarray:
    n, out_h, out_w, _ = grad.shape
    k, s = layer.kernel, layer.stride
    c = w.shape[1]
    dcols = (grad.reshape(-1, w.shape[0]) @ w.reshape(w.shape[0], -1)).reshape(n, out_h, out_w, c, k, k)
    dx = np.zeros(in_shape, dtype=grad.dtype)
    for di in range(k):
        for dj in range(k):
            dx[:, di : di + s * out_h : s, dj : dj + s * out_w : s, :] += dcols[..., di, dj]
    return dx


# optimizer ---------------------------------------------------------------------


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ParameterSet, lr: float = 1e-4, **kwargs) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], lr=lr, **kwargs)


def adam_step(params: ParameterSet, grads: ParameterSet, state: AdamState) -> tuple[ParameterSet, AdamState]:
    """One bias-corrected Adam update, applied in place."""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.m):
        raise RuntimeError("parameters, gradients and optimizer state are not congruent")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    step = state.lr * np.sqrt(1.0 - b2**state.t) / (1.0 - b1**state.t)
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise RuntimeError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= (step * m / (np.sqrt(v) + state.eps * np.sqrt(1.0 - b2**state.t))).astype(p.dtype)
    return params, state


# checkpoints -------------------------------------------------------------------

_HEADER = struct.Struct("<4sHH")
_LAYER = struct.Struct("<B4H")


def _layer_shape(weight_shape: tuple[int, ...] | None) -> tuple[int, int, int, int]:
    if weight_shape is None:
        return (0, 0, 0, 0)
    return tuple(weight_shape) + (0,) * (4 - len(weight_shape))  # type: ignore[return-value]


def encode_checkpoint(params: ParameterSet) -> bytes:
    spec = params.spec
    chunks = [_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(spec.layers))]
    for layer, w in zip(spec.layers, params.weights):
        shape = _layer_shape(None if w is None else w.shape)
        if max(shape) > 0xFFFF:
            raise ValueError(f"dimension {max(shape)} does not fit the checkpoint header")
        chunks.append(_LAYER.pack(_KIND_CODES[layer.kind], *shape))
    chunks.extend(np.asarray(a, dtype="<f4").tobytes() for a in params.arrays())
    return b"".join(chunks)


def save_checkpoint(params: ParameterSet, path: str | Path) -> None:
    Path(path).write_bytes(encode_checkpoint(params))


def decode_checkpoint(data: bytes, spec: NetworkSpec) -> ParameterSet:
    if len(data) < _HEADER.size:
        raise CheckpointFormatError("checkpoint is truncated")
    magic, version, count = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    if count != len(spec.layers):
        raise CheckpointFormatError(f"checkpoint has {count} layers, network has {len(spec.layers)}")
    offset = _HEADER.size
    if len(data) < offset + count * _LAYER.size:
        raise CheckpointFormatError("checkpoint is truncated")
    for layer, shapes in zip(spec.layers, spec.param_shapes()):
        code, *shape = _LAYER.unpack_from(data, offset)
        offset += _LAYER.size
        expected = _layer_shape(None if shapes is None else shapes[0])
        if _CODE_KINDS.get(code) != layer.kind or tuple(shape) != expected:
            raise CheckpointFormatError(
                f"layer mismatch: file has kind {code} shape {tuple(shape)}, "
                f"network expects {layer.kind} {expected}"
            )
    template = init_network(spec, seed=0).zeros_like()
    expected_bytes = offset + template.size * 4
    if len(data) != expected_bytes:
        raise CheckpointFormatError(f"expected {expected_bytes} bytes, got {len(data)}")
    for a in template.arrays():
        nbytes = a.size * 4
        a[...] = np.frombuffer(data, dtype="<f4", count=a.size, offset=offset).reshape(a.shape)
        offset += nbytes
    return template


def load_checkpoint(path: str | Path, spec: NetworkSpec) -> ParameterSet:
    """Read a checkpoint written by :func:`save_checkpoint` for ``spec``."""
    return decode_checkpoint(Path(path).read_bytes(), spec)

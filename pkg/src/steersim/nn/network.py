"""Network assembly: layer stack, composed forward/backward, SGD, checkpoints.

The default architecture is a three-conv regression net:

    conv 5x5/20 - relu - pool - drop(.1)
    conv 5x5/48 - relu - pool - drop(.1)
    conv 3x3/C3 - relu - drop(.1)
    fc 500 - relu - drop(.5) - fc 1

Shapes are reported as (channels, height, width) even though arrays are
stored channels-last. Forward in eval mode is a pure function of
(state, input); train mode draws dropout masks from counter-based
streams keyed on (state seed, step, layer index), so a given iteration
is reproducible in isolation.
"""

from dataclasses import dataclass

import numpy as np

from .. import binio
from . import layers

NET_MAGIC = b"EAD-NET1"
NET_VERSION = 1

_KIND_TAGS = {"conv": 1, "maxpool": 2, "relu": 3, "dropout": 4, "fc": 5}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}

_INIT_TAG = 0x696e6974
_DROPOUT_TAG = 0x64726f70

# Fig-style chain of the full-size default net (channels, height, width).
REFERENCE_INPUT_CHW = (3, 100, 190)
REFERENCE_FEATURE_CHAIN = (
    (20, 96, 186),
    (20, 48, 93),
    (48, 44, 89),
    (48, 22, 44),
    (64, 20, 42),
    (500,),
    (1,),
)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel: tuple = None
    out_maps: int = None
    out_units: int = None
    stride: int = 1
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in _KIND_TAGS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.kind in ("conv", "maxpool") and (self.kernel is None or len(self.kernel) != 2):
            raise ValueError(f"{self.kind} needs a (kh, kw) kernel")
        if self.kind == "conv" and (self.out_maps is None or self.out_maps < 1):
            raise ValueError("conv needs out_maps >= 1")
        if self.kind == "fc" and (self.out_units is None or self.out_units < 1):
            raise ValueError("fc needs out_units >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


def conv(kh, kw, out_maps, stride=1):
    return LayerSpec("conv", kernel=(kh, kw), out_maps=out_maps, stride=stride)


def maxpool():
    return LayerSpec("maxpool", kernel=(2, 2), stride=2)


def relu():
    return LayerSpec("relu")


def dropout(rate):
    return LayerSpec("dropout", dropout_rate=rate)


def fc(out_units):
    return LayerSpec("fc", out_units=out_units)


def default_architecture(conv3_maps=64):
    return (
        conv(5, 5, 20), relu(), maxpool(), dropout(0.1),
        conv(5, 5, 48), relu(), maxpool(), dropout(0.1),
        conv(3, 3, conv3_maps), relu(), dropout(0.1),
        fc(500), relu(), dropout(0.5),
        fc(1),
    )


def shape_chain(specs, input_chw):
    """Per-layer output shapes as (C, H, W) / (D,) tuples, input first.

    Raises ShapeError where a kernel does not fit its input, so building
    a state validates the whole chain.
    """
    chain = [tuple(input_chw)]
    cur = tuple(input_chw)
    for spec in specs:
        if spec.kind == "conv":
            c, h, w = cur
            kh, kw = spec.kernel
            if kh > h or kw > w:
                raise layers.ShapeError(f"conv kernel {spec.kernel} exceeds input {cur}")
            cur = (spec.out_maps, (h - kh) // spec.stride + 1, (w - kw) // spec.stride + 1)
        elif spec.kind == "maxpool":
            c, h, w = cur
            if h < 2 or w < 2:
                raise layers.ShapeError(f"maxpool input {cur} smaller than 2x2")
            cur = (c, h // 2, w // 2)
        elif spec.kind == "fc":
            d = int(np.prod(cur))
            cur = (spec.out_units,)
        # relu/dropout keep the shape
        chain.append(cur)
    return chain


class NetworkState:
    """Layer specs plus their parameters. Owns nothing mutable but the arrays."""

    def __init__(self, specs, input_chw, params, rng_seed):
        self.specs = tuple(specs)
        self.input_chw = tuple(input_chw)
        self.params = params
        self.rng_seed = int(rng_seed)
        self.chain = shape_chain(self.specs, self.input_chw)

    @classmethod
    def initialize(cls, specs, input_chw, seed):
        """Fan-in scaled uniform weights (+-sqrt(6/fan_in)), zero biases."""
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, _INIT_TAG], dtype=np.uint64)))
        chain = shape_chain(specs, input_chw)
        params = []
        for i, spec in enumerate(specs):
            if spec.kind == "conv":
                c = chain[i][0]
                kh, kw = spec.kernel
                fan_in = c * kh * kw
                bound = np.sqrt(6.0 / fan_in)
                w = rng.uniform(-bound, bound, size=(kh, kw, c, spec.out_maps)).astype(np.float32)
                b = np.zeros(spec.out_maps, dtype=np.float32)
                params.append((w, b))
            elif spec.kind == "fc":
                d = int(np.prod(chain[i]))
                bound = np.sqrt(6.0 / d)
                w = rng.uniform(-bound, bound, size=(d, spec.out_units)).astype(np.float32)
                b = np.zeros(spec.out_units, dtype=np.float32)
                params.append((w, b))
            else:
                params.append(None)
        return cls(specs, input_chw, params, seed)

    def feature_shapes(self):
        """Shapes after each shape-changing layer (the Fig-style chain)."""
        out = []
        for spec, shape in zip(self.specs, self.chain[1:]):
            if spec.kind in ("conv", "maxpool", "fc"):
                out.append(shape)
        return tuple(out)

    def astype(self, dtype):
        params = [None if p is None else (p[0].astype(dtype), p[1].astype(dtype)) for p in self.params]
        return NetworkState(self.specs, self.input_chw, params, self.rng_seed)

    def copy(self):
        params = [None if p is None else (p[0].copy(), p[1].copy()) for p in self.params]
        return NetworkState(self.specs, self.input_chw, params, self.rng_seed)

    def param_bytes(self):
        """Concatenated little-endian float32 parameter payload (for digests)."""
        chunks = []
        for p in self.params:
            if p is not None:
                chunks.append(p[0].astype("<f4", copy=False).tobytes())
                chunks.append(p[1].astype("<f4", copy=False).tobytes())
        return b"".join(chunks)


def _dropout_rng(seed, step, layer_idx):
    bg = np.random.Philox(key=np.array([seed, _DROPOUT_TAG], dtype=np.uint64),
                          counter=np.array([step, layer_idx, 0, 0], dtype=np.uint64))
    return np.random.Generator(bg)


def forward(state, batch, mode="eval", step=0, check_finite=True):
    """Run the stack over a channels-last batch. Returns (predictions, caches).

    batch: (N, H, W, C) float; predictions: (N,) unbounded reals.
    """
    c, h, w = state.input_chw
    if batch.ndim != 4 or batch.shape[1:] != (h, w, c):
        raise layers.ShapeError(f"batch {batch.shape} does not match input (N, {h}, {w}, {c})")
    cur = batch
    caches = []
    for i, spec in enumerate(state.specs):
        if spec.kind == "conv":
            wgt, b = state.params[i]
            cur, cache = layers.conv_forward(cur, wgt, b, spec.stride)
            caches.append(cache)
        elif spec.kind == "maxpool":
            out, argmax = layers.maxpool_forward(cur)
            caches.append((argmax, cur.shape))
            cur = out
        elif spec.kind == "relu":
            caches.append(cur)
            cur = layers.relu(cur)
        elif spec.kind == "dropout":
            if mode == "train" and spec.dropout_rate > 0.0:
                rng = _dropout_rng(state.rng_seed, step, i)
                cur, mask = layers.dropout(cur, spec.dropout_rate, rng, mode)
            else:
                mask = None
            caches.append(mask)
        elif spec.kind == "fc":
            flat_shape = cur.shape
            if cur.ndim > 2:
                cur = cur.reshape(cur.shape[0], -1)
            wgt, b = state.params[i]
            cur, cache = layers.fc_forward(cur, wgt, b)
            caches.append((cache, flat_shape))
    pred = cur.reshape(-1)
    if check_finite and not np.isfinite(pred).all():
        raise FloatingPointError("non-finite prediction in forward pass")
    return pred, caches


def backward(state, caches, grad_pred, check_finite=True):
    """Backpropagate d(loss)/d(pred).

    Returns (grads, grad_input): per-layer (dW, db) aligned with params,
    plus the gradient w.r.t. the batch itself.
    """
    grads = [None] * len(state.specs)
    g = np.asarray(grad_pred).reshape(-1, 1)
    for i in range(len(state.specs) - 1, -1, -1):
        spec = state.specs[i]
        if spec.kind == "fc":
            cache, flat_shape = caches[i]
            g, gw, gb = layers.fc_backward(cache, g)
            grads[i] = (gw, gb)
            if len(flat_shape) > 2:
                g = g.reshape(flat_shape)
        elif spec.kind == "dropout":
            g = layers.dropout_backward(caches[i], g)
        elif spec.kind == "relu":
            g = layers.relu_backward(caches[i], g)
        elif spec.kind == "maxpool":
            argmax, in_shape = caches[i]
            g = layers.maxpool_backward(argmax, g, in_shape)
        elif spec.kind == "conv":
            g, gw, gb = layers.conv_backward(caches[i], g)
            grads[i] = (gw, gb)
    if check_finite and not np.isfinite(g).all():
        raise FloatingPointError("non-finite input gradient in backward pass")
    return grads, g


def init_velocities(state):
    return [None if p is None else (np.zeros_like(p[0]), np.zeros_like(p[1])) for p in state.params]


def sgd_step(state, grads, lr, momentum, velocities):
    """In-place momentum update: v <- momentum*v - lr*g; w <- w + v."""
    for i, (p, g) in enumerate(zip(state.params, grads)):
        if p is None:
            continue
        if g is None:
            raise ValueError(f"missing gradient for layer {i} ({state.specs[i].kind})")
        for (arr, grad, vel) in zip(p, g, velocities[i]):
            if arr.shape != grad.shape:
                raise layers.ShapeError(f"gradient shape {grad.shape} does not match parameter {arr.shape} "
                                        f"in layer {i} ({state.specs[i].kind})")
            if not np.isfinite(grad).all():
                raise FloatingPointError(f"non-finite gradient in layer {i} ({state.specs[i].kind})")
            vel *= momentum
            vel -= lr * grad.astype(vel.dtype, copy=False)
            arr += vel
    return state


# ------------------------------------------------------------ container

def _spec_ints(spec, in_shape):
    if spec.kind == "conv":
        return [spec.out_maps, in_shape[0], spec.kernel[0], spec.kernel[1], spec.stride]
    if spec.kind == "maxpool":
        return [spec.kernel[0], spec.kernel[1], spec.stride]
    if spec.kind == "dropout":
        return [round(spec.dropout_rate * 1_000_000)]  # parts per million
    if spec.kind == "fc":
        return [spec.out_units, int(np.prod(in_shape))]
    return []


def write_network(state, path):
    with open(path, "wb") as fh:
        fh.write(NET_MAGIC)
        w = binio.PayloadWriter(fh)
        w.pack("<IQI", NET_VERSION, state.rng_seed, len(state.specs))
        w.pack("<III", *state.input_chw)
        for i, spec in enumerate(state.specs):
            ints = _spec_ints(spec, state.chain[i])
            w.pack("<BB", _KIND_TAGS[spec.kind], len(ints))
            for v in ints:
                w.pack("<i", v)
            if state.params[i] is None:
                w.pack("<QQ", 0, 0)
            else:
                wgt, b = state.params[i]
                w.pack("<Q", wgt.size)
                w.write(wgt.astype("<f4", copy=False).tobytes())
                w.pack("<Q", b.size)
                w.write(b.astype("<f4", copy=False).tobytes())
        w.finish()


def _spec_from_ints(kind, ints):
    if kind == "conv":
        out_maps, _in_c, kh, kw, stride = ints
        return LayerSpec("conv", kernel=(kh, kw), out_maps=out_maps, stride=stride)
    if kind == "maxpool":
        kh, kw, stride = ints
        return LayerSpec("maxpool", kernel=(kh, kw), stride=stride)
    if kind == "dropout":
        return LayerSpec("dropout", dropout_rate=ints[0] / 1_000_000)
    if kind == "fc":
        return LayerSpec("fc", out_units=ints[0])
    return LayerSpec(kind)


def read_network(path):
    with open(path, "rb") as fh:
        binio.expect_magic(fh, NET_MAGIC)
        r = binio.PayloadReader(fh)
        version, seed, n_layers = r.unpack("<IQI", "header")
        if version != NET_VERSION:
            raise binio.BadMagicError(f"unsupported network container version {version}")
        input_chw = r.unpack("<III", "input shape")
        specs = []
        params = []
        for li in range(n_layers):
            tag, n_ints = r.unpack("<BB", f"layer {li} header")
            if tag not in _TAG_KINDS:
                raise binio.ContainerError(f"unknown layer tag {tag} in layer {li}")
            ints = [r.unpack("<i", "spec int")[0] for _ in range(n_ints)]
            spec = _spec_from_ints(_TAG_KINDS[tag], ints)
            (nw,) = r.unpack("<Q", "weight count")
            wdata = np.frombuffer(r.read(4 * nw, f"layer {li} weights"), dtype="<f4").copy()
            (nb,) = r.unpack("<Q", "bias count")
            bdata = np.frombuffer(r.read(4 * nb, f"layer {li} biases"), dtype="<f4").copy()
            specs.append(spec)
            params.append(None if nw == 0 and nb == 0 else (wdata, bdata))
        r.verify()
    state = NetworkState(specs, input_chw, [None] * len(specs), seed)
    # reshape flat payloads against the validated chain
    shaped = []
    for i, spec in enumerate(specs):
        if params[i] is None:
            shaped.append(None)
            continue
        wdata, bdata = params[i]
        if spec.kind == "conv":
            kh, kw = spec.kernel
            c = state.chain[i][0]
            shaped.append((wdata.reshape(kh, kw, c, spec.out_maps), bdata))
        else:
            d = int(np.prod(state.chain[i]))
            shaped.append((wdata.reshape(d, spec.out_units), bdata))
    state.params = shaped
    return state


def default_network(input_chw, seed, conv3_maps=64):
    """Initialized default net; asserts the documented shape chain at full size."""
    state = NetworkState.initialize(default_architecture(conv3_maps), input_chw, seed)
    if tuple(input_chw) == REFERENCE_INPUT_CHW and conv3_maps == 64:
        if state.feature_shapes() != REFERENCE_FEATURE_CHAIN:
            raise AssertionError(f"default architecture chain drifted: {state.feature_shapes()}")
    return state

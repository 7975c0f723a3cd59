"""SRCNN-style super-resolution: same-size convolution stack, weight files,
analytic gradients and a small SGD trainer for patch pairs.

Convolutions are cross-correlations with replicate padding by the kernel
radius, so every layer preserves spatial size.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ValidationError
from .imgcore import Image

log = logging.getLogger(__name__)

RELU = "relu"
NONE = "none"
_ACT_CODES = {NONE: 0, RELU: 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}

MAGIC = b"SRCW"
FORMAT_VERSION = 1

#: (out, in, kh, kw, activation) per layer of the published 9-5-5 network
DEFAULT_ARCH = ((64, 1, 9, 9, RELU), (32, 64, 5, 5, RELU), (1, 32, 5, 5, NONE))
#: narrow network the desk trainer uses by default
DESK_ARCH = ((8, 1, 5, 5, RELU), (4, 8, 3, 3, RELU), (1, 4, 3, 3, NONE))


@dataclass(frozen=True, eq=False)
class ConvLayer:
    weights: np.ndarray  # (out, in, kh, kw)
    bias: np.ndarray  # (out,)
    activation: str = NONE

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 4:
            raise ValidationError(f"weights must be 4-D (out, in, kh, kw), got shape {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise ValidationError(f"bias length {b.shape[0]} != out_channels {w.shape[0]}")
        if w.shape[2] % 2 == 0 or w.shape[3] % 2 == 0:
            raise ValidationError(f"kernel {w.shape[2]}x{w.shape[3]} must have odd sides")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValidationError("non-finite weight or bias")
        if self.activation not in _ACT_CODES:
            raise ValidationError(f"unknown activation {self.activation!r}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self):
        return self.weights.shape[0]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def kernel_h(self):
        return self.weights.shape[2]

    @property
    def kernel_w(self):
        return self.weights.shape[3]

    def __eq__(self, other):
        if not isinstance(other, ConvLayer):
            return NotImplemented
        return (self.activation == other.activation
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.bias, other.bias))


@dataclass(frozen=True, eq=True)
class SrcnnModel:
    layers: tuple = field(default_factory=tuple)
    input_channels: int = 1

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValidationError("model has no layers")
        prev = self.input_channels
        for i, layer in enumerate(layers):
            if layer.in_channels != prev:
                raise ValidationError(
                    f"layer {i} expects {layer.in_channels} inputs but receives {prev}")
            prev = layer.out_channels
        if prev != self.input_channels:
            raise ValidationError(
                f"final layer outputs {prev} channels, model input has {self.input_channels}")
        if layers[-1].activation != NONE:
            raise ValidationError("final layer must have no activation")

    @property
    def receptive_radius(self):
        """(ry, rx): total border that sees padded samples."""
        return (sum(l.kernel_h // 2 for l in self.layers),
                sum(l.kernel_w // 2 for l in self.layers))


def _pad(planes, layer):
    ph, pw = layer.kernel_h // 2, layer.kernel_w // 2
    return np.pad(planes, ((0, 0), (ph, ph), (pw, pw)), mode="edge")


def _activate(z, activation):
    return np.maximum(z, 0.0) if activation == RELU else z


def conv2d(planes, layer):
    """Apply one layer to a (C, H, W) stack; output is (out, H, W)."""
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim == 2:
        planes = planes[None]
    if planes.shape[0] != layer.in_channels:
        raise ValidationError(f"layer expects {layer.in_channels} channels, got {planes.shape[0]}")
    z = kernels.conv2d_same(_pad(planes, layer), layer.weights, layer.bias)
    return _activate(z, layer.activation)


def run_layers(model, planes):
    """Unclamped network output for a (input_channels, H, W) stack."""
    a = planes
    for layer in model.layers:
        a = conv2d(a, layer)
    return a


def forward(model, img):
    """Super-resolve an (already upsampled) image; output clamped to [0, 1].

    A single-channel model is run on each channel of an RGB image.
    """
    if img.channels == model.input_channels:
        out = run_layers(model, img.data)
    elif model.input_channels == 1:
        out = np.concatenate([run_layers(model, img.data[c:c + 1]) for c in range(img.channels)])
    else:
        raise ValidationError(
            f"{model.input_channels}-channel model cannot process {img.channels}-channel image")
    return Image(np.clip(out, 0.0, 1.0), img.colorspace)


# -- construction helpers ------------------------------------------------------

def identity_model(channels=1):
    """One 1x1 layer passing each channel through unchanged."""
    return SrcnnModel((ConvLayer(np.eye(channels)[:, :, None, None], np.zeros(channels)),), channels)


def random_model(arch=DEFAULT_ARCH, seed=0, std=1e-3):
    """Gaussian-initialised model (zero biases)."""
    rng = np.random.default_rng(seed)
    layers = [ConvLayer(rng.normal(0.0, std, (o, i, kh, kw)), np.zeros(o), act)
              for o, i, kh, kw, act in arch]
    return SrcnnModel(tuple(layers), arch[0][1])


def near_identity_model(arch=DEFAULT_ARCH, seed=0, std=1e-3):
    """Model that starts as the identity map plus small Gaussian noise.

    Channel 0 of every layer carries the input through the kernel centre;
    inputs are non-negative so the ReLU layers keep it intact.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for o, i, kh, kw, act in arch:
        w = rng.normal(0.0, std, (o, i, kh, kw))
        w[0, 0, kh // 2, kw // 2] += 1.0
        layers.append(ConvLayer(w, np.zeros(o), act))
    return SrcnnModel(tuple(layers), arch[0][1])


# -- weight files --------------------------------------------------------------

def save_weights(model, path):
    """Write the little-endian ``SRCW`` format; tensors are stored as float32."""
    if not isinstance(model, SrcnnModel):
        raise ValidationError("save_weights needs an SrcnnModel")
    chunks = [MAGIC, struct.pack("<III", FORMAT_VERSION, model.input_channels, len(model.layers))]
    for layer in model.layers:
        w32 = layer.weights.astype("<f4")
        b32 = layer.bias.astype("<f4")
        if not (np.all(np.isfinite(w32)) and np.all(np.isfinite(b32))):
            raise ValidationError("weights overflow float32")
        chunks.append(struct.pack("<IIIIB", *layer.weights.shape, _ACT_CODES[layer.activation]))
        chunks.append(w32.tobytes(order="C"))
        chunks.append(b32.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_weights(path):
    """Read an ``SRCW`` weight file into a validated :class:`SrcnnModel`."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if buf[:4] != MAGIC:
        raise ValidationError(f"{path}: bad magic {buf[:4]!r}")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise ValidationError(f"{path}: truncated at byte {pos}")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    version, in_ch, count = struct.unpack("<III", take(12))
    if version != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    layers = []
    for _ in range(count):
        o, i, kh, kw, act = struct.unpack("<IIIIB", take(17))
        if act not in _ACT_NAMES:
            raise ValidationError(f"{path}: bad activation code {act}")
        n = o * i * kh * kw
        w = np.frombuffer(take(4 * n), dtype="<f4").reshape(o, i, kh, kw)
        b = np.frombuffer(take(4 * o), dtype="<f4")
        layers.append(ConvLayer(w.astype(np.float64), b.astype(np.float64), _ACT_NAMES[act]))
    if pos != len(buf):
        raise ValidationError(f"{path}: {len(buf) - pos} trailing bytes")
    return SrcnnModel(tuple(layers), in_ch)


# -- training ------------------------------------------------------------------

def _as_stack(x, channels):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.shape[0] != channels:
        raise ValidationError(f"patch has {x.shape[0]} channels, model expects {channels}")
    return x


def _pair_arrays(model, pair):
    degraded, clean = pair
    if isinstance(degraded, Image):
        degraded = degraded.data
    if isinstance(clean, Image):
        clean = clean.data
    d = _as_stack(degraded, model.input_channels)
    c = _as_stack(clean, model.input_channels)
    if d.shape != c.shape:
        raise ValidationError(f"pair shapes differ: {d.shape} vs {c.shape}")
    ry, rx = model.receptive_radius
    if d.shape[1] <= 2 * ry or d.shape[2] <= 2 * rx:
        raise ValidationError(f"patch {d.shape[1]}x{d.shape[2]} smaller than receptive field")
    return d, c


def _forward_cached(model, x):
    cache = []
    a = x
    for layer in model.layers:
        padded = _pad(a, layer)
        z = kernels.conv2d_same(padded, layer.weights, layer.bias)
        cache.append((padded, z))
        a = _activate(z, layer.activation)
    return a, cache


def _interior_residual(model, out, clean):
    ry, rx = model.receptive_radius
    h, w = out.shape[1:]
    diff = np.zeros_like(out)
    diff[:, ry:h - ry, rx:w - rx] = (out - clean)[:, ry:h - ry, rx:w - rx]
    n = out.shape[0] * (h - 2 * ry) * (w - 2 * rx)
    return diff, n


def interior_loss(model, pair):
    """Mean squared error over the region unaffected by padding."""
    d, c = _pair_arrays(model, pair)
    diff, n = _interior_residual(model, run_layers(model, d), c)
    return float(np.sum(diff * diff) / n)


def _unpad_grad(gpad, ph, pw):
    """Adjoint of edge padding: fold border gradients onto the edge samples."""
    g = gpad.copy()
    if ph:
        g[:, ph, :] += g[:, :ph, :].sum(axis=1)
        g[:, -ph - 1, :] += g[:, -ph:, :].sum(axis=1)
        g = g[:, ph:-ph, :]
    if pw:
        g[:, :, pw] += g[:, :, :pw].sum(axis=2)
        g[:, :, -pw - 1] += g[:, :, -pw:].sum(axis=2)
        g = g[:, :, pw:-pw]
    return g


def _backward(model, cache, delta):
    grads = [None] * len(model.layers)
    for li in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[li]
        padded, z = cache[li]
        if layer.activation == RELU:
            delta = delta * (z > 0)
        kh, kw = layer.kernel_h, layer.kernel_w
        h, w = z.shape[1:]
        windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
        gw = np.einsum("ohw,ihwab->oiab", delta, windows, optimize=True)
        gb = delta.sum(axis=(1, 2))
        grads[li] = (gw, gb)
        if li:
            gpad = np.zeros_like(padded)
            for dy in range(kh):
                for dx in range(kw):
                    gpad[:, dy:dy + h, dx:dx + w] += np.tensordot(
                        layer.weights[:, :, dy, dx], delta, axes=(0, 0))
            delta = _unpad_grad(gpad, kh // 2, kw // 2)
    return grads


def loss_and_gradient(model, pair):
    d, c = _pair_arrays(model, pair)
    out, cache = _forward_cached(model, d)
    diff, n = _interior_residual(model, out, c)
    loss = float(np.sum(diff * diff) / n)
    return loss, _backward(model, cache, 2.0 * diff / n)


def loss_gradient(model, pair):
    """Analytic gradient of :func:`interior_loss`: ``[(dW, db), ...]`` per layer."""
    return loss_and_gradient(model, pair)[1]


def apply_update(model, grads, rate):
    layers = tuple(
        ConvLayer(l.weights - rate * gw, l.bias - rate * gb, l.activation)
        for l, (gw, gb) in zip(model.layers, grads))
    return SrcnnModel(layers, model.input_channels)


def train_patches(model, pairs, rate, epochs, batch_size=8, seed=0):
    """Minibatch SGD on interior MSE.

    Returns ``(model, trace)`` where ``trace[e]`` is the mean per-pair loss
    seen during epoch ``e`` (each loss measured before that batch's step).
    """
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("no training pairs")
    if not rate > 0:
        raise ValidationError(f"learning rate must be positive, got {rate}")
    if batch_size < 1:
        raise ValidationError("batch_size must be >= 1")
    shapes = {np.shape(p[0].data if isinstance(p[0], Image) else p[0]) for p in pairs}
    if len(shapes) != 1:
        raise ValidationError(f"patches differ in size: {sorted(shapes)}")
    rng = np.random.default_rng(seed)
    trace = []
    for epoch in range(int(epochs)):
        order = rng.permutation(len(pairs))
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            acc = None
            for j in batch:
                loss, grads = loss_and_gradient(model, pairs[j])
                total += loss
                if acc is None:
                    acc = [[gw.copy(), gb.copy()] for gw, gb in grads]
                else:
                    for a, (gw, gb) in zip(acc, grads):
                        a[0] += gw
                        a[1] += gb
            scale = 1.0 / len(batch)
            model = apply_update(model, [(gw * scale, gb * scale) for gw, gb in acc], rate)
        trace.append(total / len(pairs))
        log.debug("epoch %d loss %.6g", epoch, trace[-1])
    return model, trace

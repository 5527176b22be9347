"""Network assemblies: the operational U-Net transformer and the cascaded
fault classifier, plus parameter accounting and checkpoint serialization.

Checkpoint wire format (little-endian throughout):

    magic "OPVB" | version u32 | descriptor_len u32 | descriptor JSON |
    float32 parameter payload in descriptor order | crc32 u32

The descriptor is canonical JSON (sorted keys, no whitespace) carrying the
architecture, the named parameter shapes, and free-form training metadata.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from .selfonn import OperationalLayer, OperationalLayerConfig
from .tensor import ShapeError, Tensor, concat

__all__ = [
    "ConfigError",
    "CheckpointError",
    "NotACheckpointError",
    "CheckpointVersionError",
    "TruncatedCheckpointError",
    "PayloadMismatchError",
    "DenseLayer",
    "OpUNet",
    "FaultClassifier",
    "CLASS_TARGETS",
    "predict_label",
    "parameter_count",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"OPVB"
CHECKPOINT_VERSION = 1

# tanh-range score targets used by the MSE classifier loss
CLASS_TARGETS = {
    "healthy": np.array([1.0, -1.0], dtype=np.float32),
    "faulty": np.array([-1.0, 1.0], dtype=np.float32),
}


class ConfigError(ValueError):
    """A model cannot be built from the requested configuration."""


class CheckpointError(ValueError):
    """Base class for checkpoint (de)serialization failures."""


class NotACheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class PayloadMismatchError(CheckpointError):
    """Architecture descriptor and parameter payload sizes disagree."""


def predict_label(scores):
    """Argmax over the 2-vector of class scores."""
    arr = scores.data if isinstance(scores, Tensor) else np.asarray(scores)
    return "healthy" if int(np.argmax(arr.reshape(-1))) == 0 else "faulty"


class DenseLayer:
    """Fully connected layer on row vectors: ``(1, n) @ W + b``."""

    def __init__(self, n_in, n_out, activation="tanh", rng=None, dtype=np.float32):
        rng = rng if rng is not None else np.random.default_rng()
        limit = 1.0 / np.sqrt(n_in)
        self.weights = Tensor(rng.uniform(-limit, limit, size=(n_in, n_out)).astype(dtype),
                              requires_grad=True)
        self.biases = Tensor(np.zeros(n_out, dtype=dtype), requires_grad=True)
        self.activation = activation
        self.n_in = n_in
        self.n_out = n_out

    def __call__(self, x):
        out = x @ self.weights + self.biases
        return out.tanh() if self.activation == "tanh" else out

    def parameters(self):
        return [self.weights, self.biases]


class OpUNet:
    """Length-preserving encoder/decoder of operational layers with skips.

    Five strided generative layers halve the signal length stage by stage;
    five transposed generative layers mirror them back up.  Each decoder
    stage past the first receives the matching-resolution encoder output
    concatenated channel-wise, which doubles its input width.  The final
    stage projects to one channel; every layer ends in tanh, so outputs
    stay in (-1, 1).
    """

    KIND = "opunet"

    def __init__(self, l_seg=4096, channels=(8, 16, 32, 64, 128), kernel=7,
                 decoder_kernel=4, q=3, seed=0, dtype=np.float32):
        if len(channels) != 5:
            raise ConfigError(f"expected 5 encoder widths, got {channels!r}")
        stride = 2
        down = stride ** len(channels)
        if l_seg % down != 0 or l_seg < down:
            raise ConfigError(
                f"segment length {l_seg} must be a positive multiple of {down} "
                f"(the encoder stride product)"
            )
        if kernel % 2 != 1:
            raise ConfigError(f"encoder kernel must be odd for same-length padding, got {kernel}")
        if decoder_kernel - 2 * ((decoder_kernel - stride) // 2) != stride or decoder_kernel < stride:
            raise ConfigError(
                f"decoder kernel {decoder_kernel} cannot exactly double the length at stride {stride}"
            )
        self.l_seg = int(l_seg)
        self.channels = tuple(int(c) for c in channels)
        self.kernel = int(kernel)
        self.decoder_kernel = int(decoder_kernel)
        self.q = int(q)
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)

        rng = np.random.default_rng(seed)
        enc_pad = (kernel - 1) // 2
        dec_pad = (decoder_kernel - stride) // 2
        enc_in = (1,) + self.channels[:-1]
        self.encoder = [
            OperationalLayer(
                OperationalLayerConfig(enc_in[i], self.channels[i], kernel, q,
                                       stride=stride, padding=enc_pad),
                rng, dtype)
            for i in range(5)
        ]
        dec_out = self.channels[-2::-1] + (1,)            # (c4, c3, c2, c1, 1)
        dec_in = (self.channels[-1],) + tuple(2 * c for c in self.channels[-2:0:-1]) + (2 * self.channels[0],)
        self.decoder = [
            OperationalLayer(
                OperationalLayerConfig(dec_in[i], dec_out[i], decoder_kernel, q,
                                       stride=stride, padding=dec_pad, transposed=True),
                rng, dtype)
            for i in range(5)
        ]

    def forward(self, sound):
        """Map a ``(1, l_seg)`` sound map to a ``(1, l_seg)`` vibration map."""
        x = sound if isinstance(sound, Tensor) else Tensor(np.asarray(sound, dtype=self.dtype))
        if x.data.shape != (1, self.l_seg):
            raise ShapeError(f"expected input shape (1, {self.l_seg}), got {x.data.shape}")
        enc_outs = []
        h = x
        for layer in self.encoder:
            h = layer(h)
            enc_outs.append(h)
        h = self.decoder[0](h)
        for j in range(1, 5):
            h = self.decoder[j](concat([h, enc_outs[4 - j]], axis=0))
        return h

    __call__ = forward

    def parameters(self):
        named = []
        for i, layer in enumerate(self.encoder):
            named.append((f"encoder.{i}.weights", layer.weights))
            named.append((f"encoder.{i}.biases", layer.biases))
        for i, layer in enumerate(self.decoder):
            named.append((f"decoder.{i}.weights", layer.weights))
            named.append((f"decoder.{i}.biases", layer.biases))
        return named

    def architecture(self):
        return {
            "l_seg": self.l_seg,
            "channels": list(self.channels),
            "kernel": self.kernel,
            "decoder_kernel": self.decoder_kernel,
            "q": self.q,
            "seed": self.seed,
        }

    @classmethod
    def from_architecture(cls, arch):
        return cls(l_seg=arch["l_seg"], channels=tuple(arch["channels"]), kernel=arch["kernel"],
                   decoder_kernel=arch["decoder_kernel"], q=arch["q"], seed=arch.get("seed", 0))

    def describe(self):
        lines = [f"operational U-Net: l_seg={self.l_seg}, q={self.q}, "
                 f"parameters={parameter_count(self)}"]
        for i, layer in enumerate(self.encoder):
            c = layer.config
            lines.append(f"  encoder.{i}: {c.in_channels}->{c.out_channels} ch, "
                         f"k={c.kernel}, stride={c.stride}, pad={c.padding}")
        for i, layer in enumerate(self.decoder):
            c = layer.config
            lines.append(f"  decoder.{i}: {c.in_channels}->{c.out_channels} ch, "
                         f"k={c.kernel}, stride={c.stride}, pad={c.padding} (transposed)")
        return "\n".join(lines)


class FaultClassifier:
    """Compact operational classifier: 5 strided layers, 2 dense layers, tanh throughout.

    Kernel sizes (81, 41, 21, 7, 7) with strides (8, 4, 2, 2, 2) shrink a
    1-second segment to a short 16-channel map that is flattened into the
    dense head.  The output is a 2-vector of class scores in (-1, 1).
    """

    KIND = "fault_classifier"

    KERNELS = (81, 41, 21, 7, 7)
    STRIDES = (8, 4, 2, 2, 2)

    def __init__(self, l_seg=4096, hidden_channels=16, dense_hidden=32, q=3, seed=0,
                 dtype=np.float32):
        self.l_seg = int(l_seg)
        self.hidden_channels = int(hidden_channels)
        self.dense_hidden = int(dense_hidden)
        self.q = int(q)
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)

        rng = np.random.default_rng(seed)
        in_ch = (1,) + (hidden_channels,) * 4
        self.oplayers = []
        length = self.l_seg
        for i in range(5):
            cfg = OperationalLayerConfig(in_ch[i], hidden_channels, self.KERNELS[i], q,
                                         stride=self.STRIDES[i],
                                         padding=(self.KERNELS[i] - 1) // 2)
            layer = OperationalLayer(cfg, rng, dtype)
            length = layer.output_length(length)
            if length < 1:
                raise ConfigError(
                    f"segment length {l_seg} collapses to {length} samples at layer {i}; "
                    f"the stride chain requires a longer input"
                )
            self.oplayers.append(layer)
        self.feature_length = length
        self.flat_size = hidden_channels * length
        self.dense = [
            DenseLayer(self.flat_size, dense_hidden, "tanh", rng, dtype),
            DenseLayer(dense_hidden, 2, "tanh", rng, dtype),
        ]

    def forward(self, vibration):
        """Score a ``(1, l_seg)`` vibration map; returns a length-2 tensor."""
        x = vibration if isinstance(vibration, Tensor) else Tensor(np.asarray(vibration, dtype=self.dtype))
        if x.data.ndim == 1:
            x = x.reshape(1, -1)
        if x.data.shape != (1, self.l_seg):
            raise ShapeError(f"expected input shape (1, {self.l_seg}), got {x.data.shape}")
        h = x
        for layer in self.oplayers:
            h = layer(h)
        h = h.reshape(1, self.flat_size)
        for layer in self.dense:
            h = layer(h)
        return h.reshape(2)

    __call__ = forward

    def parameters(self):
        named = []
        for i, layer in enumerate(self.oplayers):
            named.append((f"oplayers.{i}.weights", layer.weights))
            named.append((f"oplayers.{i}.biases", layer.biases))
        for i, layer in enumerate(self.dense):
            named.append((f"dense.{i}.weights", layer.weights))
            named.append((f"dense.{i}.biases", layer.biases))
        return named

    def architecture(self):
        return {
            "l_seg": self.l_seg,
            "hidden_channels": self.hidden_channels,
            "dense_hidden": self.dense_hidden,
            "q": self.q,
            "seed": self.seed,
        }

    @classmethod
    def from_architecture(cls, arch):
        return cls(l_seg=arch["l_seg"], hidden_channels=arch["hidden_channels"],
                   dense_hidden=arch["dense_hidden"], q=arch["q"], seed=arch.get("seed", 0))


_MODEL_KINDS = {OpUNet.KIND: OpUNet, FaultClassifier.KIND: FaultClassifier}


def parameter_count(model):
    """Total learnable values: out*in*K*Q + out per operational layer,
    out*in + out per dense layer."""
    return sum(t.data.size for _, t in model.parameters())


def save_checkpoint(model, path, meta=None):
    """Serialize architecture + float32 parameters; round-trips bit-exactly."""
    parent = Path(path).parent
    if parent and not parent.exists():
        parent.mkdir(parents=True, exist_ok=True)
    named = model.parameters()
    descriptor = {
        "kind": model.KIND,
        "arch": model.architecture(),
        "params": [[name, list(t.data.shape)] for name, t in named],
        "meta": meta or {},
    }
    desc_bytes = json.dumps(descriptor, sort_keys=True, separators=(",", ":"),
                            default=float).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(t.data, dtype="<f4").tobytes() for _, t in named)
    body = (
        CHECKPOINT_MAGIC
        + CHECKPOINT_VERSION.to_bytes(4, "little")
        + len(desc_bytes).to_bytes(4, "little")
        + desc_bytes
        + payload
    )
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(body + crc.to_bytes(4, "little"))
    return path


def load_checkpoint(path):
    """Rebuild the model from a checkpoint file; returns ``(model, meta)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != CHECKPOINT_MAGIC:
        raise NotACheckpointError(f"{path}: not a checkpoint (bad magic bytes)")
    version = int.from_bytes(blob[4:8], "little")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    desc_len = int.from_bytes(blob[8:12], "little")
    desc_end = 12 + desc_len
    if len(blob) < desc_end + 4:
        raise TruncatedCheckpointError(f"{path}: file ends inside the descriptor")
    try:
        descriptor = json.loads(blob[12:desc_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: descriptor is not valid JSON: {exc}") from exc

    # size checks precede the CRC so truncation reports as truncation,
    # not as generic corruption
    payload = blob[desc_end:-4]
    shapes = descriptor.get("params", [])
    needed = sum(int(np.prod(shape)) for _, shape in shapes) * 4
    if len(payload) < needed:
        raise TruncatedCheckpointError(
            f"{path}: payload holds {len(payload)} bytes, descriptor demands {needed}"
        )
    if len(payload) != needed:
        raise PayloadMismatchError(
            f"{path}: payload holds {len(payload)} bytes, descriptor demands {needed}"
        )
    stored_crc = int.from_bytes(blob[-4:], "little")
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError(f"{path}: CRC mismatch, file is corrupt")

    kind = descriptor.get("kind")
    if kind not in _MODEL_KINDS:
        raise CheckpointError(f"{path}: unknown model kind {kind!r}")
    model = _MODEL_KINDS[kind].from_architecture(descriptor["arch"])
    named = dict(model.parameters())
    if [n for n, _ in shapes] != [n for n, _ in model.parameters()]:
        raise PayloadMismatchError(f"{path}: parameter names disagree with the architecture")
    offset = 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f4", count=size, offset=offset).reshape(shape)
        offset += size * 4
        target = named[name]
        if tuple(shape) != target.data.shape:
            raise PayloadMismatchError(
                f"{path}: parameter {name} shape {tuple(shape)} disagrees with "
                f"the architecture's {target.data.shape}"
            )
        target.data = arr.astype(np.float32)
    return model, descriptor.get("meta", {})

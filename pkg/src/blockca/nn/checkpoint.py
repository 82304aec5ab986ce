"""Network checkpoints: text descriptor lines with raw little-endian
float64 parameter blocks after each parameterized layer line."""

from __future__ import annotations

import numpy as np

from ..linops import KernelSpec
from .layers import ConvLayer, DeconvLayer, Network, STATELESS_LAYERS

MAGIC = b"blockca-net 1\n"


class CheckpointFormatError(ValueError):
    """Raised when a checkpoint file cannot be decoded."""


def _write_array(f, arr: np.ndarray) -> None:
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(f, shape) -> np.ndarray:
    count = int(np.prod(shape))
    raw = f.read(count * 8)
    if len(raw) != count * 8:
        raise CheckpointFormatError("truncated parameter block")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def save_network(net: Network, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(f"layers {len(net.layers)}\n".encode("ascii"))
        for layer in net.layers:
            if isinstance(layer, (ConvLayer, DeconvLayer)):
                k = layer.kernel
                f.write(f"layer {layer.kind} {k.out_channels} "
                        f"{k.in_channels} {k.height} {k.width} "
                        f"{k.stride} {k.bias.shape[0]}\n".encode("ascii"))
                _write_array(f, k.weights)
                _write_array(f, k.bias)
            else:
                f.write(f"layer {layer.kind}\n".encode("ascii"))


def load_network(path) -> Network:
    with open(path, "rb") as f:
        if f.readline() != MAGIC:
            raise CheckpointFormatError("bad checkpoint header")
        head = f.readline().decode("ascii").split()
        if len(head) != 2 or head[0] != "layers":
            raise CheckpointFormatError("missing layer count")
        layers = []
        for _ in range(int(head[1])):
            fields = f.readline().decode("ascii").split()
            if not fields or fields[0] != "layer":
                raise CheckpointFormatError("missing layer descriptor")
            kind = fields[1]
            if kind in ("conv", "deconv"):
                out_c, in_c, kh, kw, stride, bias_len = map(int, fields[2:8])
                weights = _read_array(f, (out_c, in_c, kh, kw))
                bias = _read_array(f, (bias_len,))
                kernel = KernelSpec(out_c, in_c, kh, kw, stride, weights, bias)
                layers.append(ConvLayer(kernel) if kind == "conv"
                              else DeconvLayer(kernel))
            elif kind in STATELESS_LAYERS:
                layers.append(STATELESS_LAYERS[kind]())
            else:
                raise CheckpointFormatError(f"unknown layer kind {kind!r}")
    return Network(layers)

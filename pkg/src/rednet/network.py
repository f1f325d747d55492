"""Symmetric conv/deconv restoration network: build, run, serialize.

The network is a chain of n convolutions followed by n transposed
convolutions. Skip junctions add an earlier activation into the
pre-activation output of a later layer, followed by ReLU:

  * ``mirror(step)``     taps encoder activations at indices 0, step,
    2*step, ... (index 0 is the network input) and feeds tap i into
    decoder layer 2n - i. The tap-0 junction makes the whole network
    predict a residual on top of its input.
  * ``sequential(block)`` places block-local shortcuts spanning `block`
    consecutive interior layers (the first and last layers sit outside
    the blocks because their channel counts differ).
  * ``none``             a plain chain.

Optional stride-2 encoder layers halve resolution; each is paired with a
stride-2 decoder layer placed symmetrically so the output always matches
the input size. Junctions whose operands would disagree in shape are
rejected when the network is built.
"""

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .layers import (ConvParams, LayerGrads, conv2d_backward, conv2d_forward,
                     deconv2d_backward, deconv2d_forward)
from .tensor import RngStream, check_nchw, gaussian_fill

__all__ = [
    "NetworkConfig",
    "Network",
    "ForwardCache",
    "NetworkGrads",
    "ModelFormatError",
    "build",
    "save",
    "load",
]

MODEL_MAGIC = b"REDN"
MODEL_VERSION = 1

_SKIP_CODES = {"none": 0, "mirror": 1, "sequential": 2}
_SKIP_NAMES = {v: k for k, v in _SKIP_CODES.items()}


@dataclass
class NetworkConfig:
    """Declarative description of the layer chain and its junctions.

    depth is the total layer count (must be even); skip_step is the tap
    step for mirror mode or the block length for sequential mode.
    downsample_layers lists 1-based encoder indices that use stride 2.
    """

    depth: int
    filters: int = 64
    kernel: int = 3
    channels: int = 1
    skip_mode: str = "mirror"
    skip_step: int = 2
    downsample_layers: tuple[int, ...] = ()
    init_seed: int = 0

    def __post_init__(self):
        if self.depth < 2 or self.depth % 2:
            raise ValueError(f"depth must be even and >= 2, got {self.depth}")
        if self.filters < 1:
            raise ValueError(f"filters must be >= 1, got {self.filters}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd and >= 1, got {self.kernel}")
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        if self.skip_mode not in _SKIP_CODES:
            raise ValueError(f"skip_mode must be one of {set(_SKIP_CODES)}, "
                             f"got {self.skip_mode!r}")
        if self.skip_step < 1:
            raise ValueError(f"skip_step must be >= 1, got {self.skip_step}")
        if self.init_seed < 0:
            raise ValueError(f"init_seed must be >= 0, got {self.init_seed}")
        self.downsample_layers = tuple(sorted(set(int(i) for i in
                                                  self.downsample_layers)))
        half = self.depth // 2
        for i in self.downsample_layers:
            if not 1 <= i <= half:
                raise ValueError(f"downsample index {i} outside encoder "
                                 f"range 1..{half}")

    @property
    def half_depth(self) -> int:
        return self.depth // 2


@dataclass
class _Layer:
    kind: str  # "conv" | "deconv"
    params: ConvParams


@dataclass
class ForwardCache:
    """Input plus every post-activation X_1..X_depth from a forward pass."""

    activations: list[np.ndarray]
    owner: "Network" = None


@dataclass
class NetworkGrads:
    """Per-layer parameter gradients plus the gradient w.r.t. the input."""

    layers: list[LayerGrads]
    d_input: np.ndarray


def _junction_table(cfg: NetworkConfig) -> dict[int, int]:
    """Map target layer index (1-based) -> tapped activation index."""
    n = cfg.half_depth
    if cfg.skip_mode == "none":
        return {}
    if cfg.skip_mode == "mirror":
        taps = range(0, n - cfg.skip_step + 1, cfg.skip_step)
        return {2 * n - i: i for i in taps}
    # sequential: blocks of `skip_step` layers tiling the interior 2..2n-1
    table = {}
    start = 2
    while start + cfg.skip_step - 1 <= 2 * n - 1:
        table[start + cfg.skip_step - 1] = start - 1
        start += cfg.skip_step
    return table


class Network:
    """Compiled layer chain with its junction table.

    Immutable in structure after build; parameter arrays are updated in
    place by the optimizer between forward passes.
    """

    def __init__(self, cfg: NetworkConfig, layers: list[_Layer],
                 junctions: dict[int, int], dtype=np.float32):
        self.cfg = cfg
        self.layers = layers
        self.junctions = junctions
        self.dtype = np.dtype(dtype)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def parameters(self) -> list[np.ndarray]:
        """Flat [w1, b1, w2, b2, ...] view of the trainable arrays."""
        out = []
        for layer in self.layers:
            out.append(layer.params.weights)
            out.append(layer.params.bias)
        return out

    def _apply(self, layer: _Layer, x: np.ndarray) -> np.ndarray:
        fwd = conv2d_forward if layer.kind == "conv" else deconv2d_forward
        return fwd(x, layer.params)

    def forward(self, x: np.ndarray, keep_cache: bool = False):
        """Run the chain; returns (output, cache) with cache None unless kept.

        Junction targets compute ReLU(pre-activation + tapped activation);
        all other layers apply a plain ReLU.
        """
        check_nchw(x, "network input")
        if x.shape[1] != self.cfg.channels:
            raise ValueError(f"input has {x.shape[1]} channels, network "
                             f"expects {self.cfg.channels}")
        taps_needed = set(self.junctions.values())
        acts = [x] if keep_cache else None
        tapped = {0: x} if 0 in taps_needed else {}
        cur = x
        for g, layer in enumerate(self.layers, start=1):
            pre = self._apply(layer, cur)
            tap = self.junctions.get(g)
            if tap is not None:
                src = acts[tap] if keep_cache else tapped[tap]
                if src.shape != pre.shape:
                    raise ValueError(
                        f"junction tap {tap} -> layer {g}: shapes "
                        f"{src.shape} vs {pre.shape} disagree")
                cur = np.maximum(pre + src, 0)
            else:
                cur = np.maximum(pre, 0)
            if keep_cache:
                acts.append(cur)
            elif g in taps_needed:
                tapped[g] = cur
        cache = ForwardCache(acts, owner=self) if keep_cache else None
        return cur, cache

    def backward(self, cache: ForwardCache, dy: np.ndarray) -> NetworkGrads:
        """Accumulate gradients along the chain and every junction path."""
        if cache is None or cache.activations is None:
            raise ValueError("backward requires the cache from a forward "
                             "pass run with keep_cache=True")
        if cache.owner is not self:
            raise ValueError("cache does not belong to this network")
        if len(cache.activations) != self.depth + 1:
            raise ValueError(f"stale cache: {len(cache.activations) - 1} "
                             f"activations for a depth-{self.depth} network")
        acts = cache.activations
        if dy.shape != acts[-1].shape:
            raise ValueError(f"dy shape {dy.shape} does not match output "
                             f"{acts[-1].shape}")
        d_acts: list[np.ndarray | None] = [None] * (self.depth + 1)
        d_acts[self.depth] = dy
        grads: list[LayerGrads | None] = [None] * self.depth
        for g in range(self.depth, 0, -1):
            dout = d_acts[g]
            # ReLU mask: the cached activation is max(0, pre [+ tap]).
            gpre = dout * (acts[g] > 0)
            tap = self.junctions.get(g)
            if tap is not None:
                d_acts[tap] = gpre if d_acts[tap] is None \
                    else d_acts[tap] + gpre
            layer = self.layers[g - 1]
            bwd = conv2d_backward if layer.kind == "conv" else deconv2d_backward
            lg = bwd(acts[g - 1], layer.params, gpre)
            grads[g - 1] = lg
            d_acts[g - 1] = lg.d_input if d_acts[g - 1] is None \
                else d_acts[g - 1] + lg.d_input
        return NetworkGrads(layers=grads, d_input=d_acts[0])


def _layer_plan(cfg: NetworkConfig):
    """Yield (kind, in_c, out_c, stride) for each layer in order."""
    n = cfg.half_depth
    down = set(cfg.downsample_layers)
    up = {2 * n - i + 1 for i in down}
    for i in range(1, n + 1):
        in_c = cfg.channels if i == 1 else cfg.filters
        yield "conv", in_c, cfg.filters, 2 if i in down else 1
    for g in range(n + 1, 2 * n + 1):
        out_c = cfg.channels if g == 2 * n else cfg.filters
        yield "deconv", cfg.filters, out_c, 2 if g in up else 1


def _validate_junctions(cfg: NetworkConfig, junctions: dict[int, int]) -> None:
    """Reject junctions whose operands differ in channels or resolution."""
    n = cfg.half_depth
    plan = list(_layer_plan(cfg))
    ch = [cfg.channels]
    scale = [0]  # log2 of resolution relative to the input
    for kind, _, out_c, stride in plan:
        step = -1 if (kind == "conv" and stride == 2) else \
            (1 if (kind == "deconv" and stride == 2) else 0)
        ch.append(out_c)
        scale.append(scale[-1] + step)
    for target, tap in sorted(junctions.items()):
        if ch[tap] != ch[target] or scale[tap] != scale[target]:
            raise ValueError(
                f"junction tap {tap} -> layer {target} mismatches: "
                f"{ch[tap]} ch at scale 2^{scale[tap]} vs "
                f"{ch[target]} ch at scale 2^{scale[target]}")
    if scale[-1] != 0 or ch[-1] != cfg.channels:
        raise ValueError("layer chain does not restore the input shape")


def build(cfg: NetworkConfig, dtype=np.float32) -> Network:
    """Construct the network with He-style Gaussian init from cfg.init_seed."""
    dtype = np.dtype(dtype)
    pad = (cfg.kernel - 1) // 2
    rng = RngStream(cfg.init_seed)
    layers = []
    for kind, in_c, out_c, stride in _layer_plan(cfg):
        w = np.zeros((out_c, in_c, cfg.kernel, cfg.kernel), dtype=dtype)
        gaussian_fill(w, 0.0, float(np.sqrt(2.0 / w[0].size)), rng)
        b = np.zeros(out_c, dtype=dtype)
        layers.append(_Layer(kind, ConvParams(w, b, stride=stride, padding=pad)))
    junctions = _junction_table(cfg)
    _validate_junctions(cfg, junctions)
    return Network(cfg, layers, junctions, dtype=dtype)


class ModelFormatError(ValueError):
    """Raised when a model file is malformed, truncated or corrupted."""


def _pack_config(cfg: NetworkConfig) -> bytes:
    head = struct.pack("<IIIIBIQ", cfg.depth, cfg.filters, cfg.kernel,
                       cfg.channels, _SKIP_CODES[cfg.skip_mode],
                       cfg.skip_step, cfg.init_seed)
    down = struct.pack("<I", len(cfg.downsample_layers))
    down += b"".join(struct.pack("<I", i) for i in cfg.downsample_layers)
    return head + down


def save(net: Network, path) -> None:
    """Write the model file: magic, version, config, float32 params, CRC-32."""
    blob = bytearray()
    blob += MODEL_MAGIC
    blob += struct.pack("<H", MODEL_VERSION)
    blob += _pack_config(net.cfg)
    for layer in net.layers:
        blob += np.ascontiguousarray(
            layer.params.weights, dtype="<f4").tobytes()
        blob += np.ascontiguousarray(layer.params.bias, dtype="<f4").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(bytes(blob))
    import os
    os.replace(tmp, str(path))


def load(path) -> Network:
    """Read a model file back; the result round-trips save() bit-exactly."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 10 or blob[:4] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    off = 6
    try:
        depth, filters, kernel, channels, skip_code, skip_step, seed = \
            struct.unpack_from("<IIIIBIQ", blob, off)
        off += struct.calcsize("<IIIIBIQ")
        (n_down,) = struct.unpack_from("<I", blob, off)
        off += 4
        down = struct.unpack_from(f"<{n_down}I", blob, off)
        off += 4 * n_down
    except struct.error as exc:
        raise ModelFormatError(f"{path}: truncated header") from exc
    if skip_code not in _SKIP_NAMES:
        raise ModelFormatError(f"{path}: unknown skip mode code {skip_code}")
    try:
        cfg = NetworkConfig(depth=depth, filters=filters, kernel=kernel,
                            channels=channels, skip_mode=_SKIP_NAMES[skip_code],
                            skip_step=skip_step, downsample_layers=down,
                            init_seed=seed)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: invalid config: {exc}") from exc
    n_params = sum(out_c * in_c * kernel * kernel + out_c
                   for _, in_c, out_c, _ in _layer_plan(cfg))
    expected = off + 4 * n_params + 4
    if len(blob) != expected:
        raise ModelFormatError(f"{path}: truncated or oversized payload "
                               f"({len(blob)} bytes, expected {expected})")
    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) != crc_stored:
        raise ModelFormatError(f"{path}: checksum mismatch")
    net = build(cfg, dtype=np.float32)
    for layer in net.layers:
        w = layer.params.weights
        layer.params.weights[...] = np.frombuffer(
            blob, dtype="<f4", count=w.size, offset=off).reshape(w.shape)
        off += 4 * w.size
        b = layer.params.bias
        layer.params.bias[...] = np.frombuffer(
            blob, dtype="<f4", count=b.size, offset=off)
        off += 4 * b.size
    return net

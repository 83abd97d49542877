"""Reconstruction attack: a bank of unshared per-pixel 3 -> m1 -> m2 -> 3 networks.

Each pixel position owns its own weights (a 1x1 locally connected stack), so
all parameters are stored with a leading pixel axis and every computation is
a batched matrix product over that axis. Pixels never exchange information,
which is what makes pixel-partitioned threading bit-identical to a serial run.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pixcrypt.cipher import INVERSE_PERMUTATIONS, EncryptionConfig
from pixcrypt.errors import ArgumentError, FormatError, UsageError
from pixcrypt.image_io import Image, stack
from pixcrypt.keygen import MASK64, SplitMix64, Keystream, splitmix64_stream

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")
NET_MAGIC = b"PVNET1"
_HEADER = struct.Struct("<5i")

Batch = Union[Image, Sequence[Image], np.ndarray]


@dataclass(frozen=True)
class ArchConfig:
    m1: int = 8
    m2: int = 32
    m3: int = 3

    def __post_init__(self):
        if self.m1 < 1 or self.m2 < 1:
            raise ArgumentError("m1 and m2 must be positive")
        if self.m3 != 3:
            raise ArgumentError("the output layer must have 3 maps (one RGB pixel)")

    @property
    def params_per_pixel(self) -> int:
        m1, m2, m3 = self.m1, self.m2, self.m3
        return m1 * 3 + m1 + m2 * m1 + m2 + m3 * m2 + m3

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {
            "W1": (self.m1, 3),
            "b1": (self.m1,),
            "W2": (self.m2, self.m1),
            "b2": (self.m2,),
            "W3": (self.m3, self.m2),
            "b3": (self.m3,),
        }


@dataclass(frozen=True)
class TrainConfig:
    """SGD hyperparameters; defaults are the full-scale settings.

    ``per_pixel_loss`` selects the objective whose gradient drives updates.
    When true (default) every pixel network descends its own MSE, i.e. the
    image-mean loss scaled by the pixel count. When false the raw gradient of
    the image-mean loss is used, which spreads each step over ``n`` networks
    and leaves them almost untrained at any practical epoch count.
    """

    epochs: int = 70
    base_lr: float = 0.1
    lr_drop_epochs: Tuple[int, ...] = (40, 60)
    lr_drop_factor: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 128
    seed: int = 0
    per_pixel_loss: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lr_drop_epochs", tuple(sorted(self.lr_drop_epochs)))
        if self.epochs < 1 or self.batch_size < 1:
            raise ArgumentError("epochs and batch_size must be positive")
        if self.base_lr < 0 or self.momentum < 0 or self.weight_decay < 0 or self.lr_drop_factor <= 0:
            raise ArgumentError("learning rate, momentum and weight decay must be non-negative")
        if any(e < 0 or e >= self.epochs for e in self.lr_drop_epochs):
            raise ArgumentError(f"lr drop epochs {self.lr_drop_epochs} outside [0, {self.epochs})")
        if not 0 <= self.seed <= MASK64:
            raise ArgumentError("seed must be a 64-bit unsigned value")


class AttackNetwork:
    """Per-pixel weight banks plus their momentum buffers.

    ``params[name]`` has shape ``(n,) + arch.shapes()[name]`` with pixels in
    row-major order.
    """

    def __init__(self, width: int, height: int, arch: ArchConfig, params: Dict[str, np.ndarray]):
        if width < 1 or height < 1:
            raise ArgumentError(f"invalid dimensions {width}x{height}")
        self.width = width
        self.height = height
        self.arch = arch
        n = width * height
        shapes = arch.shapes()
        self.params = {}
        for name in PARAM_NAMES:
            arr = np.ascontiguousarray(params[name], dtype=np.float64)
            if arr.shape != (n,) + shapes[name]:
                raise ArgumentError(f"{name} has shape {arr.shape}, expected {(n,) + shapes[name]}")
            self.params[name] = arr
        self.velocity = {name: np.zeros_like(arr) for name, arr in self.params.items()}
        self.version = 0

    @property
    def n(self) -> int:
        return self.width * self.height

    @property
    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.params.values())

    def copy(self) -> "AttackNetwork":
        net = AttackNetwork(self.width, self.height, self.arch, {k: v.copy() for k, v in self.params.items()})
        net.velocity = {k: v.copy() for k, v in self.velocity.items()}
        return net

    def flat_parameters(self) -> np.ndarray:
        """Parameters as ``(n, params_per_pixel)``: per layer, weights row-major then biases."""
        n = self.n
        return np.concatenate([self.params[k].reshape(n, -1) for k in PARAM_NAMES], axis=1)

    def to_bytes(self) -> bytes:
        a = self.arch
        header = NET_MAGIC + _HEADER.pack(self.width, self.height, a.m1, a.m2, a.m3)
        return header + self.flat_parameters().astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "AttackNetwork":
        if not data.startswith(NET_MAGIC) or len(data) < len(NET_MAGIC) + _HEADER.size:
            raise FormatError("not a PVNET1 network file")
        width, height, m1, m2, m3 = _HEADER.unpack_from(data, len(NET_MAGIC))
        arch = ArchConfig(m1, m2, m3)
        n = width * height
        body = data[len(NET_MAGIC) + _HEADER.size:]
        if len(body) != 8 * n * arch.params_per_pixel:
            raise FormatError(f"network payload has {len(body)} bytes, expected {8 * n * arch.params_per_pixel}")
        flat = np.frombuffer(body, dtype="<f8").reshape(n, arch.params_per_pixel)
        params, offset = {}, 0
        for name, shape in arch.shapes().items():
            size = int(np.prod(shape))
            params[name] = flat[:, offset:offset + size].reshape((n,) + shape).astype(np.float64)
            offset += size
        return cls(width, height, arch, params)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "AttackNetwork":
        return cls.from_bytes(Path(path).read_bytes())


def _uniform_bank(seed: int, layer: int, n: int, rows: int, cols: int) -> np.ndarray:
    # one SplitMix64 stream per (pixel, layer), seeded seed ^ splitmix64_next(3*pixel + layer)
    idx = np.arange(n, dtype=np.uint64) * np.uint64(3) + np.uint64(layer)
    stream_seeds = np.uint64(seed) ^ splitmix64_stream(idx, 1)[:, 0]
    draws = splitmix64_stream(stream_seeds, rows * cols)
    u = (draws >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    bound = np.sqrt(6.0 / cols)
    return (bound * (2.0 * u - 1.0)).reshape(n, rows, cols)


def init_network(width: int, height: int, arch: ArchConfig = ArchConfig(), seed: int = 0) -> AttackNetwork:
    if width < 1 or height < 1:
        raise ArgumentError(f"invalid dimensions {width}x{height}")
    n = width * height
    params = {}
    for layer, name in enumerate(("W1", "W2", "W3")):
        rows, cols = arch.shapes()[name]
        params[name] = _uniform_bank(seed, layer, n, rows, cols)
        params[name.replace("W", "b")] = np.zeros((n, rows))
    return AttackNetwork(width, height, arch, params)


@dataclass
class ForwardCache:
    x: np.ndarray  # (n, B, 3) normalized input
    z1: np.ndarray
    z2: np.ndarray
    y: np.ndarray  # (n, B, 3)
    batch_shape: Tuple[int, ...]
    single: bool
    net_id: int
    version: int


def _as_batch(images: Batch) -> Tuple[np.ndarray, bool]:
    if isinstance(images, Image):
        return images.pixels[None], True
    if isinstance(images, np.ndarray):
        if images.ndim == 3:
            return images[None], True
        return images, False
    return stack(images), False


def _to_pixel_major(batch: np.ndarray) -> np.ndarray:
    b, h, w, _ = batch.shape
    return np.ascontiguousarray(batch.reshape(b, h * w, 3).transpose(1, 0, 2))


def _from_pixel_major(arr: np.ndarray, batch_shape: Tuple[int, ...]) -> np.ndarray:
    return np.ascontiguousarray(arr.transpose(1, 0, 2)).reshape(batch_shape)


def _chunks(n: int, threads: int) -> List[slice]:
    threads = max(1, min(threads, n))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    return [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]


def _run_chunked(fn: Callable[[slice], None], n: int, threads: int) -> None:
    parts = _chunks(n, threads)
    if len(parts) == 1:
        fn(parts[0])
        return
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        for fut in [pool.submit(fn, s) for s in parts]:
            fut.result()


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def forward(net: AttackNetwork, enc: Batch, threads: int = 1) -> Tuple[np.ndarray, ForwardCache]:
    """Run every pixel network on an encrypted image or a batch of them.

    Returns the prediction in normalized units, shaped like the input
    (``(H, W, 3)`` for one image, ``(B, H, W, 3)`` for a batch), and the
    cache :func:`backward` needs.
    """
    batch, single = _as_batch(enc)
    if batch.shape[1:] != (net.height, net.width, 3):
        raise ArgumentError(
            f"input is {batch.shape[2]}x{batch.shape[1]}, network expects {net.width}x{net.height}"
        )
    x = _to_pixel_major(batch).astype(np.float64) / 255.0
    n, b = x.shape[:2]
    p = net.params
    z1 = np.empty((n, b, net.arch.m1))
    z2 = np.empty((n, b, net.arch.m2))
    y = np.empty((n, b, 3))

    def run(s: slice) -> None:
        z1[s] = np.matmul(x[s], p["W1"][s].transpose(0, 2, 1)) + p["b1"][s][:, None, :]
        z2[s] = np.matmul(_relu(z1[s]), p["W2"][s].transpose(0, 2, 1)) + p["b2"][s][:, None, :]
        y[s] = np.matmul(_relu(z2[s]), p["W3"][s].transpose(0, 2, 1)) + p["b3"][s][:, None, :]

    _run_chunked(run, n, threads)
    cache = ForwardCache(x, z1, z2, y, batch.shape, single, id(net), net.version)
    pred = _from_pixel_major(y, batch.shape)
    return (pred[0] if single else pred), cache


def _target_pixel_major(target: Batch, cache: ForwardCache) -> np.ndarray:
    batch, _ = _as_batch(target)
    if batch.shape != cache.batch_shape:
        raise ArgumentError(f"target shape {batch.shape} does not match prediction {cache.batch_shape}")
    return _to_pixel_major(batch).astype(np.float64) / 255.0


def loss_mse(pred: np.ndarray, target: Batch) -> float:
    """Mean of ``(pred - target/255)**2`` over every sample (and image, for batches)."""
    tgt, _ = _as_batch(target)
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim == 3:
        pred = pred[None]
    if pred.shape != tgt.shape:
        raise ArgumentError(f"prediction shape {pred.shape} does not match target {tgt.shape}")
    d = pred - tgt.astype(np.float64) / 255.0
    return float(np.mean(d * d))


def _backward(net: AttackNetwork, cache: ForwardCache, target: Batch, scale: float, threads: int) -> Dict[str, np.ndarray]:
    if cache.net_id != id(net) or cache.version != net.version:
        raise UsageError("forward cache is stale: the network changed since the forward pass")
    t = _target_pixel_major(target, cache)
    n = net.n
    p = net.params
    grads = {name: np.empty_like(arr) for name, arr in p.items()}

    def run(s: slice) -> None:
        x, z1, z2 = cache.x[s], cache.z1[s], cache.z2[s]
        h1, h2 = _relu(z1), _relu(z2)
        dy = (2.0 * scale) * (cache.y[s] - t[s])
        grads["W3"][s] = np.matmul(dy.transpose(0, 2, 1), h2)
        grads["b3"][s] = dy.sum(axis=1)
        dz2 = np.matmul(dy, p["W3"][s]) * (z2 > 0)
        grads["W2"][s] = np.matmul(dz2.transpose(0, 2, 1), h1)
        grads["b2"][s] = dz2.sum(axis=1)
        dz1 = np.matmul(dz2, p["W2"][s]) * (z1 > 0)
        grads["W1"][s] = np.matmul(dz1.transpose(0, 2, 1), x)
        grads["b1"][s] = dz1.sum(axis=1)

    _run_chunked(run, n, threads)
    return grads


def backward(net: AttackNetwork, cache: ForwardCache, target: Batch, threads: int = 1) -> Dict[str, np.ndarray]:
    """Exact gradient of :func:`loss_mse` with respect to every parameter."""
    b = cache.batch_shape[0]
    return _backward(net, cache, target, 1.0 / (b * 3 * net.n), threads)


def sgd_step(net: AttackNetwork, grads: Dict[str, np.ndarray], lr: float, cfg: TrainConfig) -> AttackNetwork:
    """Classical momentum with L2 weight decay folded into the gradient (in place)."""
    for name in PARAM_NAMES:
        w = net.params[name]
        v = net.velocity[name]
        g = grads[name]
        if g.shape != w.shape:
            raise ArgumentError(f"gradient {name} has shape {g.shape}, expected {w.shape}")
        if cfg.weight_decay:
            g = g + cfg.weight_decay * w
        v *= cfg.momentum
        v -= lr * g
        w += v
    net.version += 1
    return net


def lr_at_epoch(epoch: int, cfg: TrainConfig) -> float:
    drops = sum(1 for e in cfg.lr_drop_epochs if e <= epoch)
    return cfg.base_lr * cfg.lr_drop_factor ** drops


def train(
    net: AttackNetwork,
    pairs: Union[Sequence[Tuple[Image, Image]], Tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig,
    threads: int = 1,
    on_epoch: Optional[Callable[[int, float], None]] = None,
) -> Tuple[AttackNetwork, List[float]]:
    """Train ``net`` in place on (encrypted, plaintext) pairs.

    ``pairs`` is a sequence of image tuples or a pre-stacked
    ``(encrypted, plain)`` pair of ``(N, H, W, 3)`` uint8 arrays. Pair order is
    reshuffled every epoch by a SplitMix64 generator seeded with ``cfg.seed``;
    each mini-batch is then processed in ascending pair index.
    """
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray):
        enc, plain = pairs
    else:
        if len(pairs) == 0:
            raise ArgumentError("no training pairs")
        enc = stack(p[0] for p in pairs)
        plain = stack(p[1] for p in pairs)
    if len(enc) == 0:
        raise ArgumentError("no training pairs")
    if enc.shape != plain.shape or enc.shape[1:] != (net.height, net.width, 3):
        raise ArgumentError("training pairs do not match the network dimensions")

    rng = SplitMix64(cfg.seed)
    count = len(enc)
    history = []
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(epoch, cfg)
        order = rng.permutation(count)
        total = 0.0
        for start in range(0, count, cfg.batch_size):
            idx = np.sort(np.asarray(order[start:start + cfg.batch_size]))
            pred, cache = forward(net, enc[idx], threads)
            total += loss_mse(pred, plain[idx]) * len(idx)
            b = len(idx)
            scale = 1.0 / (b * 3) if cfg.per_pixel_loss else 1.0 / (b * 3 * net.n)
            grads = _backward(net, cache, plain[idx], scale, threads)
            sgd_step(net, grads, lr, cfg)
        history.append(total / count)
        if on_epoch is not None:
            on_epoch(epoch, history[-1])
    return net, history


def reconstruct(net: AttackNetwork, enc: Batch, threads: int = 1) -> Union[Image, List[Image]]:
    pred, cache = forward(net, enc, threads)
    out = np.floor(np.clip(pred, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    if cache.single:
        return Image(out)
    return [Image(a) for a in out]


def build_inversion_network(
    width: int, height: int, ks: Keystream, cipher_cfg: EncryptionConfig, arch: ArchConfig = ArchConfig()
) -> AttackNetwork:
    """Hand-set weights that decrypt exactly under a known keystream.

    Layer 1 routes each channel back through the inverse color permutation
    and emits both ``q`` and ``1 - q``; layer 2 copies them; layer 3 picks one
    of the two per channel according to the flip bit.
    """
    if arch.m1 < 6 or arch.m2 < 6:
        raise ArgumentError("the inversion construction needs m1 >= 6 and m2 >= 6")
    n = width * height
    if ks.n != n:
        raise ArgumentError(f"keystream covers {ks.n} pixels, expected {n}")
    shapes = arch.shapes()
    params = {name: np.zeros((n,) + shape) for name, shape in shapes.items()}
    pix = np.arange(n)
    shuffles = ks.shuffles if cipher_cfg.use_color_shuffle else np.zeros(n, np.uint8)
    src = INVERSE_PERMUTATIONS[shuffles]
    for c in range(3):
        params["W1"][pix, c, src[:, c]] = 1.0
        params["W1"][pix, 3 + c, src[:, c]] = -1.0
        params["b1"][:, 3 + c] = 1.0
        params["W3"][pix, c, c + 3 * ks.flips[c].astype(np.intp)] = 1.0
    for k in range(6):
        params["W2"][:, k, k] = 1.0
    return AttackNetwork(width, height, arch, params)

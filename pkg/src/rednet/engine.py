"""Training loop, arbitrary-size inference, and evaluation.

Training samples patches, corrupts them freshly on every batch draw,
minimizes the mean squared error against the clean patches with Adam,
and tracks a fixed validation split. Everything is deterministic for a
given seed at thread count 1.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .data import GaussianNoise, PairDir, corrupt, extract_patches, \
    load_pair_dir
from .metrics import MetricReport, psnr, ssim
from .network import Network, NetworkConfig, build
from .optim import AdamHyper, AdamState, adam_step
from .tensor import RngStream, dihedral, dihedral_inverse

__all__ = [
    "TrainConfig",
    "TrainLog",
    "EvalResult",
    "mse_loss_grad",
    "train",
    "restore",
    "restore_ensemble",
    "evaluate",
]


@dataclass
class TrainConfig:
    corruption: object
    iterations: int = 1000
    batch: int = 32
    hyper: AdamHyper = field(default_factory=AdamHyper)
    patch_size: int = 50
    patch_stride: int | None = None  # defaults to patch_size
    val_fraction: float = 0.1
    log_interval: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if not 0 <= self.val_fraction < 1:
            raise ValueError(f"val_fraction must be in [0, 1), got "
                             f"{self.val_fraction}")
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.patch_stride is None:
            self.patch_stride = self.patch_size
        if self.patch_stride < 1:
            raise ValueError(f"patch_stride must be >= 1, got "
                             f"{self.patch_stride}")
        if self.log_interval < 1:
            raise ValueError(f"log_interval must be >= 1, got "
                             f"{self.log_interval}")


@dataclass
class TrainLog:
    """(iteration, training loss, validation PSNR) records, CSV-serializable."""

    records: list[tuple[int, float, float]] = field(default_factory=list)

    def append(self, iteration: int, loss: float, val_psnr: float) -> None:
        if self.records and iteration <= self.records[-1][0]:
            raise ValueError(f"iteration {iteration} not increasing past "
                             f"{self.records[-1][0]}")
        self.records.append((iteration, float(loss), float(val_psnr)))

    def to_csv(self) -> str:
        lines = ["iteration,loss,val_psnr"]
        for it, loss, val in self.records:
            lines.append(f"{it},{loss!r},{val!r}")
        return "\n".join(lines) + "\n"


def mse_loss_grad(pred: np.ndarray,
                  target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean (over the batch only) of squared Frobenius error, and its
    gradient 2*(pred - target)/N."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target "
                         f"{target.shape}")
    n = pred.shape[0]
    diff = pred - target
    loss = float(np.sum(np.square(diff), dtype=np.float64) / n)
    return loss, (2.0 / n) * diff


def _patches_to_batch(patches: list[np.ndarray], dtype) -> np.ndarray:
    return np.stack(patches).astype(dtype)[:, None, :, :]


def _corrupt_patches(clean: np.ndarray, spec, rng: RngStream) -> np.ndarray:
    """Corrupt a (p, size, size) stack; Gaussian noise is drawn in one call."""
    if isinstance(spec, GaussianNoise):
        return clean + spec.sigma * rng.normal(clean.shape)
    return np.stack([corrupt(p, spec, rng) for p in clean])


def _batch_psnr(pred: np.ndarray, clean: np.ndarray) -> float:
    values = [psnr(p[0], c[0]) for p, c in zip(pred, clean)]
    return float(np.mean(values))


def train(netcfg: NetworkConfig, traincfg: TrainConfig,
          clean_images: list[np.ndarray] | None) -> tuple[Network, TrainLog]:
    """Patch sampling -> corruption -> forward -> MSE -> backward -> Adam.

    With a pairdir corruption spec the (corrupted, clean) patches come
    from the pair directory and no corruption is synthesized.
    """
    rng_split = RngStream(traincfg.seed).derive("split")
    rng_batch = RngStream(traincfg.seed).derive("batch")
    rng_corrupt = RngStream(traincfg.seed).derive("corrupt")
    rng_val = RngStream(traincfg.seed).derive("val")

    size, stride = traincfg.patch_size, traincfg.patch_stride
    paired = isinstance(traincfg.corruption, PairDir)
    if paired:
        pairs = load_pair_dir(traincfg.corruption.path)
        clean_patches, corrupt_patches = [], []
        for corrupted, clean in pairs:
            if corrupted.shape != clean.shape:
                raise ValueError(f"pair shapes differ: {corrupted.shape} vs "
                                 f"{clean.shape}")
            if min(clean.shape) < size:
                continue
            clean_patches += extract_patches(clean, size, stride)
            corrupt_patches += extract_patches(corrupted, size, stride)
    else:
        if not clean_images:
            raise ValueError("no training images supplied")
        clean_patches = []
        for img in clean_images:
            if min(img.shape) >= size:
                clean_patches += extract_patches(img, size, stride)
        corrupt_patches = None
    if not clean_patches:
        raise ValueError(f"no valid {size}x{size} patches in the training set")

    order = list(range(len(clean_patches)))
    rng_split.shuffle(order)
    n_val = int(round(len(order) * traincfg.val_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if not train_idx:
        raise ValueError("validation fraction leaves no training patches")

    clean_train = np.stack([clean_patches[i] for i in train_idx]).astype(
        np.float64)
    if paired:
        corrupt_train = np.stack([corrupt_patches[i] for i in
                                  train_idx]).astype(np.float64)
    if n_val:
        val_clean = _patches_to_batch([clean_patches[i] for i in val_idx],
                                      np.float32)
        if paired:
            val_corrupt = _patches_to_batch(
                [corrupt_patches[i] for i in val_idx], np.float32)
        else:
            val_stack = np.stack([clean_patches[i] for i in val_idx]).astype(
                np.float64)
            val_corrupt = _corrupt_patches(
                val_stack, traincfg.corruption,
                rng_val)[:, None, :, :].astype(np.float32)

    net = build(netcfg, dtype=np.float32)
    params = net.parameters()
    state = AdamState.for_params(params)
    log = TrainLog()
    n_train = clean_train.shape[0]
    for t in range(1, traincfg.iterations + 1):
        idx = rng_batch.integers(0, n_train, size=traincfg.batch)
        clean_b = clean_train[idx]
        if paired:
            corrupt_b = corrupt_train[idx]
        else:
            corrupt_b = _corrupt_patches(clean_b, traincfg.corruption,
                                         rng_corrupt)
        x = corrupt_b[:, None, :, :].astype(np.float32)
        target = clean_b[:, None, :, :].astype(np.float32)
        out, cache = net.forward(x, keep_cache=True)
        loss, dy = mse_loss_grad(out, target)
        if not math.isfinite(loss):
            raise RuntimeError(f"non-finite training loss {loss} at "
                               f"iteration {t}")
        grads = net.backward(cache, dy)
        flat = []
        for lg in grads.layers:
            flat.append(lg.d_weights)
            flat.append(lg.d_bias)
        adam_step(params, flat, state, traincfg.hyper)
        if t == 1 or t % traincfg.log_interval == 0 or t == traincfg.iterations:
            if n_val:
                restored = net.forward(val_corrupt)[0]
                val_psnr = _batch_psnr(restored, val_clean)
            else:
                val_psnr = math.nan
            log.append(t, loss, val_psnr)
    return net, log


def _min_valid_size(net: Network, size: int) -> int:
    """Smallest dimension >= size accepted by every strided layer."""
    def ok(d: int) -> bool:
        for layer in net.layers:
            p = layer.params
            k, s = p.kernel[0], p.stride
            if layer.kind == "conv":
                span = d + 2 * p.padding - k
                if span < 0 or span % s:
                    return False
                d = span // s + 1
            else:
                d = (d - 1) * s - 2 * p.padding + k
            if d < 1:
                return False
        return True

    for cand in range(size, size + 1024):
        if ok(cand):
            return cand
    raise ValueError(f"no valid padded size found for dimension {size}")


def restore(net: Network, img: np.ndarray) -> np.ndarray:
    """Run one image of arbitrary size through the network.

    The image is reflection-padded on the bottom/right up to the nearest
    dims every strided layer accepts, then cropped back.
    """
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    h, w = img.shape
    ph = _min_valid_size(net, h) - h
    pw = _min_valid_size(net, w) - w
    x = img[None, None, :, :].astype(net.dtype)
    if ph or pw:
        mode = "symmetric" if ph < h and pw < w else "edge"
        x = np.pad(x, ((0, 0), (0, 0), (0, ph), (0, pw)), mode=mode)
    out = net.forward(x)[0]
    return np.ascontiguousarray(out[0, 0, :h, :w])


def restore_ensemble(net: Network, img: np.ndarray) -> np.ndarray:
    """Average the restorations of all 8 rotated/flipped versions of the
    image, each mapped back to the original orientation."""
    acc = np.zeros(img.shape, dtype=np.float64)
    for k in range(8):
        turned = dihedral(img[None, None, :, :], k)[0, 0]
        restored = restore(net, turned)
        acc += dihedral_inverse(restored[None, None, :, :], k)[0, 0]
    return (acc / 8.0).astype(np.float32)


@dataclass
class EvalResult:
    reports: list[MetricReport]
    mean: MetricReport
    errors: list[tuple[int, str]] = field(default_factory=list)


def evaluate(net: Network, pairs: list[tuple[np.ndarray, np.ndarray]],
             ensemble: bool = False) -> EvalResult:
    """Restore each corrupted image and score it against its clean pair."""
    if not pairs:
        raise ValueError("evaluate needs at least one (corrupted, clean) pair")
    run = restore_ensemble if ensemble else restore
    reports, errors = [], []
    for i, (corrupted, clean) in enumerate(pairs):
        if corrupted.shape != clean.shape:
            errors.append((i, f"pair {i}: shape {corrupted.shape} vs "
                              f"{clean.shape}"))
            continue
        restored = run(net, corrupted)
        reports.append(MetricReport(psnr(restored, clean),
                                    ssim(restored, clean)))
    if reports:
        mean = MetricReport(float(np.mean([r.psnr for r in reports])),
                            float(np.mean([r.ssim for r in reports])))
    else:
        mean = MetricReport(math.nan, math.nan)
    return EvalResult(reports=reports, mean=mean, errors=errors)

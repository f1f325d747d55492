"""Dense NCHW tensors, a reproducible random stream, and dihedral image transforms.

Tensors are plain numpy arrays of shape (batch, channel, height, width),
float32 by default with float64 used wherever gradients are verified
numerically.
"""

import hashlib

import numpy as np

__all__ = [
    "RngStream",
    "check_nchw",
    "gaussian_fill",
    "dihedral",
    "dihedral_inverse",
]


def check_nchw(x: np.ndarray, name: str = "tensor") -> np.ndarray:
    """Validate a 4-D (n, c, h, w) array with all dimensions >= 1."""
    if not isinstance(x, np.ndarray) or x.ndim != 4:
        raise ValueError(f"{name} must be a 4-D (n, c, h, w) array, got "
                         f"{getattr(x, 'shape', type(x))}")
    if min(x.shape) < 1:
        raise ValueError(f"{name} has a zero-sized dimension: {x.shape}")
    return x


class RngStream:
    """Seeded deterministic random stream.

    Uniform doubles come from the PCG64 bit stream (whose output for a
    given seed is frozen by numpy's compatibility policy); normal draws
    are produced on top of it with an explicit Box-Muller transform so
    the mapping from seed to values is fully pinned by this module.

    A stream is single-owner: share the values it produces, not the
    stream itself.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, shape=None) -> np.ndarray | float:
        """Uniform doubles in [0, 1)."""
        return self._gen.random(size=shape)

    def normal(self, shape=None) -> np.ndarray | float:
        """Standard normal draws via Box-Muller on the uniform stream."""
        if shape is None:
            return float(self.normal(1)[0])
        n = int(np.prod(shape))
        m = (n + 1) // 2
        u1 = 1.0 - self._gen.random(m)  # (0, 1], keeps log() finite
        u2 = self._gen.random(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2),
                            r * np.sin(2.0 * np.pi * u2)])
        return z[:n].reshape(shape)

    def integers(self, low: int, high: int, size=None):
        """Uniform ints in [low, high) derived from the uniform stream."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        span = high - low
        u = self._gen.random(size=size)
        return (low + np.floor(u * span)).astype(np.int64) if size is not None \
            else int(low + int(u * span))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.integers(0, i + 1)
            items[i], items[j] = items[j], items[i]

    def derive(self, tag) -> "RngStream":
        """Independent child stream keyed by (seed, tag)."""
        digest = hashlib.blake2b(f"{self.seed}:{tag}".encode(),
                                 digest_size=8).digest()
        return RngStream(int.from_bytes(digest, "little"))


def gaussian_fill(t: np.ndarray, mean: float, std: float,
                  rng: RngStream) -> np.ndarray:
    """Fill `t` in place with independent N(mean, std^2) draws; returns `t`.

    std == 0 degenerates to a constant fill with `mean` exactly.
    """
    check_nchw(t)
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    t[...] = (rng.normal(t.shape) * std + mean).astype(t.dtype, copy=False)
    return t


def _check_dihedral_args(t: np.ndarray, k: int) -> None:
    check_nchw(t)
    if t.shape[0] != 1:
        raise ValueError(f"dihedral transforms expect a single image (n=1), "
                         f"got n={t.shape[0]}")
    if not 0 <= int(k) <= 7:
        raise ValueError(f"dihedral index must be in 0..7, got {k}")


def dihedral(t: np.ndarray, k: int) -> np.ndarray:
    """One of the 8 rotation/flip symmetries of a single image.

    k = r + 4*f: r counter-clockwise quarter-turns applied first,
    then a horizontal flip if f is 1. Spatial dims swap for odd r.
    """
    _check_dihedral_args(t, k)
    r, f = k & 3, k >> 2
    out = np.rot90(t, r, axes=(2, 3))
    if f:
        out = np.flip(out, axis=3)
    return np.ascontiguousarray(out)


def dihedral_inverse(t: np.ndarray, k: int) -> np.ndarray:
    """Exact inverse of dihedral(t, k): undo the flip, then the rotation."""
    _check_dihedral_args(t, k)
    r, f = k & 3, k >> 2
    out = np.flip(t, axis=3) if f else t
    out = np.rot90(out, -r, axes=(2, 3))
    return np.ascontiguousarray(out)

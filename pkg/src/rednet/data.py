"""Image I/O, patch extraction, and corruption synthesis.

Images are 2-D float arrays on the nominal [0, 255] grayscale range.
Corrupted training data stays unclipped in real precision; clamping to
the byte range happens only when a file is written.
"""

import math
import os
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import RngStream

__all__ = [
    "read_pgm",
    "write_pgm",
    "extract_patches",
    "add_gaussian_noise",
    "bicubic_resize",
    "degrade_sr",
    "build_blur_kernel",
    "blur_image",
    "overlay_text",
    "corrupt",
    "parse_corruption_spec",
    "load_pair_dir",
    "synthetic_images",
    "GaussianNoise",
    "SRDegrade",
    "Blur",
    "TextOverlay",
    "PairDir",
    "Blind",
    "DiskKernel",
    "GaussianKernel",
    "MotionKernel",
]


# --------------------------------------------------------------------------
# PGM (binary "P5", maxval 255)
# --------------------------------------------------------------------------

def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("unexpected end of PGM header")
    return data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5, maxval 255) into a float32 (h, w) array."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise ValueError(f"{path}: unsupported PGM format {magic!r} "
                         f"(only binary P5 is supported)")
    wtok, pos = _next_token(data, pos)
    htok, pos = _next_token(data, pos)
    mtok, pos = _next_token(data, pos)
    try:
        w, h, maxval = int(wtok), int(htok), int(mtok)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed PGM header") from exc
    if w < 1 or h < 1:
        raise ValueError(f"{path}: bad dimensions {w}x{h}")
    if maxval != 255:
        raise ValueError(f"{path}: maxval must be 255, got {maxval}")
    pos += 1  # single whitespace byte separates header from payload
    payload = data[pos:pos + h * w]
    if len(payload) < h * w:
        raise ValueError(f"{path}: truncated payload ({len(payload)} of "
                         f"{h * w} bytes)")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).astype(
        np.float32)


def write_pgm(img: np.ndarray, path) -> None:
    """Write a 2-D image; values clamp to [0, 255] and round half-up."""
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    q = np.floor(np.clip(img, 0, 255) + 0.5).astype(np.uint8)
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(q.tobytes())


# --------------------------------------------------------------------------
# Patches
# --------------------------------------------------------------------------

def extract_patches(img: np.ndarray, size: int, stride: int) -> list[np.ndarray]:
    """All size x size crops on the stride grid, row-major order."""
    h, w = img.shape
    if size < 1 or size > min(h, w):
        raise ValueError(f"patch size {size} does not fit image {h}x{w}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    out = []
    for top in range(0, h - size + 1, stride):
        for left in range(0, w - size + 1, stride):
            out.append(img[top:top + size, left:left + size].copy())
    return out


# --------------------------------------------------------------------------
# Corruption specs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianNoise:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SRDegrade:
    scale: int

    def __post_init__(self):
        if self.scale not in (2, 3, 4):
            raise ValueError(f"scale must be 2, 3 or 4, got {self.scale}")


@dataclass(frozen=True)
class DiskKernel:
    radius: float

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError(f"disk radius must be >= 1, got {self.radius}")


@dataclass(frozen=True)
class GaussianKernel:
    sigma: float
    size: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"blur sigma must be > 0, got {self.sigma}")
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {self.size}")


@dataclass(frozen=True)
class MotionKernel:
    length: int
    angle: float  # degrees

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"motion length must be >= 1, got {self.length}")


@dataclass(frozen=True)
class Blur:
    kernel: "DiskKernel | GaussianKernel | MotionKernel"


@dataclass(frozen=True)
class TextOverlay:
    glyph_height: int
    coverage: float
    fill: float = 0.0

    def __post_init__(self):
        if self.glyph_height < 5:
            raise ValueError(f"glyph_height must be >= 5, got "
                             f"{self.glyph_height}")
        if not 0 < self.coverage < 1:
            raise ValueError(f"coverage must be in (0, 1), got "
                             f"{self.coverage}")


@dataclass(frozen=True)
class PairDir:
    path: str


@dataclass(frozen=True)
class Blind:
    choices: tuple

    def __post_init__(self):
        if not self.choices:
            raise ValueError("blind spec needs at least one choice")


# --------------------------------------------------------------------------
# Degradations
# --------------------------------------------------------------------------

def add_gaussian_noise(img: np.ndarray, sigma: float,
                       rng: RngStream) -> np.ndarray:
    """y = x + n with n ~ N(0, sigma^2); values stay unclipped."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    return img + sigma * rng.normal(img.shape)


def _keys_weight(x: np.ndarray) -> np.ndarray:
    # Cubic convolution kernel with a = -0.5
    ax = np.abs(x)
    w = np.where(ax <= 1.0, (1.5 * ax - 2.5) * ax * ax + 1.0,
                 ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0)
    return np.where(ax < 2.0, w, 0.0)


def _resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic matrix mapping n_in samples to n_out, edge-clamped."""
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    base = np.floor(src).astype(int)
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for tap in range(-1, 3):
        idx = np.clip(base + tap, 0, n_in - 1)
        np.add.at(mat, (rows, idx), _keys_weight(src - (base + tap)))
    mat /= mat.sum(axis=1, keepdims=True)
    return mat


def bicubic_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable cubic-convolution resize with edge-clamped sampling."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {out_h}x{out_w}")
    h, w = img.shape
    work = _resize_matrix(h, out_h) @ img.astype(np.float64)
    return work @ _resize_matrix(w, out_w).T


def degrade_sr(img: np.ndarray, scale: int) -> np.ndarray:
    """Bicubic downsample by `scale` then upsample back to the input size."""
    if scale not in (2, 3, 4):
        raise ValueError(f"scale must be 2, 3 or 4, got {scale}")
    h, w = img.shape
    if h < scale or w < scale:
        raise ValueError(f"image {h}x{w} smaller than scale {scale}")
    low_h = int(np.floor(h / scale + 0.5))
    low_w = int(np.floor(w / scale + 0.5))
    return bicubic_resize(bicubic_resize(img, low_h, low_w), h, w)


def build_blur_kernel(spec) -> np.ndarray:
    """Normalized blur kernel for a disk, Gaussian or motion spec."""
    if isinstance(spec, DiskKernel):
        half = int(math.ceil(spec.radius))
        y, x = np.mgrid[-half:half + 1, -half:half + 1]
        k = (x * x + y * y <= spec.radius * spec.radius).astype(np.float64)
    elif isinstance(spec, GaussianKernel):
        half = spec.size // 2
        y, x = np.mgrid[-half:half + 1, -half:half + 1]
        k = np.exp(-(x * x + y * y) / (2.0 * spec.sigma * spec.sigma))
    elif isinstance(spec, MotionKernel):
        k = _motion_kernel(spec.length, spec.angle)
    else:
        raise ValueError(f"unknown blur kernel spec {spec!r}")
    total = k.sum()
    if total <= 0:
        raise ValueError(f"degenerate blur kernel from {spec!r}")
    return k / total


def _motion_kernel(length: int, angle_deg: float) -> np.ndarray:
    """Line of `length` pixels rasterized along its major axis."""
    theta = math.radians(angle_deg)
    dx, dy = math.cos(theta), math.sin(theta)
    centre = (length - 1) / 2.0
    cells = set()
    if abs(dx) >= abs(dy):
        slope = dy / dx if dx else 0.0
        for i in range(length):
            x = i - centre if dx >= 0 else centre - i
            cells.add((int(round(x * slope)), int(round(x))))
    else:
        slope = dx / dy if dy else 0.0
        for i in range(length):
            y = i - centre if dy >= 0 else centre - i
            cells.add((int(round(y)), int(round(y * slope))))
    half_y = max(abs(r) for r, _ in cells)
    half_x = max(abs(c) for _, c in cells)
    k = np.zeros((2 * half_y + 1, 2 * half_x + 1))
    for r, c in cells:
        k[r + half_y, c + half_x] = 1.0
    return k


def blur_image(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size correlation with edge-clamped borders."""
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel dims must be odd, got {kernel.shape}")
    padded = np.pad(img.astype(np.float64),
                    ((kh // 2, kh // 2), (kw // 2, kw // 2)), mode="edge")
    win = sliding_window_view(padded, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


# --------------------------------------------------------------------------
# Text overlay
# --------------------------------------------------------------------------

# 5x7 dot-matrix glyphs, one int per row, bit 4 = leftmost column.
_FONT_5X7 = {
    "A": (0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001),
    "B": (0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110),
    "C": (0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110),
    "D": (0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110),
    "E": (0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111),
    "F": (0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000),
    "G": (0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111),
    "H": (0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001),
    "I": (0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110),
    "J": (0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100),
    "K": (0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001),
    "L": (0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111),
    "M": (0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001),
    "N": (0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001, 0b10001),
    "O": (0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110),
    "P": (0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000),
    "Q": (0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101),
    "R": (0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001),
    "S": (0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110),
    "T": (0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100),
    "U": (0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110),
    "V": (0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b01010, 0b00100),
    "W": (0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010),
    "X": (0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001),
    "Y": (0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100),
    "Z": (0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111),
    "0": (0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110),
    "1": (0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110),
    "2": (0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111),
    "3": (0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110),
    "4": (0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010),
    "5": (0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110),
    "6": (0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110),
    "7": (0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000),
    "8": (0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110),
    "9": (0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100),
}
_FONT_CHARS = sorted(_FONT_5X7)

MAX_TEXT_PLACEMENTS = 10_000


def _glyph_bitmap(char: str, height: int) -> np.ndarray:
    rows = _FONT_5X7[char]
    bits = np.array([[(r >> (4 - c)) & 1 for c in range(5)] for r in rows],
                    dtype=bool)
    width = max(1, int(round(5 * height / 7)))
    ri = np.floor(np.arange(height) * 7 / height).astype(int)
    ci = np.floor(np.arange(width) * 5 / width).astype(int)
    return bits[np.ix_(ri, ci)]


def _string_bitmap(chars: list[str], height: int) -> np.ndarray:
    gap = max(1, height // 7)
    glyphs = [_glyph_bitmap(c, height) for c in chars]
    parts = []
    for i, g in enumerate(glyphs):
        parts.append(g)
        if i < len(glyphs) - 1:
            parts.append(np.zeros((height, gap), dtype=bool))
    return np.hstack(parts)


def overlay_text(img: np.ndarray, glyph_height: int, coverage: float,
                 fill: float, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Stamp random character strings until ~coverage of pixels is filled.

    Returns (corrupted image, boolean mask of stamped pixels).
    """
    spec = TextOverlay(glyph_height, coverage, fill)  # validates arguments
    h, w = img.shape
    out = img.copy()
    mask = np.zeros((h, w), dtype=bool)
    placements = 0
    while mask.mean() < spec.coverage:
        if placements >= MAX_TEXT_PLACEMENTS:
            raise ValueError(f"coverage {coverage} unreachable in "
                             f"{MAX_TEXT_PLACEMENTS} placements")
        placements += 1
        n_chars = rng.integers(3, 9)
        chars = [_FONT_CHARS[rng.integers(0, len(_FONT_CHARS))]
                 for _ in range(n_chars)]
        bm = _string_bitmap(chars, glyph_height)
        bh, bw = bm.shape
        top = rng.integers(0, max(1, h - bh + 1))
        left = rng.integers(0, max(1, w - bw + 1))
        piece = bm[:min(bh, h - top), :min(bw, w - left)]
        region = (slice(top, top + piece.shape[0]),
                  slice(left, left + piece.shape[1]))
        out[region] = np.where(piece, fill, out[region])
        mask[region] |= piece
    return out, mask


# --------------------------------------------------------------------------
# Dispatch
# --------------------------------------------------------------------------

def corrupt(img: np.ndarray, spec, rng: RngStream) -> np.ndarray:
    """Apply one corruption spec; blind specs pick a member uniformly."""
    if isinstance(spec, GaussianNoise):
        return add_gaussian_noise(img, spec.sigma, rng)
    if isinstance(spec, SRDegrade):
        return degrade_sr(img, spec.scale)
    if isinstance(spec, Blur):
        return blur_image(img, build_blur_kernel(spec.kernel))
    if isinstance(spec, TextOverlay):
        return overlay_text(img, spec.glyph_height, spec.coverage,
                            spec.fill, rng)[0]
    if isinstance(spec, Blind):
        return corrupt(img, spec.choices[rng.integers(0, len(spec.choices))],
                       rng)
    if isinstance(spec, PairDir):
        raise ValueError("pairdir pairs are loaded from disk, not synthesized")
    raise ValueError(f"unknown corruption spec {spec!r}")


def parse_corruption_spec(text: str):
    """Parse a spec string, e.g. 'gaussian:30', 'blur:disk:5',
    'blind:gaussian:10,gaussian:70'."""
    head, _, rest = text.partition(":")
    try:
        if head == "gaussian":
            return GaussianNoise(float(rest))
        if head == "sr":
            return SRDegrade(int(rest))
        if head == "blur":
            kind, _, args = rest.partition(":")
            parts = args.split(":") if args else []
            if kind == "disk" and len(parts) == 1:
                return Blur(DiskKernel(float(parts[0])))
            if kind == "gaussian" and len(parts) == 2:
                return Blur(GaussianKernel(float(parts[0]), int(parts[1])))
            if kind == "motion" and len(parts) == 2:
                return Blur(MotionKernel(int(parts[0]), float(parts[1])))
            raise ValueError(f"bad blur spec {text!r} (expected blur:disk:R, "
                             f"blur:gaussian:SIGMA:SIZE or "
                             f"blur:motion:LENGTH:ANGLE)")
        if head == "text":
            parts = rest.split(":")
            if len(parts) == 2:
                return TextOverlay(int(parts[0]), float(parts[1]))
            if len(parts) == 3:
                return TextOverlay(int(parts[0]), float(parts[1]),
                                   float(parts[2]))
            raise ValueError(f"bad text spec {text!r} (expected "
                             f"text:HEIGHT:COVERAGE[:FILL])")
        if head == "pairdir":
            if not rest:
                raise ValueError("pairdir spec needs a path")
            return PairDir(rest)
        if head == "blind":
            return Blind(tuple(parse_corruption_spec(part)
                               for part in rest.split(",") if part))
    except ValueError as exc:
        raise ValueError(f"invalid corruption spec {text!r}: {exc}") from None
    raise ValueError(f"unknown corruption kind in {text!r}")


def load_pair_dir(path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Load (corrupted, clean) image pairs from <name>.clean.pgm /
    <name>.corrupt.pgm siblings."""
    names = sorted(f[:-len(".clean.pgm")] for f in os.listdir(path)
                   if f.endswith(".clean.pgm"))
    if not names:
        raise ValueError(f"{path}: no *.clean.pgm files found")
    pairs = []
    for name in names:
        clean = read_pgm(os.path.join(path, name + ".clean.pgm"))
        corrupt_path = os.path.join(path, name + ".corrupt.pgm")
        if not os.path.exists(corrupt_path):
            raise ValueError(f"{path}: missing sibling {name}.corrupt.pgm")
        pairs.append((read_pgm(corrupt_path), clean))
    return pairs


# --------------------------------------------------------------------------
# Synthetic desk-scale fixtures
# --------------------------------------------------------------------------

def synthetic_images(count: int, height: int, width: int,
                     rng: RngStream) -> list[np.ndarray]:
    """Smooth gradient backgrounds with a few flat shapes; float32 images."""
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    images = []
    for _ in range(count):
        gx = rng.uniform() * 2 - 1
        gy = rng.uniform() * 2 - 1
        base = gx * xx / width + gy * yy / height
        lo, hi = base.min(), base.max()
        span = (hi - lo) or 1.0
        img = 40.0 + 170.0 * (base - lo) / span
        for _ in range(2 + rng.integers(0, 3)):
            gray = 30.0 + 195.0 * rng.uniform()
            cy = rng.integers(0, height)
            cx = rng.integers(0, width)
            if rng.uniform() < 0.5:
                r = 4 + rng.integers(0, max(2, height // 6))
                shape = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
            else:
                hh = 4 + rng.integers(0, max(2, height // 5))
                ww = 4 + rng.integers(0, max(2, width // 5))
                shape = (np.abs(yy - cy) <= hh) & (np.abs(xx - cx) <= ww)
            img = np.where(shape, gray, img)
        images.append(np.clip(img, 0, 255).astype(np.float32))
    return images

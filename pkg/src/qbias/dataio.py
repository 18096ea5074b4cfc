"""Datasets: MNIST IDX parsing, pooling, binary subsets and synthetic data."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError, FormatError, LengthError
from .simcore import substream

DATA_DIR_ENV = "QBIAS_DATA_DIR"
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}
_UBYTE = 0x08


@dataclass
class Dataset:
    features: np.ndarray  # (m, d), entries in [0, 1]
    labels: np.ndarray  # (m,), entries in {-1, +1}
    provenance: str = ""

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if np.any((self.features < 0) | (self.features > 1)):
            raise DataError("features must lie in [0, 1]")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DataError("labels must be -1 or +1")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def parse_idx(data: bytes) -> tuple[tuple[int, ...], np.ndarray]:
    if len(data) < 4:
        raise LengthError("IDX header truncated")
    zero, dtype, ndim = struct.unpack(">HBB", data[:4])
    if zero != 0 or dtype != _UBYTE or not 1 <= ndim <= 4:
        raise FormatError(f"bad IDX magic 0x{data[:4].hex()}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise LengthError("IDX dimension table truncated")
    shape = struct.unpack(f">{ndim}I", data[4:header])
    expected = int(np.prod(shape, dtype=np.int64))
    payload = len(data) - header
    if payload != expected:
        raise LengthError(f"IDX payload has {payload} bytes, header declares {expected}")
    return shape, np.frombuffer(data, dtype=np.uint8, offset=header).reshape(shape)


def load_idx(path) -> tuple[tuple[int, ...], np.ndarray]:
    """Parse an unsigned-byte IDX file (optionally gzipped) into (shape, array)."""
    return parse_idx(_read_bytes(path))


def to_idx(array) -> bytes:
    a = np.asarray(array)
    if a.dtype != np.uint8:
        if np.any((a < 0) | (a > 255)) or not np.all(a == np.round(a)):
            raise DataError("IDX ubyte tensors hold integers in 0..255")
        a = a.astype(np.uint8)
    head = struct.pack(">HBB", 0, _UBYTE, a.ndim) + struct.pack(f">{a.ndim}I", *a.shape)
    return head + np.ascontiguousarray(a).tobytes()


def write_idx(path, array) -> None:
    Path(path).write_bytes(to_idx(array))


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise DataError(f"{stem} not found in {directory}")


def load_mnist(data_dir=None) -> dict[str, np.ndarray]:
    """Load the four conventional MNIST files from ``data_dir`` or $QBIAS_DATA_DIR."""
    data_dir = data_dir or os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        raise DataError(f"no MNIST directory given and ${DATA_DIR_ENV} is unset")
    directory = Path(data_dir)
    out = {key: load_idx(_find(directory, stem))[1] for key, stem in MNIST_FILES.items()}
    for split in ("train", "test"):
        if out[f"{split}_images"].ndim != 3 or out[f"{split}_labels"].ndim != 1:
            raise FormatError(f"unexpected MNIST {split} tensor ranks")
        if len(out[f"{split}_images"]) != len(out[f"{split}_labels"]):
            raise DataError(f"MNIST {split} images and labels differ in count")
    return out


def mnist_available(data_dir=None) -> bool:
    data_dir = data_dir or os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        return False
    try:
        for stem in MNIST_FILES.values():
            _find(Path(data_dir), stem)
    except DataError:
        return False
    return True


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------


def avg_pool(image, block: int) -> np.ndarray:
    """Mean over block x block tiles, scaled to [0, 1], row-major tile order."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise DataError(f"expected a 2-D image, got shape {img.shape}")
    rows, cols = img.shape
    if block < 1 or rows % block or cols % block:
        raise DomainError(f"block {block} does not divide image shape {img.shape}")
    tiles = img.reshape(rows // block, block, cols // block, block)
    return tiles.mean(axis=(1, 3)).ravel() / 255.0


def make_binary_subset(images, labels, class_a: int, class_b: int, n_per_class: int,
                       seed: int, block: int = 7) -> Dataset:
    """Balanced two-class subset: class_a -> +1, class_b -> -1, pooled features."""
    labels = np.asarray(labels)
    rng = substream(seed)
    chosen = []
    for digit in (class_a, class_b):
        idx = np.flatnonzero(labels == digit)
        if idx.size < n_per_class:
            raise DataError(f"class {digit}: need {n_per_class} samples, have {idx.size}")
        chosen.append(rng.permutation(idx)[:n_per_class])
    order = np.concatenate(chosen)
    features = np.stack([avg_pool(images[i], block) for i in order])
    y = np.where(labels[order] == class_a, 1, -1)
    return Dataset(
        features, y,
        f"mnist digits {class_a}(+1) vs {class_b}(-1), {n_per_class}/class, "
        f"block {block}, seed {seed}",
    )


def mnist_split(data_dir, class_a=0, class_b=1, n_train=100, n_test=50, seed=0, block=7):
    """Train subset from the training files, test subset from the t10k files."""
    data = load_mnist(data_dir)
    train = make_binary_subset(data["train_images"], data["train_labels"],
                               class_a, class_b, n_train, seed, block)
    test = make_binary_subset(data["test_images"], data["test_labels"],
                              class_a, class_b, n_test, seed + 1, block)
    return train, test


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


def synthetic_gaussians(n_per_class: int, dim: int, separation: float, seed: int,
                        sigma: float = 0.1) -> Dataset:
    """Two isotropic Gaussians at 0.5 +/- separation/4, clamped to [0, 1]."""
    if dim < 1:
        raise DomainError("dim must be >= 1")
    rng = substream(seed)
    shift = separation / 4.0
    pos = rng.normal(0.5 + shift, sigma, size=(n_per_class, dim))
    neg = rng.normal(0.5 - shift, sigma, size=(n_per_class, dim))
    features = np.clip(np.vstack([pos, neg]), 0.0, 1.0)
    labels = np.concatenate([np.ones(n_per_class, int), -np.ones(n_per_class, int)])
    return Dataset(
        features, labels,
        f"synthetic gaussians n_per_class={n_per_class} dim={dim} "
        f"separation={separation} sigma={sigma} seed={seed}",
    )


def render_glyph(digit: int, rng: np.random.Generator, size: int = 28) -> np.ndarray:
    """A hand-drawn-looking 0 (elliptic ring) or 1 (slanted bar) as uint8 pixels.

    Centre, size, slant and stroke thickness are jittered per glyph; pixel
    intensity falls off linearly over one pixel at the stroke edge.
    """
    if digit not in (0, 1):
        raise DomainError(f"only digits 0 and 1 can be rendered, got {digit}")
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    scale = size / 28.0
    cx = size / 2 + rng.normal(0.0, scale)
    cy = size / 2 + rng.normal(0.0, scale)
    thickness = rng.uniform(1.5, 3.0) * scale
    if digit == 0:
        a, b = rng.uniform(4.5, 7.0) * scale, rng.uniform(7.0, 9.5) * scale
        r = np.sqrt(((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2)
        dist = np.abs(r - 1.0) * min(a, b)
    else:
        half, slant = rng.uniform(7.5, 10.0) * scale, rng.uniform(-0.35, 0.35)
        p0 = np.array([cx - slant * half, cy - half])
        v = 2.0 * np.array([slant * half, half])
        w = np.clip(((xx - p0[0]) * v[0] + (yy - p0[1]) * v[1]) / (v @ v), 0.0, 1.0)
        dist = np.hypot(xx - (p0[0] + w * v[0]), yy - (p0[1] + w * v[1]))
    return np.round(255 * np.clip(thickness / 2 + 0.5 - dist, 0.0, 1.0)).astype(np.uint8)


def synthetic_digits(n_per_class: int, seed: int, block: int = 7) -> Dataset:
    """Rendered 0 (+1) vs 1 (-1) glyphs on 28x28, pooled like the MNIST pipeline.

    A stand-in for the MNIST 0-vs-1 task when the IDX files are absent: strokes
    are thin, so most pooled features stay well below 0.5.
    """
    if n_per_class < 1:
        raise DataError("n_per_class must be >= 1")
    rng = substream(seed)
    features = np.stack([
        avg_pool(render_glyph(digit, rng), block)
        for digit in (0, 1) for _ in range(n_per_class)
    ])
    labels = np.concatenate([np.ones(n_per_class, int), -np.ones(n_per_class, int)])
    return Dataset(
        features, labels,
        f"synthetic digit glyphs 0(+1) vs 1(-1), {n_per_class}/class, block {block}, seed {seed}",
    )


def synthetic_digit_split(n_train: int = 100, n_test: int = 50, seed: int = 0, block: int = 7):
    """Train and test glyph sets drawn from seeds ``seed`` and ``seed + 1``."""
    return (synthetic_digits(n_train, seed, block),
            synthetic_digits(n_test, seed + 1, block))

"""Dataset ingestion: IDX ubyte files, numpy arrays, and synthetic generators.

Binary image data travels in the classic IDX ubyte format (big-endian magic
0x00000803 for 3-D image files, 0x00000801 for 1-D label files); pixels are
scaled to [0, 1] and thresholded into bits on load. Real-valued data uses
plain ``.npy`` files, since IDX bytes cannot carry reals.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, ValidationError
from .models import _require
from .rng import check_seed, stream

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

SPLIT_TAGS = ("train", "validation", "test")


@dataclass(frozen=True)
class Dataset:
    """A matrix of example vectors with a kind and a split tag."""

    vectors: np.ndarray
    kind: str  # "binary" or "real"
    split: str = "train"

    def __post_init__(self):
        v = np.array(self.vectors, dtype=np.float64)
        _require(v.ndim == 2, "vectors must be an (n, dim) matrix")
        _require(self.kind in ("binary", "real"), f"unknown dataset kind {self.kind!r}")
        _require(self.split in SPLIT_TAGS, f"split must be one of {SPLIT_TAGS}")
        if self.kind == "binary":
            _require(bool(((v == 0.0) | (v == 1.0)).all()),
                     "binary dataset contains entries other than 0/1")
        else:
            _require(bool(np.isfinite(v).all()), "dataset contains nonfinite values")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _check_threshold(threshold: float) -> float:
    t = float(threshold)
    _require(0.0 < t < 1.0, f"threshold must lie in the open interval (0, 1), got {threshold}")
    return t


def load_idx(path, threshold: float = 0.5, split: str = "train") -> Dataset:
    """Parse an IDX ubyte file.

    Image files become binary datasets: pixels are scaled by 1/255 and any
    value >= threshold maps to 1. Label files become (n, 1) real datasets.
    Truncated or malformed files raise :class:`DataFormatError` naming the
    byte offset where parsing failed.
    """
    t = _check_threshold(threshold)
    raw = Path(path).read_bytes()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(raw):
            raise DataFormatError(
                f"{path}: truncated IDX file at byte offset {pos} "
                f"(needed {n} bytes for {what}, {len(raw) - pos} left)"
            )
        chunk = raw[pos : pos + n]
        pos += n
        return chunk

    magic = struct.unpack(">I", take(4, "magic"))[0]
    if magic == IDX_IMAGE_MAGIC:
        n, rows, cols = struct.unpack(">III", take(12, "image dimensions"))
        data = take(n * rows * cols, "pixel data")
        if pos != len(raw):
            raise DataFormatError(f"{path}: {len(raw) - pos} trailing bytes at byte offset {pos}")
        pixels = np.frombuffer(data, dtype=np.uint8).reshape(n, rows * cols)
        bits = (pixels / 255.0 >= t).astype(np.float64)
        return Dataset(vectors=bits, kind="binary", split=split)
    if magic == IDX_LABEL_MAGIC:
        (n,) = struct.unpack(">I", take(4, "label count"))
        data = take(n, "label data")
        if pos != len(raw):
            raise DataFormatError(f"{path}: {len(raw) - pos} trailing bytes at byte offset {pos}")
        labels = np.frombuffer(data, dtype=np.uint8).astype(np.float64)[:, None]
        return Dataset(vectors=labels, kind="real", split=split)
    raise DataFormatError(f"{path}: bad IDX magic 0x{magic:08x} at byte offset 0")


def save_idx(dataset: Dataset, path) -> None:
    """Write a binary dataset as an IDX image file of shape (n, dim, 1).

    Bits are stored as bytes 0 and 255, so reloading with any threshold in
    (0, 1) reproduces the dataset exactly.
    """
    _require(dataset.kind == "binary", "only binary datasets can be written as IDX ubyte")
    n, dim = dataset.vectors.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, dim, 1))
        fh.write((dataset.vectors * 255).astype(np.uint8).tobytes())


def load_dataset(path, threshold: float = 0.5, split: str = "train") -> Dataset:
    """Load a dataset from an IDX file or a ``.npy`` array.

    ``.npy`` arrays become binary datasets when every entry is 0 or 1, and
    real datasets otherwise.
    """
    if str(path).endswith(".npy"):
        arr = np.load(path)
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DataFormatError(f"{path}: expected a 1-D or 2-D array, got shape {arr.shape}")
        kind = "binary" if bool(((arr == 0.0) | (arr == 1.0)).all()) else "real"
        return Dataset(vectors=arr, kind=kind, split=split)
    return load_idx(path, threshold=threshold, split=split)


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as ``.npy`` or (for binary data) as IDX ubyte."""
    if str(path).endswith(".npy"):
        np.save(path, dataset.vectors)
    else:
        save_idx(dataset, path)


# ---------------------------------------------------------------------------
# Synthetic generators

# 4x4 bar patterns: four horizontal and four vertical bars, row-major pixels.
_BAR_PATTERNS = np.zeros((8, 16))
for _r in range(4):
    _BAR_PATTERNS[_r, _r * 4 : (_r + 1) * 4] = 1.0
for _c in range(4):
    _BAR_PATTERNS[4 + _c, _c::4] = 1.0
_BAR_PATTERNS.setflags(write=False)

GENERATORS = ("tiny-bars", "gmm-blobs")


def make_synthetic(generator: str, params: dict, seed: int = 0, split: str = "train") -> Dataset:
    """Generate a synthetic dataset.

    ``tiny-bars`` emits 16-pixel binary images (4x4 horizontal/vertical bar
    patterns with an optional bit-flip noise rate); params: ``n`` (count)
    and ``noise`` (flip probability in [0, 1), default 0). ``gmm-blobs``
    emits real vectors from a specified isotropic mixture; params: ``n``,
    ``means`` (component-by-dim array), ``sigma`` (> 0), and optional
    ``weights`` (positive, default uniform).
    """
    _require(isinstance(params, dict), "params must be a dict")
    seed = check_seed(seed)
    if generator == "tiny-bars":
        allowed = {"n", "noise"}
        _require(set(params) <= allowed, f"tiny-bars accepts params {sorted(allowed)}")
        n = int(params.get("n", 0))
        noise = float(params.get("noise", 0.0))
        _require(n >= 1, "tiny-bars needs n >= 1")
        _require(0.0 <= noise < 1.0, f"noise rate must lie in [0, 1), got {noise}")
        rng = stream(seed, 8)
        base = _BAR_PATTERNS[rng.integers(0, 8, size=n)]
        flips = rng.random((n, 16)) < noise
        bits = np.abs(base - flips.astype(np.float64))
        return Dataset(vectors=bits, kind="binary", split=split)
    if generator == "gmm-blobs":
        allowed = {"n", "means", "sigma", "weights"}
        _require(set(params) <= allowed, f"gmm-blobs accepts params {sorted(allowed)}")
        _require("means" in params and "sigma" in params, "gmm-blobs needs means and sigma")
        means = np.asarray(params["means"], dtype=np.float64)
        if means.ndim == 1:
            means = means[:, None]
        _require(means.ndim == 2 and means.shape[0] >= 1, "means must be a (k, dim) matrix")
        sigma = float(params["sigma"])
        _require(sigma > 0, "sigma must be positive")
        n = int(params.get("n", 0))
        _require(n >= 1, "gmm-blobs needs n >= 1")
        k = means.shape[0]
        weights = np.asarray(params.get("weights", np.full(k, 1.0 / k)), dtype=np.float64)
        _require(weights.shape == (k,) and bool((weights > 0).all()),
                 "weights must be positive with one entry per component")
        weights = weights / weights.sum()
        rng = stream(seed, 8)
        ks = np.minimum(np.searchsorted(np.cumsum(weights), rng.random(n), side="right"), k - 1)
        vectors = means[ks] + sigma * rng.standard_normal((n, means.shape[1]))
        return Dataset(vectors=vectors, kind="real", split=split)
    raise ValidationError(f"unknown generator {generator!r}; choose from {GENERATORS}")

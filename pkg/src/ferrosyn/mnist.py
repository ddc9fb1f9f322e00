"""MNIST ingestion from IDX binary files, gzip-transparent.

The loader resolves the data directory in this order: an explicit
argument, the FERROSYN_MNIST_DIR environment variable, then ./data/mnist
relative to the working directory.  Files may be the canonical .gz
archives or already-decompressed IDX files.
"""

from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np

_FILES = {
    ("train", "images"): "train-images-idx3-ubyte",
    ("train", "labels"): "train-labels-idx1-ubyte",
    ("test", "images"): "t10k-images-idx3-ubyte",
    ("test", "labels"): "t10k-labels-idx1-ubyte",
}

_IDX_DTYPES = {
    0x08: np.uint8,
    0x09: np.int8,
    0x0B: ">i2",
    0x0C: ">i4",
    0x0D: ">f4",
    0x0E: ">f8",
}


def read_idx(path) -> np.ndarray:
    """Parse one IDX file (big-endian magic, dims, raw data)."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        magic = fh.read(4)
        if len(magic) != 4 or magic[0] != 0 or magic[1] != 0:
            raise ValueError(f"{path}: not an IDX file (bad magic {magic!r})")
        dtype_code, ndim = magic[2], magic[3]
        if dtype_code not in _IDX_DTYPES:
            raise ValueError(f"{path}: unknown IDX dtype code 0x{dtype_code:02x}")
        dims = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
        data = np.frombuffer(fh.read(), dtype=_IDX_DTYPES[dtype_code])
    expected = int(np.prod(dims))
    if data.size != expected:
        raise ValueError(f"{path}: payload has {data.size} items, header says {expected}")
    return data.reshape(dims)


def _resolve_dir(data_dir=None) -> Path:
    if data_dir is not None:
        return Path(data_dir)
    env = os.environ.get("FERROSYN_MNIST_DIR")
    if env:
        return Path(env)
    return Path("data/mnist")


def _find(directory: Path, stem: str) -> Path:
    for name in (stem + ".gz", stem):
        candidate = directory / name
        if candidate.exists():
            return candidate
    raise FileNotFoundError(
        f"MNIST file {stem}[.gz] not found in {directory} "
        "(set FERROSYN_MNIST_DIR or pass data_dir)"
    )


def load_mnist(split: str = "train", data_dir=None) -> tuple[np.ndarray, np.ndarray]:
    """Return (images, labels) for a split; images are (n, 28, 28) uint8."""
    if split not in ("train", "test"):
        raise ValueError("split must be 'train' or 'test'")
    directory = _resolve_dir(data_dir)
    images = read_idx(_find(directory, _FILES[(split, "images")]))
    labels = read_idx(_find(directory, _FILES[(split, "labels")]))
    if images.ndim != 3:
        raise ValueError(f"expected 3-d image tensor, got shape {images.shape}")
    if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
        raise ValueError("image/label counts disagree")
    return images, labels

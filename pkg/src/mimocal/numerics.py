"""Seeded random streams and complex-matrix primitives.

Every array in the package is a plain ``numpy.ndarray`` of dtype
``complex128`` (channels, hardware responses, pilots) or ``float64``
(network parameters). ``Rng`` wraps a counter-based Philox generator whose
child streams are addressed by labels, so a Monte Carlo trial can ask for
``rng.child(trial, "noise")`` without caring what other trials have drawn.
"""

from __future__ import annotations

import math
import zlib
from typing import Literal, Union

import numpy as np

from .errors import InvalidArgumentError, ShapeError

Label = Union[int, str]

__all__ = [
    "Rng",
    "as_complex_matrix",
    "complex_normal",
    "sample_complex_gaussian",
    "random_unitary",
    "matmul",
    "mse_between",
    "snr_to_noise_variance",
]


def _label_key(label: Label) -> int:
    if isinstance(label, (bool, np.bool_)):
        raise InvalidArgumentError("boolean labels are ambiguous")
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise InvalidArgumentError(f"integer labels must be >= 0, got {label}")
        # keep integer and string labels in disjoint key spaces
        return int(label) << 1
    if isinstance(label, str):
        return (zlib.crc32(label.encode("utf-8")) << 1) | 1
    raise InvalidArgumentError(f"unsupported label type {type(label).__name__}")


class Rng:
    """Deterministic, splittable random stream.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit master seed.
    path : tuple of int, optional
        Spawn key identifying this stream below ``seed``. Normally built
        through :meth:`child` rather than passed directly.

    Notes
    -----
    Streams are Philox counters keyed by ``numpy.random.SeedSequence`` with
    the label path as spawn key, so ``Rng(s).child("a", 3)`` yields the same
    draws no matter what was consumed from any other stream.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(seq))

    def child(self, *labels: Label) -> "Rng":
        return Rng(self.seed, self.path + tuple(_label_key(lab) for lab in labels))

    def standard_normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"


def as_complex_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce ``x`` to a finite 2-D complex128 array."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


def complex_normal(rng: Rng, shape) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian draws of any shape."""
    parts = rng.standard_normal((2,) + tuple(shape))
    return (parts[0] + 1j * parts[1]) * math.sqrt(0.5)


def sample_complex_gaussian(rng: Rng, rows: int, cols: int, variance: float = 1.0) -> np.ndarray:
    """Draw a ``rows x cols`` matrix with i.i.d. CN(0, variance) entries.

    Real and imaginary parts are each N(0, variance / 2). A draw with
    variance ``v`` is exactly ``sqrt(v)`` times the unit-variance draw from
    the same stream.
    """
    if rows < 1 or cols < 1:
        raise InvalidArgumentError(f"rows and cols must be >= 1, got {rows}x{cols}")
    variance = float(variance)
    if not math.isfinite(variance) or variance < 0:
        raise InvalidArgumentError(f"variance must be finite and >= 0, got {variance}")
    unit = complex_normal(rng, (rows, cols))
    if variance == 0.0:
        return np.zeros((rows, cols), dtype=np.complex128)
    return unit * math.sqrt(variance)


def random_unitary(rng: Rng, m: int) -> np.ndarray:
    """Haar-distributed ``m x m`` unitary matrix.

    QR of a complex Gaussian matrix, with the columns of Q rotated by the
    phases of R's diagonal so the result does not depend on the sign
    convention of the QR routine.
    """
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    z = complex_normal(rng, (m, m))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    phases = d / np.abs(d)
    return q * phases[np.newaxis, :]


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def mse_between(a, b, normalization: Literal["sum", "mean"] = "mean") -> float:
    """Sum or mean of ``|a - b|**2`` over all entries."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    sq = diff.real**2 + diff.imag**2 if np.iscomplexobj(diff) else diff**2
    if normalization == "sum":
        return float(np.sum(sq))
    if normalization == "mean":
        return float(np.mean(sq))
    raise InvalidArgumentError(f"normalization must be 'sum' or 'mean', got {normalization!r}")


def snr_to_noise_variance(snr_db) -> float:
    """Noise variance 1/SNR for unit signal power; 0.0 for the noiseless marker ``None``."""
    if snr_db is None:
        return 0.0
    snr_db = float(snr_db)
    if not math.isfinite(snr_db):
        raise InvalidArgumentError("use snr_db=None for noiseless operation")
    return 10.0 ** (-snr_db / 10.0)

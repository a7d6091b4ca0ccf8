"""Point-set I/O, synthetic generators and the Gaussian kernel."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PointSet",
    "PointFileError",
    "load_points",
    "save_values",
    "kernel_value",
    "gaussian_normalizer",
    "generate",
]


class PointFileError(ValueError):
    """Malformed point file. ``line`` is 1-based, or ``None`` for whole-file problems."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class PointSet:
    """An immutable N x D matrix of float64 coordinates.

    Row index is the identity of a point; trees permute index arrays,
    never the rows themselves.
    """

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"point set must be a non-empty N x D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("point set contains non-finite coordinates")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"PointSet(n={self.n}, d={self.d})"


_WS = re.compile(r"\s+")


def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        return _WS.split(line.strip())
    return [tok.strip() for tok in line.split(delimiter)]


def load_points(path, delimiter: str | None = None) -> PointSet:
    """Read one point per non-empty line.

    The delimiter is a comma when the first data line contains one and
    whitespace otherwise, unless given explicitly. D is taken from the first
    line; every other line must match it. A first line with no numeric field
    at all is taken as a column header and skipped.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read point file {path}: {exc.strerror or exc}") from exc

    rows: list[list[float]] = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if delimiter is None and width is None:
            delimiter = "," if "," in raw else None
        fields = _split(raw, delimiter)
        if width is None and not rows and not any(_is_float(tok) for tok in fields):
            width = len(fields)
            continue
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise PointFileError(f"expected {width} fields, found {len(fields)}", lineno)
        try:
            values = [float(tok) for tok in fields]
        except ValueError:
            bad = next(tok for tok in fields if not _is_float(tok))
            raise PointFileError(f"cannot parse {bad!r} as a number", lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise PointFileError("non-finite coordinate", lineno)
        rows.append(values)
    if not rows:
        raise PointFileError(f"{path} contains no points")
    return PointSet(np.asarray(rows, dtype=np.float64))


def _is_float(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def save_values(path, values, delimiter: str = ",") -> None:
    """Write a vector (one value per row) or matrix with 17 significant digits."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    lines = [delimiter.join(f"{v:.17g}" for v in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n")


def kernel_value(h: float, dist):
    """Unnormalized Gaussian kernel exp(-dist^2 / (2 h^2)); vectorizes over ``dist``."""
    return np.exp(-0.5 * (np.asarray(dist, dtype=np.float64) / h) ** 2)


def gaussian_normalizer(d: int, h: float) -> float:
    """Integral of the D-dimensional kernel, (2 pi h^2)^(D/2)."""
    if d < 1 or h <= 0:
        raise ValueError("need d >= 1 and h > 0")
    return (2.0 * math.pi * h * h) ** (0.5 * d)


GENERATORS = ("mixture", "uniform", "clustered")


def generate(kind: str, n: int, d: int, seed: int = 0) -> PointSet:
    """Reproducible synthetic data in roughly the unit cube.

    ``mixture``: five isotropic Gaussians with random means and widths.
    ``uniform``: uniform on [0, 1]^D.
    ``clustered``: many tight clusters plus 10% uniform background, a rough
    stand-in for galaxy-position catalogs.
    """
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        return PointSet(rng.random((n, d)))
    if kind == "mixture":
        k = 5
        means = rng.random((k, d))
        widths = rng.uniform(0.03, 0.12, size=k)
        labels = rng.integers(k, size=n)
        pts = means[labels] + rng.standard_normal((n, d)) * widths[labels, None]
        return PointSet(pts)
    if kind == "clustered":
        k = max(1, n // 200)
        centers = rng.random((k, d))
        n_bg = n // 10
        labels = rng.integers(k, size=n - n_bg)
        scale = rng.lognormal(mean=np.log(0.01), sigma=0.5, size=k)
        pts = centers[labels] + rng.standard_normal((n - n_bg, d)) * scale[labels, None]
        pts = np.vstack([pts, rng.random((n_bg, d))])
        return PointSet(pts[rng.permutation(n)])
    raise ValueError(f"unknown generator {kind!r}; choose from {', '.join(GENERATORS)}")

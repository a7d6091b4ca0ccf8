"""Binned KDE baseline: linear binning, truncated kernel weights, FFT convolution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import PointSet

__all__ = [
    "Grid",
    "GridInfeasible",
    "GridFftOutcome",
    "make_grid",
    "bin_linear",
    "binning_weights",
    "kernel_weights",
    "padded_size",
    "fft",
    "ifft",
    "gridfft_kde",
    "gridfft_auto",
    "TAU",
    "MAX_DIM",
    "DEFAULT_MEMORY_CAP",
]

TAU = 4.0
MAX_DIM = 3
# bytes allowed for one zero-padded complex array
DEFAULT_MEMORY_CAP = 1 << 27


class GridInfeasible(RuntimeError):
    """The requested grid would exceed the memory cap or the supported dimension."""


@dataclass(frozen=True)
class Grid:
    sizes: tuple[int, ...]
    gmin: np.ndarray
    gmax: np.ndarray

    @property
    def d(self) -> int:
        return len(self.sizes)

    @property
    def spacing(self) -> np.ndarray:
        return (self.gmax - self.gmin) / (np.asarray(self.sizes) - 1)


def make_grid(points: np.ndarray, sizes) -> Grid:
    """Grid spanning the data extent; a degenerate extent is widened by one unit each way."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d = points.shape[1]
    sizes = tuple(int(m) for m in (sizes if np.ndim(sizes) else [sizes] * d))
    if len(sizes) != d:
        raise ValueError(f"need {d} grid sizes, got {len(sizes)}")
    if min(sizes) < 2:
        raise ValueError("grid sizes must be >= 2")
    lo, hi = points.min(axis=0), points.max(axis=0)
    flat = hi <= lo
    lo = np.where(flat, lo - 1.0, lo)
    hi = np.where(flat, hi + 1.0, hi)
    return Grid(sizes, lo, hi)


def _cell(points: np.ndarray, grid: Grid):
    """Lower-corner cell index and the offsets to the lower and upper cell faces."""
    spacing = grid.spacing
    t = (points - grid.gmin) / spacing
    m = np.asarray(grid.sizes)
    if np.any(t < -1e-9) or np.any(t > (m - 1) + 1e-9):
        raise ValueError("point outside grid")
    idx = np.clip(np.floor(t).astype(np.int64), 0, m - 2)
    node_lo = grid.gmin + idx * spacing
    below = np.clip(points - node_lo, 0.0, spacing)
    above = np.clip(spacing - below, 0.0, spacing)
    return idx, below, above


def _corners(points: np.ndarray, grid: Grid):
    """Yield (flat node index, weight) for each of the 2^D cell corners.

    Weights are products of face offsets over the cell volume, one division
    per weight, so simple fractions such as 4/9 come out correctly rounded.
    """
    idx, below, above = _cell(points, grid)
    volume = float(np.prod(grid.spacing))
    d = grid.d
    for corner in range(1 << d):
        w = np.ones(len(points))
        nodes = []
        for k in range(d):
            b = (corner >> (d - 1 - k)) & 1
            w = w * (below[:, k] if b else above[:, k])
            nodes.append(idx[:, k] + b)
        yield np.ravel_multi_index(nodes, grid.sizes), w / volume


def binning_weights(point, corners_lo, corners_hi) -> np.ndarray:
    """Linear-binning weights of one point over the 2^D corners of its cell.

    Corners are ordered by bit pattern, dimension 0 most significant, bit 1 meaning
    the upper side.
    """
    point = np.asarray(point, dtype=np.float64)
    lo = np.asarray(corners_lo, dtype=np.float64)
    hi = np.asarray(corners_hi, dtype=np.float64)
    below, above = point - lo, hi - point
    volume = float(np.prod(hi - lo))
    d = point.size
    out = np.empty(1 << d)
    for corner in range(1 << d):
        w = 1.0
        for k in range(d):
            b = (corner >> (d - 1 - k)) & 1
            w *= below[k] if b else above[k]
        out[corner] = w / volume
    return out


def bin_linear(points, grid: Grid) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    size = math.prod(grid.sizes)
    counts = np.zeros(size)
    for nodes, w in _corners(points, grid):
        counts += np.bincount(nodes, weights=w, minlength=size)
    return counts.reshape(grid.sizes)


def _radius(grid: Grid, h: float) -> list[int]:
    return [min(int(math.floor(TAU * h / s)), m - 1) for s, m in zip(grid.spacing, grid.sizes)]


def padded_size(m: int, radius: int) -> int:
    """Next power of two >= m + radius."""
    return 1 << max(0, math.ceil(math.log2(m + radius)))


def kernel_weights(grid: Grid, h: float, shape=None) -> np.ndarray:
    """Truncated kernel weights in wrap-around layout over ``shape`` (default: padded sizes).

    Lag l sits at index l and lag -l at index P - l; everything between is zero.
    """
    radius = _radius(grid, h)
    if shape is None:
        shape = tuple(padded_size(m, r) for m, r in zip(grid.sizes, radius))
    factors = []
    for k, (L, P) in enumerate(zip(radius, shape)):
        f = np.zeros(P)
        lags = np.arange(L + 1)
        vals = np.exp(-0.5 * (lags * grid.spacing[k]) ** 2 / (h * h))
        f[lags] = vals
        f[(P - lags[1:]) % P] = vals[1:]
        factors.append(f)
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_last(x: np.ndarray, inverse: bool) -> np.ndarray:
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError(f"transform length {n} is not a power of two")
    y = x[..., _bit_reverse(n)].astype(np.complex128)
    sign = 1.0 if inverse else -1.0
    half = 1
    while half < n:
        tw = np.exp(sign * 1j * np.pi * np.arange(half) / half)
        y = y.reshape(*x.shape[:-1], n // (2 * half), 2, half)
        a = y[..., 0, :]
        b = y[..., 1, :] * tw
        y = np.stack((a + b, a - b), axis=-2).reshape(*x.shape[:-1], n)
        half *= 2
    return y


def fft(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """N-dimensional radix-2 decimation-in-time FFT over every axis (unnormalized)."""
    y = np.asarray(x, dtype=np.complex128)
    for ax in range(y.ndim):
        y = np.moveaxis(_fft_last(np.moveaxis(y, ax, -1), inverse), -1, ax)
    return y


def ifft(x: np.ndarray) -> np.ndarray:
    y = fft(x, inverse=True)
    return y / y.size


def _check_memory(shape, cap: int) -> None:
    need = 16 * math.prod(shape)
    if need > cap:
        raise GridInfeasible(f"grid infeasible: padded grid {shape} needs {need} bytes, cap is {cap}")


def gridfft_kde(queries, refs, h: float, sizes, memory_cap: int = DEFAULT_MEMORY_CAP) -> np.ndarray:
    """Approximate unnormalized sums at ``queries`` from a binned, FFT-convolved grid."""
    q = queries.data if isinstance(queries, PointSet) else np.atleast_2d(np.asarray(queries, dtype=np.float64))
    r = refs.data if isinstance(refs, PointSet) else np.atleast_2d(np.asarray(refs, dtype=np.float64))
    if q.shape[1] != r.shape[1]:
        raise ValueError("dimension mismatch")
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    d = r.shape[1]
    if d > MAX_DIM:
        raise GridInfeasible(f"grid infeasible: D={d} exceeds the supported {MAX_DIM}")
    grid = make_grid(np.vstack((q, r)), sizes)
    shape = tuple(padded_size(m, L) for m, L in zip(grid.sizes, _radius(grid, h)))
    _check_memory(shape, memory_cap)

    counts = np.zeros(shape)
    counts[tuple(slice(0, m) for m in grid.sizes)] = bin_linear(r, grid)
    conv = ifft(fft(counts) * fft(kernel_weights(grid, h, shape))).real
    dens = conv[tuple(slice(0, m) for m in grid.sizes)].ravel()

    out = np.zeros(len(q))
    for nodes, w in _corners(q, grid):
        out += w * dens[nodes]
    return out


@dataclass
class GridFftOutcome:
    """Result of grid doubling. ``status`` is "ok", "inf" (cap hit before reaching
    epsilon) or "X" (no grid fits at all)."""

    status: str
    sums: np.ndarray | None
    sizes: tuple[int, ...] | None
    max_rel_err: float


def _sample(n: int, limit: int) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    return np.linspace(0, n - 1, limit).astype(np.int64)


def gridfft_auto(queries, refs, h: float, epsilon: float, exact=None, start: int = 16,
                 memory_cap: int = DEFAULT_MEMORY_CAP, check_limit: int = 1000) -> GridFftOutcome:
    """Double the grid from ``start`` per dimension until the relative error is within epsilon.

    Error is measured against ``exact`` when given, else against brute force on at
    most ``check_limit`` evenly spaced queries.
    """
    from .engine import naive_kde, verify_relative_error

    q = queries if isinstance(queries, PointSet) else PointSet(queries)
    r = refs if isinstance(refs, PointSet) else PointSet(refs)
    if exact is None:
        sel = _sample(q.n, check_limit)
        exact = naive_kde(q.data[sel], r, h)
    else:
        exact = np.asarray(exact, dtype=np.float64)
        sel = np.arange(q.n)
    if r.d > MAX_DIM:
        return GridFftOutcome("X", None, None, math.inf)
    m = start
    tried = False
    best = math.inf
    while True:
        try:
            sums = gridfft_kde(q, r, h, [m] * r.d, memory_cap)
        except GridInfeasible:
            return GridFftOutcome("inf" if tried else "X", None, None, best)
        tried = True
        err = verify_relative_error(sums[sel], exact)[0]
        best = min(best, err)
        if err <= epsilon:
            return GridFftOutcome("ok", sums, (m,) * r.d, err)
        m *= 2

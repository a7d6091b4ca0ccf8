"""Hermite far-field and Taylor local expansions of Gaussian sums.

Coefficient tables are flat float64 arrays of length ``pmax**D``. Position
``i`` holds the multi-index given by the base-``pmax`` digits of ``i`` with
dimension 0 as the most significant digit. A table accumulated at a lower
order ``p`` keeps zeros wherever any digit is ``>= p``.

The ``_nb`` kernels work on raw arrays and are shared with the tree
traversal; the public functions wrap them around :class:`MomentTable`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numba as nb
import numpy as np

__all__ = [
    "Basis",
    "MomentTable",
    "make_basis",
    "position_to_multiindex",
    "multiindex_to_position",
    "multiindex_expansion",
    "compute_partial_derivatives",
    "hermite_value",
    "accumulate_farfield_moments",
    "trans_far_to_far",
    "eval_farfield",
    "accumulate_direct_local",
    "trans_far_to_local",
    "trans_local_to_local",
    "eval_local",
]


class Basis(NamedTuple):
    """Per-(pmax, D) index tables."""

    pmax: int
    d: int
    digits: np.ndarray  # (P, D) multi-index of each position
    fact: np.ndarray  # (P,) alpha!
    sign: np.ndarray  # (P,) (-1)^|alpha|
    maxdig: np.ndarray  # (P,) largest digit; entry is active at order p iff maxdig < p
    stride: np.ndarray  # (D,) pmax**(D-1-d)


@lru_cache(maxsize=None)
def make_basis(pmax: int, d: int) -> Basis:
    if pmax < 1 or d < 1:
        raise ValueError("need pmax >= 1 and d >= 1")
    size = pmax**d
    digits = np.array([position_to_multiindex(i, pmax, d) for i in range(size)], dtype=np.int64).reshape(size, d)
    fact = np.array([math.prod(math.factorial(int(k)) for k in row) for row in digits], dtype=np.float64)
    sign = np.where(digits.sum(axis=1) % 2 == 0, 1.0, -1.0)
    stride = np.array([pmax ** (d - 1 - k) for k in range(d)], dtype=np.int64)
    maxdig = digits.max(axis=1)
    return Basis(pmax, d, digits, fact, sign, maxdig, stride)


def position_to_multiindex(i: int, p: int, d: int) -> tuple[int, ...]:
    """Base-``p`` digits of ``i``, most significant first."""
    if not 0 <= i < p**d:
        raise ValueError(f"position {i} out of range for p={p}, D={d}")
    digits = [0] * d
    for k in range(d - 1, -1, -1):
        i, digits[k] = divmod(i, p)
    return tuple(digits)


def multiindex_to_position(alpha, p: int) -> int:
    x = 0
    for a in alpha:
        if not 0 <= a < p:
            raise ValueError(f"multi-index digit {a} outside [0, {p})")
        x = x * p + int(a)
    return x


# ---------------------------------------------------------------------------
# numba kernels


@nb.njit(cache=True)
def expansion_nb(x, p, basis, out):
    """out[pos(alpha)] = x**alpha for alpha < p, zero elsewhere."""
    d = basis.digits.shape[1]
    out[0] = 1.0
    for i in range(1, out.shape[0]):
        if basis.maxdig[i] >= p:
            out[i] = 0.0
            continue
        j = 0
        while basis.digits[i, j] == 0:
            j += 1
        out[i] = out[i - basis.stride[j]] * x[j]
    return out


@nb.njit(cache=True)
def partial_derivatives_nb(a, p, H):
    """H[d, k] = h_k(a[d]) for k < p via the three-term recurrence."""
    for d in range(a.shape[0]):
        t = a[d]
        e = np.exp(-t * t)
        H[d, 0] = e
        if p > 1:
            H[d, 1] = 2.0 * t * e
            for k in range(1, p - 1):
                H[d, k + 1] = 2.0 * t * H[d, k] - 2.0 * k * H[d, k - 1]
    return H


@nb.njit(cache=True, inline="always")
def _hermite_at(H, digits, i):
    f = 1.0
    for d in range(digits.shape[1]):
        f *= H[d, digits[i, d]]
    return f


@nb.njit(cache=True)
def farfield_leaf_nb(pts, center, inv, basis, out, tmp):
    """Add the far-field moments of ``pts`` about ``center`` into ``out``."""
    d = pts.shape[1]
    x = np.empty(d)
    acc = np.zeros(out.shape[0])
    for n in range(pts.shape[0]):
        for k in range(d):
            x[k] = (pts[n, k] - center[k]) * inv
        expansion_nb(x, basis.pmax, basis, tmp)
        for i in range(out.shape[0]):
            acc[i] += tmp[i]
    for i in range(out.shape[0]):
        out[i] += acc[i] / basis.fact[i]


@nb.njit(cache=True)
def far_to_far_nb(src, src_center, dst_center, inv, basis, dst, tmp):
    d = basis.digits.shape[1]
    x = np.empty(d)
    for k in range(d):
        x[k] = (src_center[k] - dst_center[k]) * inv
    expansion_nb(x, basis.pmax, basis, tmp)
    size = dst.shape[0]
    digits = basis.digits
    for g in range(size):
        s = 0.0
        for a in range(g + 1):
            ok = True
            for k in range(d):
                if digits[a, k] > digits[g, k]:
                    ok = False
                    break
            if ok:
                diff = g - a
                s += src[a] * tmp[diff] / basis.fact[diff]
        dst[g] += s


@nb.njit(cache=True)
def eval_farfield_nb(moments, center, q, inv, p, basis, H):
    d = q.shape[0]
    a = np.empty(d)
    for k in range(d):
        a[k] = (q[k] - center[k]) * inv
    partial_derivatives_nb(a, p, H)
    s = 0.0
    for i in range(moments.shape[0]):
        if basis.maxdig[i] < p:
            s += moments[i] * _hermite_at(H, basis.digits, i)
    return s


@nb.njit(cache=True)
def direct_local_nb(pts, center, inv, p, basis, out, H, tmp):
    """Add the order-p direct local moments of ``pts`` about ``center``."""
    d = pts.shape[1]
    a = np.empty(d)
    size = out.shape[0]
    for i in range(size):
        tmp[i] = 0.0
    for n in range(pts.shape[0]):
        for k in range(d):
            a[k] = (center[k] - pts[n, k]) * inv
        partial_derivatives_nb(a, p, H)
        for i in range(size):
            if basis.maxdig[i] < p:
                tmp[i] += _hermite_at(H, basis.digits, i)
    for i in range(size):
        if basis.maxdig[i] < p:
            out[i] += tmp[i] * basis.sign[i] / basis.fact[i]


@nb.njit(cache=True)
def far_to_local_nb(moments, src_center, dst_center, inv, p, basis, out, H):
    d = src_center.shape[0]
    a = np.empty(d)
    for k in range(d):
        a[k] = (dst_center[k] - src_center[k]) * inv
    partial_derivatives_nb(a, 2 * p - 1, H)
    digits = basis.digits
    size = out.shape[0]
    for b in range(size):
        if basis.maxdig[b] >= p:
            continue
        s = 0.0
        for al in range(size):
            if basis.maxdig[al] >= p:
                continue
            f = 1.0
            for k in range(d):
                f *= H[k, digits[al, k] + digits[b, k]]
            s += moments[al] * f
        out[b] += s * basis.sign[b] / basis.fact[b]


@nb.njit(cache=True)
def local_to_local_nb(src, src_center, dst_center, inv, p, basis, dst, tmp):
    d = src_center.shape[0]
    x = np.empty(d)
    for k in range(d):
        x[k] = (dst_center[k] - src_center[k]) * inv
    expansion_nb(x, p, basis, tmp)
    digits = basis.digits
    size = dst.shape[0]
    for al in range(size):
        if basis.maxdig[al] >= p:
            continue
        s = 0.0
        for b in range(al, size):
            if basis.maxdig[b] >= p or src[b] == 0.0:
                continue
            ok = True
            for k in range(d):
                if digits[b, k] < digits[al, k]:
                    ok = False
                    break
            if ok:
                diff = b - al
                s += basis.fact[b] / (basis.fact[al] * basis.fact[diff]) * src[b] * tmp[diff]
        dst[al] += s


@nb.njit(cache=True)
def eval_local_nb(coeffs, center, q, inv, p, basis, tmp):
    d = q.shape[0]
    x = np.empty(d)
    for k in range(d):
        x[k] = (q[k] - center[k]) * inv
    expansion_nb(x, p, basis, tmp)
    s = 0.0
    for i in range(coeffs.shape[0]):
        if basis.maxdig[i] < p:
            s += coeffs[i] * tmp[i]
    return s


# ---------------------------------------------------------------------------
# table-level API


@dataclass
class MomentTable:
    """Coefficients of one expansion stored at ``order``**D.

    ``active_order`` is the largest order actually accumulated so far; for
    far-field tables it equals ``order``.
    """

    coeffs: np.ndarray
    order: int
    center: np.ndarray
    kind: str = "far"
    active_order: int = 0

    @classmethod
    def zeros(cls, order: int, center, kind: str = "local") -> MomentTable:
        center = np.asarray(center, dtype=np.float64).ravel()
        return cls(np.zeros(order ** center.shape[0]), order, center, kind, 0)

    @property
    def d(self) -> int:
        return self.center.shape[0]

    @property
    def basis(self) -> Basis:
        return make_basis(self.order, self.d)

    def __getitem__(self, alpha) -> float:
        return float(self.coeffs[multiindex_to_position(alpha, self.order)])


def _inv(h: float) -> float:
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    return 1.0 / math.sqrt(2.0 * h * h)


def _vec(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64).ravel())


def multiindex_expansion(x, p: int) -> np.ndarray:
    """All monomials x**alpha, alpha < p, in base-p layout."""
    x = _vec(x)
    basis = make_basis(p, x.shape[0])
    return expansion_nb(x, p, basis, np.empty(p ** x.shape[0]))


def compute_partial_derivatives(a, p: int) -> np.ndarray:
    """D x p table of Hermite functions h_k(a[d])."""
    a = _vec(a)
    return partial_derivatives_nb(a, p, np.zeros((a.shape[0], max(p, 1))))


def hermite_value(H: np.ndarray, alpha) -> float:
    return float(np.prod([H[d, k] for d, k in enumerate(alpha)]))


def accumulate_farfield_moments(points, center, h: float, p_max: int) -> MomentTable:
    """Far-field moments sum_r (1/alpha!) ((r - c)/sqrt(2h^2))^alpha for alpha < p_max."""
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=np.float64)))
    table = MomentTable.zeros(p_max, center, kind="far")
    farfield_leaf_nb(pts, table.center, _inv(h), table.basis, table.coeffs, np.empty_like(table.coeffs))
    table.active_order = p_max
    return table


def trans_far_to_far(source: MomentTable, target_center, h: float, target: MomentTable | None = None) -> MomentTable:
    """Re-center far-field moments; the result is added into ``target`` if given."""
    if target is None:
        target = MomentTable.zeros(source.order, target_center, kind="far")
    if target.order != source.order:
        raise ValueError("source and target orders differ")
    far_to_far_nb(source.coeffs, source.center, _vec(target_center), _inv(h), source.basis,
                  target.coeffs, np.empty_like(target.coeffs))
    target.active_order = target.order
    return target


def eval_farfield(table: MomentTable, q, h: float, p: int | None = None) -> float:
    p = table.order if p is None else p
    if p > table.order:
        raise ValueError("evaluation order exceeds table order")
    H = np.zeros((table.d, max(p, 1)))
    return float(eval_farfield_nb(table.coeffs, table.center, _vec(q), _inv(h), p, table.basis, H))


def accumulate_direct_local(ref_points, target: MomentTable, h: float, p: int) -> MomentTable:
    """Add direct local moments of ``ref_points`` about ``target.center`` at order ``p``."""
    if p > target.order:
        raise ValueError("order exceeds table order")
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(ref_points, dtype=np.float64)))
    if pts.shape[0]:
        H = np.zeros((target.d, max(p, 1)))
        direct_local_nb(pts, target.center, _inv(h), p, target.basis, target.coeffs, H,
                        np.empty_like(target.coeffs))
    target.active_order = max(target.active_order, p)
    return target


def trans_far_to_local(source: MomentTable, target: MomentTable, h: float, p: int) -> MomentTable:
    """Convert the order-p truncation of far-field ``source`` into local moments of ``target``."""
    if p > min(source.order, target.order):
        raise ValueError("order exceeds table order")
    if source.order != target.order:
        raise ValueError("tables must share a layout")
    H = np.zeros((target.d, 2 * p))
    far_to_local_nb(source.coeffs, source.center, target.center, _inv(h), p, source.basis, target.coeffs, H)
    target.active_order = max(target.active_order, p)
    return target


def trans_local_to_local(parent: MomentTable, child: MomentTable, h: float) -> MomentTable:
    """Shift ``parent`` to ``child.center`` and add it into ``child``."""
    p = parent.active_order
    if p == 0:
        return child
    if parent.order != child.order:
        raise ValueError("tables must share a layout")
    local_to_local_nb(parent.coeffs, parent.center, child.center, _inv(h), p, parent.basis, child.coeffs,
                      np.empty_like(child.coeffs))
    child.active_order = max(child.active_order, p)
    return child


def eval_local(table: MomentTable, q, h: float) -> float:
    p = table.active_order
    if p == 0:
        return 0.0
    return float(eval_local_nb(table.coeffs, table.center, _vec(q), _inv(h), p, table.basis,
                               np.empty_like(table.coeffs)))

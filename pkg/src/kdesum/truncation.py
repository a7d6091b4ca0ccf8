"""Truncation-error bounds, order selection and approximation-method choice."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "Box",
    "ApproxChoice",
    "EXHAUSTIVE",
    "FAR_FIELD",
    "DIRECT_LOCAL",
    "FAR_TO_LOCAL",
    "default_pmax",
    "farfield_error_bound",
    "local_error_bound",
    "f2l_error_bound",
    "centroid_error_bound",
    "farfield_order",
    "local_accum_order",
    "f2l_order",
    "choose_best_method",
]

EXHAUSTIVE, FAR_FIELD, DIRECT_LOCAL, FAR_TO_LOCAL = 0, 1, 2, 3
METHOD_NAMES = {EXHAUSTIVE: "E", FAR_FIELD: "F", DIRECT_LOCAL: "D", FAR_TO_LOCAL: "T"}

COST_DEFAULT, COST_TERMS = 0, 1

_PMAX_BY_DIM = {1: 8, 2: 6, 3: 4, 4: 2, 5: 2}


def default_pmax(d: int) -> int:
    """Largest truncation order used for dimension ``d``."""
    return _PMAX_BY_DIM.get(d, 1)


@nb.njit(cache=True)
def _binom(n, k):
    c = 1.0
    for i in range(k):
        c = c * (n - i) / (i + 1)
    return c


@nb.njit(cache=True)
def _scaled(count, log_prefactor, s):
    if count <= 0 or s <= 0.0:
        return 0.0
    return np.exp(np.log(count) + log_prefactor + np.log(s))


@nb.njit(cache=True)
def series_bound_nb(count, r, p, d):
    """|R| (1-r)^-D sum_k C(D,k) (1-r^p)^k (r^p / sqrt(p!))^(D-k)."""
    rp = r**p
    a = 1.0 - rp
    b = rp / np.sqrt(math.gamma(p + 1.0))
    s = 0.0
    for k in range(d):
        s += _binom(d, k) * a**k * b ** (d - k)
    return _scaled(count, -d * np.log1p(-r), s)


@nb.njit(cache=True)
def f2l_bound_nb(count, r, p, d):
    t = 2.0 * r
    tp = t**p
    a = (1.0 - tp) ** 2
    b = tp * (2.0 - tp) / np.sqrt(math.gamma(p + 1.0))
    s = 0.0
    for k in range(d):
        s += _binom(d, k) * a**k * b ** (d - k)
    return _scaled(count, -2.0 * d * np.log1p(-t), s)


@nb.njit(cache=True)
def _kern(dist, h):
    return np.exp(-0.5 * (dist / h) ** 2)


@nb.njit(cache=True)
def centroid_bound_nb(count, dl, du, dc, h):
    """Error of replacing every kernel value by K(||Q.c - R.c||)."""
    kc = _kern(dc, h)
    return count * max(_kern(dl, h) - kc, kc - _kern(du, h))


@nb.njit(cache=True)
def farfield_order_nb(count, rside, h, tau, pmax, d):
    r = rside / (2.0 * h)
    if r >= 1.0:
        return 0
    for p in range(1, pmax + 1):
        if series_bound_nb(count, r, p, d) <= tau:
            return p
    return 0


@nb.njit(cache=True)
def local_order_nb(count, qside, h, tau, pmax, d):
    r = qside / (2.0 * h)
    if r >= 1.0:
        return 0
    for p in range(1, pmax + 1):
        if series_bound_nb(count, r, p, d) <= tau:
            return p
    return 0


@nb.njit(cache=True)
def f2l_ratio_nb(qside, rside, h):
    return max(qside, rside) / (4.0 * h)


@nb.njit(cache=True)
def f2l_order_nb(count, qside, rside, dl, du, dc, h, tau, pmax, d, centroid):
    if centroid and centroid_bound_nb(count, dl, du, dc, h) <= tau:
        return 1
    r = f2l_ratio_nb(qside, rside, h)
    if r >= 0.5:
        return 0
    for p in range(1, pmax + 1):
        if f2l_bound_nb(count, r, p, d) <= tau:
            return p
    return 0


@nb.njit(cache=True)
def choose_nb(nq, nr, qside, rside, dl, du, dc, h, tau, pmax, d, cost_model, centroid):
    """(method, order) of the cheapest admissible approximation; order 0 with EXHAUSTIVE."""
    pf = farfield_order_nb(nr, rside, h, tau, pmax, d)
    pd = local_order_nb(nr, qside, h, tau, pmax, d)
    pt = f2l_order_nb(nr, qside, rside, dl, du, dc, h, tau, pmax, d, centroid)
    inf = np.inf
    fd = float(d)
    if cost_model == COST_DEFAULT:
        cf = nq * fd ** (pf + 1) if pf > 0 else inf
        cd = nr * fd ** (pd + 1) if pd > 0 else inf
        ct = fd ** (2 * pt + 1) if pt > 0 else inf
        ce = fd * nq * nr
    else:
        cf = nq * float(pf) ** d if pf > 0 else inf
        cd = nr * float(pd) ** d if pd > 0 else inf
        ct = fd * float(pt) ** (2 * d) if pt > 0 else inf
        ce = fd * nq * nr
    best = min(min(cf, cd), min(ct, ce))
    if cf == best:
        return FAR_FIELD, pf
    if cd == best:
        return DIRECT_LOCAL, pd
    if ct == best:
        return FAR_TO_LOCAL, pt
    return EXHAUSTIVE, 0


# ---------------------------------------------------------------------------
# Python-facing API


@dataclass(frozen=True)
class Box:
    """Bounding box plus point count of a tree node."""

    lo: np.ndarray
    hi: np.ndarray
    count: int

    @classmethod
    def of(cls, tree, node: int) -> Box:
        return cls(tree.lo[node], tree.hi[node], tree.count(node))

    @classmethod
    def around(cls, points) -> Box:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls(pts.min(axis=0), pts.max(axis=0), pts.shape[0])

    @property
    def side(self) -> float:
        return float(np.max(self.hi - self.lo))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def d(self) -> int:
        return len(self.lo)


@dataclass(frozen=True)
class ApproxChoice:
    """E, F(R.c, p), D(Q.c, p) or T(Q.c, p)."""

    kind: str
    order: int = 0
    center: np.ndarray | None = None

    @property
    def exhaustive(self) -> bool:
        return self.kind == "E"


def _order(p: int) -> float:
    return math.inf if p == 0 else p


def farfield_error_bound(count: float, r: float, p: int, d: int) -> float:
    if not 0 <= r < 1 or p < 1:
        raise ValueError("need 0 <= r < 1 and p >= 1")
    return float(series_bound_nb(float(count), float(r), int(p), int(d)))


def local_error_bound(count: float, r: float, p: int, d: int) -> float:
    # same closed form as the far-field bound; r is the query-node ratio
    return farfield_error_bound(count, r, p, d)


def f2l_error_bound(count: float, r: float, p: int, d: int) -> float:
    if not 0 <= r < 0.5 or p < 1:
        raise ValueError("need 0 <= r < 1/2 and p >= 1")
    return float(f2l_bound_nb(float(count), float(r), int(p), int(d)))


def _distances(Q: Box, R: Box):
    from .kdtree import box_distance_bounds

    dl, du = box_distance_bounds(np.asarray(Q.lo, float), np.asarray(Q.hi, float),
                                 np.asarray(R.lo, float), np.asarray(R.hi, float))
    dc = float(np.linalg.norm(Q.center - R.center))
    return float(dl), float(du), dc


def centroid_error_bound(Q: Box, R: Box, h: float) -> float:
    dl, du, dc = _distances(Q, R)
    return float(centroid_bound_nb(float(R.count), dl, du, dc, h))


def farfield_order(Q: Box, R: Box, h: float, tau: float, p_max: int | None = None) -> float:
    """Least order whose far-field bound is within ``tau``; ``inf`` if none."""
    p_max = default_pmax(R.d) if p_max is None else p_max
    return _order(farfield_order_nb(float(R.count), R.side, h, tau, p_max, R.d))


def local_accum_order(Q: Box, R: Box, h: float, tau: float, p_max: int | None = None) -> float:
    p_max = default_pmax(Q.d) if p_max is None else p_max
    return _order(local_order_nb(float(R.count), Q.side, h, tau, p_max, Q.d))


def f2l_order(Q: Box, R: Box, h: float, tau: float, p_max: int | None = None, centroid: bool = True) -> float:
    """Least far-to-local order; with ``centroid`` order 1 is also admissible
    whenever the distance-based centroid bound already meets ``tau``."""
    p_max = default_pmax(Q.d) if p_max is None else p_max
    dl, du, dc = _distances(Q, R)
    return _order(f2l_order_nb(float(R.count), Q.side, R.side, dl, du, dc, h, tau, p_max, Q.d, centroid))


def choose_best_method(Q: Box, R: Box, h: float, tau: float, p_max: int | None = None,
                       cost_model: str = "default", centroid: bool = True) -> ApproxChoice:
    p_max = default_pmax(Q.d) if p_max is None else p_max
    dl, du, dc = _distances(Q, R)
    model = COST_DEFAULT if cost_model == "default" else COST_TERMS
    method, p = choose_nb(float(Q.count), float(R.count), Q.side, R.side, dl, du, dc, h, tau,
                          p_max, Q.d, model, centroid)
    if method == FAR_FIELD:
        return ApproxChoice("F", int(p), R.center)
    if method == DIRECT_LOCAL:
        return ApproxChoice("D", int(p), Q.center)
    if method == FAR_TO_LOCAL:
        return ApproxChoice("T", int(p), Q.center)
    return ApproxChoice("E")

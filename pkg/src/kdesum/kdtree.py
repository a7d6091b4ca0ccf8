"""Mid-point kd-tree stored as flat arrays, plus node-pair distance bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .dataset import PointSet

__all__ = ["KdTree", "build_tree", "node_distance_bounds", "box_distance_bounds"]

DEFAULT_LEAF_THRESHOLD = 20


@dataclass(frozen=True)
class KdTree:
    """A kd-tree in preorder; node 0 is the root.

    Node ``i`` owns ``perm[start[i]:end[i]]`` (row indices into the source
    point set). ``points`` holds the rows in permuted order so every node's
    points are a contiguous slice. ``left``/``right``/``parent`` are -1 when
    absent; ``split_dim`` is -1 at leaves.
    """

    points: np.ndarray
    perm: np.ndarray
    start: np.ndarray
    end: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    split_dim: np.ndarray
    split_coord: np.ndarray
    leaf_threshold: int

    @property
    def n_nodes(self) -> int:
        return self.start.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def centroid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def count(self, node: int) -> int:
        return int(self.end[node] - self.start[node])

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def indices(self, node: int) -> np.ndarray:
        """Original row indices owned by ``node``."""
        return self.perm[self.start[node]:self.end[node]]

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left < 0)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(1, self.n_nodes):
            depth[i] = depth[self.parent[i]] + 1
        return int(depth.max())

    def dump(self) -> str:
        """Indented text rendering of node bounds and counts."""
        out = []
        stack = [(0, 0)]
        while stack:
            node, level = stack.pop()
            box = " x ".join(f"[{a:.6g}, {b:.6g}]" for a, b in zip(self.lo[node], self.hi[node]))
            tag = "leaf" if self.is_leaf(node) else f"split d={self.split_dim[node]} at {self.split_coord[node]:.6g}"
            out.append(f"{'  ' * level}#{node} n={self.count(node)} {box} {tag}")
            if not self.is_leaf(node):
                stack.append((int(self.right[node]), level + 1))
                stack.append((int(self.left[node]), level + 1))
        return "\n".join(out)


def build_tree(points: PointSet | np.ndarray, leaf_threshold: int = DEFAULT_LEAF_THRESHOLD) -> KdTree:
    """Build a mid-point kd-tree.

    Each internal node splits its widest bounding-box side at the midpoint;
    points with ``x[split_dim] <= split_coord`` go left. If that leaves one
    side empty the node falls back to a rank (median) split on the same
    dimension. Recursion stops once a node holds ``leaf_threshold`` or fewer
    points.
    """
    if leaf_threshold < 1:
        raise ValueError("leaf_threshold must be >= 1")
    data = points.data if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    n, d = data.shape
    perm = np.arange(n, dtype=np.int64)

    start, end, lo, hi = [], [], [], []
    left, right, parent, sdim, scoord = [], [], [], [], []

    def new_node(s, e, par):
        idx = perm[s:e]
        pts = data[idx]
        start.append(s)
        end.append(e)
        lo.append(pts.min(axis=0))
        hi.append(pts.max(axis=0))
        left.append(-1)
        right.append(-1)
        parent.append(par)
        sdim.append(-1)
        scoord.append(np.nan)
        return len(start) - 1

    stack = [new_node(0, n, -1)]
    # children are created immediately after the parent is split, so ids are
    # assigned in preorder by processing the left child first
    order = []
    while stack:
        node = stack.pop()
        order.append(node)
        s, e = start[node], end[node]
        if e - s <= leaf_threshold:
            continue
        width = hi[node] - lo[node]
        dim = int(np.argmax(width))
        coord = 0.5 * (lo[node][dim] + hi[node][dim])
        seg = perm[s:e]
        vals = data[seg, dim]
        mask = vals <= coord
        n_left = int(mask.sum())
        if n_left == 0 or n_left == e - s:
            k = (e - s) // 2
            part = np.argsort(vals, kind="stable")
            seg[:] = seg[part]
            n_left = k
            coord = float(data[seg[k - 1], dim])
        else:
            seg[:] = np.concatenate([seg[mask], seg[~mask]])
        sdim[node] = dim
        scoord[node] = coord
        lc = new_node(s, s + n_left, node)
        rc = new_node(s + n_left, e, node)
        left[node], right[node] = lc, rc
        stack.append(rc)
        stack.append(lc)

    # renumber into preorder
    remap = np.empty(len(order), dtype=np.int64)
    remap[np.asarray(order)] = np.arange(len(order))

    def arr(vals, dtype):
        a = np.asarray(vals, dtype=dtype)
        out = np.empty_like(a)
        out[remap] = a
        return out

    def links(vals):
        a = np.asarray(vals, dtype=np.int64)
        a = np.where(a >= 0, remap[np.maximum(a, 0)], -1)
        out = np.empty_like(a)
        out[remap] = a
        return out

    lo_a = np.empty((len(order), d))
    hi_a = np.empty((len(order), d))
    lo_a[remap] = np.asarray(lo)
    hi_a[remap] = np.asarray(hi)
    return KdTree(
        points=np.ascontiguousarray(data[perm]),
        perm=perm,
        start=arr(start, np.int64),
        end=arr(end, np.int64),
        lo=lo_a,
        hi=hi_a,
        left=links(left),
        right=links(right),
        parent=links(parent),
        split_dim=arr(sdim, np.int64),
        split_coord=arr(scoord, np.float64),
        leaf_threshold=leaf_threshold,
    )


@nb.njit(cache=True, inline="always")
def box_distance_bounds(qlo, qhi, rlo, rhi):
    """Lower/upper bounds on ||q - r|| over two boxes, in O(D)."""
    lower = 0.0
    upper = 0.0
    for k in range(qlo.shape[0]):
        a = rlo[k] - qhi[k]
        b = qlo[k] - rhi[k]
        t = a + abs(a) + b + abs(b)
        lower += t * t
        u = max(rhi[k] - qlo[k], qhi[k] - rlo[k])
        upper += u * u
    return 0.5 * np.sqrt(lower), np.sqrt(upper)


def node_distance_bounds(qtree: KdTree, qnode: int, rtree: KdTree, rnode: int) -> tuple[float, float]:
    """(d_lower, d_upper) between a query node and a reference node."""
    lo_, up_ = box_distance_bounds(qtree.lo[qnode], qtree.hi[qnode], rtree.lo[rnode], rtree.hi[rnode])
    return float(lo_), float(up_)

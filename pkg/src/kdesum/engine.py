"""Kernel-summation engines: brute force, centroid dual-tree and DFGT.

All engines return unnormalized Gaussian sums ``G(q) = sum_r exp(-|q-r|^2 / 2h^2)``.
Density conversion is left to the callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _traversal as tv
from .dataset import PointSet
from .kdtree import DEFAULT_LEAF_THRESHOLD, KdTree, build_tree
from .series import make_basis
from .truncation import COST_DEFAULT, COST_TERMS, default_pmax

__all__ = [
    "EngineConfig",
    "KdeResult",
    "ReferenceModel",
    "naive_kde",
    "dfd_kde",
    "dfgt_kde",
    "run_engine",
    "verify_relative_error",
    "ALGORITHMS",
]

ALGORITHMS = ("naive", "dfd", "dfgt", "gridfft")
_COST_MODELS = {"default": COST_DEFAULT, "terms": COST_TERMS}


@dataclass(frozen=True)
class EngineConfig:
    epsilon: float = 0.01
    leaf_threshold: int = DEFAULT_LEAF_THRESHOLD
    p_max: int | None = None
    algorithm: str = "dfgt"
    cost_model: str = "default"
    # allow the distance-aware T(c, 1) prune in the F2L order selector
    centroid_prune: bool = True

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.leaf_threshold < 1:
            raise ValueError("leaf_threshold must be >= 1")
        if self.p_max is not None and self.p_max < 1:
            raise ValueError("p_max must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.cost_model not in _COST_MODELS:
            raise ValueError(f"unknown cost model {self.cost_model!r}")


@dataclass
class KdeResult:
    """Per-query sums in input order, with the accounting channels kept apart."""

    sums: np.ndarray
    sum_exhaustive: np.ndarray
    sum_farfield: np.ndarray
    sum_local: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    stats: dict = field(default_factory=dict)
    # instrumented runs only: cover[i, j] counts how often pair (query i, ref j) was accounted
    cover: np.ndarray | None = None


def _as_points(x) -> PointSet:
    return x if isinstance(x, PointSet) else PointSet(x)


def _check_dims(queries: PointSet, refs: PointSet) -> None:
    if queries.d != refs.d:
        raise ValueError(f"dimension mismatch: queries have D={queries.d}, refs have D={refs.d}")


def _check_h(h: float) -> float:
    h = float(h)
    if not (h > 0 and np.isfinite(h)):
        raise ValueError(f"bandwidth must be positive and finite, got {h}")
    return h


def naive_kde(queries, refs, h: float, chunk_elems: int = 1 << 22) -> np.ndarray:
    """Exact sums by direct evaluation, chunked over queries to bound memory."""
    queries, refs = _as_points(queries), _as_points(refs)
    _check_dims(queries, refs)
    h = _check_h(h)
    q, r = queries.data, refs.data
    out = np.empty(queries.n)
    step = max(1, chunk_elems // max(1, refs.n * refs.d))
    scale = -0.5 / (h * h)
    for s in range(0, queries.n, step):
        diff = q[s:s + step, None, :] - r[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        out[s:s + step] = np.exp(d2 * scale).sum(axis=1)
    return out


class ReferenceModel:
    """Reference tree plus far-field moments cached per (h, p_max).

    Tree topology is h-independent and shared across a bandwidth sweep.
    """

    def __init__(self, refs, leaf_threshold: int = DEFAULT_LEAF_THRESHOLD):
        self.points = _as_points(refs)
        self.tree: KdTree = build_tree(self.points, leaf_threshold)
        self.arrays = tv.tree_arrays(self.tree)
        self._moments: dict[tuple[float, int], np.ndarray] = {}

    @property
    def leaf_threshold(self) -> int:
        return self.tree.leaf_threshold

    def moments(self, h: float, pmax: int) -> np.ndarray:
        key = (float(h), int(pmax))
        far = self._moments.get(key)
        if far is None:
            basis = make_basis(pmax, self.points.d)
            far = tv.init_farfield(self.arrays, 1.0 / np.sqrt(2.0 * h * h), basis)
            self._moments[key] = far
        return far


def _resolve(refs, leaf_threshold: int) -> ReferenceModel:
    if isinstance(refs, ReferenceModel):
        return refs
    return ReferenceModel(refs, leaf_threshold)


def _dual_tree(queries, refs, h, config: EngineConfig, mode: int, exact=None) -> KdeResult:
    h = _check_h(h)
    model = _resolve(refs, config.leaf_threshold)
    same = queries is refs or (isinstance(refs, ReferenceModel) and queries is model)
    qpoints = model.points if same else _as_points(queries)
    _check_dims(qpoints, model.points)
    d = qpoints.d

    if same or qpoints is model.points:
        qtree, Q = model.tree, model.arrays
    else:
        qtree = build_tree(qpoints, config.leaf_threshold)
        Q = tv.tree_arrays(qtree)

    if mode == tv.MODE_DFD:
        pmax = 1
        far = np.zeros((1, 1))
    else:
        pmax = config.p_max or default_pmax(d)
        far = model.moments(h, pmax)
    basis = make_basis(pmax, d)
    nref = float(model.points.n)

    exact_perm = None
    if exact is not None:
        exact_perm = np.asarray(exact, dtype=np.float64)[qtree.perm]
    st = tv.new_state(qtree.n_nodes, qpoints.n, model.points.n, d, pmax, nref, exact_perm)
    prm = tv.Params(h, 1.0 / np.sqrt(2.0 * h * h), float(config.epsilon), nref, pmax, mode,
                    _COST_MODELS[config.cost_model], bool(config.centroid_prune), exact is not None)
    tv.dual_tree(Q, model.arrays, far, 0, 0, st, prm, basis)
    if exact is not None:
        tv._checkpoint(Q, st)
    tv.post(Q, 0, st, prm, basis)

    def unperm(a):
        out = np.empty_like(a)
        out[qtree.perm] = a
        return out

    e, f, l = unperm(st.sum_e), unperm(st.sum_f), unperm(st.sum_l)
    stats = {
        "kernel_evals": int(st.stats[tv.KERNEL_EVALS]),
        "base_cases": int(st.stats[tv.BASE_CASES]),
        "prune_farfield": int(st.stats[tv.PRUNE_F]),
        "prune_direct_local": int(st.stats[tv.PRUNE_D]),
        "prune_far_to_local": int(st.stats[tv.PRUNE_T]),
        "calls": int(st.stats[tv.CALLS]),
        "checkpoints": int(st.stats[tv.CHECKPOINTS]),
        "bound_violations": int(st.stats[tv.VIOLATIONS]),
    }
    cover = None
    if exact is not None:
        cover = np.empty_like(st.cover)
        cover[qtree.perm[:, None], model.tree.perm[None, :]] = st.cover
    return KdeResult(
        sums=e + f + l, sum_exhaustive=e, sum_farfield=f, sum_local=l,
        lower=unperm(st.gl), upper=unperm(st.gu), stats=stats, cover=cover,
    )


def dfgt_kde(queries, refs, h: float, epsilon: float = 0.01, config: EngineConfig | None = None,
             *, exact: np.ndarray | None = None, detailed: bool = False):
    """Dual-tree fast Gauss transform with a per-query relative error of at most ``epsilon``.

    ``refs`` may be a :class:`ReferenceModel` to reuse its tree and moments; pass the
    same object as ``queries`` for the Q = R case. Supplying ``exact`` turns on the
    instrumented run (bound checks at every checkpoint and pair coverage counts) and
    implies ``detailed``.
    """
    config = _config(config, epsilon)
    res = _dual_tree(queries, refs, h, config, tv.MODE_DFGT, exact)
    return res if (detailed or exact is not None) else res.sums


def dfd_kde(queries, refs, h: float, epsilon: float = 0.01, leaf_threshold: int = DEFAULT_LEAF_THRESHOLD,
            *, exact: np.ndarray | None = None, detailed: bool = False):
    """Centroid dual-tree: prunes with the kernel-range midpoint only."""
    config = EngineConfig(epsilon=epsilon, leaf_threshold=leaf_threshold, algorithm="dfd")
    res = _dual_tree(queries, refs, h, config, tv.MODE_DFD, exact)
    return res if (detailed or exact is not None) else res.sums


def _config(config: EngineConfig | None, epsilon: float) -> EngineConfig:
    if config is None:
        return EngineConfig(epsilon=epsilon)
    return config


def run_engine(algorithm: str, queries, refs, h: float, config: EngineConfig | None = None) -> np.ndarray:
    """Dispatch by algorithm name; used by the CV and CLI layers."""
    config = config or EngineConfig(algorithm=algorithm)
    if algorithm == "naive":
        r = refs.points if isinstance(refs, ReferenceModel) else refs
        q = r if queries is refs else queries
        return naive_kde(q, r, h)
    if algorithm == "dfd":
        return dfd_kde(queries, refs, h, config.epsilon, config.leaf_threshold)
    if algorithm == "dfgt":
        return dfgt_kde(queries, refs, h, config=config)
    if algorithm == "gridfft":
        from .gridfft import GridInfeasible, gridfft_auto

        r = refs.points if isinstance(refs, ReferenceModel) else refs
        q = r if queries is refs else queries
        outcome = gridfft_auto(q, r, h, config.epsilon)
        if outcome.sums is None:
            raise GridInfeasible(f"no grid within the memory cap reached epsilon (status {outcome.status})")
        return outcome.sums
    raise ValueError(f"unknown algorithm {algorithm!r}")


def verify_relative_error(approx, exact) -> tuple[float, int, np.ndarray]:
    """Max relative error, the index where it occurs and the per-query errors.

    A zero exact sum (possible only through underflow) counts as error 0 when the
    approximation is also zero and as infinite otherwise.
    """
    approx = np.asarray(approx, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    if approx.shape != exact.shape:
        raise ValueError(f"length mismatch: {approx.size} approximations vs {exact.size} exact values")
    if approx.size == 0:
        return 0.0, -1, np.zeros(0)
    diff = np.abs(approx - exact)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(exact != 0, diff / np.abs(exact), np.where(diff == 0, 0.0, np.inf))
    idx = int(np.argmax(rel))
    return float(rel[idx]), idx, rel

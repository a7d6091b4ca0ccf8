"""Compiled dual-tree traversal shared by the DFGT and DFD engines.

Everything in here indexes points in tree (permuted) order. Trees arrive as
:class:`TreeArrays`, per-run mutable bookkeeping as :class:`RunState`.
"""

from __future__ import annotations

from typing import NamedTuple

import numba as nb
import numpy as np

from .kdtree import box_distance_bounds
from .series import (
    direct_local_nb,
    eval_farfield_nb,
    eval_local_nb,
    far_to_far_nb,
    far_to_local_nb,
    farfield_leaf_nb,
    local_to_local_nb,
)
from .truncation import DIRECT_LOCAL, EXHAUSTIVE, FAR_FIELD, FAR_TO_LOCAL, choose_nb

MODE_DFGT, MODE_DFD = 0, 1

# stats slots
KERNEL_EVALS, BASE_CASES, PRUNE_F, PRUNE_D, PRUNE_T, CALLS, CHECKPOINTS, VIOLATIONS = range(8)
N_STATS = 8


class TreeArrays(NamedTuple):
    pts: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    start: np.ndarray
    end: np.ndarray
    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    center: np.ndarray
    side: np.ndarray


class Params(NamedTuple):
    h: float
    inv: float
    eps: float
    nref: float
    pmax: int
    mode: int
    cost_model: int
    centroid: bool
    instrument: bool


class RunState(NamedTuple):
    node_gl: np.ndarray
    node_gu: np.ndarray
    delta_l: np.ndarray
    delta_u: np.ndarray
    local: np.ndarray
    local_order: np.ndarray
    gl: np.ndarray
    gu: np.ndarray
    sum_e: np.ndarray
    sum_f: np.ndarray
    sum_l: np.ndarray
    stats: np.ndarray
    H: np.ndarray
    tmp: np.ndarray
    # instrumentation; (1,)- or (1, 1)-shaped placeholders when disabled
    exact: np.ndarray
    cover: np.ndarray
    path_l: np.ndarray
    path_u: np.ndarray


def tree_arrays(tree) -> TreeArrays:
    return TreeArrays(
        tree.points, tree.lo, tree.hi, tree.start, tree.end, tree.left, tree.right, tree.parent,
        np.ascontiguousarray(tree.centroid), np.ascontiguousarray((tree.hi - tree.lo).max(axis=1)),
    )


@nb.njit(cache=True)
def init_farfield(R, inv, basis):
    """Far-field moments of every reference node: leaves from points, parents by F2F."""
    n_nodes = R.start.shape[0]
    size = basis.digits.shape[0]
    far = np.zeros((n_nodes, size))
    tmp = np.empty(size)
    for node in range(n_nodes - 1, -1, -1):
        if R.left[node] < 0:
            farfield_leaf_nb(R.pts[R.start[node]:R.end[node]], R.center[node], inv, basis, far[node], tmp)
        else:
            for child in (R.left[node], R.right[node]):
                far_to_far_nb(far[child], R.center[child], R.center[node], inv, basis, far[node], tmp)
    return far


@nb.njit(cache=True, inline="always")
def _kernel(d2, h):
    return np.exp(-0.5 * d2 / (h * h))


@nb.njit(cache=True)
def _checkpoint(Q, st):
    """Check that effective node and point bounds bracket the exact sums."""
    st.stats[CHECKPOINTS] += 1
    n_nodes = Q.start.shape[0]
    for node in range(n_nodes):
        par = Q.parent[node]
        base_l = st.path_l[par] if par >= 0 else 0.0
        base_u = st.path_u[par] if par >= 0 else 0.0
        st.path_l[node] = base_l + st.delta_l[node]
        st.path_u[node] = base_u + st.delta_u[node]
    for node in range(n_nodes):
        lower = st.node_gl[node] + st.path_l[node]
        upper = st.node_gu[node] + st.path_u[node]
        is_leaf = Q.left[node] < 0
        for i in range(Q.start[node], Q.end[node]):
            g = st.exact[i]
            slack = 1e-10 * g + 1e-300
            if lower > g + slack or upper < g - slack:
                st.stats[VIOLATIONS] += 1
            if is_leaf:
                if st.gl[i] + st.path_l[node] > g + slack or st.gu[i] + st.path_u[node] < g - slack:
                    st.stats[VIOLATIONS] += 1


@nb.njit(cache=True)
def _cover(Q, R, qn, rn, st):
    for i in range(Q.start[qn], Q.end[qn]):
        for j in range(R.start[rn], R.end[rn]):
            st.cover[i, j] += 1


@nb.njit(cache=True)
def _base(Q, R, qn, rn, st, prm):
    st.stats[BASE_CASES] += 1
    h = prm.h
    d = Q.pts.shape[1]
    lo_ = np.inf
    hi_ = -np.inf
    dlq = st.delta_l[qn]
    duq = st.delta_u[qn]
    for i in range(Q.start[qn], Q.end[qn]):
        gl = st.gl[i] + dlq
        gu = st.gu[i] + duq
        acc = 0.0
        for j in range(R.start[rn], R.end[rn]):
            d2 = 0.0
            for k in range(d):
                t = Q.pts[i, k] - R.pts[j, k]
                d2 += t * t
            v = _kernel(d2, h)
            acc += v
            gu += v - 1.0
        gl += acc
        st.sum_e[i] += acc
        st.gl[i] = gl
        st.gu[i] = gu
        lo_ = min(lo_, gl)
        hi_ = max(hi_, gu)
    st.stats[KERNEL_EVALS] += (Q.end[qn] - Q.start[qn]) * (R.end[rn] - R.start[rn])
    st.node_gl[qn] = lo_
    st.node_gu[qn] = hi_
    st.delta_l[qn] = 0.0
    st.delta_u[qn] = 0.0


@nb.njit(cache=True)
def _summarize(Q, R, far, qn, rn, method, p, kdl, kdu, dlow, dup, st, prm, basis):
    st.delta_l[qn] += dlow
    st.delta_u[qn] += dup
    if method == FAR_FIELD:
        st.stats[PRUNE_F] += 1
        for i in range(Q.start[qn], Q.end[qn]):
            st.sum_f[i] += eval_farfield_nb(far[rn], R.center[rn], Q.pts[i], prm.inv, p, basis, st.H)
    elif method == DIRECT_LOCAL:
        st.stats[PRUNE_D] += 1
        direct_local_nb(R.pts[R.start[rn]:R.end[rn]], Q.center[qn], prm.inv, p, basis, st.local[qn], st.H, st.tmp)
        st.local_order[qn] = max(st.local_order[qn], p)
    else:
        st.stats[PRUNE_T] += 1
        if prm.mode == MODE_DFD:
            # midpoint of the kernel range over the pair, constant over Q
            st.local[qn, 0] += (R.end[rn] - R.start[rn]) * 0.5 * (kdl + kdu)
        else:
            far_to_local_nb(far[rn], R.center[rn], Q.center[qn], prm.inv, p, basis, st.local[qn], st.H)
        st.local_order[qn] = max(st.local_order[qn], p)


@nb.njit(cache=True)
def dual_tree(Q, R, far, qn, rn, st, prm, basis):
    st.stats[CALLS] += 1
    h = prm.h
    dl, du = box_distance_bounds(Q.lo[qn], Q.hi[qn], R.lo[rn], R.hi[rn])
    nr = float(R.end[rn] - R.start[rn])
    kdl = _kernel(dl * dl, h)
    kdu = _kernel(du * du, h)
    dlow = nr * kdu
    dup = nr * (kdl - 1.0)
    gl_new = st.node_gl[qn] + st.delta_l[qn] + dlow
    tau = prm.eps * nr * gl_new / prm.nref

    if prm.mode == MODE_DFD:
        if nr * 0.5 * (kdl - kdu) <= tau:
            method, p = FAR_TO_LOCAL, 1
        else:
            method, p = EXHAUSTIVE, 0
    else:
        dc2 = 0.0
        for k in range(Q.center.shape[1]):
            t = Q.center[qn, k] - R.center[rn, k]
            dc2 += t * t
        nq = float(Q.end[qn] - Q.start[qn])
        method, p = choose_nb(nq, nr, Q.side[qn], R.side[rn], dl, du, np.sqrt(dc2), h, tau,
                              prm.pmax, Q.pts.shape[1], prm.cost_model, prm.centroid)

    if method != EXHAUSTIVE:
        _summarize(Q, R, far, qn, rn, method, p, kdl, kdu, dlow, dup, st, prm, basis)
        if prm.instrument:
            _cover(Q, R, qn, rn, st)
            _checkpoint(Q, st)
        return

    ql = Q.left[qn]
    rl = R.left[rn]
    if ql < 0:
        if rl < 0:
            _base(Q, R, qn, rn, st, prm)
            if prm.instrument:
                _cover(Q, R, qn, rn, st)
        else:
            dual_tree(Q, R, far, qn, rl, st, prm, basis)
            dual_tree(Q, R, far, qn, R.right[rn], st, prm, basis)
    else:
        qr = Q.right[qn]
        for child in (ql, qr):
            st.delta_l[child] += st.delta_l[qn]
            st.delta_u[child] += st.delta_u[qn]
        st.delta_l[qn] = 0.0
        st.delta_u[qn] = 0.0
        if rl < 0:
            dual_tree(Q, R, far, ql, rn, st, prm, basis)
            dual_tree(Q, R, far, qr, rn, st, prm, basis)
        else:
            rr = R.right[rn]
            dual_tree(Q, R, far, ql, rl, st, prm, basis)
            dual_tree(Q, R, far, ql, rr, st, prm, basis)
            dual_tree(Q, R, far, qr, rl, st, prm, basis)
            dual_tree(Q, R, far, qr, rr, st, prm, basis)
        st.node_gl[qn] = min(st.node_gl[ql] + st.delta_l[ql], st.node_gl[qr] + st.delta_l[qr])
        st.node_gu[qn] = max(st.node_gu[ql] + st.delta_u[ql], st.node_gu[qr] + st.delta_u[qr])
    if prm.instrument:
        _checkpoint(Q, st)


@nb.njit(cache=True)
def post(Q, qn, st, prm, basis):
    """Push local moments and postponed bounds to the leaves and evaluate."""
    if Q.left[qn] < 0:
        lo_ = np.inf
        hi_ = -np.inf
        p = st.local_order[qn]
        for i in range(Q.start[qn], Q.end[qn]):
            st.gl[i] += st.delta_l[qn]
            st.gu[i] += st.delta_u[qn]
            lo_ = min(lo_, st.gl[i])
            hi_ = max(hi_, st.gu[i])
            if p > 0:
                st.sum_l[i] += eval_local_nb(st.local[qn], Q.center[qn], Q.pts[i], prm.inv, p, basis, st.tmp)
        st.node_gl[qn] = lo_
        st.node_gu[qn] = hi_
        st.delta_l[qn] = 0.0
        st.delta_u[qn] = 0.0
        st.local[qn, :] = 0.0
        return
    ql = Q.left[qn]
    qr = Q.right[qn]
    p = st.local_order[qn]
    for child in (ql, qr):
        if p > 0:
            local_to_local_nb(st.local[qn], Q.center[qn], Q.center[child], prm.inv, p, basis, st.local[child], st.tmp)
            st.local_order[child] = max(st.local_order[child], p)
        st.delta_l[child] += st.delta_l[qn]
        st.delta_u[child] += st.delta_u[qn]
    st.local[qn, :] = 0.0
    st.delta_l[qn] = 0.0
    st.delta_u[qn] = 0.0
    post(Q, ql, st, prm, basis)
    post(Q, qr, st, prm, basis)
    st.node_gl[qn] = min(st.node_gl[ql], st.node_gl[qr])
    st.node_gu[qn] = max(st.node_gu[ql], st.node_gu[qr])


def new_state(n_qnodes: int, n_queries: int, n_refs: int, d: int, pmax: int, nref: float,
              exact: np.ndarray | None) -> RunState:
    size = pmax**d
    instrument = exact is not None
    return RunState(
        node_gl=np.zeros(n_qnodes),
        node_gu=np.full(n_qnodes, nref),
        delta_l=np.zeros(n_qnodes),
        delta_u=np.zeros(n_qnodes),
        local=np.zeros((n_qnodes, size)),
        local_order=np.zeros(n_qnodes, dtype=np.int64),
        gl=np.zeros(n_queries),
        gu=np.full(n_queries, nref),
        sum_e=np.zeros(n_queries),
        sum_f=np.zeros(n_queries),
        sum_l=np.zeros(n_queries),
        stats=np.zeros(N_STATS, dtype=np.int64),
        H=np.zeros((d, 2 * pmax)),
        tmp=np.zeros(size),
        exact=np.ascontiguousarray(exact, dtype=np.float64) if instrument else np.zeros(1),
        cover=np.zeros((n_queries, n_refs), dtype=np.int32) if instrument else np.zeros((1, 1), dtype=np.int32),
        path_l=np.zeros(n_qnodes if instrument else 1),
        path_u=np.zeros(n_qnodes if instrument else 1),
    )

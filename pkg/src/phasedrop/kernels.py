"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names (``solve_shift``, ``label_periodic``) dispatch on
``phasedrop._accel.use_numba()``; the ``*_numba`` / ``*_numpy`` variants stay
importable so tests and the benchmark can compare them directly.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ._accel import optional_njit, use_numba

__all__ = [
    "solve_shift",
    "solve_shift_numba",
    "solve_shift_numpy",
    "label_periodic",
    "label_periodic_numba",
    "label_periodic_numpy",
]


# --------------------------------------------------------------------------
# volume-constrained clipping:  find tau with  sum(clip(v - tau, 0, 1)) = target
# --------------------------------------------------------------------------

@optional_njit(cache=True)
def _clip_sum_loop(v, tau):
    s = 0.0
    for i in range(v.shape[0]):
        x = v[i] - tau
        if x >= 1.0:
            s += 1.0
        elif x > 0.0:
            s += x
    return s


@optional_njit(cache=True)
def _polish_loop(v, tau, target):
    # exact root on the linear piece containing tau
    n_one = 0
    n_free = 0
    s_free = 0.0
    for i in range(v.shape[0]):
        x = v[i] - tau
        if x >= 1.0:
            n_one += 1
        elif x > 0.0:
            n_free += 1
            s_free += v[i]
    if n_free == 0:
        return tau
    return (s_free + n_one - target) / n_free


@optional_njit(cache=True)
def _shift_loop(v, target, abs_tol, max_iter):
    lo = v.min() - 1.0
    hi = v.max()
    tau = 0.5 * (lo + hi)
    for _ in range(max_iter):
        tau = 0.5 * (lo + hi)
        g = _clip_sum_loop(v, tau)
        if abs(g - target) <= abs_tol:
            break
        if g > target:
            lo = tau
        else:
            hi = tau
        if hi - lo < 1e-15 * (1.0 + abs(tau)):
            break
    cand = _polish_loop(v, tau, target)
    if lo <= cand <= hi and abs(_clip_sum_loop(v, cand) - target) <= abs(_clip_sum_loop(v, tau) - target):
        tau = cand
    return tau


def solve_shift_numba(v: np.ndarray, target: float, abs_tol: float, max_iter: int = 200) -> float:
    return float(_shift_loop(np.ascontiguousarray(v, dtype=np.float64), float(target), float(abs_tol), int(max_iter)))


def _clip_sum_np(v, tau):
    return float(np.clip(v - tau, 0.0, 1.0).sum())


def solve_shift_numpy(v: np.ndarray, target: float, abs_tol: float, max_iter: int = 200) -> float:
    v = np.asarray(v, dtype=np.float64)
    lo = float(v.min()) - 1.0
    hi = float(v.max())
    tau = 0.5 * (lo + hi)
    for _ in range(max_iter):
        tau = 0.5 * (lo + hi)
        g = _clip_sum_np(v, tau)
        if abs(g - target) <= abs_tol:
            break
        if g > target:
            lo = tau
        else:
            hi = tau
        if hi - lo < 1e-15 * (1.0 + abs(tau)):
            break
    x = v - tau
    free = (x > 0.0) & (x < 1.0)
    n_free = int(free.sum())
    if n_free:
        cand = (float(v[free].sum()) + int((x >= 1.0).sum()) - target) / n_free
        if lo <= cand <= hi and abs(_clip_sum_np(v, cand) - target) <= abs(_clip_sum_np(v, tau) - target):
            tau = cand
    return tau


def solve_shift(v: np.ndarray, target: float, abs_tol: float, max_iter: int = 200) -> float:
    """Root ``tau`` of ``sum(clip(v - tau, 0, 1)) = target`` by bisection.

    The bracket is ``[min(v) - 1, max(v)]``. After bisection the root is
    polished by solving the linear piece exactly, which is kept only if it
    does not increase the residual.
    """
    if use_numba():
        return solve_shift_numba(v, target, abs_tol, max_iter)
    return solve_shift_numpy(v, target, abs_tol, max_iter)


# --------------------------------------------------------------------------
# connected components with periodic (wrap-around) 4-/2n-connectivity
# --------------------------------------------------------------------------

@optional_njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@optional_njit(cache=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    # smaller flat index wins so roots are scan-order stable
    if ra < rb:
        parent[rb] = ra
    else:
        parent[ra] = rb


@optional_njit(cache=True)
def _label_loop(flat, shape):
    ndim = shape.shape[0]
    size = flat.shape[0]
    strides = np.empty(ndim, dtype=np.int64)
    s = 1
    for ax in range(ndim - 1, -1, -1):
        strides[ax] = s
        s *= shape[ax]
    parent = np.arange(size, dtype=np.int64)
    for i in range(size):
        if not flat[i]:
            continue
        for ax in range(ndim):
            coord = (i // strides[ax]) % shape[ax]
            if coord == shape[ax] - 1:
                j = i - coord * strides[ax]
            else:
                j = i + strides[ax]
            if flat[j]:
                _union(parent, i, j)
    labels = np.zeros(size, dtype=np.int64)
    root_label = np.zeros(size, dtype=np.int64)
    count = 0
    for i in range(size):
        if not flat[i]:
            continue
        r = _find(parent, i)
        if root_label[r] == 0:
            count += 1
            root_label[r] = count
        labels[i] = root_label[r]
    return labels, count


def label_periodic_numba(mask: np.ndarray) -> tuple[np.ndarray, int]:
    mask = np.asarray(mask, dtype=np.bool_)
    labels, count = _label_loop(mask.ravel(), np.asarray(mask.shape, dtype=np.int64))
    return labels.reshape(mask.shape), int(count)


def label_periodic_numpy(mask: np.ndarray) -> tuple[np.ndarray, int]:
    mask = np.asarray(mask, dtype=bool)
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    raw, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return np.zeros(mask.shape, dtype=np.int64), 0
    # merge labels that touch across each periodic seam
    parent = np.arange(count + 1)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for ax in range(mask.ndim):
        first = np.take(raw, 0, axis=ax)
        last = np.take(raw, -1, axis=ax)
        both = (first > 0) & (last > 0)
        for a, b in zip(first[both], last[both]):
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(count + 1)])
    merged = roots[raw]
    # relabel by first occurrence in C scan order
    flat = merged.ravel()
    nz = np.flatnonzero(flat)
    uniq, first_idx = np.unique(flat[nz], return_index=True)
    order = np.argsort(first_idx)
    remap = np.zeros(int(flat.max()) + 1, dtype=np.int64)
    remap[uniq[order]] = np.arange(1, len(uniq) + 1)
    return remap[merged].astype(np.int64), len(uniq)


def label_periodic(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Label the connected components of a boolean grid on the torus.

    Neighbours are the 2n axis-aligned nodes (4-connectivity in 2D) with
    wrap-around. Labels are 1..count, numbered in order of the first node of
    each component in C (row-major) scan order; background is 0.
    """
    if use_numba():
        return label_periodic_numba(mask)
    return label_periodic_numpy(mask)

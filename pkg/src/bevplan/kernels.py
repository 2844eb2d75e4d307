"""Hot numeric kernels: grid A*, nearest-class fill, majority fill.

Every kernel ships in two flavors: a numba ``@njit`` fast path and a
numpy/python fallback. Set ``BEVPLAN_NO_NUMBA=1`` to force the fallback
(debugging, or the benchmark baseline). Both flavors are written to produce
bit-identical results: same tie-breaking, same float accumulation order.
"""

from __future__ import annotations

import heapq
import math
import os

import numpy as np


def _env_allows_numba() -> bool:
    return os.environ.get("BEVPLAN_NO_NUMBA", "").lower() not in ("1", "true", "yes")


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


USE_NUMBA = HAVE_NUMBA and _env_allows_numba()

_SQRT2 = math.sqrt(2.0)

# 8-connected neighborhood, row-major order. Both A* flavors must walk
# neighbors in this exact order so parent choices (and thus paths) agree.
_OFF_R = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_OFF_C = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)


# ---------------------------------------------------------------------------
# A* on a uint8 obstacle grid (0 = free, 1 = obstacle).
#
# Costs: 1 axial, sqrt(2) diagonal. Diagonal moves require both flanking
# orthogonal cells free (no corner cutting). Heuristic: euclidean cell
# distance. Open-set order: smallest f, then largest g, then smallest
# row-major index.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _heap_less(f1, g1, i1, f2, g2, i2):
    if f1 != f2:
        return f1 < f2
    if g1 != g2:
        return g1 > g2
    return i1 < i2


@njit(cache=True, nogil=True)
def _heap_push(hf, hg, hi, size, f, g, idx):
    pos = size
    hf[pos] = f
    hg[pos] = g
    hi[pos] = idx
    while pos > 0:
        up = (pos - 1) // 2
        if _heap_less(hf[pos], hg[pos], hi[pos], hf[up], hg[up], hi[up]):
            hf[pos], hf[up] = hf[up], hf[pos]
            hg[pos], hg[up] = hg[up], hg[pos]
            hi[pos], hi[up] = hi[up], hi[pos]
            pos = up
        else:
            break
    return size + 1


@njit(cache=True, nogil=True)
def _heap_pop(hf, hg, hi, size):
    f = hf[0]
    g = hg[0]
    idx = hi[0]
    size -= 1
    hf[0] = hf[size]
    hg[0] = hg[size]
    hi[0] = hi[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        right = left + 1
        best = pos
        if left < size and _heap_less(hf[left], hg[left], hi[left], hf[best], hg[best], hi[best]):
            best = left
        if right < size and _heap_less(hf[right], hg[right], hi[right], hf[best], hg[best], hi[best]):
            best = right
        if best == pos:
            break
        hf[pos], hf[best] = hf[best], hf[pos]
        hg[pos], hg[best] = hg[best], hg[pos]
        hi[pos], hi[best] = hi[best], hi[pos]
        pos = best
    return f, g, idx, size


@njit(cache=True, nogil=True)
def _astar_nb(occ, sr, sc, gr, gc, off_r, off_c):
    height, width = occ.shape
    n = height * width
    g = np.full(n, np.inf)
    closed = np.zeros(n, dtype=np.uint8)
    parent = np.full(n, -1, dtype=np.int64)

    cap = 8 * n + 8
    hf = np.empty(cap)
    hg = np.empty(cap)
    hi = np.empty(cap, dtype=np.int64)
    size = 0

    start = sr * width + sc
    goal = gr * width + gc
    g[start] = 0.0
    h0 = math.sqrt(float((sr - gr) * (sr - gr) + (sc - gc) * (sc - gc)))
    size = _heap_push(hf, hg, hi, size, h0, 0.0, start)

    found = False
    while size > 0:
        _, gg, idx, size = _heap_pop(hf, hg, hi, size)
        if closed[idx] == 1 or gg != g[idx]:
            continue
        closed[idx] = 1
        if idx == goal:
            found = True
            break
        r = idx // width
        c = idx % width
        for k in range(8):
            dr = off_r[k]
            dc = off_c[k]
            nr = r + dr
            nc = c + dc
            if nr < 0 or nr >= height or nc < 0 or nc >= width:
                continue
            if occ[nr, nc] == 1:
                continue
            if dr != 0 and dc != 0:
                if occ[r, nc] == 1 or occ[nr, c] == 1:
                    continue
            step = _SQRT2 if (dr != 0 and dc != 0) else 1.0
            ng = gg + step
            nidx = nr * width + nc
            if ng < g[nidx]:
                g[nidx] = ng
                parent[nidx] = idx
                nh = math.sqrt(float((nr - gr) * (nr - gr) + (nc - gc) * (nc - gc)))
                size = _heap_push(hf, hg, hi, size, ng + nh, ng, nidx)

    if not found:
        return -1.0, np.empty((0, 2), dtype=np.int64)

    length = 1
    idx = goal
    while parent[idx] >= 0:
        idx = parent[idx]
        length += 1
    path = np.empty((length, 2), dtype=np.int64)
    idx = goal
    for i in range(length - 1, -1, -1):
        path[i, 0] = idx // width
        path[i, 1] = idx % width
        idx = parent[idx]
    return g[goal], path


def _astar_py(occ, sr, sc, gr, gc):
    height, width = occ.shape
    n = height * width
    g = np.full(n, np.inf)
    closed = np.zeros(n, dtype=bool)
    parent = np.full(n, -1, dtype=np.int64)

    start = sr * width + sc
    goal = gr * width + gc
    g[start] = 0.0
    h0 = math.sqrt(float((sr - gr) ** 2 + (sc - gc) ** 2))
    # heapq tuple order (f, -g, idx) == the numba comparator.
    heap = [(h0, -0.0, start)]

    found = False
    while heap:
        _, neg_g, idx = heapq.heappop(heap)
        gg = -neg_g
        if closed[idx] or gg != g[idx]:
            continue
        closed[idx] = True
        if idx == goal:
            found = True
            break
        r, c = divmod(idx, width)
        for k in range(8):
            dr = int(_OFF_R[k])
            dc = int(_OFF_C[k])
            nr = r + dr
            nc = c + dc
            if nr < 0 or nr >= height or nc < 0 or nc >= width:
                continue
            if occ[nr, nc]:
                continue
            if dr != 0 and dc != 0 and (occ[r, nc] or occ[nr, c]):
                continue
            step = _SQRT2 if (dr != 0 and dc != 0) else 1.0
            ng = gg + step
            nidx = nr * width + nc
            if ng < g[nidx]:
                g[nidx] = ng
                parent[nidx] = idx
                nh = math.sqrt(float((nr - gr) ** 2 + (nc - gc) ** 2))
                heapq.heappush(heap, (ng + nh, -ng, nidx))

    if not found:
        return -1.0, np.empty((0, 2), dtype=np.int64)

    cells = []
    idx = goal
    while idx >= 0:
        cells.append(idx)
        idx = parent[idx]
    cells.reverse()
    path = np.empty((len(cells), 2), dtype=np.int64)
    for i, idx in enumerate(cells):
        path[i, 0] = idx // width
        path[i, 1] = idx % width
    return float(g[goal]), path


def astar_raw(occ: np.ndarray, sr: int, sc: int, gr: int, gc: int):
    """Run A*; returns (cost, path array (L, 2)) or (-1.0, empty) when unreachable."""
    occ = np.ascontiguousarray(occ, dtype=np.uint8)
    if USE_NUMBA:
        return _astar_nb(occ, sr, sc, gr, gc, _OFF_R, _OFF_C)
    return _astar_py(occ, sr, sc, gr, gc)


# ---------------------------------------------------------------------------
# Nearest-class fill: each masked cell takes the class of the nearest known
# cell by euclidean cell distance; distance ties -> lowest class id.
# Distances compared as exact integer squares.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _nearest_nb(known_r, known_c, known_cls, masked_r, masked_c):
    out = np.empty(masked_r.size, dtype=np.int64)
    for i in range(masked_r.size):
        r = masked_r[i]
        c = masked_c[i]
        best_d = np.int64(1 << 62)
        best_cls = np.int64(1 << 62)
        for j in range(known_r.size):
            dr = known_r[j] - r
            dc = known_c[j] - c
            d = dr * dr + dc * dc
            if d < best_d or (d == best_d and known_cls[j] < best_cls):
                best_d = d
                best_cls = known_cls[j]
        out[i] = best_cls
    return out


def _nearest_py(known_r, known_c, known_cls, masked_r, masked_c):
    out = np.empty(masked_r.size, dtype=np.int64)
    for i in range(masked_r.size):
        d2 = (known_r - masked_r[i]) ** 2 + (known_c - masked_c[i]) ** 2
        best = d2.min()
        out[i] = known_cls[d2 == best].min()
    return out


def nearest_fill_raw(known_r, known_c, known_cls, masked_r, masked_c):
    """Class id for each masked cell; arrays are int64."""
    args = [np.ascontiguousarray(a, dtype=np.int64) for a in (known_r, known_c, known_cls, masked_r, masked_c)]
    if USE_NUMBA:
        return _nearest_nb(*args)
    return _nearest_py(*args)


# ---------------------------------------------------------------------------
# Majority fill, one synchronous pass: each listed masked cell takes the
# majority class among known (>= 0) neighbors within the offset set, reading
# only the previous pass's state; count ties -> lowest class id. Cells with
# no known neighbor stay masked for later passes.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _majority_pass_nb(cells, next_cells, masked_r, masked_c, off_r, off_c, filled):
    height, width = cells.shape
    count_filled = 0
    for i in range(masked_r.size):
        r = masked_r[i]
        c = masked_c[i]
        best_cnt = 0
        best_cls = np.int64(1 << 62)
        for j in range(off_r.size):
            nr = r + off_r[j]
            nc = c + off_c[j]
            if nr < 0 or nr >= height or nc < 0 or nc >= width:
                continue
            cj = cells[nr, nc]
            if cj < 0:
                continue
            cnt = 0
            for k in range(off_r.size):
                mr = r + off_r[k]
                mc = c + off_c[k]
                if mr < 0 or mr >= height or mc < 0 or mc >= width:
                    continue
                if cells[mr, mc] == cj:
                    cnt += 1
            if cnt > best_cnt or (cnt == best_cnt and cj < best_cls):
                best_cnt = cnt
                best_cls = cj
        if best_cnt > 0:
            next_cells[r, c] = best_cls
            filled[i] = 1
            count_filled += 1
    return count_filled


def _majority_pass_py(cells, next_cells, masked_r, masked_c, off_r, off_c, filled):
    height, width = cells.shape
    classes = np.unique(cells[cells >= 0])
    if classes.size == 0:
        return 0
    pad = int(max(abs(off_r).max(), abs(off_c).max()))
    padded = np.full((height + 2 * pad, width + 2 * pad), -1, dtype=np.int64)
    padded[pad : pad + height, pad : pad + width] = cells
    counts = np.zeros((classes.size, masked_r.size), dtype=np.int64)
    for dr, dc in zip(off_r, off_c):
        vals = padded[masked_r + pad + dr, masked_c + pad + dc]
        for ci, cls in enumerate(classes):
            counts[ci] += vals == cls
    total = counts.sum(axis=0)
    # classes ascending, so argmax's first-max rule == lowest-id tie-break
    best = np.argmax(counts, axis=0)
    fill = total > 0
    next_cells[masked_r[fill], masked_c[fill]] = classes[best[fill]]
    filled[fill] = 1
    return int(fill.sum())


def disk_offsets(radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets (excluding the origin) within euclidean ``radius``."""
    reach = int(math.floor(radius))
    rr, cc = np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1), indexing="ij")
    keep = (rr * rr + cc * cc <= radius * radius) & ~((rr == 0) & (cc == 0))
    return rr[keep].astype(np.int64), cc[keep].astype(np.int64)


def majority_fill_raw(cells: np.ndarray, radius: float, max_iters: int):
    """Iterate synchronous majority passes over masked (== -2) cells.

    Returns (new cells int64, passes run, remaining masked count).
    """
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    off_r, off_c = disk_offsets(radius)
    masked_r, masked_c = np.nonzero(cells == -2)
    masked_r = masked_r.astype(np.int64)
    masked_c = masked_c.astype(np.int64)
    passes = 0
    while masked_r.size > 0 and passes < max_iters:
        next_cells = cells.copy()
        filled = np.zeros(masked_r.size, dtype=np.uint8)
        if USE_NUMBA:
            n = _majority_pass_nb(cells, next_cells, masked_r, masked_c, off_r, off_c, filled)
        else:
            n = _majority_pass_py(cells, next_cells, masked_r, masked_c, off_r, off_c, filled)
        passes += 1
        if n == 0:
            break
        cells = next_cells
        keep = filled == 0
        masked_r = masked_r[keep]
        masked_c = masked_c[keep]
    return cells, passes, int(masked_r.size)

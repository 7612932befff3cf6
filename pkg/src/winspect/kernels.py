"""Connected-component labeling kernels.

Two interchangeable implementations of the same labeling contract:

* ``label_components_numba`` — two-pass union-find over the pixel grid,
  compiled with ``@njit``. This is the hot inner loop of the reference
  segmenter. ``None`` when numba is not importable.
* ``label_components_numpy`` — vectorized iterated min-propagation, pure
  numpy. Slower asymptotically (iterations scale with component diameter)
  but dependency-free.

Both return an int32 label image (0 = background, components numbered 1..n
in order of first appearance in the row-major scan) plus the component
count, and are bit-identical on every input.

``label_components`` dispatches to the numba path unless numba is missing
or the environment variable ``WINSPECT_NO_NUMBA`` is set to a non-empty
value other than "0". ``benchmarks/bench_labeling.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("WINSPECT_NO_NUMBA", "") not in ("", "0")


def _label_scan(mask, eight):
    # Pass 1: provisional labels + union-find over neighbor collisions.
    # Scans row-major; only already-visited neighbors (W, N, NW, NE) matter.
    h, w = mask.shape
    provisional = np.zeros((h, w), np.int32)
    parent = np.arange(h * w // 2 + 2, dtype=np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0:
                continue
            a = provisional[y, x - 1] if x > 0 else 0
            b = provisional[y - 1, x] if y > 0 else 0
            c = 0
            d = 0
            if eight and y > 0:
                if x > 0:
                    c = provisional[y - 1, x - 1]
                if x + 1 < w:
                    d = provisional[y - 1, x + 1]
            root = 0
            for n in (a, b, c, d):
                if n != 0:
                    r = n
                    while parent[r] != r:
                        parent[r] = parent[parent[r]]
                        r = parent[r]
                    if root == 0 or r < root:
                        root = r
            if root == 0:
                provisional[y, x] = nxt
                nxt += 1
            else:
                provisional[y, x] = root
                for n in (a, b, c, d):
                    if n != 0:
                        r = n
                        while parent[r] != r:
                            parent[r] = parent[parent[r]]
                            r = parent[r]
                        if r != root:
                            parent[r] = root
    # Pass 2: resolve roots, renumber by first appearance in scan order.
    remap = np.zeros(nxt, np.int32)
    out = np.zeros((h, w), np.int32)
    count = 0
    for y in range(h):
        for x in range(w):
            p = provisional[y, x]
            if p == 0:
                continue
            r = p
            while parent[r] != r:
                r = parent[r]
            if remap[r] == 0:
                count += 1
                remap[r] = count
            out[y, x] = remap[r]
    return out, count


try:
    from numba import njit

    _label_scan_jit = njit(cache=True, nogil=True)(_label_scan)

    def label_components_numba(mask: np.ndarray, connectivity: int = 8):
        return _label_scan_jit(np.ascontiguousarray(mask, dtype=np.uint8), connectivity == 8)

except ImportError:  # pragma: no cover - numba is a declared dependency
    label_components_numba = None


def label_components_numpy(mask: np.ndarray, connectivity: int = 8):
    """Pure-numpy labeling: propagate the min provisional label to a fixpoint."""
    mask = np.asarray(mask)
    h, w = mask.shape
    fg = mask != 0
    sentinel = h * w + 2
    flat = np.arange(1, h * w + 1, dtype=np.int64).reshape(h, w)
    work = np.where(fg, flat, sentinel)
    while True:
        nxt = work.copy()
        np.minimum(nxt[1:, :], work[:-1, :], out=nxt[1:, :])
        np.minimum(nxt[:-1, :], work[1:, :], out=nxt[:-1, :])
        np.minimum(nxt[:, 1:], work[:, :-1], out=nxt[:, 1:])
        np.minimum(nxt[:, :-1], work[:, 1:], out=nxt[:, :-1])
        if connectivity == 8:
            np.minimum(nxt[1:, 1:], work[:-1, :-1], out=nxt[1:, 1:])
            np.minimum(nxt[1:, :-1], work[:-1, 1:], out=nxt[1:, :-1])
            np.minimum(nxt[:-1, 1:], work[1:, :-1], out=nxt[:-1, 1:])
            np.minimum(nxt[:-1, :-1], work[1:, 1:], out=nxt[:-1, :-1])
        nxt[~fg] = sentinel
        if np.array_equal(nxt, work):
            break
        work = nxt
    out = np.zeros((h, w), np.int32)
    if not fg.any():
        return out, 0
    # A component's min provisional label is its first row-major pixel, so
    # sorted unique values give the same numbering as the scan-order pass.
    vals = np.unique(work[fg])
    out[fg] = np.searchsorted(vals, work[fg]) + 1
    return out, len(vals)


if label_components_numba is not None and not NUMBA_DISABLED:
    label_components = label_components_numba
    ACTIVE_BACKEND = "numba"
else:
    label_components = label_components_numpy
    ACTIVE_BACKEND = "numpy"


def component_stats(labels: np.ndarray, count: int):
    """Per-component (min_y, min_x, max_y, max_x, pixel_count) arrays."""
    h, w = labels.shape
    ys, xs = np.nonzero(labels)
    idx = labels[ys, xs] - 1
    pix = np.bincount(idx, minlength=count)
    min_y = np.full(count, h, dtype=np.int64)
    max_y = np.full(count, -1, dtype=np.int64)
    min_x = np.full(count, w, dtype=np.int64)
    max_x = np.full(count, -1, dtype=np.int64)
    np.minimum.at(min_y, idx, ys)
    np.maximum.at(max_y, idx, ys)
    np.minimum.at(min_x, idx, xs)
    np.maximum.at(max_x, idx, xs)
    return min_y, min_x, max_y, max_x, pix

"""Independent brute-force reference implementations used by the tests.

These deliberately avoid the library's code paths (and scipy): flood fill
instead of ndimage.label, per-offset shifted masks instead of structured
morphology, explicit threshold sweeps instead of cumulative sums.
"""

from __future__ import annotations

import math

import numpy as np


def flood_fill_components(mask: np.ndarray, connectivity: int = 8) -> list[set[tuple[int, int]]]:
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if connectivity == 8:
        steps = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]
    else:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    seen = np.zeros_like(mask)
    components = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            stack = [(r, c)]
            seen[r, c] = True
            comp = set()
            while stack:
                cr, cc = stack.pop()
                comp.add((cr, cc))
                for dr, dc in steps:
                    nr, nc = cr + dr, cc + dc
                    if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        stack.append((nr, nc))
            components.append(comp)
    return components


def _shift(arr: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Zero-fill shift (no wraparound)."""
    out = np.zeros_like(arr)
    h, w = arr.shape
    src_r = slice(max(0, -dr), min(h, h - dr))
    dst_r = slice(max(0, dr), min(h, h + dr))
    src_c = slice(max(0, -dc), min(w, w - dc))
    dst_c = slice(max(0, dc), min(w, w + dc))
    out[dst_r, dst_c] = arr[src_r, src_c]
    return out


def brute_close(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilate (OR of shifts) then erode (AND of shifts) on a canvas padded
    wide enough that the full dilated halo survives, cropped back to the
    frame."""
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    pad = 2 * radius
    canvas = np.pad(mask, pad)
    dilated = np.zeros_like(canvas)
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            dilated |= _shift(canvas, dr, dc)
    eroded = np.ones_like(canvas)
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            eroded &= _shift(dilated, dr, dc)
    return eroded[pad:-pad, pad:-pad]


def ap_sweep(scores: np.ndarray, labels: np.ndarray) -> float:
    """Step-wise average precision by an explicit loop over distinct
    thresholds (percent)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    thresholds = sorted(set(scores.tolist()), reverse=True)
    n_pos = int(labels.sum())
    ap = 0.0
    prev_recall = 0.0
    for t in thresholds:
        sel = scores >= t
        tp = int((labels & sel).sum())
        prec = tp / int(sel.sum())
        rec = tp / n_pos
        ap += (rec - prev_recall) * prec
        prev_recall = rec
    return 100.0 * ap


def fpr95_sweep(scores: np.ndarray, labels: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    thresholds = sorted(set(scores.tolist()), reverse=True)
    n_pos = int(labels.sum())
    n_neg = int((~labels).sum())
    for t in thresholds:  # descending = largest qualifying threshold first
        sel = scores >= t
        if int((labels & sel).sum()) / n_pos >= 0.95:
            return 100.0 * int((~labels & sel).sum()) / n_neg
    return 100.0


def ols_line(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    """(slope, intercept) via the normal equations."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    a = np.vstack([x, np.ones_like(x)]).T
    slope, intercept = np.linalg.solve(a.T @ a, a.T @ y)
    return float(slope), float(intercept)


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(a @ b / (math.sqrt(a @ a) * math.sqrt(b @ b)))


def retrieval_scan(sequences: dict[str, np.ndarray], f: np.ndarray, tau: float) -> list[tuple[str, float]]:
    """Exhaustive max-over-crops scan; returns (id, score) sorted the way
    the index contract demands."""
    out = []
    for sid, vectors in sequences.items():
        score = max(min(1.0, max(-1.0, cosine(v, f))) for v in vectors)
        if score >= tau:
            out.append((sid, score))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out

"""Segmentation, tracking and retrieval metrics.

Pixel-level AUPRC / FPR95, component-wise F1-bar over a region of
interest, CLEAR-MOT accuracy/precision, and instance-based retrieval
precision-recall curves. All curve metrics use step-wise summation over
descending score thresholds with equal scores grouped into one step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .scoring import SegmentInstance

IGNORE = -1
F1_THRESHOLDS = tuple(np.round(np.arange(0.25, 0.7501, 0.05), 2))


def _split_scores(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise InputError(f"{scores.shape[0]} scores for {labels.shape[0]} labels")
    keep = labels != IGNORE
    scores, labels = scores[keep], labels[keep]
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise InputError("both classes must be present (after removing ignore pixels)")
    return pos, neg


def pixel_pr_curve(
    scores: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds desc, precision, recall) at every distinct score, with
    equal scores grouped into one step. labels: 1 = ood, 0 = not ood,
    -1 = ignore (excluded)."""
    pos, neg = _split_scores(scores, labels)
    all_scores = np.concatenate([pos, neg])
    truth = np.concatenate([np.ones(pos.size, bool), np.zeros(neg.size, bool)])
    order = np.argsort(-all_scores, kind="stable")
    all_scores, truth = all_scores[order], truth[order]
    # last index of each group of equal scores
    boundary = np.nonzero(np.diff(all_scores))[0]
    last = np.append(boundary, all_scores.size - 1)
    tp = np.cumsum(truth)[last].astype(np.float64)
    fp = np.cumsum(~truth)[last].astype(np.float64)
    precision = tp / (tp + fp)
    recall = tp / pos.size
    return all_scores[last], precision, recall


def pixel_auprc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Average precision (percent) by step-wise summation over descending
    score thresholds."""
    _, precision, recall = pixel_pr_curve(scores, labels)
    ap = float(np.sum(np.diff(recall, prepend=0.0) * precision))
    return 100.0 * ap


def fpr_at_95_tpr(scores: np.ndarray, labels: np.ndarray) -> float:
    """False-positive rate (percent) at the largest threshold where
    TPR >= 0.95 (thresholds are inclusive: predicted positive iff
    score >= t)."""
    pos, neg = _split_scores(scores, labels)
    k = math.ceil(0.95 * pos.size)
    threshold = np.sort(pos)[::-1][k - 1]
    return 100.0 * float(np.mean(neg >= threshold))


# ---------------------------------------------------------------------------
# component-wise F1


@dataclass
class ComponentStats:
    """Per-frame component agreement: adjusted sIoU per GT component and
    positive predictive value per predicted component."""

    siou: list[float] = field(default_factory=list)
    ppv: list[float] = field(default_factory=list)

    def extend(self, other: "ComponentStats") -> None:
        self.siou.extend(other.siou)
        self.ppv.extend(other.ppv)


def _restrict(segments: list[SegmentInstance], roi: np.ndarray) -> list[np.ndarray]:
    """Pixel arrays of the segments clipped to the roi; emptied segments
    drop out."""
    out = []
    for seg in segments:
        keep = roi[seg.pixels[:, 0], seg.pixels[:, 1]]
        px = seg.pixels[keep]
        if px.shape[0]:
            out.append(px)
    return out


def component_stats(
    pred_segments: list[SegmentInstance],
    gt_segments: list[SegmentInstance],
    roi: np.ndarray,
) -> ComponentStats:
    """sIoU / PPV lists for one frame, both sides restricted to the roi.

    sIoU of a GT component g is |g n P(g)| / |(g u P(g)) \\ A(g)| where P(g)
    pools every prediction touching g and A(g) pools the other GT
    components; PPV of a prediction is the fraction of its pixels on any GT
    component.
    """
    roi = np.asarray(roi, dtype=bool)
    shape = roi.shape
    preds = _restrict(pred_segments, roi)
    gts = _restrict(gt_segments, roi)

    gt_label = np.zeros(shape, dtype=np.int32)  # 0 = none, i+1 = gt component i
    for i, px in enumerate(gts):
        gt_label[px[:, 0], px[:, 1]] = i + 1
    pred_any = np.zeros(shape, dtype=bool)
    for px in preds:
        pred_any[px[:, 0], px[:, 1]] = True

    stats = ComponentStats()
    for i, px in enumerate(gts):
        touching = [p for p in preds if np.any(gt_label[p[:, 0], p[:, 1]] == i + 1)]
        covered = np.zeros(shape, dtype=bool)
        for p in touching:
            covered[p[:, 0], p[:, 1]] = True
        gt_mask = gt_label == i + 1
        inter = int((gt_mask & covered).sum())
        others = (gt_label != 0) & ~gt_mask
        union_adj = int(((gt_mask | covered) & ~others).sum())
        stats.siou.append(inter / union_adj if union_adj else 0.0)
    for px in preds:
        on_gt = int((gt_label[px[:, 0], px[:, 1]] != 0).sum())
        stats.ppv.append(on_gt / px.shape[0])
    return stats


@dataclass
class ComponentScore:
    value: float  # F1-bar, percent
    per_threshold: dict[float, float]
    vacuous: bool = False


def f1_bar(stats: ComponentStats, thresholds: tuple[float, ...] = F1_THRESHOLDS) -> ComponentScore:
    """Mean component F1 over the matching thresholds.

    TP at tau = GT components with sIoU >= tau; FN the rest; FP = predicted
    components with PPV < tau. Empty-vs-empty is vacuously perfect
    (flagged); one empty side scores 0.
    """
    siou = np.asarray(stats.siou, dtype=np.float64)
    ppv = np.asarray(stats.ppv, dtype=np.float64)
    if siou.size == 0 and ppv.size == 0:
        return ComponentScore(100.0, {float(t): 100.0 for t in thresholds}, vacuous=True)
    per = {}
    for tau in thresholds:
        tp = int((siou >= tau).sum())
        fn = siou.size - tp
        fp = int((ppv < tau).sum())
        denom = 2 * tp + fn + fp
        per[float(tau)] = 100.0 * (2 * tp / denom) if denom else 0.0
    return ComponentScore(float(np.mean(list(per.values()))), per)


def component_f1(
    pred_segments: list[SegmentInstance],
    gt_segments: list[SegmentInstance],
    roi: np.ndarray,
    thresholds: tuple[float, ...] = F1_THRESHOLDS,
) -> ComponentScore:
    """Single-frame convenience wrapper: stats + threshold average."""
    return f1_bar(component_stats(pred_segments, gt_segments, roi), thresholds)


# ---------------------------------------------------------------------------
# CLEAR-MOT

FrameObjects = dict[int, dict[object, tuple[float, float]]]  # frame -> id -> centroid


@dataclass
class MotScore:
    mota: float
    motp: float
    gt_count: int
    fn: int
    fp: int
    id_switches: int
    matches: int


def clear_mot(
    pred: FrameObjects,
    gt: FrameObjects,
    match_radius: float,
) -> MotScore:
    """CLEAR multi-object tracking accuracy and precision.

    Per frame, correspondences surviving from the previous frame are kept
    when still within match_radius; remaining pairs match greedily by
    ascending centroid distance. MOTA = 1 - (FN+FP+IDSW)/GT (can be
    negative); MOTP = mean matched distance in pixels.
    """
    frames = sorted(set(gt) | set(pred))
    gt_total = sum(len(gt.get(f, {})) for f in frames)
    if gt_total == 0:
        raise InputError("ground truth contains no objects")

    fn = fp = idsw = 0
    dist_sum = 0.0
    matches = 0
    corr: dict[object, object] = {}  # gt id -> pred id carried across frames
    last_pred: dict[object, object] = {}  # gt id -> last matched pred id ever
    for f in frames:
        gt_objs = gt.get(f, {})
        pr_objs = pred.get(f, {})
        new_corr: dict[object, object] = {}
        used_pred = set()

        for gid, pid in corr.items():
            if gid in gt_objs and pid in pr_objs:
                d = math.dist(gt_objs[gid], pr_objs[pid])
                if d <= match_radius:
                    new_corr[gid] = pid
                    used_pred.add(pid)
                    dist_sum += d
                    matches += 1

        candidates = []
        for gid, gpos in gt_objs.items():
            if gid in new_corr:
                continue
            for pid, ppos in pr_objs.items():
                if pid in used_pred:
                    continue
                d = math.dist(gpos, ppos)
                if d <= match_radius:
                    candidates.append((d, str(gid), str(pid), gid, pid))
        candidates.sort()
        claimed_gt = set(new_corr)
        for d, _, _, gid, pid in candidates:
            if gid in claimed_gt or pid in used_pred:
                continue
            claimed_gt.add(gid)
            used_pred.add(pid)
            new_corr[gid] = pid
            dist_sum += d
            matches += 1
            if gid in last_pred and last_pred[gid] != pid:
                idsw += 1

        fn += len(gt_objs) - len(new_corr)
        fp += len(pr_objs) - len(used_pred)
        last_pred.update(new_corr)
        corr = new_corr

    mota = 1.0 - (fn + fp + idsw) / gt_total
    motp = dist_sum / matches if matches else 0.0
    return MotScore(mota, motp, gt_total, fn, fp, idsw, matches)


# ---------------------------------------------------------------------------
# retrieval precision-recall


@dataclass
class RetrievedInstance:
    """One retrievable crop instance under a given query.

    score: ranking score (the sequence score for tracked retrieval, the
    crop's own score otherwise). instance_key identifies the GT instance
    owning the majority of the tight bbox, None when nothing does;
    instance_class is that instance's class.
    """

    score: float
    instance_key: tuple | None
    instance_class: str | None


@dataclass
class PrCurve:
    thresholds: list[float]
    precision: list[float]
    recall: list[float]
    auprc: float  # percent
    undefined_recall: bool = False


def query_pr_curve(instances: list[RetrievedInstance], query: str, gt_total: int) -> PrCurve:
    """Sweep tau over attained scores (descending, ties grouped) and
    compute instance precision / recall at each step; area by step-wise
    summation."""
    if gt_total == 0:
        return PrCurve([], [], [], 0.0, undefined_recall=True)
    order = sorted(instances, key=lambda r: -r.score)
    thresholds: list[float] = []
    precision: list[float] = []
    recall: list[float] = []
    retrieved = 0
    tp = 0
    seen: set[tuple] = set()
    i = 0
    n = len(order)
    while i < n:
        j = i
        while j < n and order[j].score == order[i].score:
            rec = order[j]
            retrieved += 1
            if rec.instance_class == query and rec.instance_key is not None:
                tp += 1
                seen.add(rec.instance_key)
            j += 1
        thresholds.append(order[i].score)
        precision.append(tp / retrieved)
        recall.append(len(seen) / gt_total)
        i = j
    ap = 0.0
    prev_r = 0.0
    for p, r in zip(precision, recall):
        ap += (r - prev_r) * p
        prev_r = r
    # the empty-retrieval endpoint: a threshold above every attained score
    top = (thresholds[0] + 1.0) if thresholds else 1.0
    return PrCurve([top] + thresholds, [1.0] + precision, [0.0] + recall, 100.0 * ap)


@dataclass
class RetrievalReport:
    curves: dict[str, PrCurve]
    mean_auprc: float  # percent, mean of per-query areas = area under mean curve
    pooled_auprc: float  # percent, all (query, instance) pairs pooled


def retrieval_pr(
    per_query: dict[str, list[RetrievedInstance]],
    gt_totals: dict[str, int],
) -> RetrievalReport:
    curves = {q: query_pr_curve(recs, q, gt_totals.get(q, 0)) for q, recs in per_query.items()}
    defined = [c.auprc for c in curves.values() if not c.undefined_recall]
    mean_ap = float(np.mean(defined)) if defined else 0.0

    pooled: list[RetrievedInstance] = []
    pooled_total = 0
    for q, recs in per_query.items():
        if gt_totals.get(q, 0) == 0:
            continue
        pooled_total += gt_totals[q]
        for rec in recs:
            matched = rec.instance_class == q and rec.instance_key is not None
            key = (q,) + tuple(rec.instance_key) if matched else None
            pooled.append(RetrievedInstance(rec.score, key, "__pooled__" if matched else None))
    pooled_ap = query_pr_curve(pooled, "__pooled__", pooled_total).auprc if pooled_total else 0.0
    return RetrievalReport(curves, mean_ap, pooled_ap)


def mean_curve(curves: dict[str, PrCurve], grid_points: int = 101) -> tuple[list[float], list[float]]:
    """Average per-query precision on a shared recall grid (for plotting).

    Each curve is read as the right-continuous step function used by the
    step-wise area, so the area under this mean curve equals the mean of
    the per-query areas.
    """
    grid = np.linspace(0.0, 1.0, grid_points)
    stacks = []
    for curve in curves.values():
        if curve.undefined_recall or not curve.thresholds:
            continue
        rec = np.asarray(curve.recall)
        prec = np.asarray(curve.precision)
        vals = np.empty_like(grid)
        for i, r in enumerate(grid):
            idx = np.searchsorted(rec, r, side="left")
            vals[i] = prec[min(idx, prec.size - 1)]
        stacks.append(vals)
    if not stacks:
        return list(grid), [0.0] * grid_points
    return list(grid), list(np.mean(stacks, axis=0))

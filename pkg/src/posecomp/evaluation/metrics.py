"""Greedy detection matching and interpolated average precision."""

import enum
from dataclasses import dataclass, field

import numpy as np

from .iou import iou_2d, iou_3d, iou_bev, iou_matrix


class Metric(str, enum.Enum):
    AP3D = "ap3d"
    APBEV = "apbev"
    AP2D = "ap2d"


class Difficulty(enum.IntEnum):
    EASY = 0
    MODERATE = 1
    HARD = 2

    @property
    def label(self):
        return self.name.lower()


# (min bbox height px, max occlusion level, max truncation) per tier
DIFFICULTY_LIMITS = {
    Difficulty.EASY: (40.0, 0, 0.15),
    Difficulty.MODERATE: (25.0, 1, 0.30),
    Difficulty.HARD: (25.0, 2, 0.50),
}

IOU_FUNCTIONS = {Metric.AP3D: iou_3d, Metric.APBEV: iou_bev, Metric.AP2D: iou_2d}


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.7
    recall_points: int = 40
    metric: Metric = Metric.AP3D
    class_filter: str = "Car"

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")
        if self.recall_points not in (40, 11):
            raise ValueError(f"recall_points must be 40 or 11, got {self.recall_points}")
        object.__setattr__(self, "metric", Metric(self.metric))


def assign_difficulty(rec):
    """Easiest tier whose limits the record meets, or None when it meets none."""
    for tier in Difficulty:
        min_height, max_occ, max_trunc = DIFFICULTY_LIMITS[tier]
        if rec.bbox_height >= min_height and rec.occluded <= max_occ and rec.truncated <= max_trunc:
            return tier
    return None


@dataclass
class MatchResult:
    """Per-detection outcome for one frame, detections in input order.

    ``ignored`` detections are neither true nor false positives.
    """

    scores: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    ignored: np.ndarray
    gt_matched: np.ndarray
    n_gt: int

    @property
    def unmatched_gt(self):
        return int(self.n_gt - np.count_nonzero(self.gt_matched))


def match_scores(iou, scores, threshold, gt_ignored=None, det_dont_care=None, det_small=None):
    """Greedy matching on a precomputed ``(n_det, n_gt)`` overlap matrix.

    Detections are visited by descending score (stable on ties). Each claims the
    unclaimed valid GT with the highest overlap ``>= threshold``; failing that
    it may claim an ignored GT, fall in a don't-care region, or be too small to
    count, and is then ignored. Everything else is a false positive.
    """
    scores = np.asarray(scores, dtype=float)
    n_det = len(scores)
    gt_ignored = None if gt_ignored is None else np.asarray(gt_ignored, bool)
    iou = np.asarray(iou, dtype=float)
    if iou.ndim != 2:
        n_gt = 0 if gt_ignored is None else len(gt_ignored)
        iou = iou.reshape(n_det, n_gt)
    n_gt = iou.shape[1]
    gt_ignored = np.zeros(n_gt, bool) if gt_ignored is None else gt_ignored
    det_dont_care = np.zeros(n_det, bool) if det_dont_care is None else np.asarray(det_dont_care, bool)
    det_small = np.zeros(n_det, bool) if det_small is None else np.asarray(det_small, bool)

    tp = np.zeros(n_det, bool)
    fp = np.zeros(n_det, bool)
    ignored = np.zeros(n_det, bool)
    claimed = np.zeros(n_gt, bool)
    for i in np.argsort(-scores, kind="stable"):
        best, _best_iou = -1, -1.0
        for pool in (~gt_ignored, gt_ignored):
            cand = np.flatnonzero(pool & ~claimed & (iou[i] >= threshold))
            if len(cand):
                j = cand[np.argmax(iou[i, cand])]
                best, _best_iou = j, iou[i, j]
                break
        if best >= 0:
            claimed[best] = True
            if gt_ignored[best]:
                ignored[i] = True
            else:
                tp[i] = True
        elif det_dont_care[i] or det_small[i]:
            ignored[i] = True
        else:
            fp[i] = True
    valid = ~gt_ignored
    return MatchResult(scores, tp, fp, ignored, claimed[valid], int(valid.sum()))


def match_frame(dets, gts, cfg, gt_ignored=None, det_dont_care=None, det_small=None):
    """Match ``(geometry, score)`` detections against GT geometries.

    Geometry is an ``(8, 3)`` corner array for 3D and BEV metrics and a
    ``[left, top, right, bottom]`` rectangle for the 2D metric.
    """
    fn = IOU_FUNCTIONS[cfg.metric]
    geoms = [d[0] for d in dets]
    scores = [d[1] for d in dets]
    iou = iou_matrix(geoms, gts, fn)
    return match_scores(iou, scores, cfg.iou_threshold, gt_ignored, det_dont_care, det_small)


def recall_samples(recall_points):
    if recall_points == 40:
        return np.arange(1, 41) / 40.0
    if recall_points == 11:
        return np.arange(0, 11) / 10.0
    raise ValueError(f"recall_points must be 40 or 11, got {recall_points}")


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray
    ap: float
    notes: list = field(default_factory=list)

    @property
    def points(self):
        return list(zip(self.recall.tolist(), self.precision.tolist()))


def ap_from_matches(matches, gt_count=None, recall_points=40):
    """Pool per-frame matches and compute interpolated AP.

    Precision is made non-increasing from the right; AP is its mean over the
    recall samples, a sample beyond the reachable recall counting as zero.
    """
    matches = list(matches)
    if gt_count is None:
        gt_count = sum(m.n_gt for m in matches)
    if gt_count < 0:
        raise ValueError("gt_count must be non-negative")
    samples = recall_samples(recall_points)
    if matches:
        scores = np.concatenate([m.scores[~m.ignored] for m in matches])
        tp = np.concatenate([m.tp[~m.ignored] for m in matches])
    else:
        scores, tp = np.empty(0), np.empty(0, bool)
    notes = []
    if gt_count == 0:
        if len(scores):
            notes.append("no ground truth; detections present")
        return PRCurve(np.empty(0), np.empty(0), 0.0, notes)
    order = np.argsort(-scores, kind="stable")
    tp = tp[order]
    ctp = np.cumsum(tp)
    cfp = np.cumsum(~tp)
    recall = ctp / gt_count
    precision = ctp / np.maximum(ctp + cfp, 1)
    interp = np.maximum.accumulate(precision[::-1])[::-1] if len(precision) else precision
    ap = 0.0
    for r in samples:
        idx = np.flatnonzero(recall >= r - 1e-12)
        if len(idx):
            ap += interp[idx[0]]
    return PRCurve(recall, interp, float(ap / len(samples)), notes)

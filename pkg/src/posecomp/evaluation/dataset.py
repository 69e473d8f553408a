"""Dataset-level evaluation over directories of KITTI label files."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import InvalidRect, MissingFrame
from ..kitti_io import read_frame
from .iou import iou_2d, iou_matrix
from .metrics import (
    DIFFICULTY_LIMITS,
    IOU_FUNCTIONS,
    Difficulty,
    EvalConfig,
    Metric,
    ap_from_matches,
    assign_difficulty,
    match_scores,
)

DONT_CARE_IOU = 0.5


@dataclass
class Frame:
    """GT and detections of one image; rotations are per-record or None."""

    frame_id: str
    gts: list
    dets: list
    gt_rotations: list = None
    det_rotations: list = None

    def __post_init__(self):
        if self.gt_rotations is None:
            self.gt_rotations = [None] * len(self.gts)
        if self.det_rotations is None:
            self.det_rotations = [None] * len(self.dets)


@dataclass
class EvalReport:
    results: dict = field(default_factory=dict)

    def ap(self, metric, tier):
        """AP as a percentage."""
        return 100.0 * self.results[(Metric(metric), Difficulty(tier))].ap

    def rows(self):
        for (metric, tier), curve in self.results.items():
            yield metric.value, tier.label, 100.0 * curve.ap

    def to_csv(self):
        lines = ["metric,tier,ap"]
        lines += [f"{m},{t},{ap:.2f}" for m, t, ap in self.rows()]
        return "\n".join(lines) + "\n"

    def to_table(self):
        metrics = list(dict.fromkeys(m for m, _ in self.results))
        head = f"{'metric':<8}" + "".join(f"{t.label:>10}" for t in Difficulty)
        lines = [head, "-" * len(head)]
        for m in metrics:
            cells = "".join(f"{self.ap(m, t):>10.2f}" for t in Difficulty)
            lines.append(f"{m.value:<8}" + cells)
        notes = sorted({n for c in self.results.values() for n in c.notes})
        lines += [f"note: {n}" for n in notes]
        return "\n".join(lines) + "\n"


def _geometry(records, rotations, metric):
    if metric is Metric.AP2D:
        return [r.bbox2d for r in records]
    return [r.to_box(rot).corners() for r, rot in zip(records, rotations)]


def _dont_care_hits(dets, dont_care):
    hits = np.zeros(len(dets), bool)
    for i, d in enumerate(dets):
        for dc in dont_care:
            try:
                if iou_2d(d.bbox2d, dc.bbox2d) >= DONT_CARE_IOU:
                    hits[i] = True
                    break
            except InvalidRect:
                continue
    return hits


def evaluate_frames(frames, cfg=EvalConfig(), metrics=None):
    """AP per (metric, tier) over in-memory frames, pooled in frame order."""
    metrics = [cfg.metric] if metrics is None else [Metric(m) for m in metrics]
    per_key = {(m, t): [] for m in metrics for t in Difficulty}
    for frame in frames:
        gi = [i for i, r in enumerate(frame.gts) if r.class_name == cfg.class_filter]
        di = [i for i, r in enumerate(frame.dets) if r.class_name == cfg.class_filter]
        gts = [frame.gts[i] for i in gi]
        dets = [frame.dets[i] for i in di]
        dont_care = [r for r in frame.gts if r.is_dont_care]
        scores = [1.0 if d.score is None else d.score for d in dets]
        difficulty = [assign_difficulty(g) for g in gts]
        dc_hits = _dont_care_hits(dets, dont_care)
        heights = np.array([d.bbox_height for d in dets])
        for m in metrics:
            iou = iou_matrix(
                _geometry(dets, [frame.det_rotations[i] for i in di], m),
                _geometry(gts, [frame.gt_rotations[i] for i in gi], m),
                IOU_FUNCTIONS[m],
            )
            for tier in Difficulty:
                ignored = np.array([d is None or d > tier for d in difficulty], bool)
                small = heights < DIFFICULTY_LIMITS[tier][0] if len(dets) else None
                per_key[(m, tier)].append(
                    match_scores(iou, scores, cfg.iou_threshold, ignored, dc_hits, small)
                )
    report = EvalReport()
    for key, matches in per_key.items():
        report.results[key] = ap_from_matches(matches, recall_points=cfg.recall_points)
    return report


def frame_ids(directory):
    """Sorted frame ids of the label files in ``directory`` (sidecars excluded)."""
    return sorted(
        p.name[: -len(".txt")]
        for p in Path(directory).iterdir()
        if p.is_file() and p.name.endswith(".txt") and not p.name.endswith(".rot.txt")
    )


def check_frames(det_dir, gt_dir, calib_dir=None):
    """Frame ids shared by all directories; raise MissingFrame on any gap.

    A detection directory without any label file means "no detections".
    """
    gt_ids = frame_ids(gt_dir)
    det_ids = frame_ids(det_dir)
    if det_ids:
        for fid in gt_ids:
            if fid not in det_ids:
                raise MissingFrame(fid, str(det_dir))
        for fid in det_ids:
            if fid not in gt_ids:
                raise MissingFrame(fid, str(gt_dir))
    if calib_dir is not None:
        calib_ids = set(frame_ids(calib_dir))
        for fid in gt_ids:
            if fid not in calib_ids:
                raise MissingFrame(fid, str(calib_dir))
    return gt_ids, bool(det_ids)


def load_frames(det_dir, gt_dir, calib_dir=None):
    ids, have_dets = check_frames(det_dir, gt_dir, calib_dir)
    frames = []
    for fid in ids:
        gts, grot = read_frame(Path(gt_dir) / f"{fid}.txt")
        if have_dets:
            dets, drot = read_frame(Path(det_dir) / f"{fid}.txt")
        else:
            dets, drot = [], []
        frames.append(Frame(fid, gts, dets, grot, drot))
    return frames


def evaluate_dataset(det_dir, gt_dir, calib_dir=None, cfg=EvalConfig(), metrics=None):
    return evaluate_frames(load_frames(det_dir, gt_dir, calib_dir), cfg, metrics)

"""Factor-swap ablation: rebuild boxes from mixed predicted and GT components.

A monocular detector outputs a projected 3D center, a depth, a yaw and a box
size; the 3D box is assembled from those. Replacing one predicted component by
its ground-truth value (or the reverse) and re-evaluating shows how much each
component costs.
"""

import enum
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .evaluation import EvalConfig, Frame, evaluate_frames, iou_2d
from .evaluation.dataset import check_frames, load_frames
from .evaluation.metrics import Difficulty
from .exceptions import InvalidRect
from .geometry import Box3D, backproject_center, project, yaw_from_rotation
from .kitti_io import box_to_record, read_calib

PAIRING_IOU = 0.3


class Factor(str, enum.Enum):
    BB_SIZE = "bbsize"
    PROJECTED_3D = "projected3d"
    YAW = "yaw"
    LOCATION_3D = "location3d"
    DEPTH = "depth"


class Direction(str, enum.Enum):
    PRED_WITH_GT = "pred_with_gt"
    GT_WITH_PRED = "gt_with_pred"


@dataclass(frozen=True)
class SwapSpec:
    factor: Factor
    direction: Direction

    def __post_init__(self):
        object.__setattr__(self, "factor", Factor(self.factor))
        object.__setattr__(self, "direction", Direction(self.direction))


@dataclass(frozen=True)
class FactorSet:
    projected_center: tuple
    depth: float
    yaw: float
    dims: tuple
    location_3d: tuple = None


def decompose(rec, K, rotation=None):
    """Split a label record into the components a monocular detector predicts."""
    center = rec.center
    px = project(K, center)
    yaw = rec.rotation_y if rotation is None else yaw_from_rotation(rotation)
    return FactorSet(
        tuple(px.tolist()), float(center[2]), float(yaw), tuple(rec.dims), tuple(center.tolist())
    )


def recompose(f, K):
    """Assemble a yaw-only box; an explicit ``location_3d`` wins over center + depth."""
    if f.location_3d is not None:
        center = np.asarray(f.location_3d, dtype=float)
    else:
        center = backproject_center(K, f.projected_center, f.depth)
    return Box3D(center, f.dims, f.yaw)


_FIELDS = {
    Factor.BB_SIZE: ("dims",),
    Factor.PROJECTED_3D: ("projected_center",),
    Factor.YAW: ("yaw",),
    Factor.DEPTH: ("depth",),
    Factor.LOCATION_3D: ("location_3d",),
}


def swap_factor(target, source, factor):
    """``target`` with ``factor`` taken from ``source``.

    The 3D location override is cleared unless it is the swapped factor, so
    the center is rebuilt from the projected center and depth.
    """
    factor = Factor(factor)
    changes = {name: getattr(source, name) for name in _FIELDS[factor]}
    if factor is not Factor.LOCATION_3D:
        changes["location_3d"] = None
    return replace(target, **changes)


def pair_predictions(preds, gts, threshold=PAIRING_IOU):
    """Greedy one-to-one pairing by 2D IoU, highest-scoring prediction first.

    Returns ``{pred_index: gt_index}``.
    """
    scores = np.array([1.0 if p.score is None else p.score for p in preds])
    taken = set()
    pairs = {}
    for i in np.argsort(-scores, kind="stable"):
        best, best_iou = None, threshold
        for j, g in enumerate(gts):
            if j in taken:
                continue
            try:
                v = iou_2d(preds[i].bbox2d, g.bbox2d)
            except InvalidRect:
                continue
            if v >= best_iou and (best is None or v > best_iou):
                best, best_iou = j, v
        if best is not None:
            taken.add(best)
            pairs[int(i)] = best
    return pairs


def _intrinsics_for(K, frame):
    return K[frame.frame_id] if isinstance(K, dict) else K


def swap_frame(frame, spec, K, cfg=EvalConfig()):
    """Return ``(new_frame, n_pairs)`` with one factor swapped per matched pair."""
    spec = SwapSpec(spec.factor, spec.direction)
    K = _intrinsics_for(K, frame)
    pi = [i for i, r in enumerate(frame.dets) if r.class_name == cfg.class_filter]
    gi = [i for i, r in enumerate(frame.gts) if r.class_name == cfg.class_filter]
    preds = [frame.dets[i] for i in pi]
    gts = [frame.gts[i] for i in gi]
    pairs = pair_predictions(preds, gts)

    def factors(records, rotations, idx, local):
        return decompose(records[idx[local]], K, rotations[idx[local]])

    if spec.direction is Direction.PRED_WITH_GT:
        dets = list(frame.dets)
        rots = list(frame.det_rotations)
        for p, g in pairs.items():
            mixed = swap_factor(
                factors(frame.dets, frame.det_rotations, pi, p),
                factors(frame.gts, frame.gt_rotations, gi, g),
                spec.factor,
            )
            dets[pi[p]], rots[pi[p]] = box_to_record(recompose(mixed, K), preds[p])
        return Frame(frame.frame_id, frame.gts, dets, frame.gt_rotations, rots), len(pairs)

    by_gt = {g: p for p, g in pairs.items()}
    dets, rots = [], []
    for local, j in enumerate(gi):
        gt = frame.gts[j]
        if local in by_gt:
            p = by_gt[local]
            mixed = swap_factor(
                factors(frame.gts, frame.gt_rotations, gi, local),
                factors(frame.dets, frame.det_rotations, pi, p),
                spec.factor,
            )
            score = 1.0 if preds[p].score is None else preds[p].score
            rec, rot = box_to_record(recompose(mixed, K), gt.with_score(score))
        else:
            rec, rot = gt.with_score(1.0), frame.gt_rotations[j]
        dets.append(rec)
        rots.append(rot)
    return Frame(frame.frame_id, frame.gts, dets, frame.gt_rotations, rots), len(pairs)


def swap_and_evaluate(frames, spec, K, cfg=EvalConfig()):
    """Evaluate the swapped detections; returns ``(report, n_pairs)``."""
    swapped, n_pairs = [], 0
    for frame in frames:
        f, n = swap_frame(frame, spec, K, cfg)
        swapped.append(f)
        n_pairs += n
    return evaluate_frames(swapped, cfg), n_pairs


ROW_ORDER = [SwapSpec(f, Direction.PRED_WITH_GT) for f in Factor] + [
    SwapSpec(f, Direction.GT_WITH_PRED) for f in Factor
]


@dataclass
class AblationRow:
    factor: str
    direction: str
    ap: dict  # tier label -> percent, or None when undefined


@dataclass
class AblationTable:
    rows: list

    def get(self, factor, direction, tier="moderate"):
        for r in self.rows:
            if r.factor == factor and r.direction == direction:
                return r.ap[tier]
        raise KeyError((factor, direction))

    def to_csv(self):
        lines = ["factor,direction,tier,ap"]
        for r in self.rows:
            for tier in Difficulty:
                v = r.ap[tier.label]
                lines.append(
                    f"{r.factor},{r.direction},{tier.label},{'n/a' if v is None else f'{v:.2f}'}"
                )
        return "\n".join(lines) + "\n"


def run_ablation_table(frames, K, cfg=EvalConfig()):
    """Baseline row plus one row per (factor, direction)."""
    frames = list(frames)
    base = evaluate_frames(frames, cfg)
    rows = [AblationRow("none", "baseline", {t.label: base.ap(cfg.metric, t) for t in Difficulty})]
    for spec in ROW_ORDER:
        report, n_pairs = swap_and_evaluate(frames, spec, K, cfg)
        undefined = spec.direction is Direction.GT_WITH_PRED and n_pairs == 0
        rows.append(
            AblationRow(
                spec.factor.value,
                spec.direction.value,
                {t.label: None if undefined else report.ap(cfg.metric, t) for t in Difficulty},
            )
        )
    return AblationTable(rows)


def ablate_dataset(det_dir, gt_dir, calib_dir, cfg=EvalConfig()):
    ids, _ = check_frames(det_dir, gt_dir, calib_dir)
    K = {fid: read_calib(Path(calib_dir) / f"{fid}.txt").intrinsics for fid in ids}
    return run_ablation_table(load_frames(det_dir, gt_dir, calib_dir), K, cfg)

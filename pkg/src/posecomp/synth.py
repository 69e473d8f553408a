"""Seeded synthetic driving scenes and oracle detectors.

A scene is a set of cars in a reference camera. Moving the camera by a
relative pose re-expresses every car in the new frame; those boxes are the
ground truth. The oracle detector sees the true center and size but, like a
network trained on one camera rig, can only output a yaw-only heading. The
compensated variant rebuilds its boxes with the pose's roll and pitch.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .evaluation import EvalConfig, Frame, Metric, evaluate_frames
from .geometry import (
    Box3D,
    CameraIntrinsics,
    compensate_box,
    project_points,
    transform_box,
    yaw_from_rotation,
)
from .kitti_io import LabelRecord, PoseSpec, box_to_record, pose_spec_to_rigid, serialize_labels
from .kitti_io import serialize_rotations

# KITTI-like P2 intrinsics on a 1280x375 frame.
DEFAULT_K = CameraIntrinsics(721.5377, 721.5377, 609.5593, 172.854, 1280, 375)

ROTATION_AXES = ("pitch", "roll", "yaw")
TRANSLATION_AXES = ("tx", "ty")
DEFAULT_ANGLES = (0, 1, 2, 3, 4, 5)
DEFAULT_OFFSETS = (-0.5, 0.5)


@dataclass
class Scene:
    K: CameraIntrinsics
    boxes: list  # per frame, list of Box3D in the reference camera
    scores: list  # per frame, detector confidence per box

    @property
    def n_frames(self):
        return len(self.boxes)


def make_scene(seed=42, n_frames=50, K=DEFAULT_K, objects=(3, 5), min_gap=6.0):
    """Cars on a flat road ~1.65 m below the camera, about four per frame."""
    rng = np.random.default_rng(seed)
    frames, scores = [], []
    for _ in range(n_frames):
        n = int(rng.integers(objects[0], objects[1] + 1))
        boxes = []
        attempts = 0
        while len(boxes) < n and attempts < 1000:
            attempts += 1
            z = rng.uniform(10.0, 40.0)
            x = rng.uniform(-0.35 * z, 0.35 * z)
            dims = np.array([rng.uniform(1.4, 1.7), rng.uniform(1.55, 1.85), rng.uniform(3.6, 4.6)])
            bottom = 1.65 + rng.uniform(-0.1, 0.1)
            box = Box3D([x, bottom - dims[0] / 2, z], dims, rng.uniform(-math.pi, math.pi))
            if any(np.hypot(*(box.center - b.center)[[0, 2]]) < min_gap for b in boxes):
                continue
            boxes.append(box)
        frames.append(boxes)
        scores.append([float(s) for s in rng.uniform(0.5, 1.0, len(boxes))])
    return Scene(K, frames, scores)


def image_box(K, box):
    """Projected 2D box clamped to the image, and the truncated fraction."""
    uv = project_points(K, box.corners())
    left, top = uv.min(axis=0)
    right, bottom = uv.max(axis=0)
    full = (right - left) * (bottom - top)
    cl, ct = max(left, 0.0), max(top, 0.0)
    cr, cb = min(right, K.width - 1.0), min(bottom, K.height - 1.0)
    if cr <= cl or cb <= ct:
        return None, 1.0
    kept = (cr - cl) * (cb - ct)
    return (cl, ct, cr, cb), float(1.0 - kept / full)


def _record(K, box, score=None, fallback=None):
    bbox, trunc = image_box(K, box)
    if bbox is None:
        if fallback is None:
            return None, None
        bbox, trunc = fallback.bbox2d, fallback.truncated
    template = LabelRecord.from_box(box, bbox2d=bbox, score=score, truncated=min(trunc, 1.0))
    return box_to_record(box, template)


def oracle_detection(gt_box):
    """Yaw-only box with the true center and size."""
    return Box3D(gt_box.center, gt_box.dims, yaw_from_rotation(gt_box.rotation))


@dataclass
class ShiftedFrames:
    """Ground truth and both detector variants under one camera shift."""

    gt: list = field(default_factory=list)
    uncompensated: list = field(default_factory=list)
    compensated: list = field(default_factory=list)

    def frames(self, variant):
        dets = getattr(self, variant)
        return [
            Frame(str(i), g[0], d[0], g[1], d[1]) for i, (g, d) in enumerate(zip(self.gt, dets))
        ]

    def detection_bytes(self, variant):
        """Serialized detections, sidecars included, for byte comparisons."""
        out = []
        for recs, rots in getattr(self, variant):
            out.append(serialize_labels(recs).encode())
            if any(r is not None for r in rots):
                out.append(serialize_rotations([np.eye(3) if r is None else r for r in rots]).encode())
        return b"\0".join(out)


def shift_scene(scene, spec, apply_yaw=False):
    """Build GT and detections for the camera displaced by ``spec`` (a PoseSpec)."""
    pose = pose_spec_to_rigid(spec)
    out = ShiftedFrames()
    for boxes, scores in zip(scene.boxes, scene.scores):
        g_recs, g_rots, u_recs, u_rots, c_recs, c_rots = [], [], [], [], [], []
        for box, score in zip(boxes, scores):
            gt = transform_box(box, pose)
            if np.any(gt.corners()[:, 2] <= 0.1):
                continue
            rec, rot = _record(scene.K, gt)
            if rec is None:
                continue
            g_recs.append(rec)
            g_rots.append(rot)
            det = oracle_detection(gt)
            if apply_yaw:
                det = Box3D(det.center, det.dims, det.heading + spec.yaw)
            rec, rot = _record(scene.K, det, score, g_recs[-1])
            u_recs.append(rec)
            u_rots.append(rot)
            comp = compensate_box(det, spec.roll, spec.pitch)
            rec, rot = _record(scene.K, comp, score, g_recs[-1])
            c_recs.append(rec)
            c_rots.append(rot)
        out.gt.append((g_recs, g_rots))
        out.uncompensated.append((u_recs, u_rots))
        out.compensated.append((c_recs, c_rots))
    return out


def depth_corrupted_frames(scene, sigma=2.0, seed=0):
    """Frames whose detections are GT boxes with Gaussian noise on depth only.

    The noise moves each center along its viewing ray, so the projected
    center, size, yaw and 2D box stay exact. Depths are kept above 1 m.
    """
    rng = np.random.default_rng(seed)
    frames = []
    for i, (recs, rots) in enumerate(shift_scene(scene, PoseSpec()).gt):
        dets = []
        for rec, score in zip(recs, scene.scores[i]):
            c = rec.center
            z = max(1.0, c[2] + rng.normal(0.0, sigma))
            box = Box3D(c * (z / c[2]), rec.dims, rec.rotation_y)
            dets.append(box_to_record(box, rec.with_score(score))[0])
        frames.append(Frame(str(i), recs, dets, rots, [None] * len(dets)))
    return frames


def sweep_specs(angles=DEFAULT_ANGLES, offsets=DEFAULT_OFFSETS):
    """``(axis, value, PoseSpec)`` for every setting of the demo sweep."""
    for axis in ROTATION_AXES:
        for a in angles:
            yield axis, a, PoseSpec(**{f"{axis}_deg": float(a)})
    for axis in TRANSLATION_AXES:
        for t in offsets:
            yield axis, t, PoseSpec(**{axis: float(t)})


@dataclass
class SweepRow:
    axis: str
    value: float
    variant: str
    metric: str
    tier: str
    ap: float


def run_sweep(seed=42, n_frames=50, angles=DEFAULT_ANGLES, offsets=DEFAULT_OFFSETS,
              cfg=EvalConfig(), metrics=(Metric.AP3D, Metric.APBEV, Metric.AP2D)):
    """Evaluate both detector variants at every sweep setting.

    Returns ``(rows, identical)`` where ``identical`` maps ``(axis, value)`` to
    whether the two variants serialize to the same bytes.
    """
    scene = make_scene(seed, n_frames)
    rows, identical = [], {}
    for axis, value, spec in sweep_specs(angles, offsets):
        shifted = shift_scene(scene, spec)
        identical[(axis, value)] = (
            shifted.detection_bytes("uncompensated") == shifted.detection_bytes("compensated")
        )
        for variant in ("uncompensated", "compensated"):
            report = evaluate_frames(shifted.frames(variant), cfg, metrics)
            for metric, tier, ap in report.rows():
                rows.append(SweepRow(axis, value, variant, metric, tier, ap))
    return rows, identical


def format_value(axis, value):
    if axis in ROTATION_AXES:
        return f"{value:g}"
    return f"{value:+g}"


def sweep_csv(rows, metric="ap3d", tier="moderate"):
    lines = ["axis,angle,variant,ap"]
    for r in rows:
        if r.metric == metric and r.tier == tier:
            lines.append(f"{r.axis},{format_value(r.axis, r.value)},{r.variant},{r.ap:.2f}")
    return "\n".join(lines) + "\n"


def sweep_full_csv(rows):
    lines = ["axis,angle,variant,metric,tier,ap"]
    for r in rows:
        lines.append(
            f"{r.axis},{format_value(r.axis, r.value)},{r.variant},{r.metric},{r.tier},{r.ap:.2f}"
        )
    return "\n".join(lines) + "\n"


def sweep_summary(rows, identical, tier="moderate"):
    table = {}
    for r in rows:
        if r.tier == tier:
            table[(r.axis, r.value, r.variant, r.metric)] = r.ap
    settings = list(dict.fromkeys((r.axis, r.value) for r in rows))
    head = (
        f"{'axis':<6}{'value':>7}  {'3D unc':>8}{'3D comp':>9}{'BEV unc':>9}{'BEV comp':>10}"
        f"  identical"
    )
    lines = [f"AP ({tier}, %) for yaw-only oracle detections vs. roll/pitch compensation", head]
    for axis, value in settings:
        cells = [
            table.get((axis, value, v, m), float("nan"))
            for m in ("ap3d", "apbev")
            for v in ("uncompensated", "compensated")
        ]
        lines.append(
            f"{axis:<6}{format_value(axis, value):>7}  {cells[0]:>8.2f}{cells[1]:>9.2f}"
            f"{cells[2]:>9.2f}{cells[3]:>10.2f}  {'yes' if identical[(axis, value)] else 'no'}"
        )
    return "\n".join(lines) + "\n"

"""Command line entry point: ``posecomp <subcommand> ...``.

Exit status is 0 on success, 1 for unreadable or malformed input and 2 when
the dataset directories do not line up.
"""

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kitti_io
from .ablation import ablate_dataset
from .evaluation import EvalConfig, Metric, evaluate_dataset
from .evaluation.dataset import frame_ids
from .exceptions import MissingFrame, PosecompError
from .geometry import Box3D, compensate_box, transform_box
from .kitti_io import box_to_record, pose_spec_to_rigid
from .synth import image_box, run_sweep, sweep_csv, sweep_full_csv, sweep_summary
from .warp import CROP_SIZE, crop_offsets, warp_image

log = logging.getLogger("posecomp")

EXIT_OK, EXIT_INPUT, EXIT_DATASET = 0, 1, 2


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _iou(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("--iou must be in (0, 1)")
    return value


def _angles(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _read_pose(path):
    if path is None:
        return kitti_io.PoseSpec()
    return kitti_io.read_pose_spec(path)


def _eval_config(args):
    metric = args.metric[0] if args.metric else Metric.AP3D
    return EvalConfig(args.iou, args.recall_points, metric, args.class_name)


def _is_identity(spec):
    return all(getattr(spec, k) == 0.0 for k in kitti_io.POSE_KEYS)


def _check_inputs(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(p)


def cmd_warp(args):
    _check_inputs(args.image, args.depth, args.calib, args.pose)
    img = kitti_io.read_ppm(Path(args.image).read_bytes())
    depth = kitti_io.read_pfm(Path(args.depth).read_bytes())
    K = kitti_io.read_calib(args.calib, (img.width, img.height)).intrinsics
    spec = _read_pose(args.pose)
    crop = CROP_SIZE if args.crop else None
    out, mask, report = warp_image(
        img, depth, K, pose_spec_to_rigid(spec), fill=not args.no_fill, crop=crop
    )
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.ppm").write_bytes(kitti_io.write_ppm(out))
    Path(f"{prefix}_mask.pgm").write_bytes(kitti_io.write_pgm(mask.astype(np.uint8) * 255))
    Path(f"{prefix}_report.txt").write_text(report.to_line() + "\n", encoding="utf-8")
    print(report.to_line())
    return EXIT_OK


def relabel_records(records, rotations, K, spec, crop=None):
    """Re-express labels in the camera displaced by ``spec``.

    2D boxes are re-projected from the moved 3D corners and clamped to the
    image (or crop window). Objects that leave the view are dropped. With an
    identity pose and no crop the records pass through untouched.
    """
    if _is_identity(spec) and crop is None:
        return list(records), list(rotations)
    pose = pose_spec_to_rigid(spec)
    view = K
    shift = (0.0, 0.0)
    if crop is not None:
        left, top = crop_offsets(K.width, K.height, *crop)
        view = K.cropped(left, top, *crop)
        shift = (left, top)
    out_recs, out_rots = [], []
    for rec, rot in zip(records, rotations):
        if rec.is_dont_care:
            l, t, r, b = rec.bbox2d
            out_recs.append(replace(rec, bbox2d=(l - shift[0], t - shift[1], r - shift[0], b - shift[1])))
            out_rots.append(None)
            continue
        box = transform_box(rec.to_box(rot), pose)
        if np.any(box.corners()[:, 2] <= 0):
            continue
        bbox, trunc = image_box(view, box)
        if bbox is None:
            continue
        x, _, z = box.center
        alpha = math.atan2(math.sin(box.yaw - math.atan2(x, z)), math.cos(box.yaw - math.atan2(x, z)))
        template = replace(rec, bbox2d=bbox, truncated=min(1.0, max(rec.truncated, trunc)), alpha=alpha)
        new, new_rot = box_to_record(box, template)
        out_recs.append(new)
        out_rots.append(new_rot)
    return out_recs, out_rots


def _label_jobs(labels, calib, out):
    """``(label_path, calib_path, out_path)`` for a file or a directory of frames."""
    labels, calib, out = Path(labels), Path(calib), Path(out)
    if labels.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        jobs = []
        for fid in frame_ids(labels):
            c = calib / f"{fid}.txt" if calib.is_dir() else calib
            if not c.exists():
                raise MissingFrame(fid, str(calib))
            jobs.append((labels / f"{fid}.txt", c, out / f"{fid}.txt"))
        return jobs
    out.parent.mkdir(parents=True, exist_ok=True)
    return [(labels, calib, out)]


def cmd_relabel(args):
    _check_inputs(args.labels, args.calib, args.pose)
    spec = _read_pose(args.pose)
    crop = CROP_SIZE if args.crop else None
    for label_path, calib_path, out_path in _label_jobs(args.labels, args.calib, args.out):
        K = kitti_io.read_calib(calib_path, (args.width, args.height)).intrinsics
        records, rotations = kitti_io.read_frame(label_path)
        recs, rots = relabel_records(records, rotations, K, spec, crop)
        kitti_io.write_frame(out_path, recs, rots)
    return EXIT_OK


def compensate_records(records, rotations, spec, apply_yaw=False):
    """Rebuild detections with the pose's roll and pitch.

    The label file keeps the predicted yaw; the tilt goes to the sidecar.
    """
    out_recs, out_rots = [], []
    for rec, rot in zip(records, rotations):
        if rec.is_dont_care:
            out_recs.append(rec)
            out_rots.append(None)
            continue
        yaw = rec.rotation_y + (spec.yaw if apply_yaw else 0.0)
        box = Box3D(rec.center, rec.dims, yaw)
        comp = compensate_box(box, spec.roll, spec.pitch)
        new, new_rot = box_to_record(comp, rec)
        out_recs.append(replace(new, rotation_y=yaw))
        out_rots.append(new_rot)
    return out_recs, out_rots


def cmd_compensate(args):
    _check_inputs(args.detections, args.calib, args.pose)
    spec = _read_pose(args.pose)
    for det_path, calib_path, out_path in _label_jobs(args.detections, args.calib, args.out):
        kitti_io.read_calib(calib_path, (args.width, args.height))
        records, rotations = kitti_io.read_frame(det_path)
        recs, rots = compensate_records(records, rotations, spec, args.apply_yaw)
        kitti_io.write_frame(out_path, recs, rots)
    return EXIT_OK


def cmd_eval(args):
    _check_inputs(args.det_dir, args.gt_dir, args.calib_dir)
    cfg = _eval_config(args)
    metrics = args.metric or [Metric.AP3D, Metric.APBEV, Metric.AP2D]
    report = evaluate_dataset(args.det_dir, args.gt_dir, args.calib_dir, cfg, metrics)
    sys.stdout.write(report.to_table())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.csv").write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args):
    _check_inputs(args.det_dir, args.gt_dir, args.calib_dir)
    cfg = _eval_config(args)
    table = ablate_dataset(args.det_dir, args.gt_dir, args.calib_dir, cfg)
    csv = table.to_csv()
    sys.stdout.write(csv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_text(csv, encoding="utf-8")
    return EXIT_OK


def cmd_synth_demo(args):
    cfg = EvalConfig(args.iou, args.recall_points)
    rows, identical = run_sweep(args.seed, args.frames, args.angles, args.offsets, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "synth_demo.csv").write_text(sweep_csv(rows), encoding="utf-8")
    (out / "synth_demo_full.csv").write_text(sweep_full_csv(rows), encoding="utf-8")
    summary = sweep_summary(rows, identical)
    (out / "synth_demo_summary.txt").write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    return EXIT_OK


def _add_eval_flags(p):
    p.add_argument("--iou", type=_iou, default=0.7)
    p.add_argument("--recall-points", type=int, choices=(40, 11), default=40)
    p.add_argument("--metric", type=Metric, action="append", choices=list(Metric),
                   help="ap3d, apbev or ap2d; repeat for several")
    p.add_argument("--class", dest="class_name", default="Car")
    p.add_argument("--out", default=".")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="posecomp",
        description="Camera-pose robustness tools for monocular 3D box detection.",
        epilog="Exit status: 0 ok, 1 bad input, 2 dataset directories out of step.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("warp", help="synthesize a view under a camera pose change")
    p.add_argument("image")
    p.add_argument("depth")
    p.add_argument("calib")
    p.add_argument("--pose")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--crop", action="store_true", help="center-crop to 804x244")
    p.add_argument("--no-fill", action="store_true")
    p.set_defaults(func=cmd_warp)

    for name, func, target, text in (
        ("relabel", cmd_relabel, "labels", "re-express labels in a moved camera"),
        ("compensate", cmd_compensate, "detections", "add calibrated roll/pitch to detections"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument(target)
        p.add_argument("calib")
        p.add_argument("--pose")
        p.add_argument("--out", required=True)
        p.add_argument("--width", type=int, default=kitti_io.DEFAULT_IMAGE_SIZE[0])
        p.add_argument("--height", type=int, default=kitti_io.DEFAULT_IMAGE_SIZE[1])
        if name == "relabel":
            p.add_argument("--crop", action="store_true")
        else:
            p.add_argument("--apply-yaw", action="store_true")
        p.set_defaults(func=func)

    for name, func, text in (
        ("eval", cmd_eval, "AP per metric and difficulty"),
        ("ablate", cmd_ablate, "factor-swap ablation table"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("det_dir")
        p.add_argument("gt_dir")
        p.add_argument("calib_dir")
        _add_eval_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("synth-demo", help="pose sweep on a seeded synthetic dataset")
    p.add_argument("--seed", type=_seed, default=42)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--angles", type=_angles, default=(0, 1, 2, 3, 4, 5))
    p.add_argument("--offsets", type=_angles, default=(-0.5, 0.5))
    p.add_argument("--iou", type=_iou, default=0.7)
    p.add_argument("--recall-points", type=int, choices=(40, 11), default=40)
    p.add_argument("--out", default="synth_demo")
    p.set_defaults(func=cmd_synth_demo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except MissingFrame as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DATASET
    except (PosecompError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

from .dataset import EvalReport, Frame, evaluate_dataset, evaluate_frames, load_frames
from .iou import bev_footprint, convex_hull, iou_2d, iou_3d, iou_bev, polygon_area, polygon_clip
from .metrics import (
    Difficulty,
    EvalConfig,
    MatchResult,
    Metric,
    PRCurve,
    ap_from_matches,
    assign_difficulty,
    match_frame,
)

__all__ = [
    "Difficulty",
    "EvalConfig",
    "EvalReport",
    "Frame",
    "MatchResult",
    "Metric",
    "PRCurve",
    "ap_from_matches",
    "assign_difficulty",
    "bev_footprint",
    "convex_hull",
    "evaluate_dataset",
    "evaluate_frames",
    "iou_2d",
    "iou_3d",
    "iou_bev",
    "load_frames",
    "match_frame",
    "polygon_area",
    "polygon_clip",
]

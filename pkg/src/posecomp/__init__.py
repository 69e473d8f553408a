"""Camera-pose robustness toolkit for monocular 3D box detection.

Synthesizes pose-shifted views and labels, builds roll/pitch compensated 3D
boxes and scores detections with oriented-box IoU and KITTI-style AP.
"""

from .estimators import HeadingCompensator, ViewSynthesizer
from .geometry import (
    Box3D,
    CameraIntrinsics,
    EulerAngles,
    RigidPose,
    backproject_center,
    compose_r3d,
    corners_compensated,
    corners_yaw_only,
    project,
    rot_axis,
    transform_box,
)

__version__ = "0.1.0"

__all__ = [
    "Box3D",
    "CameraIntrinsics",
    "EulerAngles",
    "HeadingCompensator",
    "RigidPose",
    "ViewSynthesizer",
    "backproject_center",
    "compose_r3d",
    "corners_compensated",
    "corners_yaw_only",
    "project",
    "rot_axis",
    "transform_box",
]

"""Rotation algebra, pinhole projection and 3D box construction.

Frames follow the KITTI camera convention: x right, y down, z forward.
Angles are radians everywhere in this module.

Boxes are described about their geometric center. Before rotation the
long side ``l`` lies along x, the height ``h`` along y and the width ``w``
along z, so a yaw of zero means the object points along the camera x axis.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_angle, check_dims, check_rotation, check_vector
from .exceptions import BehindCamera, InvalidDepth

# Sign pattern of the eight corners as (x, y, z) multiples of (l/2, h/2, w/2).
# Bottom face (y = +h/2, y-down frame) first, walked around the box, then top.
CORNER_SIGNS = np.array(
    [
        [1, 1, 1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, 1, 1],
        [1, -1, 1],
        [1, -1, -1],
        [-1, -1, -1],
        [-1, -1, 1],
    ],
    dtype=float,
)


def wrap_angle(angle):
    """Map an angle to its representative in (-pi, pi]."""
    a = math.fmod(angle, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class EulerAngles:
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw"):
            object.__setattr__(self, name, check_angle(getattr(self, name), name))

    def canonicalize(self):
        return EulerAngles(wrap_angle(self.roll), wrap_angle(self.pitch), wrap_angle(self.yaw))

    @classmethod
    def from_degrees(cls, roll=0.0, pitch=0.0, yaw=0.0):
        return cls(math.radians(roll), math.radians(pitch), math.radians(yaw))

    def to_matrix(self):
        return compose_r3d(self.roll, self.yaw, self.pitch)


def rot_axis(axis, angle):
    """Right-handed elementary rotation about the camera ``x``, ``y`` or ``z`` axis."""
    angle = check_angle(angle)
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        m = [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
    elif axis == "y":
        m = [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
    elif axis == "z":
        m = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    else:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}")
    return np.array(m)


def compose_r3d(roll, yaw, pitch):
    """Return ``R_z(roll) @ R_y(yaw) @ R_x(pitch)``."""
    return rot_axis("z", roll) @ rot_axis("y", yaw) @ rot_axis("x", pitch)


def yaw_from_rotation(m):
    """Yaw of the rotated long axis (body x) projected onto the x-z plane."""
    m = np.asarray(m, dtype=float)
    return math.atan2(-m[2, 0], m[0, 0])


def is_pure_yaw(m, atol=1e-6):
    """True when ``m`` is a rotation about the camera y axis only."""
    m = np.asarray(m, dtype=float)
    return bool(np.allclose(m, rot_axis("y", yaw_from_rotation(m)), rtol=0.0, atol=atol))


@dataclass(frozen=True)
class RigidPose:
    """Rigid map ``X' = R X + t`` from one camera frame to another."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        object.__setattr__(self, "translation", check_vector(self.translation, name="translation"))

    @classmethod
    def identity(cls):
        return cls()

    def apply(self, points):
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def inverse(self):
        rt = self.rotation.T
        return RigidPose(rt, -rt @ self.translation)

    def compose(self, other):
        """Pose equivalent to applying ``other`` first, then ``self``."""
        return RigidPose(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    @property
    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def cropped(self, left, top, width, height):
        """Intrinsics of the window starting at pixel ``(left, top)``."""
        return CameraIntrinsics(self.fx, self.fy, self.cx - left, self.cy - top, width, height)


def project(K, point):
    """Pinhole projection of a camera-frame point to pixel coordinates."""
    x, y, z = check_vector(point, name="point")
    if z <= 0:
        raise BehindCamera(f"point has non-positive depth {z}")
    return np.array([K.fx * x / z + K.cx, K.fy * y / z + K.cy])


def project_points(K, points):
    """Vectorized :func:`project` for an ``(n, 3)`` array."""
    pts = np.asarray(points, dtype=float)
    z = pts[:, 2]
    if np.any(z <= 0):
        raise BehindCamera("one or more points have non-positive depth")
    return np.stack([K.fx * pts[:, 0] / z + K.cx, K.fy * pts[:, 1] / z + K.cy], axis=1)


def backproject_center(K, px, depth):
    """Lift pixel ``px`` at depth ``depth`` to a camera-frame point."""
    depth = float(depth)
    if not (math.isfinite(depth) and depth > 0):
        raise InvalidDepth(f"depth must be positive, got {depth}")
    u, v = check_vector(px, size=2, name="px")
    return np.array([(u - K.cx) / K.fx * depth, (v - K.cy) / K.fy * depth, depth])


def kitti_location_to_center(location, h):
    """Bottom-face center (KITTI ``location``) to geometric center."""
    loc = check_vector(location, name="location")
    return loc + np.array([0.0, -h / 2.0, 0.0])


def center_to_kitti_location(center, h):
    c = check_vector(center, name="center")
    return c + np.array([0.0, h / 2.0, 0.0])


@dataclass(frozen=True)
class Box3D:
    """Oriented box. ``heading`` is a yaw angle (float) or a 3x3 rotation."""

    center: np.ndarray
    dims: np.ndarray
    heading: object = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", check_vector(self.center, name="center"))
        object.__setattr__(self, "dims", check_dims(self.dims))
        if isinstance(self.heading, np.ndarray) or isinstance(self.heading, (list, tuple)):
            object.__setattr__(self, "heading", check_rotation(self.heading))
        else:
            object.__setattr__(self, "heading", check_angle(self.heading, "yaw"))

    @property
    def is_yaw_only(self):
        return not isinstance(self.heading, np.ndarray)

    @property
    def rotation(self):
        if self.is_yaw_only:
            return rot_axis("y", self.heading)
        return self.heading

    @property
    def yaw(self):
        if self.is_yaw_only:
            return self.heading
        return yaw_from_rotation(self.heading)

    @property
    def h(self):
        return self.dims[0]

    @property
    def w(self):
        return self.dims[1]

    @property
    def l(self):  # noqa: E743
        return self.dims[2]

    def corners(self):
        return box_corners(self)


def _offsets(dims):
    h, w, l = dims
    return CORNER_SIGNS * np.array([l / 2.0, h / 2.0, w / 2.0])


def box_corners(box):
    """Corners of any box, yaw-only or fully rotated."""
    return _offsets(box.dims) @ box.rotation.T + box.center


def corners_yaw_only(box):
    if not box.is_yaw_only:
        raise ValueError("corners_yaw_only needs a yaw-only box")
    return _offsets(box.dims) @ rot_axis("y", box.heading).T + box.center


def corners_compensated(box, roll_hat, pitch_hat):
    """Corners rebuilt with the calibrated camera roll and pitch folded in.

    With both angles zero the result is identical to :func:`corners_yaw_only`.
    """
    if not box.is_yaw_only:
        raise ValueError("corners_compensated needs a yaw-only box")
    roll_hat = check_angle(roll_hat, "roll_hat")
    pitch_hat = check_angle(pitch_hat, "pitch_hat")
    if roll_hat == 0.0 and pitch_hat == 0.0:
        return corners_yaw_only(box)
    r3d = compose_r3d(roll_hat, box.heading, pitch_hat)
    return _offsets(box.dims) @ r3d.T + box.center


def compensate_box(box, roll_hat, pitch_hat):
    """Box form of :func:`corners_compensated`."""
    if roll_hat == 0.0 and pitch_hat == 0.0:
        return box
    return Box3D(box.center, box.dims, compose_r3d(roll_hat, box.heading, pitch_hat))


def transform_box(box, pose):
    """Re-express ``box`` in the frame reached through ``pose``."""
    return Box3D(
        pose.rotation @ box.center + pose.translation,
        box.dims.copy(),
        pose.rotation @ box.rotation,
    )

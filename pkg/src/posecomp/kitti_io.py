"""Readers and writers for KITTI labels and calibration, pose files and rasters.

Rasters use the Netpbm family: binary PPM (``P6``) for color images, PGM
(``P5``) for masks and grayscale PFM (``Pf``) for depth.
"""

import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import (
    MalformedCalib,
    MalformedLabel,
    MalformedPose,
    MissingKey,
    TruncatedFile,
    UnknownKey,
    UnsupportedFormat,
)
from .geometry import (
    Box3D,
    CameraIntrinsics,
    RigidPose,
    center_to_kitti_location,
    compose_r3d,
    is_pure_yaw,
    kitti_location_to_center,
    rot_axis,
    yaw_from_rotation,
)

DONT_CARE = "DontCare"

# KITTI image extent; calib files do not carry it.
DEFAULT_IMAGE_SIZE = (1280, 375)


@dataclass(frozen=True)
class LabelRecord:
    class_name: str
    truncated: float
    occluded: int
    alpha: float
    bbox2d: tuple
    dims: tuple
    location: tuple
    rotation_y: float
    score: float = None

    @property
    def is_dont_care(self):
        return self.class_name == DONT_CARE

    @property
    def bbox_height(self):
        return self.bbox2d[3] - self.bbox2d[1]

    @property
    def center(self):
        return kitti_location_to_center(self.location, self.dims[0])

    def to_box(self, rotation=None):
        """Geometric-center box; ``rotation`` overrides the yaw-only heading."""
        heading = self.rotation_y if rotation is None else np.asarray(rotation, dtype=float)
        return Box3D(self.center, self.dims, heading)

    @classmethod
    def from_box(cls, box, class_name="Car", bbox2d=(0.0, 0.0, 1.0, 1.0), score=None,
                 truncated=0.0, occluded=0, alpha=None):
        loc = center_to_kitti_location(box.center, box.dims[0])
        ry = box.yaw
        if alpha is None:
            alpha = ry - math.atan2(loc[0], loc[2])
            alpha = math.atan2(math.sin(alpha), math.cos(alpha))
        return cls(
            class_name,
            float(truncated),
            int(occluded),
            float(alpha),
            tuple(float(v) for v in bbox2d),
            tuple(float(v) for v in box.dims),
            tuple(float(v) for v in loc),
            float(ry),
            score,
        )

    def with_score(self, score):
        return replace(self, score=score)


def _to_float(token, line_number, what):
    try:
        value = float(token)
    except ValueError:
        raise MalformedLabel(f"non-numeric {what} {token!r}", line_number) from None
    if not math.isfinite(value):
        raise MalformedLabel(f"non-finite {what} {token!r}", line_number)
    return value


def parse_label_line(line, line_number=None):
    """Parse one KITTI label line (15 tokens, or 16 with a trailing score)."""
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedLabel("line is not UTF-8", line_number) from None
    tokens = line.split()
    if len(tokens) not in (15, 16):
        raise MalformedLabel(
            f"expected 15 or 16 fields, found {len(tokens)}", line_number, found=len(tokens)
        )
    cls = tokens[0]
    vals = [_to_float(t, line_number, "field") for t in tokens[1:]]
    occluded = vals[1]
    if occluded != int(occluded):
        raise MalformedLabel(f"occluded must be an integer, got {tokens[2]!r}", line_number)
    rec = LabelRecord(
        class_name=cls,
        truncated=vals[0],
        occluded=int(occluded),
        alpha=vals[2],
        bbox2d=tuple(vals[3:7]),
        dims=tuple(vals[7:10]),
        location=tuple(vals[10:13]),
        rotation_y=vals[13],
        score=vals[14] if len(vals) == 15 else None,
    )
    if not rec.is_dont_care:
        left, top, right, bottom = rec.bbox2d
        if right <= left or bottom <= top:
            raise MalformedLabel("2D box must have right > left and bottom > top", line_number)
        if min(rec.dims) <= 0:
            raise MalformedLabel("dimensions must be positive", line_number)
        if rec.occluded not in (0, 1, 2, 3):
            raise MalformedLabel(f"occluded must be 0..3, got {rec.occluded}", line_number)
    return rec


def serialize_label_line(rec):
    fields = [
        rec.class_name,
        f"{rec.truncated:.2f}",
        f"{rec.occluded:d}",
        f"{rec.alpha:.2f}",
        *(f"{v:.2f}" for v in rec.bbox2d),
        *(f"{v:.2f}" for v in rec.dims),
        *(f"{v:.2f}" for v in rec.location),
        f"{rec.rotation_y:.2f}",
    ]
    if rec.score is not None:
        fields.append(f"{rec.score:.2f}")
    return " ".join(fields)


def parse_labels(text):
    return [
        parse_label_line(line, i + 1)
        for i, line in enumerate(text.splitlines())
        if line.strip()
    ]


def serialize_labels(records):
    return "".join(serialize_label_line(r) + "\n" for r in records)


def read_label_file(path):
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedLabel(f"{path} is not UTF-8") from None
    return parse_labels(text)


def write_label_file(path, records):
    Path(path).write_text(serialize_labels(records), encoding="utf-8")


def sidecar_path(label_path):
    """``000001.txt`` -> ``000001.rot.txt`` in the same directory."""
    p = Path(label_path)
    return p.with_name(p.stem + ".rot.txt")


def parse_rotations(text):
    rows = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 9:
            raise MalformedLabel(f"rotation row needs 9 values, found {len(tokens)}", i + 1,
                                 found=len(tokens))
        rows.append(np.array([_to_float(t, i + 1, "rotation entry") for t in tokens]).reshape(3, 3))
    return rows


def serialize_rotations(rotations):
    return "".join(
        " ".join(repr(float(v)) for v in np.asarray(m, dtype=float).ravel()) + "\n"
        for m in rotations
    )


def read_frame(path):
    """Label records plus per-record rotations (None where no sidecar exists)."""
    records = read_label_file(path)
    side = sidecar_path(path)
    if not side.exists():
        return records, [None] * len(records)
    rotations = parse_rotations(side.read_text(encoding="utf-8"))
    if len(rotations) != len(records):
        raise MalformedLabel(
            f"{side} has {len(rotations)} rows for {len(records)} labels", found=len(rotations)
        )
    return records, rotations


def write_frame(path, records, rotations=None):
    """Write labels and, when any heading is tilted, the rotation sidecar."""
    path = Path(path)
    write_label_file(path, records)
    side = sidecar_path(path)
    rotations = list(rotations) if rotations is not None else [None] * len(records)
    tilted = any(m is not None and not is_pure_yaw(m) for m in rotations)
    if tilted:
        full = [
            m if m is not None else np.eye(3) if r.is_dont_care else rot_axis("y", r.rotation_y)
            for r, m in zip(records, rotations)
        ]
        side.write_text(serialize_rotations(full), encoding="utf-8")
    elif side.exists():
        side.unlink()
    return tilted


def box_to_record(box, template):
    """Record carrying ``box``'s geometry and ``template``'s other fields.

    Returns ``(record, rotation_or_None)``; the rotation is kept only for
    headings that are not a pure yaw.
    """
    loc = center_to_kitti_location(box.center, box.dims[0])
    rot = None if box.is_yaw_only or is_pure_yaw(box.heading) else box.heading
    rec = replace(
        template,
        dims=tuple(float(v) for v in box.dims),
        location=tuple(float(v) for v in loc),
        rotation_y=float(box.yaw if box.is_yaw_only else yaw_from_rotation(box.heading)),
    )
    return rec, rot


@dataclass(frozen=True)
class CalibData:
    projection: np.ndarray
    intrinsics: CameraIntrinsics


def parse_calib(text, image_size=DEFAULT_IMAGE_SIZE):
    """Read ``P2`` from a KITTI calib file and derive camera intrinsics."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedCalib("calib file is not UTF-8") from None
    values = None
    for line in text.splitlines():
        key, sep, rest = line.partition(":")
        if sep and key.strip() == "P2":
            values = rest.split()
            break
    if values is None:
        raise MissingKey("P2")
    if len(values) != 12:
        raise MalformedCalib(f"P2 needs 12 values, found {len(values)}")
    try:
        p2 = np.array([float(v) for v in values]).reshape(3, 4)
    except ValueError:
        raise MalformedCalib("P2 has a non-numeric value") from None
    if not np.all(np.isfinite(p2)):
        raise MalformedCalib("P2 has a non-finite value")
    if not (p2[0, 0] > 0 and p2[1, 1] > 0 and p2[2, 2] > 0):
        raise MalformedCalib("P2 focal lengths must be positive")
    if np.max(np.abs(p2[2, :3] / p2[2, 2] - [0.0, 0.0, 1.0])) > 1e-9:
        raise MalformedCalib("P2 left block must have bottom row [0, 0, 1]")
    width, height = image_size
    try:
        K = CameraIntrinsics(p2[0, 0], p2[1, 1], p2[0, 2], p2[1, 2], width, height)
    except ValueError as exc:
        raise MalformedCalib(str(exc)) from None
    return CalibData(p2, K)


def serialize_calib(calib):
    p = " ".join(f"{v:.12e}" for v in calib.projection.ravel())
    return f"P2: {p}\n"


def read_calib(path, image_size=DEFAULT_IMAGE_SIZE):
    return parse_calib(Path(path).read_bytes(), image_size)


# rasters


@dataclass(frozen=True)
class DepthRaster:
    """Row-major depth in meters, top row first. Non-positive or NaN means invalid."""

    data: np.ndarray

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def valid(self):
        return np.isfinite(self.data) & (self.data > 0)


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit RGB image stored as an ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


def _netpbm_header(data, count):
    """Split ``count`` whitespace-separated header tokens; return them and the payload offset."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise TruncatedFile("header ends early")
        tokens.append(data[start:pos])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise TruncatedFile("header not terminated")
    return tokens, pos + 1


def _parse_size(tokens):
    try:
        width, height = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise UnsupportedFormat("image size is not an integer") from None
    if width <= 0 or height <= 0:
        raise UnsupportedFormat(f"bad image size {width}x{height}")
    return width, height


def _read_netpbm(data, magic, channels):
    data = bytes(data)
    if data[:2] != magic:
        raise UnsupportedFormat(f"expected {magic!r} header, got {data[:2]!r}")
    tokens, offset = _netpbm_header(data, 4)
    if tokens[0] != magic:
        raise UnsupportedFormat(f"bad magic {tokens[0][:8]!r}")
    width, height = _parse_size(tokens[1:3])
    try:
        maxval = int(tokens[3])
    except ValueError:
        raise UnsupportedFormat("maxval is not an integer") from None
    if maxval != 255:
        raise UnsupportedFormat(f"only maxval 255 is supported, got {maxval}")
    size = width * height * channels
    if len(data) - offset < size:
        raise TruncatedFile(f"payload has {len(data) - offset} bytes, need {size}")
    arr = np.frombuffer(data, dtype=np.uint8, count=size, offset=offset)
    return arr.reshape(height, width, channels).copy()


def read_ppm(data):
    return ImageBuffer(_read_netpbm(data, b"P6", 3))


def write_ppm(image):
    px = np.ascontiguousarray(image.pixels, dtype=np.uint8)
    return f"P6\n{px.shape[1]} {px.shape[0]}\n255\n".encode("ascii") + px.tobytes()


def read_pgm(data):
    return _read_netpbm(data, b"P5", 1)[:, :, 0]


def write_pgm(gray):
    g = np.ascontiguousarray(gray, dtype=np.uint8)
    return f"P5\n{g.shape[1]} {g.shape[0]}\n255\n".encode("ascii") + g.tobytes()


def read_pfm(data):
    """Grayscale PFM; rows are stored bottom-to-top on disk."""
    data = bytes(data)
    if data[:2] == b"PF":
        raise UnsupportedFormat("color PFM is not supported")
    if data[:2] != b"Pf":
        raise UnsupportedFormat(f"expected 'Pf' header, got {data[:2]!r}")
    tokens, offset = _netpbm_header(data, 4)
    if tokens[0] != b"Pf":
        raise UnsupportedFormat(f"bad magic {tokens[0][:8]!r}")
    width, height = _parse_size(tokens[1:3])
    try:
        scale = float(tokens[3])
    except ValueError:
        raise UnsupportedFormat("PFM scale is not a number") from None
    if scale == 0 or not math.isfinite(scale):
        raise UnsupportedFormat("PFM scale must be non-zero and finite")
    dtype = "<f4" if scale < 0 else ">f4"
    size = width * height * 4
    if len(data) - offset < size:
        raise TruncatedFile(f"payload has {len(data) - offset} bytes, need {size}")
    arr = np.frombuffer(data, dtype=dtype, count=width * height, offset=offset)
    return DepthRaster(np.flipud(arr.reshape(height, width)).astype(np.float32))


def write_pfm(raster):
    """Little-endian grayscale PFM (scale ``-1.0``)."""
    d = np.asarray(raster.data, dtype=np.float32)
    header = f"Pf\n{d.shape[1]} {d.shape[0]}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(np.flipud(d)).astype("<f4").tobytes()


# pose files

POSE_KEYS = ("roll_deg", "pitch_deg", "yaw_deg", "tx", "ty", "tz")


@dataclass(frozen=True)
class PoseSpec:
    """Relative camera pose as written on disk: degrees and meters.

    Rotation is applied as ``R_z(roll) R_y(yaw) R_x(pitch)``.
    """

    roll_deg: float = 0.0
    pitch_deg: float = 0.0
    yaw_deg: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    order = "zyx"

    @property
    def translation(self):
        return np.array([self.tx, self.ty, self.tz])

    @property
    def roll(self):
        return math.radians(self.roll_deg)

    @property
    def pitch(self):
        return math.radians(self.pitch_deg)

    @property
    def yaw(self):
        return math.radians(self.yaw_deg)


_POSE_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*[:=]\s*(\S+)\s*$")


def parse_pose_spec(text):
    """Parse ``key: value`` (or ``key = value``) lines; ``#`` starts a comment."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedPose("pose file is not UTF-8") from None
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        m = _POSE_LINE.match(line)
        if m is None:
            raise MalformedPose(f"cannot parse pose line {line.strip()!r}")
        key, raw = m.groups()
        if key not in POSE_KEYS:
            raise UnknownKey(key)
        try:
            value = float(raw)
        except ValueError:
            raise MalformedPose(f"{key} is not a number: {raw!r}") from None
        if not math.isfinite(value):
            raise MalformedPose(f"{key} must be finite")
        values[key] = value
    return PoseSpec(**values)


def serialize_pose_spec(spec):
    return "".join(f"{k}: {getattr(spec, k)!r}\n" for k in POSE_KEYS)


def pose_spec_to_rigid(spec):
    return RigidPose(compose_r3d(spec.roll, spec.yaw, spec.pitch), spec.translation)


def read_pose_spec(path):
    return parse_pose_spec(Path(path).read_bytes())

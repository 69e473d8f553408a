"""Typed errors raised across the package.

Every error derives from :class:`PosecompError` and from ``ValueError`` so
callers that only care about bad input can catch the builtin.
"""


class PosecompError(ValueError):
    """Base class for all package errors."""


# geometry
class InvalidAngle(PosecompError):
    pass


class BehindCamera(PosecompError):
    pass


class InvalidDepth(PosecompError):
    pass


class InvalidDims(PosecompError):
    pass


class InvalidRotation(PosecompError):
    pass


# parsers
class MalformedLabel(PosecompError):
    def __init__(self, message, line_number=None, found=None):
        self.line_number = line_number
        self.found = found
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{where}{message}")


class MissingKey(PosecompError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"missing key {key!r}")


class MalformedCalib(PosecompError):
    pass


class UnsupportedFormat(PosecompError):
    pass


class TruncatedFile(PosecompError):
    pass


class UnknownKey(PosecompError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"unknown key {key!r}")


class MalformedPose(PosecompError):
    pass


# warp
class ShapeMismatch(PosecompError):
    pass


class CropTooLarge(PosecompError):
    pass


class AllHoles(PosecompError):
    pass


# eval
class InvalidRect(PosecompError):
    pass


class DegenerateBox(PosecompError):
    pass


class MissingFrame(PosecompError):
    def __init__(self, frame_id, where=None):
        self.frame_id = frame_id
        msg = f"frame {frame_id!r} missing"
        if where:
            msg += f" from {where}"
        super().__init__(msg)

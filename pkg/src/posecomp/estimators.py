"""scikit-learn style wrappers so the box and image transforms compose in pipelines."""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_angle, check_box_array
from .geometry import Box3D, RigidPose, corners_compensated
from .warp import warp_image


class HeadingCompensator(TransformerMixin, BaseEstimator):
    """Turn yaw-only box parameters into roll/pitch compensated corners.

    Parameters
    ----------
    roll, pitch : float
        Calibrated relative camera roll and pitch.
    yaw_offset : float
        Added to every predicted yaw before corner construction.
    degrees : bool
        Interpret the three angles as degrees.

    ``X`` rows are ``[x, y, z, h, w, l, yaw]`` with ``(x, y, z)`` the
    geometric center in the camera frame. ``transform`` returns an
    ``(n, 8, 3)`` corner array.
    """

    def __init__(self, roll=0.0, pitch=0.0, yaw_offset=0.0, degrees=False):
        self.roll = roll
        self.pitch = pitch
        self.yaw_offset = yaw_offset
        self.degrees = degrees

    def _angles(self):
        conv = math.radians if self.degrees else float
        return tuple(
            conv(check_angle(getattr(self, n), n)) for n in ("roll", "pitch", "yaw_offset")
        )

    def fit(self, X, y=None):
        check_box_array(X)
        self.roll_, self.pitch_, self.yaw_offset_ = self._angles()
        self.n_features_in_ = 7
        return self

    def transform(self, X):
        check_is_fitted(self, "roll_")
        X = check_box_array(X)
        out = np.empty((len(X), 8, 3))
        for i, row in enumerate(X):
            box = Box3D(row[:3], row[3:6], row[6] + self.yaw_offset_)
            out[i] = corners_compensated(box, self.roll_, self.pitch_)
        return out


class ViewSynthesizer(TransformerMixin, BaseEstimator):
    """Warp ``(ImageBuffer, DepthRaster)`` pairs into a shifted camera.

    After ``transform``, ``reports_`` and ``masks_`` hold the per-image warp
    report and hole mask.
    """

    def __init__(self, K=None, pose=None, fill=True, crop=None):
        self.K = K
        self.pose = pose
        self.fill = fill
        self.crop = crop

    def fit(self, X=None, y=None):
        if self.K is None:
            raise ValueError("ViewSynthesizer needs camera intrinsics K")
        self.pose_ = RigidPose() if self.pose is None else self.pose
        return self

    def transform(self, X):
        check_is_fitted(self, "pose_")
        images, self.masks_, self.reports_ = [], [], []
        for img, depth in X:
            out, mask, report = warp_image(img, depth, self.K, self.pose_, self.fill, self.crop)
            images.append(out)
            self.masks_.append(mask)
            self.reports_.append(report)
        return images

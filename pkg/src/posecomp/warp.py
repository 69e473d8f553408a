"""Depth-based novel view synthesis by forward splatting.

Every reference pixel with a valid depth is lifted to 3D, moved into the target
camera and splatted onto the nearest target pixel. Collisions keep the
contributor closest to the target camera; equal depths keep the earlier pixel
in row-major scan order, so the result matches a sequential scan exactly.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import AllHoles, CropTooLarge, ShapeMismatch
from .kitti_io import ImageBuffer

# KITTI frames are 1280x375; training crops are 804x244.
CROP_SIZE = (804, 244)


@dataclass(frozen=True)
class WarpReport:
    valid_fraction: float
    holes_filled: int
    depth_rejected: int

    def to_line(self):
        return f"{self.valid_fraction:.6f} {self.holes_filled:d} {self.depth_rejected:d}"


def synthesize_view(img, depth, K, pose):
    """Warp ``img`` into the camera reached through ``pose``.

    Returns ``(image, hole_mask, report)``; ``hole_mask`` is True where no
    source pixel landed. Hole pixels are black until :func:`fill_holes`.
    """
    pixels = np.asarray(img.pixels)
    d = np.asarray(depth.data, dtype=np.float64)
    h, w = pixels.shape[:2]
    if d.shape != (h, w):
        raise ShapeMismatch(f"image is {w}x{h} but depth is {d.shape[1]}x{d.shape[0]}")

    valid = np.isfinite(d) & (d > 0)
    rejected = int(h * w - np.count_nonzero(valid))
    src = np.flatnonzero(valid)
    v, u = np.divmod(src, w)
    z = d.ravel()[src]
    pts = np.stack([(u - K.cx) / K.fx * z, (v - K.cy) / K.fy * z, z], axis=1)
    pts = pts @ pose.rotation.T + pose.translation

    front = pts[:, 2] > 0
    src, pts = src[front], pts[front]
    tu = np.floor(K.fx * pts[:, 0] / pts[:, 2] + K.cx + 0.5)
    tv = np.floor(K.fy * pts[:, 1] / pts[:, 2] + K.cy + 0.5)
    inside = (tu >= 0) & (tu < w) & (tv >= 0) & (tv < h)
    src, pts = src[inside], pts[inside]
    target = tv[inside].astype(np.int64) * w + tu[inside].astype(np.int64)

    order = np.lexsort((src, pts[:, 2]))
    winners_t, first = np.unique(target[order], return_index=True)
    winners_s = src[order][first]

    out = np.zeros_like(pixels)
    out.reshape(h * w, -1)[winners_t] = pixels.reshape(h * w, -1)[winners_s]
    mask = np.ones(h * w, bool)
    mask[winners_t] = False
    mask = mask.reshape(h, w)
    report = WarpReport(1.0 - mask.sum() / float(h * w), 0, rejected)
    return ImageBuffer(out), mask, report


def crop_offsets(width, height, target_w, target_h):
    """Left/top offsets of a centered window; odd margins round down."""
    if target_w > width or target_h > height or target_w <= 0 or target_h <= 0:
        raise CropTooLarge(f"cannot crop {width}x{height} to {target_w}x{target_h}")
    return (width - target_w) // 2, (height - target_h) // 2


def crop_center(img, target_w, target_h):
    """Centered crop of an ImageBuffer or a 2D/3D array."""
    arr = img.pixels if isinstance(img, ImageBuffer) else np.asarray(img)
    left, top = crop_offsets(arr.shape[1], arr.shape[0], target_w, target_h)
    window = arr[top:top + target_h, left:left + target_w].copy()
    return ImageBuffer(window) if isinstance(img, ImageBuffer) else window


def crop_intrinsics(K, target_w, target_h):
    left, top = crop_offsets(K.width, K.height, target_w, target_h)
    return K.cropped(left, top, target_w, target_h)


# Neighbor priority for hole filling: up, left, right, down.
_NEIGHBORS = ((-1, 0), (0, -1), (0, 1), (1, 0))


def fill_holes(img, mask):
    """Fill masked pixels by iterative 4-neighbor dilation from unmasked ones.

    Each round, every still-empty pixel next to a filled one copies the first
    filled neighbor in up, left, right, down order.
    """
    pixels = np.asarray(img.pixels)
    mask = np.asarray(mask, bool)
    if mask.shape != pixels.shape[:2]:
        raise ShapeMismatch("mask and image sizes differ")
    out = pixels.copy()
    if not mask.any():
        return ImageBuffer(out)
    if mask.all():
        raise AllHoles("every pixel is masked")
    filled = ~mask
    h, w = mask.shape
    pad = ((1, 1), (1, 1)) + ((0, 0),) * (out.ndim - 2)
    while not filled.all():
        fp = np.pad(filled, 1, constant_values=False)
        vp = np.pad(out, pad)
        newly = np.zeros_like(filled)
        for dy, dx in _NEIGHBORS:
            src_filled = fp[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
            take = ~filled & ~newly & src_filled
            out[take] = vp[1 + dy:1 + dy + h, 1 + dx:1 + dx + w][take]
            newly |= take
        filled |= newly
    return ImageBuffer(out)


def warp_image(img, depth, K, pose, fill=True, crop=None):
    """Full synthesis: warp, optionally fill holes, optionally center-crop.

    ``crop`` is a ``(width, height)`` pair. Returns ``(image, mask, report)``.
    """
    out, mask, report = synthesize_view(img, depth, K, pose)
    holes = int(mask.sum())
    if fill and holes:
        out = fill_holes(out, mask)
        report = WarpReport(report.valid_fraction, holes, report.depth_rejected)
    if crop is not None:
        out = crop_center(out, *crop)
        mask = crop_center(mask, *crop)
    return out, mask, report


def checkerboard(width, height, square=8, colors=((230, 60, 40), (30, 90, 200))):
    """Deterministic two-color checkerboard test image."""
    yy, xx = np.mgrid[0:height, 0:width]
    parity = ((yy // square) + (xx // square)) % 2
    pixels = np.where(parity[..., None] == 0, np.array(colors[0]), np.array(colors[1]))
    return ImageBuffer(pixels.astype(np.uint8))

"""Overlap measures for image rectangles, ground-plane footprints and 3D boxes.

Corner arrays follow :data:`posecomp.geometry.CORNER_SIGNS`: corners ``i`` and
``i + 4`` share an edge along the box's height axis. Footprints live in the
camera ``(x, z)`` plane with counter-clockwise vertex order.
"""

import math

import numpy as np

from .._validation import check_corners
from ..exceptions import DegenerateBox, InvalidRect

# Corner indices of the six faces of a box.
BOX_FACES = (
    (0, 1, 2, 3),
    (4, 5, 6, 7),
    (0, 1, 5, 4),
    (1, 2, 6, 5),
    (2, 3, 7, 6),
    (3, 0, 4, 7),
)

_EPS = 1e-12


def iou_2d(a, b):
    """IoU of two ``[left, top, right, bottom]`` rectangles."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for r in (a, b):
        if r.shape != (4,) or not np.all(np.isfinite(r)) or r[2] <= r[0] or r[3] <= r[1]:
            raise InvalidRect(f"invalid rectangle {r.tolist()}")
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return float(inter / union)


def polygon_area(poly):
    """Signed shoelace area; positive for counter-clockwise vertices."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return float(0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def convex_hull(points):
    """Counter-clockwise convex hull (Andrew's monotone chain), collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).tolist())))
    if len(pts) <= 2:
        return np.array(pts, dtype=float).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=float)


def polygon_clip(subject, clip):
    """Intersection of two convex CCW polygons (Sutherland-Hodgman).

    Returns an ``(k, 2)`` array; ``k == 0`` when the polygons do not overlap.
    """
    output = [tuple(p) for p in np.asarray(subject, dtype=float)]
    clip = np.asarray(clip, dtype=float)
    n = len(clip)
    if n < 3:
        return np.empty((0, 2))
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inputs, output = output, []
        prev = inputs[-1]
        s_prev = side(prev)
        for cur in inputs:
            s_cur = side(cur)
            if s_cur >= 0:
                if s_prev < 0:
                    output.append(_lerp(prev, cur, s_prev, s_cur))
                output.append(cur)
            elif s_prev >= 0:
                output.append(_lerp(prev, cur, s_prev, s_cur))
            prev, s_prev = cur, s_cur
    if len(output) < 3:
        return np.empty((0, 2))
    return np.array(output, dtype=float)


def _lerp(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def bev_footprint(corners):
    """CCW convex hull of the corners projected onto the ground plane."""
    c = check_corners(corners)
    return convex_hull(c[:, [0, 2]])


def _canonical_pair(a, b):
    # Fixed argument order makes every measure exactly symmetric.
    if a.tobytes() > b.tobytes():
        return b, a
    return a, b


def iou_bev(a, b):
    """Ground-plane IoU of two boxes given as ``(8, 3)`` corner arrays."""
    a, b = _canonical_pair(check_corners(a), check_corners(b))
    if np.array_equal(a, b):
        _footprint_area(a)
        return 1.0
    pa, pb = bev_footprint(a), bev_footprint(b)
    area_a, area_b = _footprint_area(a, pa), _footprint_area(b, pb)
    inter = polygon_area(polygon_clip(pa, pb))
    if inter <= 0:
        return 0.0
    return float(min(1.0, inter / (area_a + area_b - inter)))


def _footprint_area(corners, hull=None):
    hull = bev_footprint(corners) if hull is None else hull
    area = polygon_area(hull)
    if not area > _EPS:
        raise DegenerateBox("box footprint has zero area")
    return area


def box_volume(corners):
    c = corners
    vol = (
        np.linalg.norm(c[1] - c[0]) * np.linalg.norm(c[3] - c[0]) * np.linalg.norm(c[4] - c[0])
    )
    if not vol > _EPS:
        raise DegenerateBox("box has zero volume")
    return float(vol)


def is_upright(corners, atol=1e-9):
    """True when every height edge of the box is parallel to the camera y axis."""
    c = np.asarray(corners, dtype=float)
    d = c[:4] - c[4:]
    return bool(np.all(np.abs(d[:, [0, 2]]) <= atol * max(1.0, np.max(np.abs(d)))))


def iou_3d(a, b, method="auto"):
    """Volumetric IoU of two boxes given as ``(8, 3)`` corner arrays.

    ``method``:
      * ``"auto"``: footprint-times-height for upright pairs, exact
        polytope clipping otherwise.
      * ``"exact"``: always clip the polytopes.
      * ``"envelope"``: footprint hull intersection times the overlap of the
        corner sets' y ranges, with volumes taken as hull area times y range.
        Cheap but overestimates the extent of tilted boxes.
    """
    a, b = _canonical_pair(check_corners(a), check_corners(b))
    if method not in ("auto", "exact", "envelope"):
        raise ValueError(f"unknown method {method!r}")
    if np.array_equal(a, b):
        box_volume(a)
        _footprint_area(a)
        return 1.0
    if method == "exact" or (method == "auto" and not (is_upright(a) and is_upright(b))):
        va, vb = box_volume(a), box_volume(b)
        if not _spheres_overlap(a, b):
            return 0.0
        inter = convex_intersection_volume(a, b)
    else:
        pa, pb = bev_footprint(a), bev_footprint(b)
        area_a, area_b = _footprint_area(a, pa), _footprint_area(b, pb)
        ya = a[:, 1].min(), a[:, 1].max()
        yb = b[:, 1].min(), b[:, 1].max()
        if method == "envelope":
            va, vb = area_a * (ya[1] - ya[0]), area_b * (yb[1] - yb[0])
        else:
            va, vb = box_volume(a), box_volume(b)
        overlap_y = min(ya[1], yb[1]) - max(ya[0], yb[0])
        if overlap_y <= 0:
            return 0.0
        inter = polygon_area(polygon_clip(pa, pb)) * overlap_y
    if inter <= 0:
        return 0.0
    return float(min(1.0, inter / (va + vb - inter)))


def _spheres_overlap(a, b):
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    ra = np.max(np.linalg.norm(a - ca, axis=1))
    rb = np.max(np.linalg.norm(b - cb, axis=1))
    return np.linalg.norm(ca - cb) < ra + rb


# Exact clipping runs on plain tuples: numpy overhead dominates for 8-point solids.


def _sub(p, q):
    return (p[0] - q[0], p[1] - q[1], p[2] - q[2])


def _dot(p, q):
    return p[0] * q[0] + p[1] * q[1] + p[2] * q[2]


def _cross(p, q):
    return (p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0])


def _box_halfspaces(corners):
    """Outward unit normals ``n`` and offsets ``d`` with the box = {x : n.x <= d}."""
    c = [tuple(p) for p in np.asarray(corners, dtype=float).tolist()]
    center = tuple(sum(p[k] for p in c) / 8.0 for k in range(3))
    planes = []
    for f in BOX_FACES:
        p0, p1, p3 = c[f[0]], c[f[1]], c[f[3]]
        n = _cross(_sub(p1, p0), _sub(p3, p0))
        norm = _dot(n, n) ** 0.5
        n = (n[0] / norm, n[1] / norm, n[2] / norm)
        d = _dot(n, p0)
        if _dot(n, center) > d:
            n, d = (-n[0], -n[1], -n[2]), -d
        planes.append((n, d))
    return planes


def _clip_polyhedron(faces, normal, offset):
    """Keep the part of a convex polyhedron with ``normal . x <= offset``."""
    kept = []
    cut = []
    for face in faces:
        dist = [_dot(p, normal) - offset for p in face]
        if max(dist) <= _EPS:
            kept.append(face)
            continue
        if min(dist) >= -_EPS:
            cut.extend(p for p, dp in zip(face, dist) if abs(dp) <= _EPS)
            continue
        out = []
        k = len(face)
        for i in range(k):
            p, q = face[i], face[(i + 1) % k]
            dp, dq = dist[i], dist[(i + 1) % k]
            if dp <= _EPS:
                out.append(p)
                if dp >= -_EPS:
                    cut.append(p)
            if (dp < -_EPS and dq > _EPS) or (dp > _EPS and dq < -_EPS):
                t = dp / (dp - dq)
                x = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), p[2] + t * (q[2] - p[2]))
                out.append(x)
                cut.append(x)
        if len(out) >= 3:
            kept.append(out)
    cap = _order_planar(cut, normal)
    if cap is not None:
        kept.append(cap)
    return kept


def _order_planar(points, normal):
    """Distinct coplanar points sorted by angle about their centroid."""
    seen = {}
    for p in points:
        seen.setdefault((round(p[0], 12), round(p[1], 12), round(p[2], 12)), p)
    pts = list(seen.values())
    if len(pts) < 3:
        return None
    n = len(pts)
    centroid = tuple(sum(p[k] for p in pts) / n for k in range(3))
    u = max((_sub(p, centroid) for p in pts), key=lambda d: _dot(d, d))
    if _dot(u, u) <= _EPS * _EPS:
        return None
    v = _cross(normal, u)
    return sorted(
        pts, key=lambda p: math.atan2(_dot(_sub(p, centroid), v), _dot(_sub(p, centroid), u))
    )


def _polyhedron_volume(faces):
    if len(faces) < 4:
        return 0.0
    pts = [p for f in faces for p in f]
    ref = tuple(sum(p[k] for p in pts) / len(pts) for k in range(3))
    vol = 0.0
    for f in faces:
        a = _sub(f[0], ref)
        for i in range(1, len(f) - 1):
            vol += abs(_dot(a, _cross(_sub(f[i], ref), _sub(f[i + 1], ref))))
    return vol / 6.0


def convex_intersection_volume(a, b):
    """Exact intersection volume of two boxes by clipping ``a`` with ``b``'s faces."""
    ca = [tuple(p) for p in np.asarray(a, dtype=float).tolist()]
    faces = [[ca[i] for i in f] for f in BOX_FACES]
    for normal, offset in _box_halfspaces(b):
        faces = _clip_polyhedron(faces, normal, offset)
        if len(faces) < 4:
            return 0.0
    return _polyhedron_volume(faces)


def iou_matrix(dets, gts, fn):
    """Pairwise ``fn(det, gt)`` as an ``(n_det, n_gt)`` array.

    For corner inputs, pairs whose bounding spheres are disjoint are skipped
    (their overlap is exactly zero).
    """
    out = np.zeros((len(dets), len(gts)))
    if not len(dets) or not len(gts):
        return out
    near = np.ones(out.shape, bool)
    if np.ndim(dets[0]) == 2:
        ca = np.array([np.mean(d, axis=0) for d in dets])
        cb = np.array([np.mean(g, axis=0) for g in gts])
        ra = np.array([np.max(np.linalg.norm(d - c, axis=1)) for d, c in zip(dets, ca)])
        rb = np.array([np.max(np.linalg.norm(g - c, axis=1)) for g, c in zip(gts, cb)])
        dist = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=2)
        near = dist < ra[:, None] + rb[None, :]
    for i, j in zip(*np.nonzero(near)):
        out[i, j] = fn(dets[i], gts[j])
    return out

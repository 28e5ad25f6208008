"""
Homography estimation from thermal/optical point correspondences and the
per-imager optical rescale factors derived from it.

The calibration path: mark >= 4 corresponding points across an
optical/thermal pair, estimate the 3x3 projective map, read off the axis
scale factors and rescale every optical image from that imager uniformly.
Shipped imager profiles carry the measured constants (sonel 0.18,
flir 0.365) as defaults so the estimation step is optional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import RgbImage, resize_bilinear


class DegenerateCorrespondencesError(ValueError):
    """Raised when the correspondence set yields a singular system."""


@dataclass(frozen=True)
class PointCorrespondence:
    """One optical (src) -> thermal (dst) point pair, in pixels."""

    src_x: float
    src_y: float
    dst_x: float
    dst_y: float

    def __post_init__(self):
        vals = (self.src_x, self.src_y, self.dst_x, self.dst_y)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("correspondence coordinates must be finite")


@dataclass(frozen=True)
class HomographyMatrix:
    """3x3 projective map, normalized so h[2][2] = 1."""

    h: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.h, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(m[2, 2]) < 1e-12:
            raise DegenerateCorrespondencesError("h33 vanishes; cannot normalize")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) < 1e-12:
            raise DegenerateCorrespondencesError("homography is singular")
        m.flags.writeable = False
        object.__setattr__(self, "h", m)

    def apply(self, x: float, y: float) -> tuple[float, float]:
        """Map a source point through the homography."""
        v = self.h @ np.array([x, y, 1.0])
        return v[0] / v[2], v[1] / v[2]


@dataclass(frozen=True)
class ImagerProfile:
    """Per-imager rescale constants plus the thermal sensor resolution."""

    name: str
    scale_x: float
    scale_y: float
    thermal_width: int
    thermal_height: int


#: Shipped calibration constants for the two supported imagers.
DEFAULT_PROFILES = {
    "sonel": ImagerProfile("sonel", 0.18, 0.18, 384, 288),
    "flir": ImagerProfile("flir", 0.365, 0.365, 320, 240),
}


def _solve_exact_4(pairs):
    # 8x8 linear system with h33 fixed to 1
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i, p in enumerate(pairs):
        sx, sy, dx, dy = p.src_x, p.src_y, p.dst_x, p.dst_y
        a[2 * i] = [sx, sy, 1, 0, 0, 0, -dx * sx, -dx * sy]
        rhs[2 * i] = dx
        a[2 * i + 1] = [0, 0, 0, sx, sy, 1, -dy * sx, -dy * sy]
        rhs[2 * i + 1] = dy
    try:
        sol = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCorrespondencesError(str(exc)) from exc
    return np.array(
        [[sol[0], sol[1], sol[2]], [sol[3], sol[4], sol[5]], [sol[6], sol[7], 1.0]]
    )


def _normalize_points(xs, ys):
    cx, cy = xs.mean(), ys.mean()
    dist = np.sqrt((xs - cx) ** 2 + (ys - cy) ** 2).mean()
    if dist < 1e-12:
        raise DegenerateCorrespondencesError("all points coincide")
    s = np.sqrt(2.0) / dist
    t = np.array([[s, 0, -s * cx], [0, s, -s * cy], [0, 0, 1]])
    return s * (xs - cx), s * (ys - cy), t


def _solve_dlt(pairs):
    # normalized direct linear transform for n > 4 (least squares via SVD)
    sx = np.array([p.src_x for p in pairs])
    sy = np.array([p.src_y for p in pairs])
    dx = np.array([p.dst_x for p in pairs])
    dy = np.array([p.dst_y for p in pairs])
    nsx, nsy, t_src = _normalize_points(sx, sy)
    ndx, ndy, t_dst = _normalize_points(dx, dy)
    rows = []
    for i in range(len(pairs)):
        x, y, u, v = nsx[i], nsy[i], ndx[i], ndy[i]
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    _, svals, vt = np.linalg.svd(np.array(rows))
    if svals[-2] < 1e-10 * svals[0]:
        raise DegenerateCorrespondencesError("correspondences are rank deficient")
    h_norm = vt[-1].reshape(3, 3)
    return np.linalg.inv(t_dst) @ h_norm @ t_src


def estimate_homography(pairs) -> HomographyMatrix:
    """Estimate the 3x3 map from >= 4 correspondences.

    Exactly 4 pairs solve the 8x8 system with h33 = 1; more pairs use the
    normalized DLT least-squares fit. Collinear or duplicated points raise
    DegenerateCorrespondencesError.
    """
    pairs = list(pairs)
    if len(pairs) < 4:
        raise ValueError(f"need at least 4 correspondences, got {len(pairs)}")
    raw = _solve_exact_4(pairs) if len(pairs) == 4 else _solve_dlt(pairs)
    hm = HomographyMatrix(raw)
    if len(pairs) == 4:
        # an exact solve must reproject its own constraints
        scale = max(abs(v) for p in pairs for v in (p.dst_x, p.dst_y)) + 1.0
        for p in pairs:
            px, py = hm.apply(p.src_x, p.src_y)
            if max(abs(px - p.dst_x), abs(py - p.dst_y)) > 1e-6 * scale:
                raise DegenerateCorrespondencesError(
                    "near-degenerate configuration (reprojection check failed)"
                )
    return hm


def scale_factors(h: HomographyMatrix) -> tuple[float, float]:
    """Axis scale magnitudes: norms of the upper 2x1 parts of columns 0 and 1."""
    m = h.h
    sx = float(np.hypot(m[0, 0], m[1, 0]))
    sy = float(np.hypot(m[0, 1], m[1, 1]))
    return sx, sy


def rescale_optical(img: RgbImage, sx: float, sy: float) -> RgbImage:
    """Bilinearly resize to (round(width*sx), round(height*sy)), half-up rounding."""
    if sx <= 0 or sy <= 0:
        raise ValueError("scale factors must be positive")
    new_w = int(np.floor(img.width * sx + 0.5))
    new_h = int(np.floor(img.height * sy + 0.5))
    if new_w < 1 or new_h < 1:
        raise ValueError(f"rescale collapses image to {new_w}x{new_h}")
    return resize_bilinear(img, new_w, new_h)

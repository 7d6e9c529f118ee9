"""Sensing objects as point clouds, LoS blockage and fading regeneration.

An object blocks an element when the element's in-plane position falls inside
the object's shadow polygon: the convex hull of the points where rays from the
MT through every cloud point meet the array plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fading import complex_normal, link_coefficient
from .geometry import ArrayGeometry, MtGeometry, as_point, intersect_rays_plane
from .realization import MtChannel
from .rng import KeyedStreams
from .scenario import ScenarioProfile, pathloss_db
from .windows import WindowPartition

BOUNDARY_TOL = 1e-9  # metres


@dataclass(frozen=True)
class SensingObject:
    points: np.ndarray
    label: str = ""
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ValueError("sensing object needs a non-empty (n, 3) point cloud")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sensing object points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


def make_sphere_cloud(center, radius: float, n_points: int, rng: np.random.Generator,
                      label: str = "sphere") -> SensingObject:
    """``n_points`` uniform on the sphere surface."""
    center = as_point(center, "center")
    if not radius > 0:
        raise ValueError("sphere radius must be positive")
    if n_points < 4:
        raise ValueError("a sphere cloud needs at least 4 points")
    v = rng.standard_normal((n_points, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return SensingObject(center + radius * v, label,
                         {"type": "sphere", "center": center.tolist(), "radius": float(radius),
                          "n_points": int(n_points)})


def make_box_cloud(center, size, n_points: int, rng: np.random.Generator,
                   label: str = "box") -> SensingObject:
    """``n_points`` uniform on the surface of an axis-aligned box with edge lengths ``size``."""
    center = as_point(center, "center")
    size = as_point(size, "size")
    if np.any(size <= 0):
        raise ValueError("box extents must be positive")
    if n_points < 4:
        raise ValueError("a box cloud needs at least 4 points")
    a, b, c = size
    areas = np.array([b * c, b * c, a * c, a * c, a * b, a * b])
    face = rng.choice(6, size=n_points, p=areas / areas.sum())
    pts = (rng.random((n_points, 3)) - 0.5) * size
    axis = face // 2
    sign = np.where(face % 2 == 0, -0.5, 0.5)
    pts[np.arange(n_points), axis] = sign * size[axis]
    return SensingObject(center + pts, label,
                         {"type": "box", "center": center.tolist(), "size": size.tolist(),
                          "n_points": int(n_points)})


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull vertices (monotone chain); collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2 and cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    seq = pts.tolist()
    lower = half(seq)
    upper = half(seq[::-1])
    return np.array(lower[:-1] + upper[:-1], dtype=float)


def shadow_polygon(obj: SensingObject, mt: MtGeometry, array: ArrayGeometry) -> np.ndarray:
    """Shadow of ``obj`` on the array plane as seen from the MT reference point.

    Only cloud points between the MT and the array plane cast a shadow. Returns
    a ``(k, 2)`` CCW polygon in ``(u, v)``, or an empty ``(0, 2)`` array when
    fewer than three non-collinear hits remain.
    """
    empty = np.empty((0, 2))
    src = mt.reference_point
    if array.signed_distance(src) <= 0:
        return empty
    uv, ok, t = intersect_rays_plane(src, obj.points, array)
    hits = uv[ok & (t >= 1.0)]
    if len(hits) < 3:
        return empty
    hull = convex_hull(hits)
    if len(hull) < 3:
        return empty
    return hull


def points_in_polygon(points, polygon, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Inside-or-on-boundary test of ``(n, 2)`` points against a convex CCW polygon."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    polygon = np.asarray(polygon, dtype=float)
    if len(polygon) < 3:
        return np.zeros(len(points), dtype=bool)
    inside = np.ones(len(points), dtype=bool)
    for a, b in zip(polygon, np.roll(polygon, -1, axis=0)):
        edge = b - a
        rel = points - a
        # signed distance to the edge line, positive on the interior side
        dist = (edge[0] * rel[:, 1] - edge[1] * rel[:, 0]) / np.hypot(*edge)
        inside &= dist >= -tol
    return inside


def point_in_polygon(p, polygon, tol: float = BOUNDARY_TOL) -> bool:
    return bool(points_in_polygon(np.asarray(p, dtype=float)[None, :], polygon, tol)[0])


def blockage_mask(objects, mt: MtGeometry, array: ArrayGeometry, pre_los) -> np.ndarray:
    """Elements whose LoS link to the MT is blocked by any of ``objects``."""
    pre_los = np.asarray(pre_los, dtype=bool)
    mask = np.zeros(array.n_elements, dtype=bool)
    if not pre_los.any():
        return mask
    uv = array.element_uv()
    for obj in objects:
        polygon = shadow_polygon(obj, mt, array)
        if len(polygon):
            mask |= points_in_polygon(uv, polygon)
    return mask & pre_los


def oracle_ray_sphere(element_pos, mt_ref, center, radius: float, tol: float = BOUNDARY_TOL):
    """Exact test whether the segment element-MT touches a sphere (tangency counts).

    Solves ``|p0 + t d - c|^2 = r^2`` for ``t`` and checks the root interval
    against ``[0, 1]``. Vectorised over ``element_pos`` rows.
    """
    if not radius > 0:
        raise ValueError("sphere radius must be positive")
    p0 = np.atleast_2d(np.asarray(element_pos, dtype=float))
    d = np.asarray(mt_ref, dtype=float) - p0
    f = p0 - np.asarray(center, dtype=float)
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", d, f)
    c = np.einsum("ij,ij->i", f, f) - (radius + tol) ** 2
    disc = b * b - 4.0 * a * c
    hit = disc >= 0
    root = np.sqrt(np.where(hit, disc, 0.0))
    t1 = (-b - root) / (2.0 * a)
    t2 = (-b + root) / (2.0 * a)
    hit &= (t1 <= 1.0) & (t2 >= 0.0)
    return hit if np.ndim(element_pos) > 1 else bool(hit[0])


def regenerate_blocked(channel: MtChannel, mask, partition: WindowPartition,
                       profile: ScenarioProfile, streams: KeyedStreams) -> MtChannel:
    """Turn blocked LoS links into NLoS with fresh shadowing and Rayleigh fading.

    Each blocked part of a window becomes its own NLoS region: one new shadow
    value and new per-link fading, drawn from streams keyed by the window id.
    Links outside ``mask`` are returned untouched.
    """
    mask = np.asarray(mask, dtype=bool)
    blocked = mask & channel.los
    out = channel.copy()
    out.mask = blocked
    if not blocked.any():
        return out
    window_id = partition.element_window()
    for w in np.unique(window_id[blocked]):
        idx = np.flatnonzero(blocked & (window_id == w))
        sf = profile.sf_sigma_nlos * streams.generator("regen_shadow", int(w)).standard_normal()
        g = complex_normal(streams.generator("regen_fading", int(w)), (len(idx), channel.n_antennas))
        pl = pathloss_db(profile, False, channel.d3[idx], channel.d2[idx],
                         channel.h_bs[idx, None], channel.h_ut[None, :])
        out.sf_db[idx] = sf
        out.g[idx] = g
        out.pl_db[idx] = pl
        out.h[idx] = link_coefficient(pl, sf, g)
    out.los[blocked] = False
    return out

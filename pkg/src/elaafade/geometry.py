"""Array, terminal and link geometry.

Global frame: ``z`` is the vertical axis. The array lies in a plane spanned by
a horizontal in-plane axis ``h_axis`` (column direction) and a vertical
in-plane axis ``v_axis`` (row direction); its front side is the half-space
along ``normal = h_axis x v_axis``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

AXIS_TOL = 1e-12
MIN_LINK_DISTANCE = 1.0  # metres, floor applied before 3GPP formulas


class GeometryError(ValueError):
    """Invalid array or terminal layout."""


def as_point(p, name: str = "point") -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,):
        raise GeometryError(f"{name} must have 3 coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} has non-finite coordinates")
    return arr


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform rectangular array; a ULA is the ``n_rows == 1`` case."""

    n_rows: int
    n_cols: int
    spacing: float
    origin: np.ndarray
    h_axis: np.ndarray
    v_axis: np.ndarray
    normal: np.ndarray = field(init=False, repr=False)
    positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n_rows) < 1 or int(self.n_cols) < 1:
            raise GeometryError("array needs at least one row and one column")
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise GeometryError(f"element spacing must be positive, got {self.spacing}")
        h = as_point(self.h_axis, "h_axis")
        v = as_point(self.v_axis, "v_axis")
        if abs(h @ h - 1) > AXIS_TOL or abs(v @ v - 1) > AXIS_TOL or abs(h @ v) > AXIS_TOL:
            raise GeometryError("array axes must be orthonormal")
        origin = as_point(self.origin, "origin")
        for name, value in (("origin", origin), ("h_axis", h), ("v_axis", v)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "n_rows", int(self.n_rows))
        object.__setattr__(self, "n_cols", int(self.n_cols))
        object.__setattr__(self, "spacing", float(self.spacing))
        normal = np.cross(h, v)
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)
        uv = self.element_uv()
        pos = origin + uv[:, :1] * h + uv[:, 1:] * v
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_elements(self) -> int:
        return self.n_rows * self.n_cols

    def flat_index(self, row, col):
        return np.asarray(row) * self.n_cols + np.asarray(col)

    def row_col(self, flat):
        return np.divmod(np.asarray(flat), self.n_cols)

    def element_uv(self) -> np.ndarray:
        """In-plane ``(u, v)`` coordinates of every element, flat order."""
        rows, cols = np.divmod(np.arange(self.n_elements), self.n_cols)
        return np.column_stack([cols * self.spacing, rows * self.spacing])

    def element_position(self, row: int, col: int) -> np.ndarray:
        return self.origin + col * self.spacing * self.h_axis + row * self.spacing * self.v_axis

    def uv_to_point(self, uv) -> np.ndarray:
        uv = np.asarray(uv, dtype=float)
        return self.origin + uv[..., :1] * self.h_axis + uv[..., 1:2] * self.v_axis

    def signed_distance(self, points) -> np.ndarray:
        """Distance of ``points`` from the array plane, positive on the front side."""
        return (np.asarray(points, dtype=float) - self.origin) @ self.normal


def build_ura(n_rows, n_cols, spacing, origin=(0.0, 0.0, 0.0),
              axes=((1.0, 0.0, 0.0), (0.0, 0.0, 1.0))) -> ArrayGeometry:
    """Build a URA whose element ``(r, c)`` sits at ``origin + c*s*h + r*s*v``.

    The default axes put the array upright in the x-z plane facing ``-y``.
    """
    h_axis, v_axis = axes
    return ArrayGeometry(n_rows, n_cols, spacing, origin, h_axis, v_axis)


@dataclass(frozen=True)
class MtGeometry:
    antenna_positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.antenna_positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise GeometryError("MT needs at least one antenna with 3 coordinates")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("MT antenna coordinates must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "antenna_positions", pos)

    @property
    def n_antennas(self) -> int:
        return self.antenna_positions.shape[0]

    @property
    def reference_point(self) -> np.ndarray:
        return self.antenna_positions.mean(axis=0)

    @property
    def aperture(self) -> float:
        diff = self.antenna_positions[:, None, :] - self.antenna_positions[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    def check_front_of(self, array: ArrayGeometry) -> None:
        if np.any(array.signed_distance(self.antenna_positions) <= 0):
            raise GeometryError("MT antennas must lie on the front side of the array plane")


@dataclass(frozen=True)
class DistanceMatrix:
    """Raw link distances, shape ``(n_elements, n_antennas)``."""

    d3: np.ndarray
    d2: np.ndarray

    def clamped(self, floor: float = MIN_LINK_DISTANCE) -> tuple[np.ndarray, np.ndarray]:
        """Distances safe for the 3GPP formulas: ``d2 >= floor`` and ``d3 >= d2``."""
        d2 = np.maximum(self.d2, floor)
        d3 = np.maximum(self.d3, d2)
        return d3, d2


def distance_matrix(array: ArrayGeometry, mt: MtGeometry) -> DistanceMatrix:
    diff = array.positions[:, None, :] - mt.antenna_positions[None, :, :]
    d2 = np.hypot(diff[..., 0], diff[..., 1])
    d3 = np.sqrt(d2**2 + diff[..., 2] ** 2)
    return DistanceMatrix(d3=d3, d2=d2)


def aperture_diagonal(array: ArrayGeometry) -> float:
    return float(np.hypot(array.n_rows - 1, array.n_cols - 1) * array.spacing)


def rayleigh_distance(array: ArrayGeometry, wavelength: float) -> float:
    """Far-field boundary ``2 D^2 / wavelength`` with ``D`` the aperture diagonal."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * aperture_diagonal(array) ** 2 / wavelength


def intersect_ray_plane(src, dst, array: ArrayGeometry, eps: float = 1e-12):
    """Hit of the ray ``src -> dst`` with the array plane as ``(u, v)``.

    Returns ``None`` when the ray is parallel to the plane or the plane lies
    behind ``src``.
    """
    src, dst = as_point(src, "src"), as_point(dst, "dst")
    if np.array_equal(src, dst):
        raise ValueError("ray source and target coincide")
    hits, ok, _ = intersect_rays_plane(src, dst[None, :], array, eps)
    return tuple(hits[0]) if ok[0] else None


def intersect_rays_plane(src, dsts, array: ArrayGeometry, eps: float = 1e-12):
    """Vectorised ray/plane hits from one source through many points.

    Returns ``(uv, ok, t)`` where ``t`` is the ray parameter of the hit
    (``src + t*(dst - src)``); ``uv`` rows with ``ok == False`` are NaN.
    """
    src = np.asarray(src, dtype=float)
    dsts = np.atleast_2d(np.asarray(dsts, dtype=float))
    direction = dsts - src
    denom = direction @ array.normal
    numer = (array.origin - src) @ array.normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > eps, numer / denom, np.nan)
    ok = np.isfinite(t) & (t >= 0)
    hit = src + t[:, None] * direction - array.origin
    uv = np.column_stack([hit @ array.h_axis, hit @ array.v_axis])
    uv[~ok] = np.nan
    return uv, ok, t

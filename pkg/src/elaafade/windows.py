"""Random rectangular window partitions of the array.

Windows are generated column-wise first: a boundary process along the bottom
row splits the array into horizontal strips, then every strip is split along
its height by an independent draw of the same process. A boundary between two
neighbouring elements occurs with probability ``1 - exp(-spacing/d_corr)``, so
run lengths are geometric and their spread grows with the correlation
distance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ArrayGeometry, MtGeometry
from .rng import KeyedStreams
from .scenario import ScenarioProfile, los_probability


@dataclass(frozen=True)
class WindowConfig:
    d_corr_h: float = 2.0
    d_corr_v: float = 2.0

    def __post_init__(self):
        for name in ("d_corr_h", "d_corr_v"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")


def boundary_probability(spacing: float, d_corr: float) -> float:
    if spacing <= 0 or not d_corr > 0:
        raise ValueError("spacing and correlation distance must be positive")
    if math.isinf(d_corr):
        return 0.0
    return -math.expm1(-spacing / d_corr)


def _breaks(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one element along the axis")
    # one uniform per gap; break index i means a new window starts at i
    u = rng.random(n - 1)
    return np.flatnonzero(u < p) + 1


def generate_horizontal_breaks(n_cols: int, spacing: float, d_corr_h: float,
                               streams: KeyedStreams) -> np.ndarray:
    """Column indices where a new horizontal strip starts (sorted, in ``1..n_cols-1``)."""
    p = boundary_probability(spacing, d_corr_h)
    return _breaks(n_cols, p, streams.generator("horizontal"))


def generate_vertical_breaks(n_rows: int, spacing: float, d_corr_v: float,
                             streams: KeyedStreams, strip_id: int) -> np.ndarray:
    """Row indices where a new window starts inside strip ``strip_id``."""
    p = boundary_probability(spacing, d_corr_v)
    return _breaks(n_rows, p, streams.generator("vertical", strip_id))


def runs_from_breaks(n: int, breaks) -> np.ndarray:
    """Run lengths of a length-``n`` axis cut at ``breaks``."""
    edges = np.concatenate([[0], np.asarray(breaks, dtype=int), [n]])
    return np.diff(edges)


def window_length_pmf(d_corr: float, spacing: float, max_len: int) -> np.ndarray:
    """PMF of the run length of a window with at most ``max_len`` elements left.

    Entry ``l-1`` is ``P(L = l)``. Below ``max_len`` the law is geometric,
    ``(1-p)^(l-1) p``; the remaining tail mass sits on ``max_len`` because a
    run is cut at the array edge.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    p = boundary_probability(spacing, d_corr)
    lengths = np.arange(1, max_len + 1)
    pmf = (1.0 - p) ** (lengths - 1) * p
    pmf[-1] = (1.0 - p) ** (max_len - 1)
    return pmf


@dataclass
class WindowPartition:
    """Rectangles ``(row_start, row_end, col_start, col_end)``, half-open, one per window.

    Windows are ordered strip by strip (left to right) and bottom to top
    inside a strip; the row index of ``rects`` is the window id.
    """

    n_rows: int
    n_cols: int
    rects: np.ndarray
    owner: int = 0
    states: np.ndarray | None = None
    strip_of: np.ndarray = field(default=None, repr=False)

    @property
    def n_windows(self) -> int:
        return len(self.rects)

    @property
    def sizes(self) -> np.ndarray:
        r = self.rects
        return (r[:, 1] - r[:, 0]) * (r[:, 3] - r[:, 2])

    def labels(self) -> np.ndarray:
        """Window id of every element, shape ``(n_rows, n_cols)``."""
        grid = np.full((self.n_rows, self.n_cols), -1, dtype=np.int64)
        for w, (r0, r1, c0, c1) in enumerate(self.rects):
            grid[r0:r1, c0:c1] = w
        return grid

    def element_window(self) -> np.ndarray:
        return self.labels().ravel()

    def with_states(self, states) -> "WindowPartition":
        states = np.asarray(states, dtype=bool)
        if states.shape != (self.n_windows,):
            raise ValueError("one state per window required")
        return WindowPartition(self.n_rows, self.n_cols, self.rects, self.owner, states, self.strip_of)

    def element_states(self) -> np.ndarray:
        if self.states is None:
            raise ValueError("partition has no states assigned")
        return self.states[self.element_window()]


def build_partition(array: ArrayGeometry, config: WindowConfig, streams: KeyedStreams,
                    owner: int = 0) -> WindowPartition:
    col_breaks = generate_horizontal_breaks(array.n_cols, array.spacing, config.d_corr_h, streams)
    col_edges = np.concatenate([[0], col_breaks, [array.n_cols]])
    rects, strip_of = [], []
    for strip, (c0, c1) in enumerate(zip(col_edges[:-1], col_edges[1:])):
        if array.n_rows == 1:
            row_edges = np.array([0, 1])
        else:
            row_breaks = generate_vertical_breaks(array.n_rows, array.spacing, config.d_corr_v,
                                                  streams, strip)
            row_edges = np.concatenate([[0], row_breaks, [array.n_rows]])
        for r0, r1 in zip(row_edges[:-1], row_edges[1:]):
            rects.append((r0, r1, c0, c1))
            strip_of.append(strip)
    return WindowPartition(array.n_rows, array.n_cols, np.array(rects, dtype=np.int64).reshape(-1, 4),
                           owner, None, np.array(strip_of, dtype=np.int64))


def window_centroids(partition: WindowPartition, array: ArrayGeometry) -> np.ndarray:
    r = partition.rects
    rows = (r[:, 0] + r[:, 1] - 1) / 2.0
    cols = (r[:, 2] + r[:, 3] - 1) / 2.0
    return array.uv_to_point(np.column_stack([cols, rows]) * array.spacing)


def window_los_probability(partition: WindowPartition, profile: ScenarioProfile,
                           array: ArrayGeometry, mt: MtGeometry, floor: float = 1.0) -> np.ndarray:
    """LoS probability of each window from its centroid to the MT reference point."""
    diff = window_centroids(partition, array) - mt.reference_point
    d2 = np.maximum(np.hypot(diff[:, 0], diff[:, 1]), floor)
    return np.atleast_1d(los_probability(profile, d2))


def assign_states(partition: WindowPartition, profile: ScenarioProfile, array: ArrayGeometry,
                  mt: MtGeometry, streams: KeyedStreams) -> WindowPartition:
    p = window_los_probability(partition, profile, array, mt)
    u = streams.generator("states").random(partition.n_windows)
    return partition.with_states(u < p)


def write_windows_csv(partitions, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mt_index", "row_start", "row_end", "col_start", "col_end", "state"])
        for part in partitions:
            states = part.states if part.states is not None else [None] * part.n_windows
            for (r0, r1, c0, c1), st in zip(part.rects, states):
                label = "" if st is None else ("LoS" if st else "NLoS")
                writer.writerow([part.owner, int(r0), int(r1), int(c0), int(c1), label])


def window_flat_indices(partition: WindowPartition, w: int) -> np.ndarray:
    """Flat element indices of window ``w`` in row-major order."""
    r0, r1, c0, c1 = partition.rects[w]
    return (np.arange(r0, r1)[:, None] * partition.n_cols + np.arange(c0, c1)[None, :]).ravel()


def censored_run_expectation(d_corr: float, spacing: float, n: int, starts, max_len: int) -> np.ndarray:
    """Expected run-length histogram for runs starting at ``starts`` on a length-``n`` axis.

    A run starting at ``s`` has length ``min(L, n - s)`` with ``L`` geometric,
    so its law is :func:`window_length_pmf` with ``n - s`` elements left.
    Lengths ``>= max_len`` are pooled into the last bin.
    """
    remaining = n - np.asarray(starts, dtype=int)
    expected = np.zeros(max_len)
    for m, count in zip(*np.unique(remaining, return_counts=True)):
        pmf = window_length_pmf(d_corr, spacing, int(min(m, max_len)))
        expected[: len(pmf)] += count * pmf
    return expected

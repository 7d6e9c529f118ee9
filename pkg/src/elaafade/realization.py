from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .windows import WindowPartition


@dataclass
class MtChannel:
    """Channel of one MT. Link arrays are ``(n_elements, n_antennas)``, element arrays ``(n_elements,)``.

    ``d3``/``d2`` are the clamped distances fed to the pathloss model;
    ``h_bs``/``h_ut`` the per-element and per-antenna heights.
    """

    mt_index: int
    h: np.ndarray
    g: np.ndarray
    los: np.ndarray
    pl_db: np.ndarray
    sf_db: np.ndarray
    window_id: np.ndarray
    k_db: np.ndarray
    d3: np.ndarray
    d2: np.ndarray
    h_bs: np.ndarray
    h_ut: np.ndarray
    partition: WindowPartition
    mask: np.ndarray
    pre: Optional["MtChannel"] = None

    @property
    def n_elements(self) -> int:
        return self.h.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.h.shape[1]

    def copy(self) -> "MtChannel":
        arrays = {name: getattr(self, name).copy()
                  for name in ("h", "g", "los", "pl_db", "sf_db", "window_id", "k_db", "mask")}
        return replace(self, **arrays)

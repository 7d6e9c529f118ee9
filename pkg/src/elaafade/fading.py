"""Per-window shadow fading and per-link small-scale fading."""

from __future__ import annotations

import numpy as np

from .rng import KeyedStreams
from .scenario import ScenarioProfile, shadow_sigma_db
from .windows import WindowPartition


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def draw_shadow(partition: WindowPartition, profile: ScenarioProfile,
                streams: KeyedStreams) -> np.ndarray:
    """One shadow-fading value in dB per window, scaled by that window's state sigma."""
    if partition.states is None:
        raise ValueError("window states must be assigned before drawing shadow fading")
    sigma = np.atleast_1d(shadow_sigma_db(profile, partition.states))
    z = np.array([streams.generator("shadow", w).standard_normal() for w in range(partition.n_windows)])
    return sigma * z


def draw_k_factor(state, profile: ScenarioProfile, rng: np.random.Generator) -> float:
    """Rician K in dB for a LoS window."""
    if not bool(state):
        raise ValueError("K-factor is only defined for LoS windows")
    return profile.k_factor_mu + profile.k_factor_sigma * rng.standard_normal()


def draw_k_factors(partition: WindowPartition, profile: ScenarioProfile,
                   streams: KeyedStreams) -> np.ndarray:
    """K in dB per window, NaN for NLoS windows."""
    k_db = np.full(partition.n_windows, np.nan)
    for w in np.flatnonzero(partition.states):
        k_db[w] = draw_k_factor(True, profile, streams.generator("k_factor", w))
    return k_db


def los_phase(d3, wavelength: float) -> np.ndarray:
    return -2.0 * np.pi * np.asarray(d3, dtype=float) / wavelength


def draw_small_scale(los, k_linear, d3, wavelength: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-power fading coefficients.

    LoS links are Rician with a deterministic spherical-wave term
    ``exp(-j 2 pi d3 / wavelength)``; NLoS links are Rayleigh. ``k_linear``
    may be ``inf`` for a pure LoS link. The diffuse part is always drawn so
    the stream consumption does not depend on the state.
    """
    d3 = np.asarray(d3, dtype=float)
    if np.any(d3 <= 0) or wavelength <= 0:
        raise ValueError("distance and wavelength must be positive")
    k = np.broadcast_to(np.asarray(k_linear, dtype=float), d3.shape)
    los = np.broadcast_to(np.asarray(los, dtype=bool), d3.shape)
    if np.any(k[los] < 0) or np.any(np.isnan(k[los])):
        raise ValueError("K-factor must be non-negative")
    z = complex_normal(rng, d3.shape)
    with np.errstate(invalid="ignore"):
        k_safe = np.where(los, k, 0.0)
        finite = np.isfinite(k_safe)
        direct = np.where(finite, np.sqrt(k_safe / np.where(finite, k_safe + 1.0, 1.0)), 1.0)
        diffuse = np.where(finite, np.sqrt(1.0 / (np.where(finite, k_safe, 0.0) + 1.0)), 0.0)
    g = direct * np.exp(1j * los_phase(d3, wavelength)) + diffuse * z
    return np.where(los, g, z)


def link_coefficient(pl_db, sf_db, g):
    """``10^(-(pl - sf)/20) * g``."""
    return 10.0 ** (-(np.asarray(pl_db) - np.asarray(sf_db)) / 20.0) * np.asarray(g)

"""3GPP scenario profiles: LoS probability, pathloss, shadowing and K-factor.

Coefficients live in JSON files under ``profiles/``; the functions here only
evaluate the functional forms. Distances are in metres, frequencies in Hz,
everything else in dB unless stated otherwise.
"""

from __future__ import annotations

import enum
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, NonNegativeFloat, ValidationError

SPEED_OF_LIGHT = 299_792_458.0
SHIPPED_PROFILES = ("umi_street_canyon", "indoor_office")


class ProfileError(ValueError):
    """Unknown, incomplete or out-of-range scenario profile."""


class LinkState(enum.IntEnum):
    NLOS = 0
    LOS = 1


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class UmiLosProbability(_Frozen):
    """``1`` up to ``d_near``, then ``d_near/d + exp(-d/d_decay)(1 - d_near/d)``."""

    form: Literal["umi"] = "umi"
    d_near: PositiveFloat = 18.0
    d_decay: PositiveFloat = 36.0

    def __call__(self, d2):
        d = np.maximum(d2, self.d_near)
        return np.where(d2 <= self.d_near, 1.0,
                        self.d_near / d + np.exp(-d / self.d_decay) * (1.0 - self.d_near / d))


class IndoorMixedLosProbability(_Frozen):
    form: Literal["indoor_mixed"] = "indoor_mixed"
    d_near: NonNegativeFloat = 5.0
    decay_near: PositiveFloat = 70.8
    d_far: PositiveFloat = 49.0
    weight_far: Annotated[float, Field(ge=0.0, le=1.0)] = 0.54
    decay_far: PositiveFloat = 211.7

    def __call__(self, d2):
        near = np.exp(-(d2 - self.d_near) / self.decay_near)
        far = self.weight_far * np.exp(-(d2 - self.d_far) / self.decay_far)
        return np.where(d2 <= self.d_near, 1.0, np.where(d2 <= self.d_far, near, far))


class ConstantLosProbability(_Frozen):
    form: Literal["constant"] = "constant"
    value: Annotated[float, Field(ge=0.0, le=1.0)]

    def __call__(self, d2):
        return np.full(np.shape(d2), self.value)


LosProbabilityModel = Annotated[
    Union[UmiLosProbability, IndoorMixedLosProbability, ConstantLosProbability],
    Field(discriminator="form"),
]


class Breakpoint(_Frozen):
    """Second LoS slope beyond ``d_BP = 4 h'_BS h'_UT f_c / c`` with ``h' = h - env_height``."""

    far_distance_coef: float
    height_coef: float
    env_height: NonNegativeFloat = 1.0


class LosPathloss(_Frozen):
    intercept: float
    distance_coef: float
    frequency_coef: float
    breakpoint: Optional[Breakpoint] = None


class NlosPathloss(_Frozen):
    intercept: float
    distance_coef: float
    frequency_coef: float
    ut_height_coef: float = 0.0
    ut_height_ref: float = 1.5


class ScenarioProfile(_Frozen):
    name: Literal["umi_street_canyon", "indoor_office", "custom"]
    carrier_frequency: PositiveFloat
    los_probability: LosProbabilityModel
    pathloss_los: LosPathloss
    pathloss_nlos: NlosPathloss
    single_slope: bool = False
    sf_sigma_los: NonNegativeFloat
    sf_sigma_nlos: NonNegativeFloat
    k_factor_mu: float
    k_factor_sigma: NonNegativeFloat
    bs_height: float
    ut_height: float

    @property
    def fc_ghz(self) -> float:
        return self.carrier_frequency / 1e9

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    def with_frequency(self, carrier_frequency: float) -> "ScenarioProfile":
        return _validate({**self.model_dump(), "carrier_frequency": carrier_frequency})

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2)


def _validate(data: dict) -> ScenarioProfile:
    try:
        return ScenarioProfile.model_validate(data)
    except ValidationError as exc:
        raise ProfileError(str(exc)) from exc


@lru_cache(maxsize=None)
def shipped_profile(name: str) -> ScenarioProfile:
    if name not in SHIPPED_PROFILES:
        raise ProfileError(f"unknown scenario {name!r}; shipped: {', '.join(SHIPPED_PROFILES)}")
    text = resources.files("elaafade").joinpath("profiles", f"{name}.json").read_text()
    return _validate(json.loads(text))


def profile_from_dict(data: dict) -> ScenarioProfile:
    """Shipped names act as a base that the remaining keys override; ``custom`` must be complete."""
    if not isinstance(data, dict) or "name" not in data:
        raise ProfileError("scenario profile needs a 'name'")
    name = data["name"]
    if name == "custom":
        return _validate(data)
    base = shipped_profile(name).model_dump()
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict) \
                and value.get("form", base[key].get("form")) == base[key].get("form"):
            base[key] = {**base[key], **value}
        else:
            base[key] = value
    return _validate(base)


def load_profile(path) -> ScenarioProfile:
    """Load a profile JSON file, or a shipped profile when ``path`` is one of its names."""
    if str(path) in SHIPPED_PROFILES:
        return shipped_profile(str(path))
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{path}: invalid JSON ({exc})") from exc
    return profile_from_dict(data)


def save_profile(profile: ScenarioProfile, path) -> None:
    Path(path).write_text(profile.to_json())


def _check_distance(d, what: str):
    d = np.asarray(d, dtype=float)
    if np.any(d < 0) or np.any(np.isnan(d)):
        raise ValueError(f"{what} must be non-negative")
    return d


def los_probability(profile: ScenarioProfile, d2):
    d2 = _check_distance(d2, "horizontal distance")
    p = np.clip(profile.los_probability(d2), 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def breakpoint_distance(profile: ScenarioProfile, h_bs, h_ut):
    """Effective-height breakpoint distance; 0 where either effective height is non-positive."""
    bp = profile.pathloss_los.breakpoint
    if bp is None:
        return np.zeros(np.broadcast(h_bs, h_ut).shape)
    h_bs_eff = np.maximum(np.asarray(h_bs, dtype=float) - bp.env_height, 0.0)
    h_ut_eff = np.maximum(np.asarray(h_ut, dtype=float) - bp.env_height, 0.0)
    return 4.0 * h_bs_eff * h_ut_eff * profile.carrier_frequency / SPEED_OF_LIGHT


def _pathloss_los(profile, d3, d2, h_bs, h_ut):
    pl = profile.pathloss_los
    log_fc = np.log10(profile.fc_ghz)
    near = pl.intercept + pl.distance_coef * np.log10(d3) + pl.frequency_coef * log_fc
    if profile.single_slope or pl.breakpoint is None:
        return near
    bp = pl.breakpoint
    d_bp = breakpoint_distance(profile, h_bs, h_ut)
    with np.errstate(divide="ignore"):
        far = (pl.intercept + bp.far_distance_coef * np.log10(d3) + pl.frequency_coef * log_fc
               + bp.height_coef * np.log10(d_bp**2 + (np.asarray(h_bs) - np.asarray(h_ut)) ** 2))
    # no usable breakpoint (effective height <= 0) keeps the first slope
    return np.where((d_bp > 0) & (d2 > d_bp), far, near)


def _pathloss_nlos(profile, d3, d2, h_bs, h_ut):
    pl = profile.pathloss_nlos
    own = (pl.intercept + pl.distance_coef * np.log10(d3)
           + pl.frequency_coef * np.log10(profile.fc_ghz)
           + pl.ut_height_coef * (np.asarray(h_ut, dtype=float) - pl.ut_height_ref))
    return np.maximum(_pathloss_los(profile, d3, d2, h_bs, h_ut), own)


def pathloss_db(profile: ScenarioProfile, state, d3, d2, h_bs=None, h_ut=None):
    """Pathloss in dB (positive attenuation) for LoS/NLoS links.

    ``state`` may be a :class:`LinkState` or a boolean array (True = LoS)
    broadcastable against the distances. Heights default to the profile's
    ``bs_height``/``ut_height``.
    """
    d3 = _check_distance(d3, "3D distance")
    d2 = _check_distance(d2, "horizontal distance")
    if np.any(d3 < 1.0):
        raise ValueError("3D distance below 1 m reached the pathloss model; clamp first")
    h_bs = profile.bs_height if h_bs is None else np.asarray(h_bs, dtype=float)
    h_ut = profile.ut_height if h_ut is None else np.asarray(h_ut, dtype=float)
    los = np.asarray(state, dtype=bool)
    if los.ndim == 0:
        fn = _pathloss_los if los else _pathloss_nlos
        out = np.asarray(fn(profile, d3, d2, h_bs, h_ut), dtype=float)
    else:
        out = np.where(los, _pathloss_los(profile, d3, d2, h_bs, h_ut),
                       _pathloss_nlos(profile, d3, d2, h_bs, h_ut))
    return float(out) if out.ndim == 0 else out


def shadow_sigma_db(profile: ScenarioProfile, state):
    los = np.asarray(state, dtype=bool)
    out = np.where(los, profile.sf_sigma_los, profile.sf_sigma_nlos)
    return float(out) if out.ndim == 0 else out


def k_factor_params(profile: ScenarioProfile) -> tuple[float, float]:
    return profile.k_factor_mu, profile.k_factor_sigma

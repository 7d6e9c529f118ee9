import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elaafade.scenario import (LinkState, ProfileError, k_factor_params, load_profile, los_probability,
                               pathloss_db, profile_from_dict, save_profile, shadow_sigma_db,
                               shipped_profile)

UMI = shipped_profile("umi_street_canyon")
INH = shipped_profile("indoor_office")

# UMi at d2 = 36 m: 18/36 + exp(-1) * (1 - 18/36)
UMI_P36 = 0.5 + 0.5 * math.exp(-1.0)


def umi_at(fc_hz):
    return UMI.with_frequency(fc_hz)


def test_umi_los_probability_values():
    assert los_probability(UMI, 18.0) == 1.0
    assert los_probability(UMI, 0.0) == 1.0
    assert los_probability(UMI, 36.0) == pytest.approx(UMI_P36, abs=1e-12)
    assert UMI_P36 == pytest.approx(0.68394, abs=1e-5)


def test_indoor_los_probability_values():
    assert los_probability(INH, 0.0) == 1.0
    assert los_probability(INH, 5.0) == 1.0
    assert los_probability(INH, 20.0) == pytest.approx(math.exp(-15 / 70.8))
    assert los_probability(INH, 100.0) == pytest.approx(0.54 * math.exp(-51 / 211.7))


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        los_probability(UMI, -1.0)


def test_umi_los_probability_monotone():
    d = np.linspace(0, 2000, 20001)
    p = los_probability(UMI, d)
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(np.diff(p) <= 1e-15)


def test_indoor_los_probability_monotone_per_branch():
    # the 3GPP mixed-office curve steps up by ~0.003 at 49 m; each branch is non-increasing
    for lo, hi in [(0, 49), (49.0001, 2000)]:
        d = np.linspace(lo, hi, 10001)
        p = los_probability(INH, d)
        assert np.all((p >= 0) & (p <= 1))
        assert np.all(np.diff(p) <= 1e-15)
    step = los_probability(INH, 49.0 + 1e-9) - los_probability(INH, 49.0)
    assert step == pytest.approx(0.54 - math.exp(-44 / 70.8), abs=1e-9)


def test_pathloss_umi_values():
    assert pathloss_db(umi_at(1e9), LinkState.LOS, 1.0, 1.0) == pytest.approx(32.4, abs=1e-12)
    los = pathloss_db(umi_at(3.5e9), LinkState.LOS, 100.0, 100.0)
    assert los == pytest.approx(32.4 + 42.0 + 20 * math.log10(3.5), abs=1e-12)
    assert los == pytest.approx(85.28, abs=0.01)
    nlos = pathloss_db(umi_at(3.5e9), LinkState.NLOS, 100.0, 100.0, h_ut=1.5)
    assert nlos == pytest.approx(70.6 + 22.4 + 21.3 * math.log10(3.5), abs=1e-12)
    assert nlos == pytest.approx(104.59, abs=0.01)


def test_pathloss_umi_breakpoint():
    prof = umi_at(3.5e9)
    h_bs, h_ut = 10.0, 1.5
    d_bp = 4 * 9.0 * 0.5 * 3.5e9 / 299_792_458.0
    d2 = 2 * d_bp
    d3 = math.hypot(d2, h_bs - h_ut)
    expected = (32.4 + 40 * math.log10(d3) + 20 * math.log10(3.5)
                - 9.5 * math.log10(d_bp**2 + (h_bs - h_ut) ** 2))
    assert pathloss_db(prof, True, d3, d2, h_bs, h_ut) == pytest.approx(expected, abs=1e-10)
    single = profile_from_dict({"name": "umi_street_canyon", "single_slope": True})
    assert pathloss_db(single, True, d3, d2, h_bs, h_ut) == pytest.approx(
        32.4 + 21 * math.log10(d3) + 20 * math.log10(3.5))


def test_pathloss_rejects_unclamped_distance():
    with pytest.raises(ValueError):
        pathloss_db(UMI, True, 0.5, 0.1)


@pytest.mark.parametrize("profile", [UMI, INH])
def test_nlos_never_below_los(profile):
    d3 = np.arange(1.0, 500.0, 0.1)
    d2 = np.sqrt(np.maximum(d3**2 - 8.5**2, 1.0))
    assert np.all(pathloss_db(profile, False, d3, d2, 10.0, 1.5) >= pathloss_db(profile, True, d3, d2, 10.0, 1.5))


@pytest.mark.parametrize("profile", [UMI, INH])
@pytest.mark.parametrize("los", [True, False])
@given(d2=st.floats(1.0, 1000.0))
def test_pathloss_monotone_in_d3(profile, los, d2):
    d3 = d2 + np.linspace(0, 500, 1001)
    pl = pathloss_db(profile, los, d3, np.full_like(d3, d2))
    assert np.all(np.diff(pl) >= 0)


def test_shadow_sigma():
    assert shadow_sigma_db(UMI, LinkState.LOS) == 4.0
    assert shadow_sigma_db(UMI, LinkState.NLOS) == 7.82
    custom = profile_from_dict({**UMI.model_dump(), "name": "custom", "sf_sigma_los": 5.0, "sf_sigma_nlos": 5.0})
    assert shadow_sigma_db(custom, True) == shadow_sigma_db(custom, False) == 5.0


def test_k_factor_params():
    assert k_factor_params(UMI) == (9.0, 5.0)
    zero = profile_from_dict({"name": "umi_street_canyon", "k_factor_mu": 0.0, "k_factor_sigma": 0.0})
    assert k_factor_params(zero) == (0.0, 0.0)


def test_k_factor_monte_carlo_mean():
    from elaafade.fading import draw_k_factor
    rng = np.random.default_rng(5)
    k = np.array([draw_k_factor(True, UMI, rng) for _ in range(100_000)])
    assert abs(k.mean() - 9.0) < 0.1


def test_load_shipped_by_name(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"name": "umi_street_canyon"}))
    assert load_profile(path) == UMI
    assert load_profile("umi_street_canyon") == UMI


def test_load_override(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"name": "umi_street_canyon", "sf_sigma_nlos": 8.2}))
    prof = load_profile(path)
    assert prof.sf_sigma_nlos == 8.2
    assert prof.sf_sigma_los == UMI.sf_sigma_los


@pytest.mark.parametrize("data", [
    {"name": "umi_street_canyon", "carrier_frequency": -1.0},
    {"name": "uma"},
    {"name": "custom", "carrier_frequency": 3e9},
    {"name": "umi_street_canyon", "sf_sigma_los": -1.0},
    {"name": "umi_street_canyon", "bogus": 1},
])
def test_invalid_profiles(tmp_path, data):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ProfileError):
        load_profile(path)


@pytest.mark.parametrize("profile", [UMI, INH])
def test_profile_round_trip(tmp_path, profile):
    path = tmp_path / "p.json"
    save_profile(profile, path)
    assert load_profile(path) == profile
    custom = profile_from_dict({**profile.model_dump(), "name": "custom",
                                "los_probability": {"form": "constant", "value": 0.25}})
    save_profile(custom, path)
    assert load_profile(path) == custom

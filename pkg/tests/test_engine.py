import json
import math

import numpy as np
import pytest

from elaafade import engine
from elaafade.engine import (ConfigError, generate, parse_config, read_channel_binary, rss_map,
                             write_channel_binary, write_outputs)
from elaafade.realization import MtChannel
from elaafade.rng import KeyedStreams
from elaafade.scenario import pathloss_db, shipped_profile
from elaafade.sensing import regenerate_blocked

from conftest import small_config

SPHERE = {"type": "sphere", "center": [0.75, -10.0, 2.35], "radius": 0.3, "n_points": 800}


def cfg(**overrides):
    return parse_config(small_config(**overrides))


def test_deterministic():
    a, b = generate(cfg(objects=[SPHERE])), generate(cfg(objects=[SPHERE]))
    for ca, cb in zip(a.channels, b.channels):
        assert np.array_equal(ca.h, cb.h)
        assert np.array_equal(ca.los, cb.los)


def test_seed_changes_output():
    assert not np.array_equal(generate(cfg(seed=1)).channels[0].h, generate(cfg(seed=2)).channels[0].h)


def test_no_objects_means_no_sensing():
    ch = generate(cfg()).channels[0]
    assert ch.pre is None
    assert not ch.mask.any()


def test_pre_snapshot_equals_objectless_run():
    plain = generate(cfg()).channels[0]
    sensed = generate(cfg(objects=[SPHERE])).channels[0]
    assert sensed.mask.any()
    assert np.array_equal(sensed.pre.h, plain.h)
    assert np.array_equal(sensed.pre.los, plain.los)
    outside = ~sensed.mask
    assert np.array_equal(sensed.h[outside], plain.h[outside])
    # state changes only where the mask is set, and only LoS -> NLoS
    changed = sensed.los != sensed.pre.los
    assert np.array_equal(changed, sensed.mask)
    assert not sensed.los[sensed.mask].any()


def test_channel_dimensions():
    real = generate(cfg(mts=[{"antennas": [[0.5, -30, 1.5]]}, {"antennas": [[1.0, -25, 1.5]]}],
                        outputs=["states"]))
    assert len(real.channels) == 2
    for ch in real.channels:
        assert ch.h.shape == (128, 1)
        assert ch.los.shape == ch.sf_db.shape == (128,)


def test_per_mt_channels_independent():
    same = {"antennas": [[0.5, -30, 1.5]]}
    real = generate(cfg(mts=[same, same]))
    a, b = real.channels
    assert not np.array_equal(a.h, b.h)
    np.testing.assert_array_equal(a.pl_db[a.los == b.los], b.pl_db[a.los == b.los])


def test_pathloss_and_shadow_consistent():
    ch = generate(cfg()).channels[0]
    prof = shipped_profile("umi_street_canyon")
    expected = pathloss_db(prof, ch.los[:, None], ch.d3, ch.d2, ch.h_bs[:, None], ch.h_ut[None, :])
    np.testing.assert_array_equal(ch.pl_db, expected)
    for w in range(ch.partition.n_windows):
        assert len(np.unique(ch.sf_db[ch.window_id == w])) == 1
    np.testing.assert_allclose(np.abs(ch.h), 10 ** (-(ch.pl_db - ch.sf_db[:, None]) / 20) * np.abs(ch.g))


def test_mean_power_law():
    # E|h|^2 over seeds in dB equals -(PL) up to lognormal shadowing: E[10^(sf/10)] = exp((s ln10/10)^2/2)
    always = {"name": "custom", **{k: v for k, v in shipped_profile("umi_street_canyon").model_dump().items()
                                  if k != "name"},
              "los_probability": {"form": "constant", "value": 0.0}}
    n = 400
    powers = []
    for seed in range(n):
        ch = generate(cfg(scenario=always, seed=seed, array={"rows": 2, "cols": 2, "spacing_m": 0.1,
                                                              "origin": [0, 0, 2.0]})).channels[0]
        powers.append(np.abs(ch.h[0, 0]) ** 2)
        pl = ch.pl_db[0, 0]
    s = 7.82 * math.log(10) / 10
    expected = 10 ** (-pl / 10) * math.exp(s * s / 2)
    powers = np.array(powers)
    se = powers.std() / math.sqrt(n)
    assert abs(powers.mean() - expected) < 4 * se


def test_rss_map():
    ch = generate(cfg()).channels[0]
    for agg in ("first", "mean", "per_antenna"):
        rss = rss_map(ch, agg)
        assert rss.max() == 0.0
        assert np.all(rss <= 0)
    with pytest.raises(ValueError):
        rss_map(ch, "median")


def test_rss_single_element():
    real = generate(cfg(array={"rows": 1, "cols": 1, "spacing_m": 0.1, "origin": [0, 0, 2.0]}))
    assert rss_map(real.channels[0]).tolist() == [0.0]


def test_rss_zero_channel_rejected():
    ch = generate(cfg()).channels[0]
    ch.h = np.zeros_like(ch.h)
    with pytest.raises(ValueError):
        rss_map(ch)


def test_regenerate_empty_mask_is_noop():
    ch = generate(cfg()).channels[0]
    out = regenerate_blocked(ch, np.zeros(ch.n_elements, dtype=bool), ch.partition,
                             shipped_profile("umi_street_canyon"), KeyedStreams(0))
    for name in ("h", "g", "los", "pl_db", "sf_db"):
        assert np.array_equal(getattr(out, name), getattr(ch, name))


def test_regenerate_partial_window_keeps_rest():
    near = cfg(mts=[{"antennas": [[0.75, -10.0, 1.5]]}], windows={"d_corr_h_m": 1e6, "d_corr_v_m": 1e6})
    ch = generate(near).channels[0]
    assert ch.partition.n_windows == 1 and ch.los.all()
    mask = np.zeros(ch.n_elements, dtype=bool)
    mask[:10] = True
    out = regenerate_blocked(ch, mask, ch.partition, shipped_profile("umi_street_canyon"), KeyedStreams(5))
    assert np.array_equal(out.h[10:], ch.h[10:])
    assert np.array_equal(out.sf_db[10:], ch.sf_db[10:])
    assert len(np.unique(out.sf_db[:10])) == 1 and out.sf_db[0] != ch.sf_db[0]
    assert not out.los[:10].any()
    assert np.all(out.pl_db[:10] >= ch.pl_db[:10])


def test_binary_round_trip(tmp_path):
    h = (np.random.default_rng(0).standard_normal((2, 6, 3))
         + 1j * np.random.default_rng(1).standard_normal((2, 6, 3)))
    path = tmp_path / "c.bin"
    write_channel_binary(path, h, 2, 3)
    back, header = read_channel_binary(path)
    assert np.array_equal(back, h)
    assert header == dict(version=1, n_mts=2, n_rows=2, n_cols=3, n_mt_antennas=3)
    raw = path.read_bytes()
    assert raw[:8] == b"ELAACH01"
    assert int.from_bytes(raw[8:12], "little") == 1
    # first element, first antenna: real then imaginary as little-endian doubles
    assert np.frombuffer(raw[28:44], "<f8").tolist() == [h[0, 0, 0].real, h[0, 0, 0].imag]
    assert len(raw) == 28 + 16 * h.size


def test_binary_rejects_garbage(tmp_path):
    path = tmp_path / "c.bin"
    path.write_bytes(b"NOTACHAN" + bytes(20))
    with pytest.raises(ValueError):
        read_channel_binary(path)


def test_write_outputs(tmp_path):
    real = generate(cfg(objects=[SPHERE]))
    manifest = write_outputs(real, tmp_path)
    assert manifest["seed"] == 7
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest
    assert on_disk["config_sha256"] == real.config.sha256()
    h, _ = read_channel_binary(tmp_path / "channel.bin")
    assert np.array_equal(h, real.stacked_h())
    lines = (tmp_path / "states_0.csv").read_text().strip().splitlines()
    assert lines[0] == "row,col,state,window_id"
    assert len(lines) == 1 + 8 * 16
    rss = (tmp_path / "rss_0.csv").read_text().strip().splitlines()
    assert rss[0] == "row,col,rss_db" and len(rss) == 129
    assert max(float(l.split(",")[2]) for l in rss[1:]) == 0.0
    mask = (tmp_path / "mask_0.csv").read_text().strip().splitlines()
    assert mask[0] == "mt_index,row,col,blocked"
    assert sum(int(l.split(",")[3]) for l in mask[1:]) == real.channels[0].mask.sum()
    assert (tmp_path / "windows_0.csv").exists()


def test_failed_write_leaves_no_manifest(tmp_path, monkeypatch):
    real = generate(cfg())
    write_outputs(real, tmp_path)
    assert (tmp_path / "manifest.json").exists()

    def boom(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr(engine, "write_channel_binary", boom)
    with pytest.raises(OSError):
        write_outputs(real, tmp_path)
    assert not (tmp_path / "manifest.json").exists()


@pytest.mark.parametrize("overrides", [
    dict(mts=[]),
    dict(seed=-1),
    dict(seed=2**64),
    dict(scenario="uma"),
    dict(mts=[{"antennas": [[0.5, 5.0, 1.5]]}]),  # behind the array
    dict(array={"rows": 0, "cols": 4}),
    dict(objects=[{"type": "cone"}]),
    dict(mts=[{"antennas": [[0, -5, 1]]}, {"antennas": [[0, -5, 1], [0.1, -5, 1]]}]),
])
def test_config_errors(overrides):
    with pytest.raises(ConfigError):
        generate(cfg(**overrides))


def test_scenario_path_relative_to_config(tmp_path):
    (tmp_path / "prof.json").write_text(json.dumps({"name": "umi_street_canyon", "sf_sigma_nlos": 8.2}))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(small_config(scenario="prof.json")))
    real = generate(engine.load_config(path))
    assert real.profile.sf_sigma_nlos == 8.2


def test_stats_report(tmp_path):
    summary = engine.stats(cfg(objects=[SPHERE]), 5, tmp_path)
    for row in summary["ks"]:
        assert {"test", "n", "ks_statistic", "p_value"} <= set(row)
    assert summary["blockage_oracle_agreement"] > 0.99
    assert len(summary["window_sweep"]) == 5
    for row in summary["window_sweep"]:
        assert row["empirical_mean"] == pytest.approx(row["geometric_mean"], rel=0.05)
    header = (tmp_path / "ks_tests.csv").read_text().splitlines()[0]
    assert header == "test,n,ks_statistic,p_value"
    assert (tmp_path / "summary.txt").read_text().startswith("trials: 5")

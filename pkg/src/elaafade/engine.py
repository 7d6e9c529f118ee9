"""End-to-end channel generation, RSS maps, statistics and output files."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator
from scipy import stats as sps

from . import fading, sensing, windows
from .geometry import ArrayGeometry, GeometryError, MtGeometry, build_ura, distance_matrix
from .realization import MtChannel
from .rng import KeyedStreams
from .scenario import (SHIPPED_PROFILES, ProfileError, ScenarioProfile, load_profile, pathloss_db,
                       profile_from_dict, shipped_profile)

OUTPUT_KINDS = ("channel", "states", "rss", "windows", "mask")
CHANNEL_MAGIC = b"ELAACH01"
CHANNEL_VERSION = 1
_HEADER = struct.Struct("<8s5I")


class ConfigError(ValueError):
    """The simulation config cannot be turned into a valid scene."""


Vec3 = tuple[float, float, float]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ArrayConfig(_Model):
    rows: PositiveInt
    cols: PositiveInt
    spacing_m: Optional[PositiveFloat] = None  # half a wavelength when omitted
    origin: Vec3 = (0.0, 0.0, 0.0)
    h_axis: Vec3 = (1.0, 0.0, 0.0)
    v_axis: Vec3 = (0.0, 0.0, 1.0)


class MtConfig(_Model):
    antennas: Annotated[list[Vec3], Field(min_length=1)]


class WindowsConfig(_Model):
    d_corr_h_m: PositiveFloat = 2.0
    d_corr_v_m: PositiveFloat = 2.0


class SphereConfig(_Model):
    type: Literal["sphere"]
    center: Vec3
    radius: PositiveFloat
    n_points: Annotated[int, Field(ge=4)] = 2000
    label: str = "sphere"


class BoxConfig(_Model):
    type: Literal["box"]
    center: Vec3
    size: tuple[PositiveFloat, PositiveFloat, PositiveFloat]
    n_points: Annotated[int, Field(ge=4)] = 2000
    label: str = "box"


class PointsConfig(_Model):
    type: Literal["points"]
    points: Annotated[list[Vec3], Field(min_length=1)]
    label: str = "points"


ObjectConfig = Annotated[Union[SphereConfig, BoxConfig, PointsConfig], Field(discriminator="type")]


class SimulationConfig(_Model):
    scenario: Union[str, dict] = "umi_street_canyon"
    carrier_frequency_hz: Optional[PositiveFloat] = None
    array: ArrayConfig
    mts: Annotated[list[MtConfig], Field(min_length=1)]
    windows: WindowsConfig = WindowsConfig()
    objects: list[ObjectConfig] = []
    seed: Annotated[int, Field(ge=0, lt=2**64)]
    outputs: list[Literal["channel", "states", "rss", "windows", "mask"]] = list(OUTPUT_KINDS)
    rss_aggregation: Literal["first", "mean", "per_antenna"] = "first"
    base_dir: Optional[str] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def _same_antenna_count(self):
        if "channel" in self.outputs and len({len(m.antennas) for m in self.mts}) > 1:
            raise ValueError("the channel file needs the same antenna count for every MT")
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def parse_config(data: dict, base_dir=None) -> SimulationConfig:
    try:
        cfg = SimulationConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    if base_dir is not None:
        cfg.base_dir = str(base_dir)
    return cfg


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data, base_dir=path.parent)


def resolve_profile(config: SimulationConfig) -> ScenarioProfile:
    try:
        if isinstance(config.scenario, dict):
            profile = profile_from_dict(config.scenario)
        elif config.scenario in SHIPPED_PROFILES:
            profile = shipped_profile(config.scenario)
        else:
            path = Path(config.scenario)
            if not path.is_absolute() and config.base_dir is not None:
                path = Path(config.base_dir) / path
            try:
                profile = load_profile(path)
            except OSError as exc:
                raise ProfileError(f"cannot read scenario profile {path}: {exc}") from exc
        if config.carrier_frequency_hz is not None:
            profile = profile.with_frequency(config.carrier_frequency_hz)
    except ProfileError as exc:
        raise ConfigError(str(exc)) from exc
    return profile


def build_scene(config: SimulationConfig, profile: ScenarioProfile):
    a = config.array
    spacing = a.spacing_m if a.spacing_m is not None else profile.wavelength / 2.0
    try:
        array = build_ura(a.rows, a.cols, spacing, a.origin, (a.h_axis, a.v_axis))
        mts = [MtGeometry(m.antennas) for m in config.mts]
        for m in mts:
            m.check_front_of(array)
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc
    return array, mts


def build_objects(config: SimulationConfig, streams: KeyedStreams) -> list[sensing.SensingObject]:
    objects = []
    for i, obj in enumerate(config.objects):
        rng = streams.generator("object", i)
        if obj.type == "sphere":
            objects.append(sensing.make_sphere_cloud(obj.center, obj.radius, obj.n_points, rng, obj.label))
        elif obj.type == "box":
            objects.append(sensing.make_box_cloud(obj.center, obj.size, obj.n_points, rng, obj.label))
        else:
            objects.append(sensing.SensingObject(np.asarray(obj.points), obj.label, {"type": "points"}))
    return objects


@dataclass
class ChannelRealization:
    config: SimulationConfig
    profile: ScenarioProfile
    array: ArrayGeometry
    mts: list[MtGeometry]
    objects: list[sensing.SensingObject]
    channels: list[MtChannel] = field(default_factory=list)

    @property
    def seed(self) -> int:
        return self.config.seed

    def stacked_h(self) -> np.ndarray:
        return np.stack([c.h for c in self.channels])


def communication_channel(array: ArrayGeometry, mt: MtGeometry, profile: ScenarioProfile,
                          window_cfg: windows.WindowConfig, streams: KeyedStreams,
                          mt_index: int = 0) -> MtChannel:
    """Channel of one MT before any sensing object is considered."""
    dist = distance_matrix(array, mt)
    d3c, d2c = dist.clamped()
    win_streams = streams.child("windows")
    part = windows.build_partition(array, window_cfg, win_streams, owner=mt_index)
    part = windows.assign_states(part, profile, array, mt, win_streams)
    window_id = part.element_window()
    los = part.states[window_id]

    h_bs = array.positions[:, 2].copy()
    h_ut = mt.antenna_positions[:, 2].copy()
    pl = pathloss_db(profile, los[:, None], d3c, d2c, h_bs[:, None], h_ut[None, :])

    fade_streams = streams.child("fading")
    sf_window = fading.draw_shadow(part, profile, fade_streams)
    k_db = fading.draw_k_factors(part, profile, fade_streams)
    g = np.empty(dist.d3.shape, dtype=complex)
    for w in range(part.n_windows):
        idx = windows.window_flat_indices(part, w)
        k_lin = 10.0 ** (k_db[w] / 10.0) if part.states[w] else 0.0
        g[idx] = fading.draw_small_scale(part.states[w], k_lin, dist.d3[idx], profile.wavelength,
                                         fade_streams.generator("small_scale", w))
    sf = sf_window[window_id]
    h = fading.link_coefficient(pl, sf[:, None], g)
    return MtChannel(mt_index=mt_index, h=h, g=g, los=los, pl_db=pl, sf_db=sf, window_id=window_id,
                     k_db=k_db, d3=d3c, d2=d2c, h_bs=h_bs, h_ut=h_ut, partition=part,
                     mask=np.zeros(array.n_elements, dtype=bool))


def generate(config: SimulationConfig) -> ChannelRealization:
    """Run the full communication + sensing pipeline; deterministic in ``config.seed``."""
    profile = resolve_profile(config)
    array, mts = build_scene(config, profile)
    root = KeyedStreams(config.seed)
    objects = build_objects(config, root.child("objects"))
    window_cfg = windows.WindowConfig(config.windows.d_corr_h_m, config.windows.d_corr_v_m)
    real = ChannelRealization(config, profile, array, mts, objects)
    for m, mt in enumerate(mts):
        streams = root.child("mt", m)
        channel = communication_channel(array, mt, profile, window_cfg, streams, m)
        if objects:
            mask = sensing.blockage_mask(objects, mt, array, channel.los)
            post = sensing.regenerate_blocked(channel, mask, channel.partition, profile,
                                              streams.child("sensing"))
            post.pre = channel
            channel = post
        real.channels.append(channel)
    return real


def rss_map(channel: MtChannel, aggregation: str = "first") -> np.ndarray:
    """Received power in dB relative to the strongest element (max is exactly 0 dB).

    ``first`` uses the first MT antenna, ``mean`` the antenna-averaged power,
    ``per_antenna`` returns one column per antenna.
    """
    power = np.abs(channel.h) ** 2
    if aggregation == "first":
        power = power[:, 0]
    elif aggregation == "mean":
        power = power.mean(axis=1)
    elif aggregation != "per_antenna":
        raise ValueError(f"unknown RSS aggregation {aggregation!r}")
    if not np.any(power > 0):
        raise ValueError("channel is identically zero; RSS is undefined")
    with np.errstate(divide="ignore"):
        rss = 10.0 * np.log10(power)
    return rss - rss.max()


# ---------------------------------------------------------------- binary channel file

def write_channel_binary(path, h: np.ndarray, n_rows: int, n_cols: int) -> None:
    """``h`` has shape ``(n_mts, n_rows*n_cols, n_antennas)``."""
    h = np.asarray(h, dtype=np.complex128)
    n_mts, n_el, n_ant = h.shape
    if n_el != n_rows * n_cols:
        raise ValueError("channel element count does not match the array shape")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHANNEL_MAGIC, CHANNEL_VERSION, n_mts, n_rows, n_cols, n_ant))
        fh.write(h.astype("<c16").tobytes(order="C"))


def read_channel_binary(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated channel file")
    magic, version, n_mts, n_rows, n_cols, n_ant = _HEADER.unpack_from(raw)
    if magic != CHANNEL_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != CHANNEL_VERSION:
        raise ValueError(f"unsupported channel file version {version}")
    count = n_mts * n_rows * n_cols * n_ant
    body = raw[_HEADER.size:]
    if len(body) != 16 * count:
        raise ValueError("channel file size does not match its header")
    h = np.frombuffer(body, dtype="<c16").reshape(n_mts, n_rows * n_cols, n_ant).astype(np.complex128)
    header = dict(version=version, n_mts=n_mts, n_rows=n_rows, n_cols=n_cols, n_mt_antennas=n_ant)
    return h, header


# ---------------------------------------------------------------- CSV / manifest output

def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _states_rows(channel: MtChannel, array: ArrayGeometry, los):
    rows, cols = array.row_col(np.arange(array.n_elements))
    for r, c, st, w in zip(rows.tolist(), cols.tolist(), los.tolist(), channel.window_id.tolist()):
        yield r, c, "LoS" if st else "NLoS", w


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(real: ChannelRealization, out_dir, selections=None) -> dict:
    """Write the selected artifacts and, last, ``manifest.json``.

    Any previous manifest is removed first, so an interrupted run never leaves
    a manifest next to partial files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        manifest_path.unlink()
    selections = list(real.config.outputs if selections is None else selections)
    unknown = set(selections) - set(OUTPUT_KINDS)
    if unknown:
        raise ValueError(f"unknown output kinds: {sorted(unknown)}")
    array = real.array
    rows, cols = array.row_col(np.arange(array.n_elements))
    written: list[Path] = []

    if "channel" in selections:
        path = out / "channel.bin"
        write_channel_binary(path, real.stacked_h(), array.n_rows, array.n_cols)
        written.append(path)
    for ch in real.channels:
        m = ch.mt_index
        if "states" in selections:
            path = out / f"states_{m}.csv"
            _write_rows(path, ["row", "col", "state", "window_id"], _states_rows(ch, array, ch.los))
            written.append(path)
            if ch.pre is not None:
                path = out / f"states_pre_{m}.csv"
                _write_rows(path, ["row", "col", "state", "window_id"], _states_rows(ch, array, ch.pre.los))
                written.append(path)
        if "rss" in selections:
            path = out / f"rss_{m}.csv"
            rss = rss_map(ch, real.config.rss_aggregation)
            if rss.ndim == 1:
                _write_rows(path, ["row", "col", "rss_db"],
                            ((r, c, repr(v)) for r, c, v in zip(rows.tolist(), cols.tolist(), rss.tolist())))
            else:
                _write_rows(path, ["row", "col", "antenna", "rss_db"],
                            ((r, c, k, repr(float(rss[i, k])))
                             for i, (r, c) in enumerate(zip(rows.tolist(), cols.tolist()))
                             for k in range(rss.shape[1])))
            written.append(path)
        if "windows" in selections:
            path = out / f"windows_{m}.csv"
            windows.write_windows_csv([ch.partition], path)
            written.append(path)
        if "mask" in selections:
            path = out / f"mask_{m}.csv"
            _write_rows(path, ["mt_index", "row", "col", "blocked"],
                        ((m, r, c, int(b)) for r, c, b in zip(rows.tolist(), cols.tolist(), ch.mask.tolist())))
            written.append(path)

    manifest = {
        "format": "elaafade-manifest/1",
        "seed": real.seed,
        "config_sha256": real.config.sha256(),
        "scenario": real.profile.name,
        "files": {p.name: _sha256_file(p) for p in written},
    }
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2))
    os.replace(tmp, manifest_path)
    return manifest


# ---------------------------------------------------------------- statistics harness

def _ks_row(name, sample, cdf):
    sample = np.asarray(sample, dtype=float)
    if len(sample) < 2:
        return {"test": name, "n": len(sample), "ks_statistic": float("nan"), "p_value": float("nan")}
    res = sps.kstest(sample, cdf)
    return {"test": name, "n": len(sample), "ks_statistic": float(res.statistic), "p_value": float(res.pvalue)}


def stats(config: SimulationConfig, n_trials: int, out_dir=None, pmf_bins: int = 30,
          max_links: int = 100_000) -> dict:
    """Monte Carlo validation report over ``n_trials`` seeds ``seed, seed+1, ...``."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    profile = resolve_profile(config)
    starts, run_lengths = [], []
    win_d2, win_p, win_los = [], [], []
    sf_norm, k_norm, nlos_abs, g_power = [], [], [], []
    agree = total = 0
    array = None
    for t in range(n_trials):
        cfg = config.model_copy(update={"seed": (config.seed + t) % 2**64})
        real = generate(cfg)
        array = real.array
        for ch, mt in zip(real.channels, real.mts):
            base = ch.pre if ch.pre is not None else ch
            part = base.partition
            strip_starts = np.unique(part.rects[:, 2])
            edges = np.append(strip_starts, array.n_cols)
            starts.append(strip_starts)
            run_lengths.append(np.diff(edges))

            cen = windows.window_centroids(part, array) - mt.reference_point
            win_d2.append(np.hypot(cen[:, 0], cen[:, 1]))
            win_p.append(windows.window_los_probability(part, profile, array, mt))
            win_los.append(part.states)

            sig = np.where(part.states, profile.sf_sigma_los, profile.sf_sigma_nlos)
            sf_w = np.array([base.sf_db[windows.window_flat_indices(part, w)[0]] for w in range(part.n_windows)])
            sf_norm.append(sf_w[sig > 0] / sig[sig > 0])
            if profile.k_factor_sigma > 0:
                k_norm.append((base.k_db[part.states] - profile.k_factor_mu) / profile.k_factor_sigma)
            nlos_abs.append(np.abs(base.g[~base.los]).ravel())
            g_power.append((np.abs(base.g) ** 2).ravel())

            for obj_cfg, obj in zip(cfg.objects, real.objects):
                if obj_cfg.type != "sphere":
                    continue
                single = sensing.blockage_mask([obj], mt, array, base.los)
                oracle = sensing.oracle_ray_sphere(array.positions, mt.reference_point,
                                                   obj_cfg.center, obj_cfg.radius) & base.los
                agree += int(np.sum(single == oracle))
                total += array.n_elements

    # window run lengths, censored at the array edge
    starts = np.concatenate(starts)
    lengths = np.minimum(np.concatenate(run_lengths), pmf_bins)
    observed = np.bincount(lengths, minlength=pmf_bins + 1)[1:]
    expected = windows.censored_run_expectation(config.windows.d_corr_h_m, array.spacing, array.n_cols,
                                                starts, pmf_bins)
    keep = expected > 0
    chi2 = float(np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep]))
    chi2_p = float(sps.chi2.sf(chi2, max(int(keep.sum()) - 1, 1)))
    pmf_rows = [{"length": l + 1, "observed": int(observed[l]), "expected": float(expected[l]),
                 "empirical_pmf": float(observed[l] / observed.sum()),
                 "analytic_pmf": float(expected[l] / expected.sum())} for l in range(pmf_bins)]

    # LoS fraction vs distance
    d2 = np.concatenate(win_d2)
    p = np.concatenate(win_p)
    los = np.concatenate(win_los)
    edges = np.unique(np.quantile(d2, np.linspace(0, 1, 11)))
    bin_idx = np.clip(np.searchsorted(edges, d2, side="right") - 1, 0, len(edges) - 2)
    los_rows = []
    for b in range(len(edges) - 1):
        sel = bin_idx == b
        n = int(sel.sum())
        if n == 0:
            continue
        frac = float(los[sel].mean())
        se = float(np.sqrt(max(frac * (1 - frac), 1e-12) / n))
        los_rows.append({"d2_low": float(edges[b]), "d2_high": float(edges[b + 1]), "n_windows": n,
                         "los_fraction": frac, "ci_low": frac - 1.96 * se, "ci_high": frac + 1.96 * se,
                         "analytic_mean": float(p[sel].mean())})

    # correlation-distance sweep of the mean horizontal run length
    sweep_rows = []
    sweep_streams = KeyedStreams(config.seed).child("stats", "sweep")
    n_sweep = 100_000
    for i, factor in enumerate((0.5, 1.0, 2.0, 4.0, 8.0)):
        d_corr = factor * array.spacing
        breaks = windows.generate_horizontal_breaks(n_sweep, array.spacing, d_corr, sweep_streams.child(i))
        runs = windows.runs_from_breaks(n_sweep, breaks)
        sweep_rows.append({"d_corr_m": d_corr, "empirical_mean": float(runs.mean()),
                           "geometric_mean": 1.0 / windows.boundary_probability(array.spacing, d_corr)})

    rng = np.random.default_rng(0)

    def cap(x):
        x = np.concatenate(x) if x else np.empty(0)
        return x if len(x) <= max_links else rng.choice(x, max_links, replace=False)

    ks_rows = [
        _ks_row("shadow_normalized_vs_normal", cap(sf_norm), sps.norm.cdf),
        _ks_row("k_factor_normalized_vs_normal", cap(k_norm), sps.norm.cdf),
        _ks_row("nlos_abs_g_vs_rayleigh", cap(nlos_abs), sps.rayleigh(scale=np.sqrt(0.5)).cdf),
    ]
    power = np.concatenate(g_power)
    summary = {
        "n_trials": n_trials,
        "window_chi2": chi2,
        "window_chi2_p_value": chi2_p,
        "mean_strip_width": float(np.concatenate(run_lengths).mean()),
        "mean_unit_power": float(power.mean()),
        "blockage_oracle_agreement": (agree / total) if total else float("nan"),
        "ks": ks_rows,
        "window_pmf": pmf_rows,
        "los_fraction": los_rows,
        "window_sweep": sweep_rows,
    }
    if out_dir is not None:
        _write_stats(summary, Path(out_dir))
    return summary


def _write_dicts(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _write_stats(summary: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_dicts(out / "ks_tests.csv", summary["ks"])
    _write_dicts(out / "window_pmf.csv", summary["window_pmf"])
    _write_dicts(out / "los_fraction.csv", summary["los_fraction"])
    _write_dicts(out / "window_sweep.csv", summary["window_sweep"])
    lines = [f"trials: {summary['n_trials']}",
             f"window run-length chi2: {summary['window_chi2']:.3f} (p = {summary['window_chi2_p_value']:.4f})",
             f"mean strip width: {summary['mean_strip_width']:.3f} elements",
             f"mean |g|^2: {summary['mean_unit_power']:.4f}",
             f"blockage oracle agreement: {summary['blockage_oracle_agreement']:.5f}"]
    for row in summary["ks"]:
        lines.append(f"KS {row['test']}: n={row['n']} D={row['ks_statistic']:.4f} p={row['p_value']:.4f}")
    lines.append("LoS fraction vs horizontal distance:")
    for row in summary["los_fraction"]:
        lines.append(f"  {row['d2_low']:8.2f}-{row['d2_high']:8.2f} m  n={row['n_windows']:6d}  "
                     f"empirical {row['los_fraction']:.3f} [{row['ci_low']:.3f}, {row['ci_high']:.3f}]  "
                     f"analytic {row['analytic_mean']:.3f}")
    lines.append("mean run length vs correlation distance:")
    for row in summary["window_sweep"]:
        lines.append(f"  d_corr {row['d_corr_m']:.4f} m  empirical {row['empirical_mean']:.3f}  "
                     f"geometric {row['geometric_mean']:.3f}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")

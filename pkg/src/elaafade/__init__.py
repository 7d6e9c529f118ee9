"""Near-field fading channel generation for extremely large aperture arrays."""

from .engine import (ChannelRealization, ConfigError, SimulationConfig, generate, load_config,
                     parse_config, read_channel_binary, rss_map, stats, write_outputs)
from .geometry import ArrayGeometry, MtGeometry, build_ura, distance_matrix, rayleigh_distance
from .rng import KeyedStreams
from .scenario import LinkState, ScenarioProfile, load_profile, shipped_profile

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "ChannelRealization", "ConfigError", "KeyedStreams", "LinkState", "MtGeometry",
    "ScenarioProfile", "SimulationConfig", "build_ura", "distance_matrix", "generate", "load_config",
    "load_profile", "parse_config", "rayleigh_distance", "read_channel_binary", "rss_map",
    "shipped_profile", "stats", "write_outputs",
]

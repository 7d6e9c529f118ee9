from pathlib import Path

import numpy as np
import pytest

from elaafade import build_ura
from elaafade.geometry import MtGeometry

ROOT = Path(__file__).resolve().parents[1]
FIG3_CONFIG = ROOT / "configs" / "fig3_scene.json"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_array():
    return build_ura(4, 6, 0.5, (0.0, 0.0, 2.0))


@pytest.fixture
def single_mt():
    return MtGeometry([[1.0, -20.0, 1.5]])


def small_config(**overrides):
    cfg = {
        "scenario": "umi_street_canyon",
        "array": {"rows": 8, "cols": 16, "spacing_m": 0.1, "origin": [0.0, 0.0, 2.0]},
        "mts": [{"antennas": [[0.5, -30.0, 1.5], [0.6, -30.0, 1.5]]}],
        "windows": {"d_corr_h_m": 0.3, "d_corr_v_m": 0.3},
        "seed": 7,
    }
    cfg.update(overrides)
    return cfg


ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record(name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")

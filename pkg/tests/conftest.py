import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def constant_path(path_id: str, rate_bps: float, **overrides) -> dict:
    """Path block with a flat CQI-15 trace, i.e. constant capacity = rate_bps."""
    doc = {"path_id": path_id, "peak_rate_bps": rate_bps, "trace": [15]}
    doc.update(overrides)
    return doc


def udp_scenario(mode: str, paths: list, rate_mbps: float, duration_s: float = 2.0,
                 seed: int = 1, **overrides) -> dict:
    doc = {
        "mode": mode,
        "seed": seed,
        "duration_s": duration_s,
        "traffic": {"kind": "udp", "udp_rate_mbps": rate_mbps},
        "paths": paths,
    }
    doc.update(overrides)
    return doc


def tcp_scenario(mode: str, paths: list, duration_s: float = 5.0, seed: int = 1,
                 **overrides) -> dict:
    doc = {
        "mode": mode,
        "seed": seed,
        "duration_s": duration_s,
        "traffic": {"kind": "tcp"},
        "paths": paths,
    }
    doc.update(overrides)
    return doc

from __future__ import annotations

from pathlib import Path

import pytest

from eternal.config import ConfigError, RunConfig, load_config, parse_text

SHIPPED = Path(__file__).resolve().parents[1] / "configs" / "default.cfg"


def test_defaults_round_trip():
    cfg = RunConfig()
    assert parse_text(cfg.to_text()) == cfg
    assert cfg.spatial_grid().spacing == pytest.approx(0.05)
    assert cfg.scheme_config().dt == 1e-3


def test_shipped_config_parses():
    cfg = load_config(SHIPPED)
    assert cfg.heteroclinic.window == (-5.0, 5.0, -10.0, 10.0)
    assert cfg.family.c_list == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


def test_comments_and_overrides():
    cfg = parse_text("# header\n\nscheme.dt = 0.002  # finer\nseed = 3\nheteroclinic.window = -1, 1, -2, 2\n")
    assert cfg.scheme.dt == 0.002 and cfg.seed == 3
    assert cfg.heteroclinic.window == (-1.0, 1.0, -2.0, 2.0)
    assert cfg.grid == RunConfig().grid


def test_hash_tracks_content():
    a, b = RunConfig(), parse_text("seed = 1\n")
    assert a.hash() == RunConfig().hash() and a.hash() != b.hash()


@pytest.mark.parametrize("text", [
    "grid.M = 3\n",
    "mesh.N = 3\n",
    "color = red\n",
    "grid.N = 1200\n",
    "grid.N = abc\n",
    "scheme.theta = 0.2\n",
    "scheme.dt = 1.0\n",
    "family.c_list = 0.0, 1.0\n",
    "heteroclinic.window = 1, 0, -1, 1\n",
    "heteroclinic.window = 0, 1\n",
    "heteroclinic.window = 0, 1, -40, 40\n",
    "tolerances.anchor_tol = 0\n",
    "seed = -1\n",
    "grid.N = 11\ngrid.N = 13\n",
    "just some words\n",
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_text(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.cfg")

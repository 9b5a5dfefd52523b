from __future__ import annotations

import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import toy  # noqa: E402


@pytest.fixture(scope="session")
def _toy_template(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy-template")
    toy.build_workspace(root)
    return root


@pytest.fixture
def toy_ws(_toy_template, tmp_path):
    """A fresh copy of the ingested toy workspace; returns the config path."""
    import yaml

    ws = tmp_path / "ws"
    shutil.copytree(_toy_template, ws)
    cfg = ws / "config.yaml"
    cfg.write_text(yaml.safe_dump(toy.config_mapping(ws)), encoding="utf-8")
    return cfg

from __future__ import annotations

from pathlib import Path

import pytest

from soundvi.model import load_model, normalize

MODELS = Path(__file__).resolve().parent.parent / "models"


def fig(n: int):
    return normalize(load_model(MODELS / f"fig{n}.json"))


@pytest.fixture
def models_dir() -> Path:
    return MODELS

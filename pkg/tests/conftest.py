from pathlib import Path

import numpy as np
import pytest

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def paper_default_text() -> str:
    return (CONFIG_DIR / "paper_default.cfg").read_text()


@pytest.fixture(scope="session")
def default32_text() -> str:
    return (CONFIG_DIR / "default32.cfg").read_text()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)

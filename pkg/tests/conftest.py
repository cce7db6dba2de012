import sys
from pathlib import Path

import pytest

from ofilab import parse_ticks

sys.path.insert(0, str(Path(__file__).resolve().parent))

DATA_DIR = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


@pytest.fixture(scope="session")
def ticks_10k():
    return parse_ticks(DATA_DIR / "ticks_10k.csv")


@pytest.fixture(scope="session")
def ticks_1k():
    return parse_ticks(DATA_DIR / "ticks_1k.csv")

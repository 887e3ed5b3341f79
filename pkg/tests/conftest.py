import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture
def datadir() -> Path:
    return Path(__file__).resolve().parent / "data"

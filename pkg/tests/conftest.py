import os

import pytest

os.environ.setdefault("MPLBACKEND", "Agg")


@pytest.fixture
def seed():
    return 20240611

from pathlib import Path

import pytest

from hclimits.dataio import read_dataset

DATA_DIR = Path(__file__).parent / "data"
TARONE_CSV = DATA_DIR / "tarone_ta1537.csv"


@pytest.fixture(scope="session")
def tarone():
    """66 historical control groups, 3 petri dishes each."""
    return read_dataset(TARONE_CSV)

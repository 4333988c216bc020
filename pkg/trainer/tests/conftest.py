import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from synth_util import make_honest_csv


@pytest.fixture(scope="session")
def honest_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "honest.csv"
    return make_honest_csv(path, meters=5, days=24, seed=3)  # 120 meter-days

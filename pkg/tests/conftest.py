import random

import pytest

from privgrid.crypto import system_params


@pytest.fixture(scope="session")
def params():
    return system_params()


@pytest.fixture()
def rng():
    return random.Random(0xC0FFEE)

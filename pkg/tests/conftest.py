import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from histocbir.fixtures import make_synthetic_fixture


@pytest.fixture()
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    """The bundled synthetic dataset, generated once per test session."""
    out = tmp_path_factory.mktemp("fixture")
    return make_synthetic_fixture(out)

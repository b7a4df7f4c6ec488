from pathlib import Path

import numpy as np
import pytest

from losswalk import prepare_problem

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def iris_csv():
    return DATA_DIR / "iris.csv"


@pytest.fixture(scope="session")
def iris_problem(iris_csv):
    """(spec, split) for the iris benchmark with a fixed split seed."""
    return prepare_problem("iris", iris_csv, split_seed=42)


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)

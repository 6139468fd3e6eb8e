import numpy as np
import pytest

from flowoct.dataset_io import BinaryDataset


@pytest.fixture
def two_points():
    return BinaryDataset.from_arrays(np.array([[0], [0]]), np.array([0, 1]))

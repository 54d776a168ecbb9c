import numpy as np
import pytest

from latentsim.embedding import parse_model

TOY_MODEL_TEXT = "2 3\ncountry -0.25 0.5 0.75\nnation -0.23 0.51 0.6\n"
V_COUNTRY = [-0.25, 0.5, 0.75]
V_NATION = [-0.23, 0.51, 0.6]


@pytest.fixture
def toy_model():
    return parse_model(TOY_MODEL_TEXT)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

import numpy as np
import pytest

from qalam.data import split_holdout, synthetic_glyphs


@pytest.fixture(scope="session")
def glyph_dataset():
    return synthetic_glyphs(per_class=200, seed=7)


@pytest.fixture(scope="session")
def glyph_split(glyph_dataset):
    """(train, held-out) at the standard 10% stratified holdout."""
    return split_holdout(glyph_dataset, fraction=0.1, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(0)

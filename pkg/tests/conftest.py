import os

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_collection_modifyitems(config, items):
    if os.environ.get("COPULABOOST_HIGHDIM") == "1":
        return
    skip = pytest.mark.skip(reason="opt-in: set COPULABOOST_HIGHDIM=1")
    for item in items:
        if "highdim" in item.keywords:
            item.add_marker(skip)


def fd(f, x, h=1e-5):
    """Central finite difference of ``f`` at ``x``."""
    return (f(x + h) - f(x - h)) / (2.0 * h)

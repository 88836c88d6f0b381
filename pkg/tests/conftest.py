import pytest

from uprdd.instance import make_instance


@pytest.fixture
def chain3():
    """0 -> 1 -> 2, unit transits, bottleneck second arc, one buffer at 1."""
    return make_instance(
        storage=[2, 1, 2],
        arcs=[(0, 1, 1, 2), (1, 2, 1, 1)],
        commodities=[(0, 2), (0, 2)],
        horizon=4,
    )


@pytest.fixture
def bufferless3():
    """0 -> 1 -> 2 with no storage at the middle node."""
    return make_instance(
        storage=[2, 0, 2],
        arcs=[(0, 1, 1, 1), (1, 2, 1, 1)],
        commodities=[(0, 2), (0, 2)],
        horizon=4,
    )


@pytest.fixture
def parallel_routes4():
    """0 -> 3 direct (transit 5) and via 1 -> 2 (3 + 3)."""
    return make_instance(
        storage=[1, 1, 1, 1],
        arcs=[(0, 3, 5, 1), (0, 1, 3, 1), (1, 3, 3, 1)],
        commodities=[(0, 3)],
        horizon=8,
    )

import pytest

from coclab.torus import LinearToral, TorusPoint


@pytest.fixture
def cat():
    return LinearToral(2, 1, 1, 1)


@pytest.fixture
def generic_point():
    return TorusPoint(0.2123, 0.5711)

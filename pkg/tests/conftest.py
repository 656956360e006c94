import pytest

from qrdyn.global_map import build_maps


@pytest.fixture(scope="session")
def build():
    """One full construction shared by the whole suite."""
    return build_maps(resolution=128, chart_resolution=48,
                      lprime_samples=20000, seed=0, validate=True)


@pytest.fixture(scope="session")
def gmap(build):
    return build.g


@pytest.fixture(scope="session")
def fmap(build):
    return build.f

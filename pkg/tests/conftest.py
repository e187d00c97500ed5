import pytest

from slotbragg import photonics


@pytest.fixture(scope="session")
def index_model():
    """Frozen calibrated model; calibration itself is covered separately."""
    return photonics.default_index_model()


@pytest.fixture(scope="session")
def benchmark_emitter():
    return photonics.emitter_preset("rt_benchmark")


@pytest.fixture(scope="session")
def benchmark_geometry():
    return photonics.preset_geometry("rt_benchmark")

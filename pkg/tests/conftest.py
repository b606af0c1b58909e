import numpy as np
import pytest

from miisac import CarrierSpec, CoilSpec, FrameSpec, MediumModel, NoiseModel

# reference parameter set used across the suite: 0.15 m coils with 20
# turns at 10 kHz / 1 kHz bandwidth, 100-symbol 1 W frames, 290 K front end


@pytest.fixture
def coil():
    return CoilSpec(radius_m=0.15, turns=20)


@pytest.fixture
def single_coil():
    return CoilSpec(radius_m=0.15, turns=20, normal=(0.0, 0.0, 1.0))


@pytest.fixture
def carrier():
    return CarrierSpec(frequency_hz=10e3, bandwidth_hz=1e3)


@pytest.fixture
def medium():
    return MediumModel(conductivity_s_per_m=0.0)


@pytest.fixture
def seawater():
    return MediumModel(conductivity_s_per_m=4.0)


@pytest.fixture
def frame_spec():
    return FrameSpec(n_symbols=100, tx_power_w=1.0)


@pytest.fixture
def ideal_noise():
    return NoiseModel(bandwidth_hz=1e3)


@pytest.fixture
def practical_noise():
    return NoiseModel(bandwidth_hz=1e3, noise_figure_db=6.0, insertion_loss_db=3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)

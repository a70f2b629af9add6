import numpy as np
import pytest

from analog_chain import AnalogCalibration
from config import load_config
from energy_model import EnergyConfig
from mac_engine import AdcConfig, EngineConfig, KernelInput, MacJob
from sc_codec import CodecConfig


@pytest.fixture
def codec():
    return CodecConfig()


@pytest.fixture
def cal():
    return AnalogCalibration()


@pytest.fixture
def engine_cfg():
    return EngineConfig()


@pytest.fixture
def hires_cfg():
    """Engine with a 16-bit ADC, fine enough to resolve single counts."""
    return EngineConfig(adc=AdcConfig(bits=16))


@pytest.fixture
def energy():
    return EnergyConfig()


@pytest.fixture
def run_config():
    return load_config()


def single_pair_job(cfg, activation, weight, tap=0, feature_map=0):
    """A job that is all zeros except one (activation, weight) tap."""
    maps = []
    for m in range(cfg.feature_map_count):
        activations = [0] * cfg.taps
        weights = [0] * cfg.taps
        if m == feature_map:
            activations[tap] = activation
            weights[tap] = weight
        maps.append(KernelInput.from_signed(activations, weights, cfg.codec))
    return MacJob(tuple(maps))


def uniform_job(cfg, activation, weight):
    """Every tap of every map carries the same signed pair."""
    kernel = KernelInput.from_signed([activation] * cfg.taps, [weight] * cfg.taps, cfg.codec)
    return MacJob((kernel,) * cfg.feature_map_count)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_image(path, image, levels=11):
    channels, height, width = image.shape
    lines = [f"{channels} {height} {width} {levels}"]
    lines += [" ".join(map(str, row)) for plane in image for row in plane]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_weights(path, kernels, bias, levels=4):
    lines = [f"{kernels.shape[0]} 5 5 {levels}"]
    for kernel, b in zip(kernels, bias):
        lines += [" ".join(map(str, row)) for row in kernel]
        lines.append(str(b))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

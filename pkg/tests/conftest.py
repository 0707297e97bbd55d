import numpy as np
import pytest

from cdiqa.image import ImageBuffer
from cdiqa.synth import synth_image


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture(scope="session")
def ref_image():
    """Structured 128x128 grayscale test image."""
    return synth_image(7, 128, 128)


@pytest.fixture(scope="session")
def rgb_image():
    return synth_image(11, 96, 96, channels=3)


def random_image(rng, height, width, channels=1):
    return ImageBuffer(rng.random((channels, height, width)))

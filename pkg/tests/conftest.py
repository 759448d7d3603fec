import numpy as np
import pytest

from splatzip.core import GaussianSet
from splatzip.synth import constant_image, natural_image


@pytest.fixture(scope="session")
def img64():
    return natural_image(64, 64, seed=11)


@pytest.fixture(scope="session")
def img96x80():
    return natural_image(96, 80, seed=12)


@pytest.fixture(scope="session")
def gray_image():
    return constant_image(48, 48, 0.5)


def random_gaussian_set(
    rng: np.random.Generator,
    n: int,
    height: int,
    width: int,
    scale_range=(0.8, 2.5),
    color_range=(0.1, 0.9),
) -> GaussianSet:
    """A generic random scene, parameters away from clamp boundaries."""
    return GaussianSet(
        means=rng.uniform([2.0, 2.0], [width - 2.0, height - 2.0], (n, 2)),
        log_scales=np.log(rng.uniform(*scale_range, (n, 2))),
        thetas=rng.uniform(0.0, 2.0 * np.pi, n),
        colors=rng.uniform(*color_range, (n, 3)),
    )

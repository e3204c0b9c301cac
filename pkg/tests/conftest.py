"""Shared test fixtures: small deterministic images and pairs."""

from __future__ import annotations

import numpy as np
import pytest

from vipatch import ImagePair


def random_plane(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(height, width))


def random_rgb(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(height, width, 3))


def random_pair(rng: np.random.Generator, height: int = 48, width: int = 64) -> ImagePair:
    return ImagePair(visible=random_rgb(rng, height, width), infrared=random_plane(rng, height, width))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_pair(rng: np.random.Generator) -> ImagePair:
    return random_pair(rng)

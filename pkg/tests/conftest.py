import numpy as np
import pytest

from patvcm.baseline import PROFILES
from patvcm.scenes import SceneParams, generate_scene
from patvcm.taskmodels import ToyTaskModels


@pytest.fixture(scope="session")
def models():
    return ToyTaskModels()


@pytest.fixture(scope="session")
def default_profile():
    return PROFILES["default"]


@pytest.fixture(scope="session")
def scene_cache():
    cache: dict = {}

    def make(seed: int, params: SceneParams = SceneParams()):
        key = (seed, params)
        if key not in cache:
            cache[key] = generate_scene(seed, params)
        return cache[key]

    return make


@pytest.fixture(scope="session")
def small_clip(scene_cache):
    clip, _gt = scene_cache(11)
    return clip


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)

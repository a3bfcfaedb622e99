import os

import numpy as np
import pytest

from fovea import attention
from fovea import dataio
from fovea import glimpse
from fovea import settings
from fovea import tensor as T
from fovea import visual_core

# small enough that a forward episode takes milliseconds
TINY_LAYERS = "conv:4:3:1:1,relu,pool:max:4:4,fc:8,relu"
TINY_PATCH = 16


def pytest_addoption(parser):
    parser.addoption("-E", action="store", metavar="NAME", help="only run tests matching the environment NAME.")


def pytest_configure(config):
    # register an additional marker
    config.addinivalue_line("markers", "env(name): mark test to run only on named environment")


def pytest_runtest_setup(item):
    envnames = [mark.args[0] for mark in item.iter_markers(name="env")]
    if envnames and item.config.getoption("-E") not in envnames:
        pytest.skip("test requires env in %r" % envnames)


@pytest.fixture(autouse=True)
def no_output_env(monkeypatch):
    monkeypatch.delenv(settings.OUTPUT_DIR_ENV, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_tiny_model(resolutions=glimpse.RESOLUTIONS, glimpses=2, num_classes=3, seed=0, frozen=True):
    """
    A complete attention model with a randomly initialized (not pretrained)
    core.
    """
    init = np.random.default_rng(seed)
    params = T.ParameterSet()
    core = visual_core.VisualCore(visual_core.CoreConfig(TINY_LAYERS, 1, 1, TINY_PATCH), params).init_params(init)
    if frozen:
        core.freeze()
    ladder = glimpse.PatchLadder(0.25, 2.0, resolutions, TINY_PATCH)
    config = attention.ModelConfig(glimpses, resolutions, deck1_size=6, deck2_size=5, fusion_width=7,
                                   location_width=4, num_classes=num_classes, context_pool=4)
    return attention.AttentionModel(config, core, ladder, params).init_params(init)


@pytest.fixture
def tiny_model():
    return make_tiny_model()


@pytest.fixture
def workdir(tmpdir):
    return str(tmpdir)


def write_tree(root, images_by_class):
    """
    Write {class name: [C x H x W arrays]} as a PGM tree.
    """
    for (name, images) in images_by_class.items():
        os.makedirs(os.path.join(root, name))
        for (index, image) in enumerate(images):
            dataio.write_pnm(os.path.join(root, name, "%03d.pgm" % index), image)
    return root

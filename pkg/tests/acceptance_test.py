"""
Long-running checks of the whole system.  Run with `pytest -E acceptance`.

The trend experiment needs real digit files: set FOVEA_DIGITS_IMAGES and
FOVEA_DIGITS_LABELS to an IDX image/label pair.
"""

import os

import numpy as np
import pytest

from fovea import dataio
from fovea import evaluation
from fovea import glimpse
from fovea import optimizer
from fovea import policy
from fovea import serializer
from fovea import settings
from fovea import tensor as T
from fovea import training
from fovea import visual_core
from fovea.api import FoveaAPI
from tests.cli.fovea_cli_test import write_digits
from tests.conftest import TINY_LAYERS, TINY_PATCH, make_tiny_model

pytestmark = pytest.mark.env("acceptance")


def test_every_parameter_gradient():
    """
    Test: every parameter of an assembled model passes the finite difference check
    """
    model = make_tiny_model(seed=2, frozen=False)
    for bias in ["fuse.b", "rnn.b1", "loc.b"]:
        model.params[bias].value[...] = 0.1
    assert model.params.num_values() < 20000
    image = np.random.default_rng(0).uniform(size=(1, 24, 24))
    forced = policy.ForcedPolicy([(0.25, -0.5), (-0.75, 0.5)])

    def build(params):
        episode = model.forward_episode(image, forced, np.random.default_rng(1))
        return episode.graph, T.softmax_cross_entropy(episode.scores.logits, [2])[0]

    for name in model.names():
        assert T.finite_diff_check(build, model.params, name, entries=20) < 1e-4, name

    heads = visual_core.MultiHead(model.core, 3).init_params(np.random.default_rng(3))
    ladder = glimpse.PatchLadder(0.25, 2.0, out_size=TINY_PATCH)
    patches = visual_core.pretraining_batch([image, image[:, ::-1]], ladder, np.random.default_rng(4))

    def build_heads(params):
        (graph, total, _) = heads.loss(patches, [0, 1])
        return graph, total

    for name in model.core.names() + ["head.%s.w" % head for head in visual_core.HEADS]:
        assert T.finite_diff_check(build_heads, model.params, name, entries=20) < 1e-4, name


def test_glimpse_geometry_exact():
    rng = np.random.default_rng(0)
    ladder = glimpse.PatchLadder(0.25, 2.0)
    for _ in range(1000):
        (height, width) = (int(rng.integers(8, 300)), int(rng.integers(8, 300)))
        loc = (float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)))
        boxes = glimpse.compute_patch_boxes(height, width, loc, ladder)
        sides = [box.size for box in boxes]
        assert sides[1] == 2 * sides[0] and sides[2] == 2 * sides[1]
        # the low side equals the short side only when that is a multiple of 4;
        # other sizes round to within 2 pixels of it
        if min(height, width) % 4 == 0:
            assert sides[2] == min(height, width)
        else:
            assert abs(sides[2] - min(height, width)) <= 2
        assert len(set(box.center() for box in boxes)) == 1


def test_noise_confined_off_image():
    rng = np.random.default_rng(1)
    for _ in range(200):
        size = int(rng.integers(8, 40))
        image = rng.uniform(0.3, 0.7, size=(1, size, size))
        top = int(rng.integers(-size, size))
        left = int(rng.integers(-size, size))
        side = int(rng.integers(1, size))
        box = glimpse.Box(top, left, side)
        patch = glimpse.extract_resize_patch(image, box, side, rng)
        for r in range(side):
            for c in range(side):
                (row, col) = (top + r, left + c)
                if 0 <= row < size and 0 <= col < size:
                    assert patch[0, r, c] == image[0, row, col]


def test_context_isolation_random():
    rng = np.random.default_rng(5)
    for trial in range(100):
        model = make_tiny_model(seed=trial)
        image = rng.uniform(size=(1, 24, 24))
        forced = policy.ForcedPolicy([tuple(rng.uniform(-1, 1, size=2)) for _ in range(2)])
        logits = []
        for _ in range(2):
            context = rng.uniform(size=(1, TINY_PATCH, TINY_PATCH))
            episode = model.forward_episode(image, forced, np.random.default_rng(trial), context_patch=context)
            logits.append(episode.scores.logits.value.tobytes())
        assert logits[0] == logits[1]


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_bandit_converges(seed):
    target = np.random.default_rng(100 + seed).uniform(-0.5, 0.5, size=2)
    (mean, distances) = training.train_bandit(target, 0.2, 0.05, 5000, np.random.default_rng(seed))
    # reaching means the mean gets within 0.05 of the target at some step; at
    # this sigma and rate it then wanders around 0.1 rather than settling
    assert distances.min() < 0.05
    assert distances[-1000:].mean() < 0.2


def test_metric_exactness():
    report = evaluation.mean_accuracy([0] + [0] * 9, [0] + [1] * 9, 2)
    assert report.ma == 0.5
    assert abs(report.accuracy - 0.1) < 1e-15
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 10, size=500)
    predictions = rng.integers(0, 10, size=500)
    expected = evaluation.mean_accuracy(predictions, labels, 10).ma
    for _ in range(100):
        order = rng.permutation(500)
        assert evaluation.mean_accuracy(predictions[order], labels[order], 10).ma == expected


def test_random_predictions_near_chance():
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(10), 1000)
    report = evaluation.mean_accuracy(rng.integers(0, 10, size=10000), labels, 10)
    assert abs(report.ma - 0.1) < 0.03


def test_single_towers_beat_chance():
    """
    Test: after pretraining each single-tower head is well above chance
    """
    rng = np.random.default_rng(0)
    levels = (0.15, 0.5, 0.85)
    images = [np.clip(levels[n % 3] + rng.normal(0, 0.03, size=(1, 24, 24)), 0, 1) for n in range(60)]
    dataset = dataio.LabeledImageSet(images, [n % 3 for n in range(60)], ["dim", "mid", "bright"])
    params = T.ParameterSet()
    core = visual_core.VisualCore(visual_core.CoreConfig(TINY_LAYERS, 1, 1, TINY_PATCH), params).init_params(rng)
    heads = visual_core.MultiHead(core, 3).init_params(rng)
    ladder = glimpse.PatchLadder(0.25, 2.0, out_size=TINY_PATCH)
    sgd = optimizer.MomentumSGD(params, 0.05, 0.9)
    visual_core.pretrain(heads, dataset, ladder, sgd, 15, 10, rng)
    accuracies = visual_core.head_accuracies(heads, dataset, ladder, rng)
    for head in ("high", "medium", "low"):
        assert accuracies[head] > 2.0 / 3.0, accuracies


def tiny_run_config(root, out, **changes):
    values = dict(train_dir=os.path.join(root, "synth", "train"), eval_dir=os.path.join(root, "synth", "test"),
                  core_checkpoint=os.path.join(root, "core.ckpt"), output_dir=out, core_layers=TINY_LAYERS,
                  patch_size=TINY_PATCH, deck1_size=6, deck2_size=5, fusion_width=7, location_width=4, canvas=24,
                  clutter_size=4, clutter_count=2, glimpses=2, batch_size=5, epochs=2, seed=9)
    values.update(changes)
    return settings.RunConfig(**values)


def test_runs_are_reproducible(tmpdir):
    """
    Test: identical configurations in different directories give identical files,
    and the core is untouched by attention training
    """
    root = str(tmpdir)
    (ipath, lpath) = write_digits(root)
    api = FoveaAPI()
    base = tiny_run_config(root, root, digits_images=ipath, digits_labels=lpath,
                           synth_dir=os.path.join(root, "synth"), synth_train_per_class=2,
                           synth_test_per_class=1, pretrain_count=20, pretrain_epochs=1,
                           pretrain_batch_size=10)
    api.synth(base)
    api.pretrain(base)

    reports = []
    for name in ("a", "b"):
        config = tiny_run_config(root, os.path.join(root, name))
        api.train(config)
        api.evaluate(config)
        reports.append((open(config.checkpoint_path, "rb").read(),
                        open(os.path.join(config.output_dir, "report.txt")).read()))
    assert reports[0] == reports[1]

    core = serializer.load(os.path.join(root, "core.ckpt"))
    model = serializer.load(os.path.join(root, "a", "model.ckpt"))
    for (name, value) in core.tensors.items():
        if name.startswith("core."):
            assert model.tensors[name].tobytes() == value.tobytes()


@pytest.mark.skipif(not os.environ.get("FOVEA_DIGITS_IMAGES") or not os.environ.get("FOVEA_DIGITS_LABELS"),
                    reason="needs FOVEA_DIGITS_IMAGES and FOVEA_DIGITS_LABELS")
def test_more_glimpses_help(tmpdir):
    """
    Test: on cluttered digits, high resolution only, three glimpses beat one
    glimpse by 3 points and a fixed center glimpse by 5 points
    """
    root = str(tmpdir)
    api = FoveaAPI()
    base = settings.RunConfig(digits_images=os.environ["FOVEA_DIGITS_IMAGES"],
                              digits_labels=os.environ["FOVEA_DIGITS_LABELS"],
                              synth_dir=os.path.join(root, "synth"), output_dir=root)
    api.synth(base)
    api.pretrain(base)

    scores = {"one": [], "three": [], "center": []}
    for seed in (1, 2, 3):
        for glimpses in (1, 3):
            out = os.path.join(root, "seed%d_%d" % (seed, glimpses))
            config = base.copy(train_dir=os.path.join(root, "synth", "train"),
                               eval_dir=os.path.join(root, "synth", "test"),
                               core_checkpoint=base.core_checkpoint_path, output_dir=out,
                               resolutions="high", glimpses=glimpses, seed=seed)
            api.train(config)
            scores["one" if glimpses == 1 else "three"].append(api.evaluate(config).ma)
            if glimpses == 3:
                scores["center"].append(api.evaluate(config.copy(policy="center")).ma)
    means = dict((key, float(np.mean(values))) for (key, values) in scores.items())
    assert means["three"] >= means["one"] + 0.03, means
    assert means["three"] >= means["center"] + 0.05, means

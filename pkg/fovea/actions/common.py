"""
Building models from a RunConfig and moving them in and out of checkpoints;
shared by every action.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

import numpy as np

from fovea import attention
from fovea import glimpse
from fovea import serializer
from fovea import settings
from fovea import tensor as T
from fovea import visual_core
from fovea.cexceptions import CX, FileNotFoundException


def make_rng(config, *stream):
    """
    The run's generator; extra integers select an independent stream.
    """
    return np.random.default_rng([config.seed] + list(stream))


def ladder(config, resolutions=None):
    return glimpse.PatchLadder(config.base_fraction, config.scale_factor,
                               resolutions or config.resolutions, config.patch_size)


def core_config(config, in_channels=1):
    return visual_core.CoreConfig(config.core_layers, config.first_conv_stride, in_channels, config.patch_size)


def model_config(config, num_classes):
    return attention.ModelConfig(config.glimpses, config.resolutions, config.deck1_size, config.deck2_size,
                                 config.fusion_width, config.location_width, num_classes, config.context_pool)


def check_snapshot(config, checkpoint, keys, path):
    """
    The checkpoint must have been made with the same values for keys.
    """
    stored = checkpoint.config
    for key in keys:
        if key not in stored:
            raise CX("%s: checkpoint does not record '%s'" % (path, key))
        fresh = config.copy(**{key: settings.format_value(stored[key], settings.DEFAULTS[key][1])})
        if fresh.to_dict()[key] != config.to_dict()[key]:
            raise CX("%s was made with %s=%s, this run has %s=%s"
                     % (path, key, settings.format_value(stored[key], settings.DEFAULTS[key][1]),
                        key, settings.format_value(config.to_dict()[key], settings.DEFAULTS[key][1])))


def require_file(path, what):
    if not os.path.isfile(path):
        raise FileNotFoundException("%s not found: %s" % (what, path))
    return path


def load_core(config, params, logger=None):
    """
    Add the pretrained core.* tensors to params and freeze them.

    :return: (VisualCore, core checkpoint)
    """
    path = require_file(config.core_checkpoint_path, "core checkpoint")
    checkpoint = serializer.load(path)
    if checkpoint.kind != "core":
        raise CX("%s is a %s checkpoint, expected a core checkpoint" % (path, checkpoint.kind))
    check_snapshot(config, checkpoint, settings.CORE_KEYS, path)
    in_channels = int(checkpoint.config.get("in_channels", 1))
    core = visual_core.VisualCore(core_config(config, in_channels), params)
    tensors = dict((n, v) for (n, v) in checkpoint.tensors.items() if n.startswith(core.prefix + "."))
    if not tensors:
        raise CX("%s holds no core tensors" % path)
    params.update(tensors)
    core.freeze()
    if logger is not None:
        logger.info("loaded frozen core from %s (%d values)" % (path, params.num_values(core.prefix + ".")))
    return core, checkpoint


def build_model(config, core, num_classes, rng):
    params = core.params
    model = attention.AttentionModel(model_config(config, num_classes), core, ladder(config), params)
    return model.init_params(rng)


def model_checkpoint(config, model, optimizer, baseline, rng, epoch, class_names):
    tensors = dict(model.params.state())
    tensors.update(optimizer.state())
    for name in list(tensors):
        if name.startswith("head."):
            del tensors[name]
    snapshot = config.snapshot()
    snapshot["class_names"] = list(class_names)
    snapshot["in_channels"] = model.core.config.in_channels
    return serializer.Checkpoint(tensors, snapshot, rng.bit_generator.state, epoch,
                                 baseline.state(), kind="full")


def load_model(config, logger=None):
    """
    Rebuild a trained attention model from config.checkpoint_path.

    :return: (AttentionModel, checkpoint)
    """
    path = require_file(config.checkpoint_path, "model checkpoint")
    checkpoint = serializer.load(path)
    if checkpoint.kind != "full":
        raise CX("%s is a %s checkpoint, expected a trained model" % (path, checkpoint.kind))
    check_snapshot(config, checkpoint, settings.MODEL_KEYS, path)
    class_names = checkpoint.config.get("class_names")
    if not class_names:
        raise CX("%s does not record its class names" % path)
    params = T.ParameterSet()
    params.update(checkpoint.param_tensors())
    core = visual_core.VisualCore(core_config(config, int(checkpoint.config.get("in_channels", 1))), params)
    core.freeze()
    model = attention.AttentionModel(model_config(config, len(class_names)), core, ladder(config), params)
    missing = [n for n in model.names() if n not in params]
    if missing:
        raise CX("%s is missing tensors: %s" % (path, ", ".join(missing)))
    for name in model.names():
        if params[name].shape != model.shapes()[name]:
            raise CX("%s: tensor '%s' has shape %s, model expects %s"
                     % (path, name, list(params[name].shape), list(model.shapes()[name])))
    if logger is not None:
        logger.info("loaded model from %s (epoch %d)" % (path, checkpoint.epoch))
    return model, checkpoint


def check_classes(dataset, class_names, where):
    if list(dataset.class_names) != list(class_names):
        raise CX("%s has classes %s, the model was trained on %s"
                 % (where, ",".join(dataset.class_names), ",".join(class_names)))

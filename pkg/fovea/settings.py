"""
Run configuration: a flat table of typed keys, read from a `key = value`
file and overridden from the command line.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

from fovea import utils
from fovea import validate
from fovea.cexceptions import CX, FileNotFoundException
from fovea.visual_core import DEFAULT_LAYERS

OUTPUT_DIR_ENV = "FOVEA_OUTPUT_DIR"

# key: [default, type, help]
DEFAULTS = {
    # data
    "digits_images": ["", "str", "IDX image file of source digits"],
    "digits_labels": ["", "str", "IDX label file of source digits"],
    "synth_dir": ["", "str", "directory the synthesized corpus is written to"],
    "train_dir": ["", "str", "class-per-directory training images"],
    "eval_dir": ["", "str", "class-per-directory evaluation images"],
    "output_dir": ["fovea-out", "str", "directory for checkpoints, logs and reports"],
    "core_checkpoint": ["", "str", "pretrained core checkpoint (default <output_dir>/core.ckpt)"],
    "checkpoint": ["", "str", "attention model checkpoint (default <output_dir>/model.ckpt)"],
    # synthesis
    "canvas": [100, "int", "side of a synthesized canvas"],
    "clutter_count": [4, "int", "clutter pieces per canvas"],
    "clutter_size": [8, "int", "side of one clutter piece"],
    "placement": ["random", "str", "digit placement: random or centered"],
    "synth_train_per_class": [500, "int", "synthesized training canvases per class"],
    "synth_test_per_class": [100, "int", "synthesized test canvases per class"],
    # glimpses and core
    "resolutions": [["high", "medium", "low"], "list", "resolution subset of every glimpse"],
    "glimpses": [3, "int", "glimpses per episode"],
    "patch_size": [96, "int", "side every patch is resized to"],
    "base_fraction": [0.25, "float", "high resolution box side over the short image side"],
    "scale_factor": [2.0, "float", "box side ratio between ladder levels"],
    "core_layers": [DEFAULT_LAYERS, "str", "visual core layers, e.g. conv:16:7:1:3,relu,pool:max:2:2,fc:128"],
    "first_conv_stride": [1, "int", "stride of the first convolution (1 or 2)"],
    # recurrent model
    "deck1_size": [256, "int", "width of the classification deck"],
    "deck2_size": [256, "int", "width of the location deck"],
    "fusion_width": [256, "int", "width of the fused glimpse/location vector"],
    "location_width": [128, "int", "width of the location embedding"],
    "context_pool": [4, "int", "average pooling window on the context patch"],
    # pretraining
    "pretrain_count": [2000, "int", "centered canvases synthesized for pretraining"],
    "pretrain_epochs": [5, "int", "pretraining epochs"],
    "pretrain_batch_size": [32, "int", "pretraining batch size"],
    "pretrain_learning_rate": [0.01, "float", "pretraining learning rate"],
    "pretrain_jitter": [0.1, "float", "max center jitter of pretraining patches"],
    # training
    "learning_rate": [0.01, "float", "attention training learning rate"],
    "momentum": [0.9, "float", "SGD momentum"],
    "sample_std": [0.1, "float", "standard deviation of sampled locations"],
    "baseline_decay": [0.9, "float", "decay of the reward moving average"],
    "epochs": [10, "int", "attention training epochs"],
    "batch_size": [16, "int", "episodes per update"],
    "mirror": [True, "bool", "random horizontal reflection in training"],
    "val_fraction": [0.0, "float", "held out share of train_dir (0 trains on everything)"],
    "resume": [False, "bool", "continue from the checkpoint's epoch"],
    "seed": [1, "int", "seed of the run's random generator"],
    # evaluation
    "policy": ["greedy", "str", "evaluation locations: greedy or center"],
    "viz_count": [8, "int", "images visualized by viz"],
    "grid_resolutions": [["high", "medium", "low", "high+medium", "high+medium+low"], "list",
                         "resolution subsets of the grid, members joined by +"],
    "grid_glimpses": [["1", "2", "3"], "list", "glimpse counts of the grid"],
    "baseline_epochs": [5, "int", "epochs of the whole-image baseline head"],
    "log_level": ["info", "str", "debug, info, warning or error"],
}

# required keys per subcommand
REQUIRED = {
    "synth": ["digits_images", "digits_labels", "synth_dir"],
    "pretrain": ["digits_images", "digits_labels"],
    "train": ["train_dir"],
    "eval": ["eval_dir"],
    "viz": ["eval_dir"],
    "grid": ["train_dir", "eval_dir"],
    "baseline": ["train_dir", "eval_dir"],
}

SUBCOMMANDS = ("synth", "pretrain", "train", "eval", "viz", "grid", "baseline")

# keys that never change a result; left out of checkpoint snapshots
RUN_KEYS = ("digits_images", "digits_labels", "synth_dir", "train_dir", "eval_dir", "output_dir",
            "core_checkpoint", "checkpoint", "resume", "log_level", "viz_count")

# keys a trained model's parameter shapes and behavior depend on
MODEL_KEYS = ("resolutions", "glimpses", "patch_size", "base_fraction", "scale_factor", "core_layers",
              "first_conv_stride", "deck1_size", "deck2_size", "fusion_width", "location_width", "context_pool")

CORE_KEYS = ("core_layers", "first_conv_stride", "patch_size")


def fields():
    """
    (key, default, type, help) sorted by key; the CLI builds its options
    from this.
    """
    return [(key, DEFAULTS[key][0], DEFAULTS[key][1], DEFAULTS[key][2]) for key in sorted(DEFAULTS)]


def format_value(value, kind):
    if kind == "bool":
        return "1" if value else "0"
    elif kind == "list":
        return ",".join(value)
    elif kind == "float":
        return repr(float(value))
    return str(value)


class RunConfig(object):

    def __init__(self, **values):
        """
        Constructor.
        """
        self._clear()
        if OUTPUT_DIR_ENV in os.environ:
            self.output_dir = os.environ[OUTPUT_DIR_ENV]
        for (key, value) in values.items():
            self.set(key, value)

    def _clear(self):
        object.__setattr__(self, "__dict__", {})
        for key in DEFAULTS:
            default = DEFAULTS[key][0]
            self.__dict__[key] = list(default) if isinstance(default, list) else default

    def set(self, name, value):
        return self.__setattr__(name, value)

    def __setattr__(self, name, value):
        if name not in DEFAULTS:
            raise CX("unknown configuration key '%s'" % name)
        kind = DEFAULTS[name][1]
        try:
            if kind == "str":
                value = str(value).strip()
            elif kind == "int":
                value = int(str(value).strip())
            elif kind == "float":
                value = float(str(value).strip())
            elif kind == "bool":
                value = utils.input_boolean(str(value).strip())
            elif kind == "list":
                value = utils.input_string_or_list(value)
        except (ValueError, CX):
            raise CX("invalid %s value for '%s': %r" % (kind, name, value))
        self.__dict__[name] = value

    def __getattr__(self, name):
        raise AttributeError("no configuration key '%s'" % name)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self.__eq__(other)

    def to_dict(self):
        return dict((key, self.__dict__[key]) for key in DEFAULTS)

    def snapshot(self):
        return dict((key, self.__dict__[key]) for key in DEFAULTS if key not in RUN_KEYS)

    def copy(self, **changes):
        other = RunConfig()
        other.__dict__.update(self.to_dict())
        for (key, value) in changes.items():
            other.set(key, value)
        return other

    def to_string(self):
        return "".join("%s = %s\n" % (key, format_value(self.__dict__[key], DEFAULTS[key][1]))
                       for key in sorted(DEFAULTS))

    # ------------------------------------------------------------------

    def path(self, name, default_name):
        value = self.__dict__[name]
        return value if value else os.path.join(self.output_dir, default_name)

    @property
    def core_checkpoint_path(self):
        return self.path("core_checkpoint", "core.ckpt")

    @property
    def checkpoint_path(self):
        return self.path("checkpoint", "model.ckpt")

    def check(self, subcommand):
        """
        Required keys and value ranges for one subcommand.
        """
        if subcommand not in REQUIRED:
            raise CX("unknown subcommand '%s'" % subcommand)
        for key in REQUIRED[subcommand]:
            if not self.__dict__[key]:
                raise CX("missing required key '%s' for %s" % (key, subcommand))
        validate.resolutions(self.resolutions)
        validate.positive("glimpses", self.glimpses)
        validate.non_negative("epochs", self.epochs)
        validate.unit_interval("val_fraction", self.val_fraction)
        validate.unit_interval("momentum", self.momentum)
        validate.policy(self.policy)
        for subset in self.grid_resolutions:
            validate.resolutions(subset.split("+"))
        for count in self.grid_glimpses:
            if not count.isdigit() or int(count) < 1:
                raise CX("invalid grid glimpse count '%s'" % count)
        return self

    def echo(self, subcommand):
        utils.mkdir(self.output_dir)
        path = os.path.join(self.output_dir, "%s.conf" % subcommand)
        with open(path, "w") as fh:
            fh.write(self.to_string())
        return path


def read_config_file(path):
    """
    :return: list of (key, value) string pairs in file order
    """
    if not os.path.isfile(path):
        raise FileNotFoundException("config file not found: %s" % path)
    pairs = []
    with open(path) as fh:
        for (number, line) in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CX("%s:%d: expected 'key = value', got %r" % (path, number, line))
            (key, value) = line.split("=", 1)
            pairs.append((key.strip().replace("-", "_"), value.strip()))
    return pairs


def parse_config(path=None, overrides=None, subcommand=None):
    """
    File values first, then overrides (a key -> value mapping).  With a
    subcommand the result is also checked for it.
    """
    config = RunConfig()
    if path:
        for (key, value) in read_config_file(path):
            config.set(key, value)
    for (key, value) in (overrides or {}).items():
        config.set(key.replace("-", "_"), value)
    if subcommand is not None:
        config.check(subcommand)
    return config

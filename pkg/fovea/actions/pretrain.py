"""
Multi-head pretraining of the visual core on centered cluttered digits.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

from fovea import clogger
from fovea import dataio
from fovea import glimpse
from fovea import optimizer
from fovea import serializer
from fovea import tensor as T
from fovea import utils
from fovea import visual_core
from fovea.actions import common


class Pretrainer(object):

    def __init__(self, config, logger=None):
        """
        Constructor
        """
        self.config = config
        if logger is None:
            logger = clogger.Logger()
        self.logger = logger

    def corpus(self, base, count, rng):
        c = self.config
        per_class = max(1, count // max(1, len(set(base.labels))))
        sources = dataio.balanced_sources(base, per_class, rng)
        return dataio.synth_cluttered(base, rng, c.canvas, c.clutter_count, c.clutter_size, "centered", sources)

    def run(self):
        c = self.config
        base = dataio.load_idx(c.digits_images, c.digits_labels)
        rng = common.make_rng(c)
        train = self.corpus(base, c.pretrain_count, rng)
        held_out = self.corpus(base, max(1, c.pretrain_count // 5), rng)
        self.logger.info("pretraining on %d centered canvases, %d held out" % (len(train), len(held_out)))

        params = T.ParameterSet()
        core = visual_core.VisualCore(common.core_config(c, train.images[0].shape[0]), params).init_params(rng)
        heads = visual_core.MultiHead(core, train.num_classes).init_params(rng)
        self.logger.info("core: %s" % core.config.describe())
        sgd = optimizer.MomentumSGD(params, c.pretrain_learning_rate, c.momentum)
        ladder = common.ladder(c, glimpse.RESOLUTIONS)
        visual_core.pretrain(heads, train, ladder, sgd, c.pretrain_epochs, c.pretrain_batch_size, rng,
                             logger=self.logger)

        accuracies = visual_core.head_accuracies(heads, held_out, ladder, rng)
        chance = 1.0 / len(set(held_out.labels))
        for (head, accuracy) in accuracies.items():
            self.logger.info("head %s: held-out accuracy %.4f (chance %.4f)" % (head, accuracy, chance))

        utils.mkdir(os.path.dirname(os.path.abspath(c.core_checkpoint_path)), logger=self.logger)
        snapshot = c.snapshot()
        snapshot["in_channels"] = core.config.in_channels
        snapshot["head_accuracy"] = dict(accuracies)
        checkpoint = serializer.Checkpoint(params.state(), snapshot, rng.bit_generator.state, c.pretrain_epochs,
                                           kind="core")
        serializer.save(c.core_checkpoint_path, checkpoint)
        self.logger.info("wrote core checkpoint %s" % c.core_checkpoint_path)
        return accuracies

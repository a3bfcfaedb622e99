"""
Writes the cluttered digit corpus as <synth_dir>/train and <synth_dir>/test
class-per-directory PGM trees.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

from fovea import clogger
from fovea import dataio
from fovea.actions import common


class Synthesizer(object):

    def __init__(self, config, logger=None):
        """
        Constructor
        """
        self.config = config
        if logger is None:
            logger = clogger.Logger()
        self.logger = logger

    def corpus(self, sources, per_class, rng):
        c = self.config
        picked = dataio.balanced_sources(sources, per_class, rng)
        return dataio.synth_cluttered(sources, rng, c.canvas, c.clutter_count, c.clutter_size, c.placement, picked)

    def run(self):
        c = self.config
        base = dataio.load_idx(c.digits_images, c.digits_labels)
        self.logger.info("read %d source digits from %s" % (len(base), c.digits_images))
        # train and test canvases are built around disjoint source digits
        (train_sources, test_sources) = dataio.split_train_val(base, 0.8, c.seed)
        rng = common.make_rng(c)
        written = {}
        for (name, sources, per_class) in (("train", train_sources, c.synth_train_per_class),
                                           ("test", test_sources, c.synth_test_per_class)):
            dataset = self.corpus(sources, per_class, rng)
            root = dataio.write_image_dir(os.path.join(c.synth_dir, name), dataset, logger=self.logger)
            self.logger.info("wrote %d %s canvases to %s" % (len(dataset), name, root))
            written[name] = root
        return written

"""
Visualizes greedy episodes on the first viz_count evaluation images.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

from fovea import clogger
from fovea import dataio
from fovea import policy
from fovea import utils
from fovea import visualize
from fovea.actions import common


class Visualizer(object):

    def __init__(self, config, logger=None):
        """
        Constructor
        """
        self.config = config
        if logger is None:
            logger = clogger.Logger()
        self.logger = logger

    def run(self):
        c = self.config
        (model, checkpoint) = common.load_model(c, logger=self.logger)
        dataset = dataio.load_image_dir(c.eval_dir)
        common.check_classes(dataset, checkpoint.config["class_names"], c.eval_dir)
        out_dir = os.path.join(c.output_dir, "viz")
        utils.mkdir(out_dir, logger=self.logger)
        rng = common.make_rng(c, 2)
        chooser = policy.make_policy(c.policy)
        written = []
        for index in range(min(c.viz_count, len(dataset))):
            episode = model.forward_episode(dataset.images[index], chooser, rng, context_mode="centered")
            correct = episode.scores.predicted() == dataset.labels[index]
            ident = "%04d" % index
            written.extend(visualize.emit_visuals(dataset.images[index], episode, correct, out_dir, ident,
                                                  seed=index, logger=self.logger))
            trace = os.path.join(out_dir, "%s_trace.csv" % ident)
            with open(trace, "w") as fh:
                fh.write(episode.trace_csv(model.config.resolutions))
            written.append(trace)
        self.logger.info("wrote %d files to %s" % (len(written), out_dir))
        return written

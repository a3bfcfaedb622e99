"""
The non-attention baseline: the frozen core sees the whole image shrunk to
one patch, and only a softmax head on top is trained.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

from fovea import clogger
from fovea import dataio
from fovea import evaluation
from fovea import optimizer
from fovea import tensor as T
from fovea import utils
from fovea.actions import common

REPORT = "baseline_report.txt"


class BaselineRunner(object):

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
        train = dataio.load_image_dir(c.train_dir)
        test = dataio.load_image_dir(c.eval_dir)
        common.check_classes(test, train.class_names, c.eval_dir)
        params = T.ParameterSet()
        (core, _) = common.load_core(c, params, logger=self.logger)
        rng = common.make_rng(c)
        head = evaluation.BaselineHead(core, train.num_classes).init_params(rng)
        sgd = optimizer.MomentumSGD(params, c.learning_rate, c.momentum)
        head.train(train, sgd, c.baseline_epochs, c.batch_size, rng, logger=self.logger)
        report = head.evaluate(test)
        utils.mkdir(c.output_dir, logger=self.logger)
        path = report.write(os.path.join(c.output_dir, REPORT))
        self.logger.info("whole-image baseline mA %.4f, report in %s" % (report.ma, path))
        return report

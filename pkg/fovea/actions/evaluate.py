"""
Greedy evaluation of a trained model; writes <output_dir>/report.txt.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

from fovea import clogger
from fovea import dataio
from fovea import evaluation
from fovea import policy
from fovea import utils
from fovea.actions import common

REPORT = "report.txt"


class Evaluator(object):

    def __init__(self, config, logger=None, report_name=REPORT):
        """
        Constructor
        """
        self.config = config
        if logger is None:
            logger = clogger.Logger()
        self.logger = logger
        self.report_name = report_name

    def run(self):
        c = self.config
        (model, checkpoint) = common.load_model(c, logger=self.logger)
        dataset = dataio.load_image_dir(c.eval_dir)
        common.check_classes(dataset, checkpoint.config["class_names"], c.eval_dir)
        (report, predictions) = evaluation.evaluate(model, dataset, common.make_rng(c, 2),
                                                    policy.make_policy(c.policy), logger=self.logger)
        report.config = c.snapshot()
        utils.mkdir(c.output_dir, logger=self.logger)
        path = report.write(os.path.join(c.output_dir, self.report_name))
        self.logger.info("mA %.4f over %d images (plain accuracy %.4f), report in %s"
                         % (report.ma, report.n_evaluated, report.accuracy, path))
        return report

"""
Python API for fovea.  The CLI (and anything else driving a run) goes
through this module.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

from fovea import VERSION
from fovea import clogger
from fovea import settings
from fovea import utils
from fovea.actions import baseline
from fovea.actions import evaluate
from fovea.actions import grid
from fovea.actions import pretrain
from fovea.actions import synth
from fovea.actions import train
from fovea.actions import viz
from fovea.cexceptions import NotImplementedException

RUN_LOG = "fovea.log"


class FoveaAPI(object):

    def __init__(self, logger=None):
        """
        Constructor
        """
        if logger is None:
            logger = clogger.Logger()
        self.logger = logger

    def log(self, msg, args=None, debug=False):
        if args:
            msg = "%s; %s" % (msg, str(args))
        if debug:
            self.logger.debug(msg)
        else:
            self.logger.info(msg)

    def version(self):
        return VERSION

    def settings(self, path=None, overrides=None, subcommand=None):
        return settings.parse_config(path, overrides, subcommand)

    def run_logger(self, config):
        """
        A logger that also writes <output_dir>/fovea.log.
        """
        utils.mkdir(config.output_dir, logger=self.logger)
        logger = clogger.Logger(logfile=os.path.join(config.output_dir, RUN_LOG))
        logger.set_level(config.log_level)
        return logger

    # ==========================================================================

    def synth(self, config, logger=None):
        self.log("synth", [config.synth_dir])
        return synth.Synthesizer(config, logger=logger or self.logger).run()

    def pretrain(self, config, logger=None):
        self.log("pretrain", [config.core_checkpoint_path])
        return pretrain.Pretrainer(config, logger=logger or self.logger).run()

    def train(self, config, logger=None):
        self.log("train", [config.train_dir])
        return train.Trainer(config, logger=logger or self.logger).run()

    def evaluate(self, config, logger=None):
        self.log("eval", [config.eval_dir])
        return evaluate.Evaluator(config, logger=logger or self.logger).run()

    def visualize(self, config, logger=None):
        self.log("viz", [config.eval_dir])
        return viz.Visualizer(config, logger=logger or self.logger).run()

    def grid(self, config, logger=None):
        self.log("grid", [config.train_dir, config.eval_dir])
        return grid.GridRunner(config, logger=logger or self.logger).run()

    def baseline(self, config, logger=None):
        self.log("baseline", [config.train_dir, config.eval_dir])
        return baseline.BaselineRunner(config, logger=logger or self.logger).run()

    # ==========================================================================

    def run(self, subcommand, config, logger=None):
        """
        Dispatch one subcommand by name.
        """
        handlers = {
            "synth": self.synth,
            "pretrain": self.pretrain,
            "train": self.train,
            "eval": self.evaluate,
            "viz": self.visualize,
            "grid": self.grid,
            "baseline": self.baseline,
        }
        if subcommand not in handlers:
            raise NotImplementedException("unknown subcommand '%s' (expected one of %s)",
                                          subcommand, ", ".join(settings.SUBCOMMANDS))
        return handlers[subcommand](config, logger=logger)

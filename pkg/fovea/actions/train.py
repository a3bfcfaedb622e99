"""
Attention training on a class-per-directory image tree, on top of a frozen
pretrained core.  One checkpoint per epoch; `resume` continues from the
last one.

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
from fovea import serializer
from fovea import tensor as T
from fovea import training
from fovea import utils
from fovea.actions import common
from fovea.cexceptions import CX

EPOCH_LOG = "train_log.csv"
EPOCH_HEADER = "epoch,mean_loss,mean_reward,train_mA"


class Trainer(object):

    def __init__(self, config, logger=None):
        """
        Constructor
        """
        self.config = config
        if logger is None:
            logger = clogger.Logger()
        self.logger = logger

    def train_config(self):
        c = self.config
        return training.TrainConfig(c.glimpses, c.resolutions, c.learning_rate, c.momentum, c.sample_std,
                                    c.baseline_decay, c.epochs, c.batch_size, c.seed, c.mirror, "random")

    def datasets(self):
        c = self.config
        dataset = dataio.load_image_dir(c.train_dir)
        if c.val_fraction > 0:
            (train, val) = dataio.split_train_val(dataset, 1.0 - c.val_fraction, c.seed)
            self.logger.info("split %s: %d train, %d validation" % (c.train_dir, len(train), len(val)))
            return train, val
        return dataset, None

    def resume(self, model, sgd, path):
        """
        :return: (RewardBaseline, rng, next epoch)
        """
        checkpoint = serializer.load(path)
        if checkpoint.kind != "full":
            raise CX("%s is a %s checkpoint, cannot resume from it" % (path, checkpoint.kind))
        common.check_snapshot(self.config, checkpoint, [k for k in checkpoint.config if k in self.config.snapshot()
                                                        and k != "epochs"], path)
        serializer.restore_params(model.params, checkpoint, model.names())
        sgd.load_state(checkpoint.optimizer_tensors())
        baseline = training.RewardBaseline.from_state(checkpoint.baseline)
        rng = common.make_rng(self.config)
        rng.bit_generator.state = checkpoint.rng_state
        self.logger.info("resuming %s after epoch %d" % (path, checkpoint.epoch))
        return baseline, rng, checkpoint.epoch + 1

    def run(self):
        c = self.config
        tc = self.train_config()
        (train, val) = self.datasets()
        path = c.checkpoint_path
        utils.mkdir(c.output_dir, logger=self.logger)
        utils.mkdir(os.path.dirname(os.path.abspath(path)), logger=self.logger)

        params = T.ParameterSet()
        (core, _) = common.load_core(c, params, logger=self.logger)
        core_sum = utils.params_checksum(params, core.names())
        rng = common.make_rng(c)
        model = common.build_model(c, core, train.num_classes, rng)
        sgd = optimizer.MomentumSGD(params, tc.learning_rate, tc.momentum)
        baseline = training.RewardBaseline(tc.baseline_decay)
        start = 1
        if c.resume and os.path.isfile(path):
            (baseline, rng, start) = self.resume(model, sgd, path)
        self.logger.info("training %d glimpse(s) at %s on %d images, epochs %d..%d"
                         % (tc.glimpses, ",".join(tc.resolutions), len(train), start, tc.epochs))

        log_path = os.path.join(c.output_dir, EPOCH_LOG)
        if start == 1 or not os.path.isfile(log_path):
            with open(log_path, "w") as fh:
                fh.write(EPOCH_HEADER + "\n")
        history = []
        for epoch in range(start, tc.epochs + 1):
            stats = training.train_epoch(model, train, tc, sgd, baseline, rng, epoch=epoch, logger=self.logger)
            history.append(stats)
            with open(log_path, "a") as fh:
                fh.write(stats.csv_line() + "\n")
            message = "epoch %d: loss=%.4f reward=%.4f train mA=%.4f" % (
                epoch, stats.mean_loss, stats.mean_reward, stats.train_ma)
            if val is not None:
                # a private stream, so validation never shifts the training rng
                (report, _) = evaluation.evaluate(model, val, common.make_rng(c, 1, epoch))
                message += " val mA=%.4f" % report.ma
            self.logger.info(message)
            serializer.save(path, common.model_checkpoint(c, model, sgd, baseline, rng, epoch, train.class_names))

        if start > tc.epochs or not history:
            serializer.save(path, common.model_checkpoint(c, model, sgd, baseline, rng, max(start - 1, 0),
                                                          train.class_names))
        if utils.params_checksum(params, core.names()) != core_sum:
            utils.die(self.logger, "visual core parameters changed during training")
        self.logger.info("wrote %s" % path)
        return history

"""
The resolution subset x glimpse count experiment grid: one train and one
evaluation per cell, summarized in <output_dir>/grid.csv.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import os

from fovea import clogger
from fovea import utils
from fovea.actions.evaluate import Evaluator
from fovea.actions.train import Trainer

GRID_HEADER = "resolutions,glimpses,mA"


class GridRunner(object):

    def __init__(self, config, logger=None):
        """
        Constructor
        """
        self.config = config
        if logger is None:
            logger = clogger.Logger()
        self.logger = logger

    def cells(self):
        for subset in self.config.grid_resolutions:
            for count in self.config.grid_glimpses:
                yield subset, int(count)

    def cell_config(self, subset, glimpses):
        cell_dir = os.path.join(self.config.output_dir, "grid", "%s_%d" % (subset, glimpses))
        return self.config.copy(resolutions=subset.replace("+", ","), glimpses=glimpses, output_dir=cell_dir,
                                checkpoint="", core_checkpoint=self.config.core_checkpoint_path)

    def run(self):
        utils.mkdir(self.config.output_dir, logger=self.logger)
        rows = []
        for (subset, glimpses) in self.cells():
            cell = self.cell_config(subset, glimpses)
            utils.mkdir(cell.output_dir, logger=self.logger)
            self.logger.info("grid cell %s x %d" % (subset, glimpses))
            Trainer(cell, logger=self.logger).run()
            report = Evaluator(cell, logger=self.logger).run()
            rows.append("%s,%d,%r" % (subset, glimpses, report.ma))
        path = os.path.join(self.config.output_dir, "grid.csv")
        with open(path, "w") as fh:
            fh.write("\n".join([GRID_HEADER] + rows) + "\n")
        self.logger.info("wrote %s" % path)
        return rows

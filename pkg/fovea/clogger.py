"""
Thin wrapper around the standard logging package.  The root logger is
configured once from a fileConfig-style file; a Logger created with a
logfile gets its own non-propagating logger so per-run logs stay separate.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import logging
import logging.config
import os
import sys

LOGGING_CONFIG = os.environ.get(
    "FOVEA_LOGGING_CONFIG",
    os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "fovea", "logging_config.conf"))

LOG_FORMAT = "%(asctime)s - %(levelname)s | %(message)s"

_configured = False


def _configure():
    global _configured
    if _configured:
        return
    if os.path.isfile(LOGGING_CONFIG):
        logging.config.fileConfig(LOGGING_CONFIG, disable_existing_loggers=False)
    else:
        logging.basicConfig(stream=sys.stderr, level=logging.INFO, format=LOG_FORMAT)
    _configured = True


class Logger(object):
    def __init__(self, logfile=None):
        _configure()
        if not logfile:
            self.logger = logging.getLogger("fovea")
        else:
            self.logger = logging.getLogger("fovea.%s" % id(self))
            self.logger.propagate = False
            self.logger.setLevel(logging.getLogger("fovea").getEffectiveLevel())
            handler = logging.FileHandler(filename=logfile)
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            self.logger.addHandler(handler)
            # mirror to the console as well
            for parent_handler in logging.getLogger().handlers:
                self.logger.addHandler(parent_handler)
        self.logfile = logfile

    def set_level(self, level):
        self.logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    def close(self):
        if self.logfile:
            for handler in list(self.logger.handlers):
                if isinstance(handler, logging.FileHandler):
                    handler.close()
                self.logger.removeHandler(handler)

    def error(self, msg):
        self.logger.error(msg)

    def warning(self, msg):
        self.logger.warning(msg)

    def info(self, msg):
        self.logger.info(msg)

    def debug(self, msg):
        self.logger.debug(msg)


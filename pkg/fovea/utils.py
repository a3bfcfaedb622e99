"""
Misc helper functions for fovea

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import errno
import hashlib
import math
import os
import sys
import traceback

from fovea.cexceptions import CX
from fovea import clogger


# all logging from utils.die goes to the main log even if there
# is another log.
main_logger = None  # the logger will be lazy loaded later


def die(logger, msg):
    global main_logger
    if main_logger is None:
        main_logger = clogger.Logger()

    # log the exception once in the per-run log or the main
    # log if no run log is open.
    try:
        raise CX(msg)
    except CX:
        if logger is not None:
            log_exc(logger)
        else:
            log_exc(main_logger)

    # now re-raise it so the error can fail the operation
    raise CX(msg)


def log_exc(logger):
    """
    Log an exception.
    """
    (t, v, tb) = sys.exc_info()
    logger.info("Exception occured: %s" % t)
    logger.info("Exception value: %s" % v)
    logger.info("Exception Info:\n%s" % "\n".join(traceback.format_list(traceback.extract_tb(tb))))


def input_string_or_list(options):
    """
    Accepts a delimited list of stuff or a list, but always returns a list.
    """
    if options is None or options == "":
        return []
    elif isinstance(options, (list, tuple)):
        return [str(x).strip() for x in options]
    elif isinstance(options, str):
        tokens = options.replace(" ", ",").split(",")
        return [t for t in tokens if t != ""]
    else:
        raise CX("invalid input type")


def input_boolean(value):
    value = str(value)
    if value.lower() in ["true", "1", "on", "yes", "y"]:
        return True
    elif value.lower() in ["false", "0", "off", "no", "n", ""]:
        return False
    raise CX("not a boolean: %s" % value)


def round_half_up(value):
    """
    Round to the nearest integer, halves going up (towards +inf), the same
    on every platform.
    """
    return int(math.floor(value + 0.5))


def mkdir(path, mode=0o755, logger=None):
    try:
        os.makedirs(path, mode)
    except OSError as oe:
        # already exists (no constant for 17?)
        if not oe.errno == errno.EEXIST:
            if logger is not None:
                log_exc(logger)
            raise CX("Error creating %s" % path)


def params_checksum(params, names=None):
    """
    SHA-256 over the named parameter values, in sorted name order.

    :param params: a tensor.ParameterSet
    :param names: restrict to these names (default: all)
    """
    digest = hashlib.sha256()
    for name in sorted(names if names is not None else params.names()):
        digest.update(name.encode("utf-8"))
        digest.update(params[name].value.tobytes())
    return digest.hexdigest()

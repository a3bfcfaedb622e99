"""
Input validators.  Each returns the normalized value or raises CX.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import re

from fovea.cexceptions import CX

RESOLUTION_ORDER = ("high", "medium", "low")
EVAL_POLICIES = ("greedy", "center")
RE_LAYER = re.compile(r'^(conv:\d+:\d+:\d+:\d+|pool:(max|avg):\d+:\d+|fc:\d+|relu|tanh)$')


def resolutions(value):
    """
    Validate a resolution subset and put it in ladder order.

    @param: list or comma separated str
    @returns: tuple of names, high -> low
    """
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    names = list(value)
    if not names:
        raise CX("resolution subset must not be empty")
    for name in names:
        if name not in RESOLUTION_ORDER:
            raise CX("unknown resolution '%s' (expected a subset of %s)" % (name, ",".join(RESOLUTION_ORDER)))
    if len(set(names)) != len(names):
        raise CX("duplicate resolution in %s" % ",".join(names))
    return tuple(r for r in RESOLUTION_ORDER if r in names)


def positive(name, value):
    if not value > 0:
        raise CX("%s must be positive, got %s" % (name, value))
    return value


def non_negative(name, value):
    if value < 0:
        raise CX("%s must be >= 0, got %s" % (name, value))
    return value


def open_fraction(name, value):
    if not 0.0 < value < 1.0:
        raise CX("%s must be in (0, 1), got %s" % (name, value))
    return value


def unit_interval(name, value, closed_top=False):
    if value < 0.0 or value > 1.0 or (value == 1.0 and not closed_top):
        raise CX("%s must be in [0, 1%s, got %s" % (name, "]" if closed_top else ")", value))
    return value


def policy(value):
    if value not in EVAL_POLICIES:
        raise CX("evaluation policy must be one of %s, got '%s'" % (", ".join(EVAL_POLICIES), value))
    return value


def layer_specs(value):
    """
    Validate a core layer string such as
    "conv:16:7:1:3,relu,pool:max:2:2,fc:128,relu".

    @returns: list of tokens
    """
    tokens = [t.strip() for t in value.split(",") if t.strip()] if isinstance(value, str) else list(value)
    if not tokens:
        raise CX("core layer list is empty")
    for token in tokens:
        if not RE_LAYER.match(token):
            raise CX("invalid core layer spec '%s'" % token)
    if not tokens[0].startswith("conv:"):
        raise CX("core must start with a conv layer, got '%s'" % tokens[0])
    fcs = [t for t in tokens if t.startswith("fc:")]
    if not fcs:
        raise CX("core must end in at least one fc layer")
    return tokens

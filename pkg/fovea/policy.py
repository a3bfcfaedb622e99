"""
Glimpse location policies.  A policy turns the emitted estimate l_hat
(a 1 x 2 tensor on the episode graph) into the location actually used.
"""

import math

import numpy as np

from fovea import glimpse
from fovea import tensor as T
from fovea.cexceptions import CX


class LocationSample(object):
    """
    One sampled location: the clamped location, the pre-clamp draw and its
    Gaussian log-density.
    """

    def __init__(self, location, raw, log_density, sigma):
        self.location = location
        self.raw = raw
        self.log_density = log_density
        self.sigma = sigma


def sample_location(l_hat, sigma, rng):
    """
    l = clamp(l_hat + eps), eps ~ N(0, sigma^2 I).  The log-density is the
    unclamped one; sigma == 0 returns l_hat unchanged and no density.
    """
    if sigma < 0:
        raise CX("sample_std must be >= 0, got %s" % sigma)
    mean = np.asarray(l_hat, dtype=np.float64).reshape(2)
    raw = mean + rng.normal(0.0, 1.0, size=2) * sigma
    if sigma > 0:
        eps = raw - mean
        log_density = -float(eps.dot(eps)) / (2.0 * sigma * sigma) - math.log(2.0 * math.pi * sigma * sigma)
    else:
        log_density = None
    return LocationSample(glimpse.Location.clamped(raw[0], raw[1]), raw, log_density, sigma)


def log_density_gradient(raw, l_hat, sigma):
    """
    d/d l_hat of log N(raw | l_hat, sigma^2 I) = (raw - l_hat) / sigma^2.
    """
    return (np.asarray(raw, dtype=np.float64) - np.asarray(l_hat, dtype=np.float64)) / (sigma * sigma)


class GreedyPolicy(object):
    name = "greedy"
    context_mode = "centered"

    def choose(self, graph, l_hat, step, rng):
        return l_hat, None


class SampledPolicy(object):
    name = "sampled"
    context_mode = "random"

    def __init__(self, sigma):
        if not sigma > 0:
            raise CX("sample_std must be positive, got %s" % sigma)
        self.sigma = float(sigma)

    def choose(self, graph, l_hat, step, rng):
        sample = sample_location(l_hat.value, self.sigma, rng)
        eps = graph.constant((sample.raw - l_hat.value.reshape(2)).reshape(1, 2))
        # the noise is a constant: d l / d l_hat is 1 inside the box, 0 where clamped
        location = T.clip(T.add(l_hat, eps), -1.0, 1.0)
        return location, sample


class CenterPolicy(object):
    """
    Every glimpse at the image center, whatever the model emits.
    """
    name = "center"
    context_mode = "centered"

    def choose(self, graph, l_hat, step, rng):
        return graph.constant(glimpse.CENTER.as_array().reshape(1, 2)), None


class ForcedPolicy(object):
    """
    A fixed location sequence, one per glimpse.
    """
    name = "forced"
    context_mode = "centered"

    def __init__(self, locations):
        self.locations = [glimpse.Location.clamped(l[0], l[1]) for l in locations]

    def choose(self, graph, l_hat, step, rng):
        if step > len(self.locations):
            raise CX("forced policy has %d locations, step %d requested" % (len(self.locations), step))
        return graph.constant(self.locations[step - 1].as_array().reshape(1, 2)), None


def make_policy(name, sigma=None):
    if name == "greedy":
        return GreedyPolicy()
    elif name == "sampled":
        return SampledPolicy(sigma)
    elif name == "center":
        return CenterPolicy()
    raise CX("unknown location policy '%s'" % name)

"""
Stochastic gradient descent with momentum over a ParameterSet.
"""

from collections import OrderedDict

import numpy as np

from fovea.cexceptions import CX


class MomentumSGD(object):
    """
    v <- momentum * v - lr * g;  p <- p + v.  Frozen parameters are skipped
    and keep no velocity.
    """

    def __init__(self, params, learning_rate, momentum=0.9):
        if learning_rate < 0:
            raise CX("learning rate must be >= 0, got %s" % learning_rate)
        if not 0.0 <= momentum < 1.0:
            raise CX("momentum must be in [0, 1), got %s" % momentum)
        self.params = params
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = OrderedDict()

    def step(self, scale=1.0):
        """
        Apply one update from the accumulated gradients, multiplied by
        scale (1/batch size when gradients were summed over a batch).
        """
        for name in self.params.trainable():
            param = self.params[name]
            if name not in self.velocity:
                self.velocity[name] = np.zeros_like(param.value)
            v = self.velocity[name]
            v *= self.momentum
            v -= self.learning_rate * scale * param.grad
            if self.learning_rate != 0.0:
                param.value += v

    def state(self):
        return OrderedDict(("opt.%s" % n, v) for n, v in self.velocity.items())

    def load_state(self, tensors):
        for key, value in tensors.items():
            if key.startswith("opt."):
                name = key[len("opt."):]
                if name not in self.params:
                    raise CX("optimizer state for unknown parameter '%s'" % name)
                if tuple(value.shape) != self.params[name].shape:
                    raise CX("optimizer state shape mismatch for '%s'" % name)
                self.velocity[name] = np.array(value, dtype=np.float64)

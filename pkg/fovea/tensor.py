"""
Dense float64 tensors with a reverse-mode tape.

A Graph records every operation applied to its tensors in creation order,
which is a valid topological order; backward() sweeps it in reverse.
Trainable values live in a ParameterSet that outlives any single Graph:
a graph binds parameters by name, and backward() adds into the
set's gradient accumulators.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

from collections import OrderedDict

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from fovea.cexceptions import CX


class Tensor(object):

    def __init__(self, value, graph=None, node_id=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.graph = graph
        self.node_id = node_id
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return tuple(self.value.shape)

    @property
    def data(self):
        """
        Values in row-major order.
        """
        return self.value.ravel()

    def item(self):
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        return "Tensor(shape=%s, node=%s)" % (list(self.shape), self.node_id)


class Node(object):
    __slots__ = ("op", "inputs", "output", "grad", "backward_fn", "param_name", "stop_gradient")

    def __init__(self, op, inputs, output, backward_fn=None, param_name=None, stop_gradient=False):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.grad = None
        self.backward_fn = backward_fn
        self.param_name = param_name
        self.stop_gradient = stop_gradient


class Parameter(object):

    def __init__(self, name, value):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.frozen = False

    @property
    def shape(self):
        return tuple(self.value.shape)


class ParameterSet(object):
    """
    Named trainable tensors with gradient accumulators and freeze flags.
    """

    def __init__(self):
        self._params = OrderedDict()

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        try:
            return self._params[name]
        except KeyError:
            raise CX("unknown parameter '%s'" % name)

    def __len__(self):
        return len(self._params)

    def names(self, prefix=None):
        if prefix is None:
            return list(self._params.keys())
        return [n for n in self._params if n.startswith(prefix)]

    def add(self, name, value):
        if name in self._params:
            raise CX("parameter '%s' already defined" % name)
        self._params[name] = Parameter(name, value)
        return self._params[name]

    def glorot(self, name, shape, fan_in, fan_out, rng):
        """
        Uniform in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
        """
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, rng.uniform(-limit, limit, size=shape))

    def zeros(self, name, shape):
        return self.add(name, np.zeros(shape))

    def freeze(self, prefix=""):
        for name in self.names(prefix):
            self._params[name].frozen = True

    def unfreeze(self, prefix=""):
        for name in self.names(prefix):
            self._params[name].frozen = False

    def trainable(self):
        return [n for n, p in self._params.items() if not p.frozen]

    def zero_grad(self):
        for p in self._params.values():
            p.grad[...] = 0.0

    def grad(self, name):
        return self[name].grad

    def num_values(self, prefix=None):
        return sum(self._params[n].value.size for n in self.names(prefix))

    def update(self, other):
        """
        Copy parameters from another set (or a name->array dict), adding
        names that are missing.
        """
        items = other._params.items() if isinstance(other, ParameterSet) else other.items()
        for name, value in items:
            value = value.value if isinstance(value, Parameter) else value
            if name in self._params:
                if self._params[name].shape != tuple(np.shape(value)):
                    raise CX("shape mismatch for '%s': %s vs %s"
                             % (name, list(self._params[name].shape), list(np.shape(value))))
                self._params[name].value[...] = value
            else:
                self.add(name, value)

    def state(self):
        return OrderedDict((n, p.value) for n, p in self._params.items())


class Graph(object):

    def __init__(self, params=None):
        self.nodes = []
        self.params = params
        self._bound = {}

    def _add(self, node):
        node.output.graph = self
        node.output.node_id = len(self.nodes)
        self.nodes.append(node)
        return node.output

    def constant(self, value):
        return self._add(Node("constant", [], Tensor(value)))

    def parameter(self, name):
        """
        Bind a parameter of the set; repeated calls return the same node,
        which is how towers share one set of weights.
        """
        if name in self._bound:
            return self._bound[name]
        if self.params is None:
            raise CX("graph has no parameter set")
        param = self.params[name]
        out = Tensor(param.value, requires_grad=not param.frozen)
        tensor = self._add(Node("parameter", [], out, param_name=name, stop_gradient=param.frozen))
        self._bound[name] = tensor
        return tensor

    def record(self, op, inputs, value, backward_fn):
        requires_grad = any(t.requires_grad for t in inputs)
        out = Tensor(value, requires_grad=requires_grad)
        node = Node(op, [t.node_id for t in inputs], out, backward_fn if requires_grad else None)
        return self._add(node)

    def ops(self):
        return [n.op for n in self.nodes]


def _graph_of(*tensors):
    for t in tensors:
        if isinstance(t, Tensor) and t.graph is not None:
            return t.graph
    raise CX("operation needs at least one tensor bound to a graph")


def _needs(*tensors):
    return tuple(t.requires_grad for t in tensors)


# ---------------------------------------------------------------------------
# operations

def fully_connected(x, weights, bias=None):
    """
    x . weights + bias for a B x I input and I x O weights; bias may be
    omitted for the recurrent terms.
    """
    inputs = [x, weights] + ([bias] if bias is not None else [])
    graph = _graph_of(*inputs)
    if (x.value.ndim != 2 or weights.value.ndim != 2 or x.shape[1] != weights.shape[0]
            or (bias is not None and (bias.value.ndim != 1 or weights.shape[1] != bias.shape[0]))):
        raise CX("fully_connected shape mismatch: input %s, weights %s, bias %s"
                 % (list(x.shape), list(weights.shape), list(bias.shape) if bias is not None else None))
    xv, wv = x.value, weights.value
    out = xv.dot(wv)
    if bias is not None:
        out = out + bias.value

    def backward(g, needs):
        grads = (g.dot(wv.T) if needs[0] else None,
                 xv.T.dot(g) if needs[1] else None,
                 g.sum(axis=0) if len(needs) > 2 and needs[2] else None)
        return grads[:len(needs)]

    return graph.record("fully_connected", inputs, out, backward)


def conv2d(x, kernels, stride=1, padding=0, bias=None):
    """
    Cross-correlation with zero padding.  x is B x C x H x W, kernels
    K x C x kh x kw; output spatial size floor((H + 2p - kh) / stride) + 1.
    """
    inputs = [x, kernels] + ([bias] if bias is not None else [])
    graph = _graph_of(*inputs)
    if x.value.ndim != 4 or kernels.value.ndim != 4:
        raise CX("conv2d expects 4-d input and kernels, got %s and %s" % (list(x.shape), list(kernels.shape)))
    if stride < 1 or padding < 0:
        raise CX("conv2d stride must be >= 1 and padding >= 0 (stride %s, padding %s)" % (stride, padding))
    (b, c, h, w) = x.shape
    (k, kc, kh, kw) = kernels.shape
    if kc != c:
        raise CX("conv2d channel mismatch: input %s, kernels %s" % (list(x.shape), list(kernels.shape)))
    if kh > h + 2 * padding or kw > w + 2 * padding:
        raise CX("conv2d kernel %dx%d larger than padded input %dx%d" % (kh, kw, h + 2 * padding, w + 2 * padding))
    if bias is not None and bias.shape != (k,):
        raise CX("conv2d bias shape %s does not match %d kernels" % (list(bias.shape), k))

    kv = kernels.value
    xp = np.pad(x.value, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    (ho, wo) = windows.shape[2:4]
    out = np.tensordot(windows, kv, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.value[None, :, None, None]

    def backward(g, needs):
        dx = dk = db = None
        if needs[0]:
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(g, kv[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
                    dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += contrib
            dx = dxp[:, :, padding:padding + h, padding:padding + w]
        if needs[1]:
            dk = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        if len(needs) > 2 and needs[2]:
            db = g.sum(axis=(0, 2, 3))
        return (dx, dk, db)[:len(needs)]

    return graph.record("conv2d", inputs, out, backward)


def pool(x, kind, window, stride):
    graph = _graph_of(x)
    if x.value.ndim != 4:
        raise CX("pool expects a 4-d input, got %s" % list(x.shape))
    if kind not in ("max", "avg"):
        raise CX("unknown pool kind '%s'" % kind)
    (b, c, h, w) = x.shape
    if window > h or window > w:
        raise CX("pool window %d larger than input %dx%d" % (window, h, w))
    windows = sliding_window_view(x.value, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    (ho, wo) = windows.shape[2:4]
    flat = windows.reshape(b, c, ho, wo, window * window)
    if kind == "max":
        idx = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    else:
        idx = None
        out = flat.mean(axis=-1)

    def backward(g, needs):
        dx = np.zeros_like(x.value)
        for i in range(window):
            for j in range(window):
                if kind == "max":
                    contrib = g * (idx == i * window + j)
                else:
                    contrib = g / float(window * window)
                dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += contrib
        return (dx,)

    return graph.record("pool_%s" % kind, [x], out, backward)


def activation(x, kind):
    graph = _graph_of(x)
    if kind == "relu":
        xv = x.value
        out = np.maximum(xv, 0.0)

        def backward(g, needs):
            return (g * (xv > 0),)
    elif kind == "tanh":
        out = np.tanh(x.value)

        def backward(g, needs):
            return (g * (1.0 - out * out),)
    else:
        raise CX("unknown activation '%s'" % kind)
    return graph.record(kind, [x], out, backward)


def concat(inputs, axis=0):
    graph = _graph_of(*inputs)
    if not inputs:
        raise CX("concat of an empty list")
    ndim = inputs[0].value.ndim
    axis = axis % ndim
    ref = list(inputs[0].shape)
    for t in inputs[1:]:
        other = list(t.shape)
        if len(other) != ndim or other[:axis] + other[axis + 1:] != ref[:axis] + ref[axis + 1:]:
            raise CX("concat shape conflict on axis %d: %s vs %s" % (axis, ref, other))
    out = np.concatenate([t.value for t in inputs], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in inputs])

    def backward(g, needs):
        grads = []
        for n in range(len(inputs)):
            index = [slice(None)] * ndim
            index[axis] = slice(bounds[n], bounds[n + 1])
            grads.append(g[tuple(index)] if needs[n] else None)
        return tuple(grads)

    return graph.record("concat", list(inputs), out, backward)


def slice_axis(x, axis, start, stop):
    graph = _graph_of(x)
    index = [slice(None)] * x.value.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = x.value[index]

    def backward(g, needs):
        dx = np.zeros_like(x.value)
        dx[index] = g
        return (dx,)

    return graph.record("slice", [x], out, backward)


def flatten(x):
    graph = _graph_of(x)
    shape = x.shape

    def backward(g, needs):
        return (g.reshape(shape),)

    return graph.record("flatten", [x], x.value.reshape(shape[0], -1), backward)


def add(a, b):
    graph = _graph_of(a, b)
    if a.shape != b.shape:
        raise CX("add shape mismatch: %s vs %s" % (list(a.shape), list(b.shape)))

    def backward(g, needs):
        return (g, g)

    return graph.record("add", [a, b], a.value + b.value, backward)


def scale(x, factor):
    graph = _graph_of(x)

    def backward(g, needs):
        return (g * factor,)

    return graph.record("scale", [x], x.value * factor, backward)


def clip(x, low, high):
    """
    Clamp into [low, high]; gradient passes only where the value was
    already inside the range.
    """
    graph = _graph_of(x)
    xv = x.value
    inside = (xv >= low) & (xv <= high)

    def backward(g, needs):
        return (g * inside,)

    return graph.record("clip", [x], np.clip(xv, low, high), backward)


def stop_gradient(x):
    graph = _graph_of(x)
    node = Node("stop_gradient", [x.node_id], Tensor(x.value), stop_gradient=True)
    return graph._add(node)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """
    Mean over the batch of -log softmax(logits)[label].

    :return: (scalar loss tensor, probabilities array)
    """
    graph = _graph_of(logits)
    if logits.value.ndim != 2:
        raise CX("softmax_cross_entropy expects B x K logits, got %s" % list(logits.shape))
    (b, k) = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != b:
        raise CX("got %d labels for a batch of %d" % (labels.shape[0], b))
    if np.any(labels < 0) or np.any(labels >= k):
        raise CX("label out of range [0, %d): %s" % (k, labels.tolist()))
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    probs = np.exp(log_probs)
    loss = -log_probs[np.arange(b), labels].mean()
    onehot = np.zeros_like(probs)
    onehot[np.arange(b), labels] = 1.0

    def backward(g, needs):
        return (g * (probs - onehot) / b,)

    return graph.record("softmax_cross_entropy", [logits], np.array(loss), backward), probs


# ---------------------------------------------------------------------------
# differentiation

def backward(graph, loss, seeds=None):
    """
    Reverse sweep from a scalar loss.  Parameter gradients are added to the
    graph's ParameterSet accumulators; stop-gradient nodes pass nothing on.

    :param seeds: optional {tensor: array} of extra upstream gradients,
                  added before the sweep (used for score-function terms)
    :return: the ParameterSet
    """
    if loss.value.size != 1:
        raise CX("backward needs a scalar loss, got shape %s" % list(loss.shape))
    for node in graph.nodes:
        node.grad = None
    graph.nodes[loss.node_id].grad = np.ones_like(loss.value)
    start = loss.node_id
    for tensor, grad in (seeds or {}).items():
        node = graph.nodes[tensor.node_id]
        grad = np.asarray(grad, dtype=np.float64).reshape(tensor.shape)
        node.grad = grad.copy() if node.grad is None else node.grad + grad
        start = max(start, tensor.node_id)

    for node_id in range(start, -1, -1):
        node = graph.nodes[node_id]
        if node.grad is None or node.stop_gradient:
            continue
        if node.op == "parameter":
            graph.params[node.param_name].grad += node.grad
            continue
        if node.backward_fn is None:
            continue
        inputs = [graph.nodes[i] for i in node.inputs]
        needs = tuple(n.output.requires_grad and not n.stop_gradient for n in inputs)
        grads = node.backward_fn(node.grad, needs)
        for inp, grad, need in zip(inputs, grads, needs):
            if not need or grad is None:
                continue
            inp.grad = grad.copy() if inp.grad is None else inp.grad + grad
    return graph.params


def finite_diff_check(build_loss, params, name, h=1e-5, entries=None, seed=0, analytic=None):
    """
    Compare the analytic gradient of one parameter against central
    differences.

    :param build_loss: callable(params) -> (graph, scalar loss tensor)
    :param entries: check only this many randomly chosen entries
    :param analytic: use this gradient instead of running backward
    :return: max over checked entries of |a - n| / max(1e-8, |a| + |n|)
    """
    if h <= 0:
        raise CX("finite difference step must be positive, got %s" % h)
    param = params[name]
    if analytic is None:
        params.zero_grad()
        (graph, loss) = build_loss(params)
        backward(graph, loss)
        analytic = param.grad.copy()
        params.zero_grad()
    analytic = np.asarray(analytic).reshape(param.shape)

    flat = param.value.reshape(-1)
    indices = np.arange(flat.size)
    if entries is not None and entries < flat.size:
        indices = np.random.default_rng(seed).choice(flat.size, size=entries, replace=False)

    worst = 0.0
    for index in indices:
        original = flat[index]
        flat[index] = original + h
        plus = build_loss(params)[1].item()
        flat[index] = original - h
        minus = build_loss(params)[1].item()
        flat[index] = original
        numeric = (plus - minus) / (2.0 * h)
        a = analytic.reshape(-1)[index]
        err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, err)
    return worst

"""
Convolutional glimpse network shared by every resolution tower, plus the
multi-head pretraining that keeps each tower useful on its own.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

from collections import OrderedDict, namedtuple

import numpy as np

from fovea import glimpse
from fovea import tensor as T
from fovea import validate
from fovea.cexceptions import CX

DEFAULT_LAYERS = "conv:16:7:1:3,relu,pool:max:2:2,conv:32:3:1:1,relu,pool:max:2:2,fc:128,relu"

HEADS = ("high", "medium", "low", "all")

LayerSpec = namedtuple("LayerSpec", ["kind", "args"])


class CoreConfig(object):

    def __init__(self, layers=DEFAULT_LAYERS, first_conv_stride=1, in_channels=1, input_size=96):
        if first_conv_stride not in (1, 2):
            raise CX("first_conv_stride must be 1 or 2, got %s" % first_conv_stride)
        self.first_conv_stride = int(first_conv_stride)
        self.in_channels = int(in_channels)
        self.input_size = int(input_size)
        self.layers = []
        first = True
        for token in validate.layer_specs(layers):
            parts = token.split(":")
            if parts[0] == "conv":
                (channels, kernel, stride, padding) = [int(p) for p in parts[1:]]
                if first:
                    stride = self.first_conv_stride
                    first = False
                self.layers.append(LayerSpec("conv", (channels, kernel, stride, padding)))
            elif parts[0] == "pool":
                self.layers.append(LayerSpec("pool", (parts[1], int(parts[2]), int(parts[3]))))
            elif parts[0] == "fc":
                self.layers.append(LayerSpec("fc", (int(parts[1]),)))
            else:
                self.layers.append(LayerSpec("act", (parts[0],)))
        self.shapes = self._infer_shapes()
        self.feature_dim = self.shapes[-1][0]
        validate.positive("feature_dim", self.feature_dim)

    def _infer_shapes(self):
        shape = (self.in_channels, self.input_size, self.input_size)
        shapes = []
        for spec in self.layers:
            if spec.kind == "conv":
                if len(shape) != 3:
                    raise CX("conv layer after fc layer")
                (channels, kernel, stride, padding) = spec.args
                side = (shape[1] + 2 * padding - kernel) // stride + 1
                if shape[1] + 2 * padding < kernel or side < 1:
                    raise CX("conv %dx%d leaves no spatial extent on a %dx%d input" % (kernel, kernel, shape[1], shape[2]))
                shape = (channels, side, side)
            elif spec.kind == "pool":
                if len(shape) != 3:
                    raise CX("pool layer after fc layer")
                (kind, window, stride) = spec.args
                if window > shape[1]:
                    raise CX("pool window %d larger than %dx%d feature map" % (window, shape[1], shape[2]))
                side = (shape[1] - window) // stride + 1
                shape = (shape[0], side, side)
            elif spec.kind == "fc":
                shape = (spec.args[0],)
            shapes.append(shape)
        if len(shapes[-1]) != 1:
            raise CX("core must end with an fc layer")
        return shapes

    def describe(self):
        tokens = []
        for spec in self.layers:
            if spec.kind == "act":
                tokens.append(spec.args[0])
            else:
                tokens.append(":".join([spec.kind] + [str(a) for a in spec.args]))
        return ",".join(tokens)


class TowerFeatures(object):

    def __init__(self, per_resolution, concatenated):
        self.per_resolution = per_resolution
        self.concatenated = concatenated

    def block(self, name):
        return self.per_resolution[name]


class VisualCore(object):
    """
    The same network (one parameter set under `prefix`) applied to every
    resolution's patch.
    """

    def __init__(self, config, params, prefix="core"):
        self.config = config
        self.params = params
        self.prefix = prefix

    def param_name(self, index, which):
        return "%s.%d.%s" % (self.prefix, index, which)

    def init_params(self, rng):
        shape = (self.config.in_channels, self.config.input_size, self.config.input_size)
        for (index, spec) in enumerate(self.config.layers):
            if spec.kind == "conv":
                (channels, kernel, stride, padding) = spec.args
                self.params.glorot(self.param_name(index, "w"), (channels, shape[0], kernel, kernel),
                                   shape[0] * kernel * kernel, channels * kernel * kernel, rng)
                self.params.zeros(self.param_name(index, "b"), (channels,))
            elif spec.kind == "fc":
                fan_in = int(np.prod(shape))
                self.params.glorot(self.param_name(index, "w"), (fan_in, spec.args[0]), fan_in, spec.args[0], rng)
                self.params.zeros(self.param_name(index, "b"), (spec.args[0],))
            shape = self.config.shapes[index]
        return self

    def names(self):
        return self.params.names(self.prefix + ".")

    def freeze(self):
        """
        Mark every core parameter stop-gradient; forward values are unchanged.
        """
        self.params.freeze(self.prefix + ".")
        return self

    @property
    def frozen(self):
        return all(self.params[n].frozen for n in self.names())

    def forward(self, graph, x):
        """
        Run a B x C x S x S tensor through the layers; returns B x feature_dim.
        """
        for (index, spec) in enumerate(self.config.layers):
            if spec.kind == "conv":
                (channels, kernel, stride, padding) = spec.args
                x = T.conv2d(x, graph.parameter(self.param_name(index, "w")), stride, padding,
                             bias=graph.parameter(self.param_name(index, "b")))
            elif spec.kind == "pool":
                (kind, window, stride) = spec.args
                x = T.pool(x, kind, window, stride)
            elif spec.kind == "fc":
                if x.value.ndim != 2:
                    x = T.flatten(x)
                x = T.fully_connected(x, graph.parameter(self.param_name(index, "w")),
                                      graph.parameter(self.param_name(index, "b")))
            else:
                x = T.activation(x, spec.args[0])
        return x

    def towers_forward(self, graph, patches):
        """
        :param patches: OrderedDict resolution -> C x S x S (or B x C x S x S)
                        array, in ladder order
        :return: TowerFeatures; absent resolutions simply have no tower
        """
        if not patches:
            raise CX("no patches given to the visual core")
        size = self.config.input_size
        batch = None
        stacked = []
        for (name, patch) in patches.items():
            patch = np.asarray(patch, dtype=np.float64)
            if patch.ndim == 3:
                patch = patch[None]
            if patch.shape[1:] != (self.config.in_channels, size, size):
                raise CX("%s patch has shape %s, expected %s"
                         % (name, list(patch.shape[1:]), [self.config.in_channels, size, size]))
            if batch is not None and patch.shape[0] != batch:
                raise CX("tower batch sizes differ")
            batch = patch.shape[0]
            stacked.append(patch)
        x = graph.constant(np.concatenate(stacked, axis=0))
        out = self.forward(graph, x)
        per_resolution = OrderedDict()
        for (n, name) in enumerate(patches.keys()):
            per_resolution[name] = T.slice_axis(out, 0, n * batch, (n + 1) * batch)
        if len(per_resolution) == 1:
            concatenated = list(per_resolution.values())[0]
        else:
            concatenated = T.concat(list(per_resolution.values()), axis=1)
        return TowerFeatures(per_resolution, concatenated)


class MultiHead(object):
    """
    Softmax heads used only while pretraining: one per single tower and one
    on the concatenation of all three.
    """

    def __init__(self, core, num_classes, prefix="head"):
        if num_classes < 2:
            raise CX("need at least 2 classes, got %s" % num_classes)
        self.core = core
        self.num_classes = num_classes
        self.prefix = prefix

    def init_params(self, rng):
        dim = self.core.config.feature_dim
        for head in HEADS:
            width = dim * len(glimpse.RESOLUTIONS) if head == "all" else dim
            self.core.params.glorot("%s.%s.w" % (self.prefix, head), (width, self.num_classes), width, self.num_classes, rng)
            self.core.params.zeros("%s.%s.b" % (self.prefix, head), (self.num_classes,))
        return self

    def logits(self, graph, features):
        out = OrderedDict()
        for head in HEADS:
            x = features.concatenated if head == "all" else features.block(head)
            out[head] = T.fully_connected(x, graph.parameter("%s.%s.w" % (self.prefix, head)),
                                          graph.parameter("%s.%s.b" % (self.prefix, head)))
        return out

    def loss(self, patches, labels):
        """
        Build the graph of the mean head loss.

        :return: (graph, total loss tensor, OrderedDict head -> (loss tensor, probs))
        """
        for name in glimpse.RESOLUTIONS:
            if name not in patches:
                raise CX("multi-head pretraining needs all resolutions, missing '%s'" % name)
        ordered = OrderedDict((name, patches[name]) for name in glimpse.RESOLUTIONS)
        graph = T.Graph(self.core.params)
        features = self.core.towers_forward(graph, ordered)
        heads = OrderedDict()
        total = None
        for (head, logits) in self.logits(graph, features).items():
            (loss, probs) = T.softmax_cross_entropy(logits, labels)
            heads[head] = (loss, probs)
            total = loss if total is None else T.add(total, loss)
        total = T.scale(total, 1.0 / len(HEADS))
        return graph, total, heads

    def pretrain_step(self, patches, labels, optimizer):
        """
        One optimizer step on the shared tower and all head parameters.

        :return: OrderedDict head -> loss, plus "total"
        """
        self.core.params.zero_grad()
        (graph, total, heads) = self.loss(patches, labels)
        T.backward(graph, total)
        optimizer.step()
        losses = OrderedDict((head, pair[0].item()) for (head, pair) in heads.items())
        losses["total"] = total.item()
        return losses

    def predict(self, patches):
        """
        :return: OrderedDict head -> predicted labels
        """
        ordered = OrderedDict((name, patches[name]) for name in glimpse.RESOLUTIONS)
        graph = T.Graph(self.core.params)
        features = self.core.towers_forward(graph, ordered)
        return OrderedDict((head, logits.value.argmax(axis=1)) for (head, logits) in self.logits(graph, features).items())


def pretraining_batch(images, ladder, rng, jitter=0.1):
    """
    Multi-resolution patches around the image center (small uniform jitter),
    stacked per resolution: OrderedDict resolution -> B x C x S x S.
    """
    full = glimpse.PatchLadder(ladder.base_fraction, ladder.scale_factor, glimpse.RESOLUTIONS, ladder.out_size)
    stacks = OrderedDict((name, []) for name in glimpse.RESOLUTIONS)
    for image in images:
        loc = glimpse.Location.clamped(rng.uniform(-jitter, jitter), rng.uniform(-jitter, jitter))
        bundle = glimpse.extract_glimpse(image, loc, full, rng)
        for name in glimpse.RESOLUTIONS:
            stacks[name].append(bundle.patches[name])
    return OrderedDict((name, np.stack(patches)) for (name, patches) in stacks.items())


def pretrain(heads, dataset, ladder, optimizer, epochs, batch_size, rng, logger=None):
    """
    Multi-head pretraining loop.

    :return: list of per-epoch OrderedDict head -> mean loss
    """
    if len(dataset) == 0:
        raise CX("pretraining set is empty")
    history = []
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        sums = OrderedDict()
        batches = 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            patches = pretraining_batch([dataset.images[i] for i in idx], ladder, rng)
            losses = heads.pretrain_step(patches, [dataset.labels[i] for i in idx], optimizer)
            for (key, value) in losses.items():
                sums[key] = sums.get(key, 0.0) + value
            batches += 1
        means = OrderedDict((key, value / batches) for (key, value) in sums.items())
        history.append(means)
        if logger is not None:
            logger.info("pretrain epoch %d: %s" % (epoch + 1, ", ".join("%s=%.4f" % kv for kv in means.items())))
    return history


def head_accuracies(heads, dataset, ladder, rng, batch_size=32):
    correct = OrderedDict((head, 0) for head in HEADS)
    for start in range(0, len(dataset), batch_size):
        images = dataset.images[start:start + batch_size]
        labels = np.asarray(dataset.labels[start:start + batch_size])
        patches = pretraining_batch(images, ladder, rng, jitter=0.0)
        for (head, predicted) in heads.predict(patches).items():
            correct[head] += int((predicted == labels).sum())
    return OrderedDict((head, count / float(len(dataset))) for (head, count) in correct.items())

"""
The double-deck recurrent attention model.

The bottom deck r1 accumulates glimpse evidence and is the only input of
the classifier.  The top deck r2 starts from the context patch, reads r1
each step and emits the next location.  The context therefore reaches the
classifier only through the locations it makes the model look at.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

from collections import OrderedDict

import numpy as np

from fovea import glimpse
from fovea import tensor as T
from fovea import validate
from fovea.cexceptions import CX


class ModelConfig(object):

    def __init__(self, glimpses=3, resolutions=glimpse.RESOLUTIONS, deck1_size=256, deck2_size=256,
                 fusion_width=256, location_width=128, num_classes=10, context_pool=4):
        if glimpses < 1:
            raise CX("glimpse count must be >= 1, got %s" % glimpses)
        if num_classes < 2:
            raise CX("need at least 2 classes, got %s" % num_classes)
        self.glimpses = int(glimpses)
        self.resolutions = validate.resolutions(resolutions)
        self.deck1_size = int(validate.positive("deck1_size", deck1_size))
        self.deck2_size = int(validate.positive("deck2_size", deck2_size))
        self.fusion_width = int(validate.positive("fusion_width", fusion_width))
        self.location_width = int(validate.positive("location_width", location_width))
        self.num_classes = int(num_classes)
        self.context_pool = int(validate.positive("context_pool", context_pool))


class EpisodeState(object):

    def __init__(self, r1, r2, step=0, l_hat=None, location=None):
        self.r1 = r1
        self.r2 = r2
        self.step = step
        self.l_hat = l_hat
        self.location = location


class ClassScores(object):

    def __init__(self, logits):
        self.logits = logits
        self.probabilities = T.softmax(logits.value.reshape(1, -1))[0]

    def predicted(self):
        # argmax takes the lowest index on ties
        return int(np.argmax(self.logits.value.reshape(-1)))


class TraceStep(object):

    def __init__(self, step, l_hat, location, sample, bundle):
        self.step = step
        self.l_hat = l_hat
        self.location = location
        self.sample = sample
        self.bundle = bundle

    @property
    def boxes(self):
        return self.bundle.boxes

    def csv_row(self, resolutions):
        fields = [str(self.step),
                  repr(self.l_hat.row) if self.l_hat is not None else "",
                  repr(self.l_hat.col) if self.l_hat is not None else "",
                  repr(self.location.row), repr(self.location.col)]
        for name in resolutions:
            box = self.bundle.boxes[name]
            fields.extend([str(box.top), str(box.left), str(box.size)])
        return ",".join(fields)


class Episode(object):
    """
    Everything one forward pass produced: the graph (for backward), the
    scores, the per-glimpse trace and the l_hat tensors each sampled
    location was drawn around.
    """

    def __init__(self, graph, context_box):
        self.graph = graph
        self.context_box = context_box
        self.trace = []
        self.l_hat_tensors = []
        self.scores = None
        self.state = None

    def trace_csv(self, resolutions):
        header = ["step", "lhat_row", "lhat_col", "l_row", "l_col"]
        for name in resolutions:
            header.extend(["%s_top" % name, "%s_left" % name, "%s_size" % name])
        return "\n".join([",".join(header)] + [s.csv_row(resolutions) for s in self.trace]) + "\n"


class AttentionModel(object):

    def __init__(self, config, core, ladder, params):
        if tuple(ladder.resolutions) != tuple(config.resolutions):
            raise CX("ladder resolutions %s differ from model resolutions %s"
                     % (",".join(ladder.resolutions), ",".join(config.resolutions)))
        if ladder.out_size != core.config.input_size:
            raise CX("patch size %d does not match visual core input %d" % (ladder.out_size, core.config.input_size))
        if ladder.out_size % config.context_pool:
            raise CX("context_pool %d does not divide patch size %d" % (config.context_pool, ladder.out_size))
        self.config = config
        self.core = core
        self.ladder = ladder
        self.params = params

    # ------------------------------------------------------------------

    def shapes(self):
        c = self.config
        side = self.ladder.out_size // c.context_pool
        context_in = self.core.config.in_channels * side * side
        fused_in = self.core.config.feature_dim * len(c.resolutions) + c.location_width
        return OrderedDict([
            ("ctx.w", (context_in, c.deck2_size)), ("ctx.b", (c.deck2_size,)),
            ("loc.w", (2, c.location_width)), ("loc.b", (c.location_width,)),
            ("fuse.w", (fused_in, c.fusion_width)), ("fuse.b", (c.fusion_width,)),
            ("rnn.w_in", (c.fusion_width, c.deck1_size)), ("rnn.w11", (c.deck1_size, c.deck1_size)),
            ("rnn.b1", (c.deck1_size,)),
            ("rnn.w21", (c.deck1_size, c.deck2_size)), ("rnn.w22", (c.deck2_size, c.deck2_size)),
            ("rnn.b2", (c.deck2_size,)),
            ("emit.w", (c.deck2_size, 2)), ("emit.b", (2,)),
            ("cls.w", (c.deck1_size, c.num_classes)), ("cls.b", (c.num_classes,)),
        ])

    def init_params(self, rng):
        for (name, shape) in self.shapes().items():
            if len(shape) == 1:
                self.params.zeros(name, shape)
            else:
                self.params.glorot(name, shape, shape[0], shape[1], rng)
        return self

    def names(self):
        return list(self.shapes().keys())

    def _p(self, graph, name):
        return graph.parameter(name)

    # ------------------------------------------------------------------

    def init_episode(self, graph, context_patch):
        """
        Context -> top deck; the bottom deck starts at zero.

        :return: (EpisodeState at step 0, l_hat_0 tensor)
        """
        context_patch = np.asarray(context_patch, dtype=np.float64)
        size = self.ladder.out_size
        if context_patch.shape != (self.core.config.in_channels, size, size):
            raise CX("context patch has shape %s, expected %s"
                     % (list(context_patch.shape), [self.core.config.in_channels, size, size]))
        x = graph.constant(context_patch[None])
        pooled = T.flatten(T.pool(x, "avg", self.config.context_pool, self.config.context_pool))
        r2 = T.activation(T.fully_connected(pooled, self._p(graph, "ctx.w"), self._p(graph, "ctx.b")), "relu")
        r1 = graph.constant(np.zeros((1, self.config.deck1_size)))
        state = EpisodeState(r1, r2, step=0)
        l_hat = self.emit_location(graph, state)
        state.l_hat = l_hat
        return state, l_hat

    def fuse_glimpse_location(self, graph, features, location):
        """
        relu(W_fuse [G_image ; G_loc(l)] + b); G_loc(l) = relu(W_loc l + b_loc).
        """
        embedding = T.activation(T.fully_connected(location, self._p(graph, "loc.w"), self._p(graph, "loc.b")), "relu")
        joined = T.concat([features, embedding], axis=1)
        return T.activation(T.fully_connected(joined, self._p(graph, "fuse.w"), self._p(graph, "fuse.b")), "relu")

    def step(self, graph, state, fused):
        """
        r1' = relu(W_in f + W11 r1 + b1);  r2' = relu(W21 r1' + W22 r2 + b2).
        """
        r1 = T.activation(T.add(T.fully_connected(fused, self._p(graph, "rnn.w_in"), self._p(graph, "rnn.b1")),
                                T.fully_connected(state.r1, self._p(graph, "rnn.w11"))), "relu")
        r2 = T.activation(T.add(T.fully_connected(r1, self._p(graph, "rnn.w21"), self._p(graph, "rnn.b2")),
                                T.fully_connected(state.r2, self._p(graph, "rnn.w22"))), "relu")
        return EpisodeState(r1, r2, step=state.step + 1, l_hat=state.l_hat, location=state.location)

    def emit_location(self, graph, state):
        return T.activation(T.fully_connected(state.r2, self._p(graph, "emit.w"), self._p(graph, "emit.b")), "tanh")

    def classify(self, graph, state):
        if state.step != self.config.glimpses:
            raise CX("classify called at step %d of %d" % (state.step, self.config.glimpses))
        return ClassScores(T.fully_connected(state.r1, self._p(graph, "cls.w"), self._p(graph, "cls.b")))

    # ------------------------------------------------------------------

    def forward_episode(self, image, policy, rng, context_mode=None, context_patch=None):
        """
        Context, then N rounds of locate / extract / fuse / step, then one
        classification.  No location is emitted after the last glimpse.

        :param context_patch: use this patch instead of cropping the image
        """
        image = np.asarray(image, dtype=np.float64)
        graph = T.Graph(self.params)
        if context_patch is None:
            mode = context_mode or policy.context_mode
            (context_patch, context_box) = glimpse.build_context(image, mode, rng, self.ladder.out_size)
        else:
            context_box = None
        episode = Episode(graph, context_box)

        (state, l_hat) = self.init_episode(graph, context_patch)
        for n in range(1, self.config.glimpses + 1):
            (location, sample) = policy.choose(graph, l_hat, n, rng)
            loc = glimpse.Location.from_array(location.value)
            bundle = glimpse.extract_glimpse(image, loc, self.ladder, rng)
            features = self.core.towers_forward(graph, bundle.patches)
            # pixels are a function of l only through extraction, which has no gradient
            pixels = T.stop_gradient(features.concatenated)
            fused = self.fuse_glimpse_location(graph, pixels, location)
            state = self.step(graph, state, fused)
            state.location = loc
            episode.trace.append(TraceStep(n, glimpse.Location.from_array(l_hat.value), loc, sample, bundle))
            episode.l_hat_tensors.append(l_hat)
            if n < self.config.glimpses:
                l_hat = self.emit_location(graph, state)
                state.l_hat = l_hat
        episode.state = state
        episode.scores = self.classify(graph, state)
        return episode

"""
Mean per-class accuracy (mA), greedy evaluation of the attention model and
the whole-image baseline head.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

from collections import OrderedDict

import numpy as np

from fovea import glimpse
from fovea import policy as policies
from fovea import tensor as T
from fovea.cexceptions import CX


class EvalReport(object):

    def __init__(self, per_class_accuracy, counts, confusion, class_names=None, config=None):
        self.per_class_accuracy = per_class_accuracy
        self.counts = counts
        self.confusion = confusion
        self.class_names = class_names or [str(i) for i in range(len(counts))]
        self.config = config or {}
        present = counts > 0
        self.ma = float(per_class_accuracy[present].mean()) if present.any() else 0.0
        self.n_evaluated = int(counts.sum())

    @property
    def accuracy(self):
        """
        Plain (example-weighted) accuracy.
        """
        if self.n_evaluated == 0:
            return 0.0
        return float(np.trace(self.confusion)) / self.n_evaluated

    def to_text(self):
        lines = []
        for (index, name) in enumerate(self.class_names):
            if self.counts[index] > 0:
                lines.append("%s,%d,%r" % (name, self.counts[index], float(self.per_class_accuracy[index])))
        lines.append("mA,%r" % self.ma)
        return "\n".join(lines) + "\n"

    def write(self, path):
        try:
            with open(path, "w") as fh:
                fh.write(self.to_text())
        except (IOError, OSError) as e:
            raise CX("cannot write report %s: %s" % (path, e))
        return path


def mean_accuracy(predictions, labels, num_classes, class_names=None):
    """
    Unweighted mean of per-class accuracies over the classes that have at
    least one example.
    """
    predictions = np.asarray(predictions, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if predictions.shape != labels.shape:
        raise CX("%d predictions but %d labels" % (predictions.shape[0], labels.shape[0]))
    for (what, values) in (("label", labels), ("prediction", predictions)):
        if values.size and (values.min() < 0 or values.max() >= num_classes):
            raise CX("%s out of range [0, %d)" % (what, num_classes))
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    counts = confusion.sum(axis=1)
    correct = np.diag(confusion).astype(np.float64)
    per_class = np.zeros(num_classes)
    present = counts > 0
    per_class[present] = correct[present] / counts[present]
    return EvalReport(per_class, counts, confusion, class_names)


def evaluate(model, dataset, rng, policy=None, logger=None):
    """
    One greedy episode per image with the centered context.  The rng is
    only consumed by noise fill of off-image glimpse regions.

    :return: (EvalReport, list of episodes' predicted labels)
    """
    policy = policy or policies.GreedyPolicy()
    predictions = []
    for (index, image) in enumerate(dataset.images):
        episode = model.forward_episode(image, policy, rng, context_mode="centered")
        predictions.append(episode.scores.predicted())
    report = mean_accuracy(predictions, dataset.labels, model.config.num_classes, dataset.class_names)
    if logger is not None:
        logger.info("evaluated %d images with the %s policy: mA=%.4f" % (report.n_evaluated, policy.name, report.ma))
    return report, predictions


# ---------------------------------------------------------------------------
# whole-image baseline: frozen core on the full image resized to one patch

class BaselineHead(object):

    def __init__(self, core, num_classes, prefix="baseline"):
        self.core = core
        self.num_classes = num_classes
        self.prefix = prefix

    def init_params(self, rng):
        dim = self.core.config.feature_dim
        self.core.params.glorot(self.prefix + ".w", (dim, self.num_classes), dim, self.num_classes, rng)
        self.core.params.zeros(self.prefix + ".b", (self.num_classes,))
        return self

    def names(self):
        return [self.prefix + ".w", self.prefix + ".b"]

    def inputs(self, images):
        size = self.core.config.input_size
        return np.stack([glimpse.center_square_patch(image, size) for image in images])

    def logits(self, batch):
        graph = T.Graph(self.core.params)
        features = self.core.towers_forward(graph, OrderedDict([("whole", batch)]))
        logits = T.fully_connected(T.stop_gradient(features.concatenated), graph.parameter(self.prefix + ".w"),
                                   graph.parameter(self.prefix + ".b"))
        return graph, logits

    def train(self, dataset, optimizer, epochs, batch_size, rng, logger=None):
        if len(dataset) == 0:
            raise CX("baseline training set is empty")
        inputs = self.inputs(dataset.images)
        labels = np.asarray(dataset.labels)
        history = []
        for epoch in range(epochs):
            total = 0.0
            batches = 0
            order = rng.permutation(len(dataset))
            for start in range(0, len(order), batch_size):
                idx = order[start:start + batch_size]
                self.core.params.zero_grad()
                (graph, logits) = self.logits(inputs[idx])
                (loss, probs) = T.softmax_cross_entropy(logits, labels[idx])
                T.backward(graph, loss)
                optimizer.step()
                total += loss.item()
                batches += 1
            history.append(total / batches)
            if logger is not None:
                logger.info("baseline epoch %d: loss=%.4f" % (epoch + 1, history[-1]))
        return history

    def predict(self, images, batch_size=32):
        predictions = []
        for start in range(0, len(images), batch_size):
            (graph, logits) = self.logits(self.inputs(images[start:start + batch_size]))
            predictions.extend(logits.value.argmax(axis=1).tolist())
        return predictions

    def evaluate(self, dataset):
        return mean_accuracy(self.predict(dataset.images), dataset.labels, self.num_classes, dataset.class_names)

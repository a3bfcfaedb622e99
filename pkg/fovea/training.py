"""
Hybrid training of the attention model: backpropagation of the
classification loss through everything differentiable, plus a REINFORCE
term for the effect the sampled locations have on which pixels are seen.

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import numpy as np

from fovea import evaluation
from fovea import glimpse
from fovea import policy as policies
from fovea import tensor as T
from fovea import validate
from fovea.cexceptions import CX


class TrainConfig(object):

    def __init__(self, glimpses=3, resolutions=glimpse.RESOLUTIONS, learning_rate=0.01, momentum=0.9,
                 sample_std=0.1, baseline_decay=0.9, epochs=10, batch_size=16, seed=1, mirror=True,
                 context_mode="random"):
        if not learning_rate > 0:
            raise CX("learning_rate must be > 0, got %s" % learning_rate)
        if not sample_std > 0:
            raise CX("sample_std must be > 0, got %s" % sample_std)
        if context_mode not in glimpse.CONTEXT_MODES:
            raise CX("unknown context mode '%s'" % context_mode)
        self.glimpses = int(glimpses)
        self.resolutions = validate.resolutions(resolutions)
        self.learning_rate = float(learning_rate)
        self.momentum = float(validate.unit_interval("momentum", momentum))
        self.sample_std = float(sample_std)
        self.baseline_decay = float(validate.unit_interval("baseline_decay", baseline_decay))
        self.epochs = int(validate.non_negative("epochs", epochs))
        self.batch_size = int(validate.positive("batch_size", batch_size))
        self.seed = int(seed)
        self.mirror = bool(mirror)
        self.context_mode = context_mode


class RewardBaseline(object):
    """
    Exponential moving average of the rewards, b <- decay * b + (1 - decay) * R,
    starting from b = 0.  `seen` records whether any reward has arrived.
    """

    def __init__(self, decay=0.9, value=0.0, seen=False):
        self.decay = float(decay)
        self.value = float(value)
        self.seen = bool(seen)

    def update(self, reward):
        self.value = self.decay * self.value + (1.0 - self.decay) * reward
        self.seen = True
        return self.value

    def state(self):
        return {"value": self.value, "seen": self.seen, "decay": self.decay}

    @classmethod
    def from_state(cls, state):
        return cls(state["decay"], state["value"], state["seen"])


class EpochStats(object):

    def __init__(self, epoch, mean_loss, mean_reward, train_ma):
        self.epoch = epoch
        self.mean_loss = mean_loss
        self.mean_reward = mean_reward
        self.train_ma = train_ma

    def csv_line(self):
        return "%d,%r,%r,%r" % (self.epoch, self.mean_loss, self.mean_reward, self.train_ma)


def compute_reward(scores, label):
    return 1.0 if scores.predicted() == int(label) else 0.0


def reinforce_seeds(episode, reward, baseline_value):
    """
    Upstream gradients for each sampled step's l_hat tensor:
    -(R - b) * (l - l_hat) / sigma^2, the negated log-density gradient
    because the sweep minimizes.
    """
    seeds = {}
    advantage = reward - baseline_value
    for (step, l_hat) in zip(episode.trace, episode.l_hat_tensors):
        sample = step.sample
        if sample is None:
            continue
        grad = policies.log_density_gradient(sample.raw, l_hat.value.reshape(2), sample.sigma)
        seeds[l_hat] = (-advantage * grad).reshape(1, 2)
    return seeds


def hybrid_gradients(episode, label, reward, baseline, params):
    """
    Accumulate the hybrid gradient of one episode into params and then move
    the baseline.  The baseline value used is the one from before this
    reward.

    :return: the cross-entropy loss value
    """
    graph = episode.graph
    if graph.params is not params:
        raise CX("episode was built on a different parameter set")
    if episode.scores is None or len(episode.trace) != len(episode.l_hat_tensors):
        raise CX("episode trace is incomplete (%d steps, %d location estimates)"
                 % (len(episode.trace), len(episode.l_hat_tensors)))
    (loss, probs) = T.softmax_cross_entropy(episode.scores.logits, [label])
    T.backward(graph, loss, seeds=reinforce_seeds(episode, reward, baseline.value))
    baseline.update(reward)
    return loss.item()


def mirror_augment(image, label, rng, enabled):
    """
    Reflect about the vertical axis with probability 0.5.  Disabled, the
    rng is not touched.
    """
    if not enabled:
        return image, label
    if rng.random() < 0.5:
        return np.ascontiguousarray(image[:, :, ::-1]), label
    return image, label


def train_epoch(model, dataset, config, optimizer, baseline, rng, epoch=1, policy=None, logger=None):
    """
    One shuffled pass: per example mirror, sample an episode, accumulate
    its hybrid gradient; one momentum step per batch.

    :param policy: location policy (default: sampled with config.sample_std)
    :return: EpochStats
    """
    if len(dataset) == 0:
        raise CX("training set is empty")
    if not model.core.frozen:
        raise CX("the visual core must be frozen before attention training")
    if policy is None:
        policy = policies.SampledPolicy(config.sample_std)
    params = model.params
    params.zero_grad()

    losses = []
    rewards = []
    predictions = []
    labels = []
    pending = 0
    for index in rng.permutation(len(dataset)):
        (image, label) = mirror_augment(dataset.images[index], dataset.labels[index], rng, config.mirror)
        episode = model.forward_episode(image, policy, rng, context_mode=config.context_mode)
        reward = compute_reward(episode.scores, label)
        loss = hybrid_gradients(episode, label, reward, baseline, params)
        losses.append(loss)
        rewards.append(reward)
        predictions.append(episode.scores.predicted())
        labels.append(int(label))
        pending += 1
        if logger is not None:
            logger.debug("epoch %d example %d: loss=%.5f reward=%.0f baseline=%.4f"
                         % (epoch, index, loss, reward, baseline.value))
        if pending == config.batch_size:
            optimizer.step(scale=1.0 / pending)
            params.zero_grad()
            pending = 0
    if pending:
        optimizer.step(scale=1.0 / pending)
        params.zero_grad()

    report = evaluation.mean_accuracy(predictions, labels, model.config.num_classes)
    return EpochStats(epoch, float(np.mean(losses)), float(np.mean(rewards)), report.ma)


# ---------------------------------------------------------------------------
# Gaussian bandit: the REINFORCE estimator with no network around it

def bandit_reward(location, target):
    diff = np.asarray(location, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return -float(np.sum(diff * diff, axis=-1)) if diff.ndim == 1 else -np.sum(diff * diff, axis=-1)


def bandit_gradient_samples(mean, target, sigma, rng, count, baseline=0.0):
    """
    Per-sample REINFORCE estimates (R - b) (l - mean) / sigma^2 of the
    gradient of E[R] with respect to the mean, R = -|l - target|^2 and l
    the clamped draw.

    :return: count x 2 array
    """
    mean = np.asarray(mean, dtype=np.float64).reshape(2)
    raw = mean + rng.normal(0.0, 1.0, size=(count, 2)) * sigma
    rewards = bandit_reward(np.clip(raw, -1.0, 1.0), target)
    return (rewards - baseline)[:, None] * (raw - mean) / (sigma * sigma)


def train_bandit(target, sigma, learning_rate, steps, rng, mean=(0.0, 0.0), decay=0.9):
    """
    Gradient ascent on the mean with one sampled location per step and an
    EMA baseline.

    :return: (final mean, per-step distances |mean - target|)
    """
    mean = np.array(mean, dtype=np.float64).reshape(2)
    target = np.asarray(target, dtype=np.float64).reshape(2)
    baseline = RewardBaseline(decay)
    distances = np.empty(steps)
    for step in range(steps):
        sample = policies.sample_location(mean, sigma, rng)
        reward = bandit_reward(sample.location.as_array(), target)
        # no step until the baseline has seen a reward
        advantage = reward - baseline.value if baseline.seen else 0.0
        mean += learning_rate * advantage * policies.log_density_gradient(sample.raw, mean, sigma)
        baseline.update(reward)
        distances[step] = float(np.linalg.norm(mean - target))
    return mean, distances

import numpy as np
import pytest

from fovea import attention
from fovea import glimpse
from fovea import policy
from fovea import tensor as T
from fovea.cexceptions import CX
from tests.conftest import TINY_PATCH, make_tiny_model

FORCED = [(0.5, -0.5), (-0.25, 0.75)]


def image(seed=0, size=24):
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(1, size, size))


def forced_logits(model, context, seed=9):
    episode = model.forward_episode(image(), policy.ForcedPolicy(FORCED), np.random.default_rng(seed),
                                    context_patch=context)
    return episode.scores.logits.value


class TestConstruction:

    def test_param_names(self, tiny_model):
        names = tiny_model.names()
        assert names[0] == "ctx.w" and names[-1] == "cls.b"
        assert tiny_model.params["fuse.w"].shape == (8 * 3 + 4, 7)
        assert tiny_model.params["ctx.w"].shape == (16, 5)
        assert tiny_model.params["cls.w"].shape == (6, 3)
        assert all(not np.any(tiny_model.params[n].value) for n in names if ".b" in n)

    def test_subset_model(self):
        model = make_tiny_model(resolutions=("low",))
        assert model.params["fuse.w"].shape == (8 + 4, 7)

    def test_ladder_mismatch(self, tiny_model):
        ladder = glimpse.PatchLadder(0.25, 2.0, ("high",), TINY_PATCH)
        with pytest.raises(CX):
            attention.AttentionModel(tiny_model.config, tiny_model.core, ladder, tiny_model.params)

    def test_patch_size_mismatch(self, tiny_model):
        ladder = glimpse.PatchLadder(0.25, 2.0, glimpse.RESOLUTIONS, 32)
        with pytest.raises(CX):
            attention.AttentionModel(tiny_model.config, tiny_model.core, ladder, tiny_model.params)

    def test_context_pool_must_divide(self, tiny_model):
        config = attention.ModelConfig(2, glimpse.RESOLUTIONS, 6, 5, 7, 4, 3, context_pool=3)
        with pytest.raises(CX):
            attention.AttentionModel(config, tiny_model.core, tiny_model.ladder, tiny_model.params)

    def test_bad_config(self):
        with pytest.raises(CX):
            attention.ModelConfig(glimpses=0)
        with pytest.raises(CX):
            attention.ModelConfig(num_classes=1)
        with pytest.raises(CX):
            attention.ModelConfig(resolutions=())


class TestEpisode:

    def test_trace(self, tiny_model):
        """
        Test: N glimpses give N trace steps and N location estimates
        """
        episode = tiny_model.forward_episode(image(), policy.GreedyPolicy(), np.random.default_rng(0))
        assert [s.step for s in episode.trace] == [1, 2]
        assert len(episode.l_hat_tensors) == 2
        assert episode.state.step == 2
        assert episode.context_box == glimpse.Box(0, 0, 24)
        for step in episode.trace:
            assert list(step.boxes) == list(glimpse.RESOLUTIONS)
            assert step.location == step.l_hat
        assert episode.scores.probabilities.shape == (3,)
        assert abs(episode.scores.probabilities.sum() - 1.0) < 1e-12

    def test_single_glimpse(self):
        model = make_tiny_model(glimpses=1)
        episode = model.forward_episode(image(), policy.CenterPolicy(), np.random.default_rng(0))
        assert len(episode.trace) == 1
        assert episode.trace[0].location == glimpse.CENTER
        # l_hat_0 plus nothing after the only glimpse
        assert episode.graph.ops().count("tanh") == 1

    def test_no_location_after_last_glimpse(self):
        model = make_tiny_model(glimpses=3)
        episode = model.forward_episode(image(), policy.GreedyPolicy(), np.random.default_rng(0))
        assert episode.graph.ops().count("tanh") == 3

    def test_trace_csv(self, tiny_model):
        episode = tiny_model.forward_episode(image(), policy.CenterPolicy(), np.random.default_rng(0))
        lines = episode.trace_csv(tiny_model.config.resolutions).splitlines()
        assert lines[0].startswith("step,lhat_row,lhat_col,l_row,l_col,high_top,high_left,high_size")
        assert len(lines) == 3
        assert lines[1].split(",")[0] == "1"
        assert lines[1].split(",")[3:5] == ["0.0", "0.0"]

    def test_classify_before_last_step(self, tiny_model):
        graph = T.Graph(tiny_model.params)
        (state, _) = tiny_model.init_episode(graph, np.zeros((1, TINY_PATCH, TINY_PATCH)))
        with pytest.raises(CX):
            tiny_model.classify(graph, state)

    def test_bad_context_shape(self, tiny_model):
        with pytest.raises(CX):
            tiny_model.init_episode(T.Graph(tiny_model.params), np.zeros((1, 8, 8)))

    def test_zero_weights(self, tiny_model):
        """
        Test: zero emission weights look at the center, zero classifier weights are uniform
        """
        for name in ["emit.w", "emit.b", "cls.w", "cls.b"]:
            tiny_model.params[name].value[...] = 0.0
        episode = tiny_model.forward_episode(image(), policy.GreedyPolicy(), np.random.default_rng(0))
        assert all(step.location == glimpse.CENTER for step in episode.trace)
        assert np.allclose(episode.scores.probabilities, 1.0 / 3.0, rtol=0, atol=1e-15)
        assert episode.scores.predicted() == 0

    def test_greedy_deterministic(self, tiny_model):
        one = tiny_model.forward_episode(image(), policy.GreedyPolicy(), np.random.default_rng(4))
        two = tiny_model.forward_episode(image(), policy.GreedyPolicy(), np.random.default_rng(4))
        assert one.scores.logits.value.tobytes() == two.scores.logits.value.tobytes()
        assert [s.location for s in one.trace] == [s.location for s in two.trace]

    def test_sampled_records_draws(self, tiny_model):
        episode = tiny_model.forward_episode(image(), policy.SampledPolicy(0.1), np.random.default_rng(0))
        assert all(step.sample is not None for step in episode.trace)
        for step in episode.trace:
            assert np.allclose(step.location.as_array(), step.sample.location.as_array(), rtol=0, atol=1e-12)
        assert episode.context_box.size == 24


class TestContextIsolation:

    def test_context_cannot_reach_scores_directly(self, tiny_model):
        """
        Test: with fixed locations the context patch has no effect on the class scores
        """
        rng = np.random.default_rng(2)
        first = forced_logits(tiny_model, rng.uniform(size=(1, TINY_PATCH, TINY_PATCH)))
        second = forced_logits(tiny_model, rng.uniform(size=(1, TINY_PATCH, TINY_PATCH)))
        assert first.tobytes() == second.tobytes()

    def test_top_deck_weights_do_not_reach_scores(self, tiny_model, rng):
        context = np.full((1, TINY_PATCH, TINY_PATCH), 0.5)
        before = forced_logits(tiny_model, context)
        for name in ["ctx.w", "ctx.b", "rnn.w22", "rnn.w21", "rnn.b2", "emit.w", "emit.b"]:
            tiny_model.params[name].value[...] += rng.normal(size=tiny_model.params[name].shape)
        after = forced_logits(tiny_model, context)
        assert before.tobytes() == after.tobytes()

    def test_bottom_deck_weights_do(self, tiny_model):
        context = np.full((1, TINY_PATCH, TINY_PATCH), 0.5)
        before = forced_logits(tiny_model, context)
        tiny_model.params["cls.b"].value[0] += 1.0
        assert before.tobytes() != forced_logits(tiny_model, context).tobytes()


class TestGradients:

    def build(self, model, label=1):
        def build_loss(params):
            episode = model.forward_episode(image(), policy.ForcedPolicy(FORCED), np.random.default_rng(3))
            return episode.graph, T.softmax_cross_entropy(episode.scores.logits, [label])[0]
        return build_loss

    @pytest.mark.parametrize("name", ["cls.w", "cls.b", "rnn.w_in", "rnn.w11", "fuse.w", "loc.w"])
    def test_episode_gradient(self, name):
        model = make_tiny_model(seed=5)
        # keep the relu units of the bottom deck alive
        for bias in ["fuse.b", "rnn.b1", "loc.b"]:
            model.params[bias].value[...] = 0.1
        assert T.finite_diff_check(self.build(model), model.params, name, entries=8) < 1e-4

    def test_core_gets_no_gradient(self):
        """
        Test: glimpse features are a stop-gradient input even for an unfrozen core
        """
        model = make_tiny_model(frozen=False)
        for bias in ["fuse.b", "rnn.b1", "loc.b"]:
            model.params[bias].value[...] = 0.1
        model.params.zero_grad()
        (graph, loss) = self.build(model)(model.params)
        T.backward(graph, loss)
        assert all(not np.any(model.params.grad(n)) for n in model.core.names())
        assert np.any(model.params.grad("cls.w"))


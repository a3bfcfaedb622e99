import numpy as np
import pytest

from fovea import optimizer
from fovea import tensor as T
from fovea.cexceptions import CX

TOLERANCE = 1e-4


def project(graph, x, seed=7):
    """
    Reduce a batch-1 tensor to a scalar with a fixed random direction.
    """
    flat = T.flatten(x) if x.value.ndim > 2 else x
    direction = np.random.default_rng(seed).normal(size=(flat.shape[1], 1))
    return T.fully_connected(flat, graph.constant(direction))


def naive_conv(x, k, stride, padding):
    (b, c, h, w) = x.shape
    (n, _, kh, kw) = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((b, n, ho, wo))
    for bi in range(b):
        for ki in range(n):
            for i in range(ho):
                for j in range(wo):
                    window = xp[bi, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[bi, ki, i, j] = np.sum(window * k[ki])
    return out


class TestForward:

    def test_fully_connected(self, rng):
        """
        Test: fully connected forward is x.W + b
        """
        params = T.ParameterSet()
        params.add("w", rng.normal(size=(4, 3)))
        params.add("b", rng.normal(size=3))
        graph = T.Graph(params)
        x = rng.normal(size=(2, 4))
        out = T.fully_connected(graph.constant(x), graph.parameter("w"), graph.parameter("b"))
        assert np.allclose(out.value, x.dot(params["w"].value) + params["b"].value, rtol=0, atol=1e-12)

    def test_fully_connected_shape_error(self, rng):
        graph = T.Graph()
        with pytest.raises(CX):
            T.fully_connected(graph.constant(np.zeros((1, 3))), graph.constant(np.zeros((4, 2))))

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (2, 3)])
    def test_conv_matches_loops(self, rng, stride, padding):
        """
        Test: conv2d equals a direct loop implementation
        """
        x = rng.normal(size=(2, 3, 9, 9))
        k = rng.normal(size=(4, 3, 3, 3))
        graph = T.Graph()
        out = T.conv2d(graph.constant(x), graph.constant(k), stride, padding)
        expected = naive_conv(x, k, stride, padding)
        assert out.shape == expected.shape
        assert np.allclose(out.value, expected, rtol=0, atol=1e-12)

    def test_conv_output_size(self, rng):
        """
        Test: 96x96 input, 7x7 kernel, stride 2, padding 3 gives 48x48
        """
        graph = T.Graph()
        out = T.conv2d(graph.constant(np.zeros((1, 1, 96, 96))), graph.constant(np.zeros((2, 1, 7, 7))), 2, 3)
        assert out.shape == (1, 2, 48, 48)

    def test_conv_errors(self):
        graph = T.Graph()
        with pytest.raises(CX):
            T.conv2d(graph.constant(np.zeros((1, 2, 5, 5))), graph.constant(np.zeros((1, 3, 3, 3))))
        with pytest.raises(CX):
            T.conv2d(graph.constant(np.zeros((1, 1, 2, 2))), graph.constant(np.zeros((1, 1, 5, 5))))
        with pytest.raises(CX):
            T.conv2d(graph.constant(np.zeros((1, 5, 5))), graph.constant(np.zeros((1, 1, 3, 3))))

    def test_max_pool_ties_take_first(self):
        graph = T.Graph(T.ParameterSet())
        graph.params.add("x", np.ones((1, 1, 2, 2)))
        out = T.pool(graph.parameter("x"), "max", 2, 2)
        T.backward(graph, project(graph, out))
        grad = graph.params.grad("x")[0, 0]
        assert grad[0, 0] != 0.0
        assert grad[0, 1] == 0.0 and grad[1, 0] == 0.0 and grad[1, 1] == 0.0

    def test_avg_pool(self, rng):
        x = rng.normal(size=(1, 2, 4, 4))
        graph = T.Graph()
        out = T.pool(graph.constant(x), "avg", 2, 2)
        assert np.allclose(out.value[0, 1, 1, 0], x[0, 1, 2:4, 0:2].mean(), rtol=0, atol=1e-15)

    def test_softmax_cross_entropy_value(self):
        graph = T.Graph()
        logits = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
        (loss, probs) = T.softmax_cross_entropy(graph.constant(logits), [2, 0])
        expected = -(np.log(np.exp(3.0) / np.exp(logits[0]).sum()) + np.log(1.0 / 3.0)) / 2.0
        assert abs(loss.item() - expected) < 1e-12
        assert np.allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_softmax_cross_entropy_label_range(self):
        graph = T.Graph()
        with pytest.raises(CX):
            T.softmax_cross_entropy(graph.constant(np.zeros((1, 3))), [3])

    def test_softmax_stable(self):
        probs = T.softmax(np.array([[1000.0, 1000.0]]))
        assert np.all(np.isfinite(probs))
        assert probs[0, 0] == 0.5


class TestGradients:

    def check(self, build, params, names):
        for name in names:
            error = T.finite_diff_check(build, params, name)
            assert error < TOLERANCE, "%s: relative error %g" % (name, error)

    def test_fully_connected(self, rng):
        params = T.ParameterSet()
        params.add("x", rng.normal(size=(1, 5)))
        params.add("w", rng.normal(size=(5, 4)))
        params.add("b", rng.normal(size=4))

        def build(p):
            graph = T.Graph(p)
            out = T.fully_connected(graph.parameter("x"), graph.parameter("w"), graph.parameter("b"))
            return graph, project(graph, T.activation(out, "tanh"))

        self.check(build, params, ["x", "w", "b"])

    @pytest.mark.parametrize("stride,padding", [(1, 1), (2, 1)])
    def test_conv(self, rng, stride, padding):
        params = T.ParameterSet()
        params.add("x", rng.normal(size=(1, 2, 7, 7)))
        params.add("k", rng.normal(size=(3, 2, 3, 3)))
        params.add("b", rng.normal(size=3))

        def build(p):
            graph = T.Graph(p)
            out = T.conv2d(graph.parameter("x"), graph.parameter("k"), stride, padding, bias=graph.parameter("b"))
            return graph, project(graph, out)

        self.check(build, params, ["x", "k", "b"])

    @pytest.mark.parametrize("kind", ["max", "avg"])
    def test_pool(self, rng, kind):
        params = T.ParameterSet()
        params.add("x", rng.normal(size=(1, 2, 6, 6)))

        def build(p):
            graph = T.Graph(p)
            return graph, project(graph, T.pool(graph.parameter("x"), kind, 2, 2))

        self.check(build, params, ["x"])

    @pytest.mark.parametrize("kind", ["relu", "tanh"])
    def test_activation(self, rng, kind):
        params = T.ParameterSet()
        # keep relu inputs away from the kink
        value = rng.normal(size=(1, 8))
        value[np.abs(value) < 0.1] = 0.5
        params.add("x", value)

        def build(p):
            graph = T.Graph(p)
            return graph, project(graph, T.activation(graph.parameter("x"), kind))

        self.check(build, params, ["x"])

    def test_softmax_cross_entropy(self, rng):
        params = T.ParameterSet()
        params.add("z", rng.normal(size=(3, 4)))

        def build(p):
            graph = T.Graph(p)
            return graph, T.softmax_cross_entropy(graph.parameter("z"), [0, 3, 1])[0]

        self.check(build, params, ["z"])

    def test_concat_slice_add_scale(self, rng):
        params = T.ParameterSet()
        params.add("a", rng.normal(size=(1, 3)))
        params.add("b", rng.normal(size=(1, 2)))

        def build(p):
            graph = T.Graph(p)
            joined = T.concat([graph.parameter("a"), graph.parameter("b")], axis=1)
            left = T.slice_axis(joined, 1, 0, 2)
            right = T.slice_axis(joined, 1, 3, 5)
            out = T.scale(T.add(T.activation(left, "tanh"), right), 3.0)
            return graph, project(graph, out)

        self.check(build, params, ["a", "b"])

    def test_shared_parameter_accumulates(self, rng):
        """
        Test: a parameter bound twice gets the sum of both uses
        """
        params = T.ParameterSet()
        params.add("w", rng.normal(size=(3, 3)))
        fixed = rng.normal(size=(1, 3))

        def build_fixed(p):
            graph = T.Graph(p)
            hidden = T.activation(T.fully_connected(graph.constant(fixed), graph.parameter("w")), "tanh")
            return graph, project(graph, T.fully_connected(hidden, graph.parameter("w")))

        graph = T.Graph(params)
        assert graph.parameter("w") is graph.parameter("w")
        self.check(build_fixed, params, ["w"])

    def test_clip_mask(self):
        params = T.ParameterSet()
        params.add("x", np.array([[-2.0, -0.5, 0.5, 2.0]]))
        graph = T.Graph(params)
        out = T.clip(graph.parameter("x"), -1.0, 1.0)
        assert out.value.tolist() == [[-1.0, -0.5, 0.5, 1.0]]
        T.backward(graph, T.fully_connected(out, graph.constant(np.ones((4, 1)))))
        assert params.grad("x").tolist() == [[0.0, 1.0, 1.0, 0.0]]


class TestBackward:

    def test_scalar_required(self):
        params = T.ParameterSet()
        params.add("x", np.zeros((1, 2)))
        graph = T.Graph(params)
        with pytest.raises(CX):
            T.backward(graph, graph.parameter("x"))

    def test_stop_gradient(self, rng):
        """
        Test: nothing flows through a stop-gradient node
        """
        params = T.ParameterSet()
        params.add("w", rng.normal(size=(2, 2)))
        params.add("v", rng.normal(size=(2, 1)))
        graph = T.Graph(params)
        hidden = T.stop_gradient(T.fully_connected(graph.constant(np.ones((1, 2))), graph.parameter("w")))
        loss = T.fully_connected(hidden, graph.parameter("v"))
        T.backward(graph, loss)
        assert np.all(params.grad("w") == 0.0)
        assert np.any(params.grad("v") != 0.0)
        assert "stop_gradient" in graph.ops()

    def test_frozen_parameters(self, rng):
        params = T.ParameterSet()
        params.add("core.w", rng.normal(size=(2, 2)))
        params.add("head.w", rng.normal(size=(2, 1)))
        params.freeze("core.")
        graph = T.Graph(params)
        hidden = T.fully_connected(graph.constant(np.ones((1, 2))), graph.parameter("core.w"))
        T.backward(graph, T.fully_connected(hidden, graph.parameter("head.w")))
        assert np.all(params.grad("core.w") == 0.0)
        assert params.trainable() == ["head.w"]

    def test_seeds_add_upstream_gradient(self):
        params = T.ParameterSet()
        params.add("b", np.zeros(2))
        params.add("v", np.ones((2, 1)))
        graph = T.Graph(params)
        x = T.fully_connected(graph.constant(np.zeros((1, 2))), graph.constant(np.zeros((2, 2))),
                              graph.parameter("b"))
        loss = T.fully_connected(x, graph.parameter("v"))
        T.backward(graph, loss, seeds={x: np.array([[0.25, -1.0]])})
        assert params.grad("b").tolist() == [1.25, 0.0]

    def test_unknown_parameter(self):
        with pytest.raises(CX):
            T.ParameterSet()["missing"]

    def test_update_checks_shapes(self):
        params = T.ParameterSet()
        params.add("w", np.zeros((2, 2)))
        with pytest.raises(CX):
            params.update({"w": np.zeros(3)})


class TestMomentumSGD:

    def test_zero_learning_rate_keeps_values(self, rng):
        params = T.ParameterSet()
        params.add("w", rng.normal(size=(3, 3)))
        before = params["w"].value.copy()
        params["w"].grad[...] = 1.0
        sgd = optimizer.MomentumSGD(params, 0.0, 0.9)
        sgd.step()
        sgd.step()
        assert params["w"].value.tobytes() == before.tobytes()

    def test_momentum_update(self):
        params = T.ParameterSet()
        params.add("w", np.zeros(1))
        sgd = optimizer.MomentumSGD(params, 0.1, 0.5)
        params["w"].grad[...] = 1.0
        sgd.step()
        assert np.allclose(params["w"].value, [-0.1])
        sgd.step()
        # v = 0.5 * -0.1 - 0.1 = -0.15
        assert np.allclose(params["w"].value, [-0.25])

    def test_frozen_skipped(self):
        params = T.ParameterSet()
        params.add("core.w", np.zeros(1))
        params.freeze("core.")
        params["core.w"].grad[...] = 1.0
        optimizer.MomentumSGD(params, 0.1).step()
        assert params["core.w"].value[0] == 0.0

    def test_bad_hyperparameters(self):
        with pytest.raises(CX):
            optimizer.MomentumSGD(T.ParameterSet(), 0.1, 1.0)
        with pytest.raises(CX):
            optimizer.MomentumSGD(T.ParameterSet(), -0.1)

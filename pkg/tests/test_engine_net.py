import numpy as np
import pytest

from evocae.engine import (
    adam_step,
    effective_lr,
    gradcheck_network,
    init_weights,
    load_weights,
    save_weights,
    train_steps,
)
from evocae.errors import TrainingDivergedError
from evocae.network import TaskMode, expand, parse_arch, trace_shapes


def small_cae(arch="CS(4,3)-C(6,3)", mode=TaskMode.INPAINTING, channels=1, size=8):
    return expand(parse_arch(arch), mode, channels, (size, size))


class TestInit:
    def test_seed_determinism(self):
        cae = small_cae()
        a = init_weights(cae, np.random.default_rng(3))
        b = init_weights(cae, np.random.default_rng(3))
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.weight, lb.weight)
            np.testing.assert_array_equal(la.bias, lb.bias)

    def test_biases_zero_moments_zero_step_zero(self):
        net = init_weights(small_cae(), np.random.default_rng(0))
        assert net.step == 0
        for layer in net.layers:
            assert not layer.bias.any()
            assert not layer.m_w.any() and not layer.v_w.any()
            assert not layer.m_b.any() and not layer.v_b.any()

    def test_variance_matches_fan_in_rule(self):
        # 64-input 3x3 layer: var = 2 / (64 * 9); sample over ~1.2e6 weights.
        cae = expand(parse_arch("CS(64,3)-CS(2048,3)"), TaskMode.DENOISING, 1, (16, 16))
        net = init_weights(cae, np.random.default_rng(1), dtype=np.float64)
        w = net.layers[1].weight  # conv 64 -> 2048, k3
        assert w.size == 2048 * 64 * 9
        expected = 2.0 / (64 * 9)
        assert abs(w.var() - expected) / expected < 0.05

    def test_weight_dims_match_spec(self):
        cae = small_cae("CS(4,1)-C(6,5)")
        net = init_weights(cae, np.random.default_rng(2))
        assert net.layers[0].weight.shape == (4, 1, 1, 1)
        assert net.layers[1].weight.shape == (6, 4, 5, 5)
        assert net.layers[2].weight.shape == (6, 6, 5, 5)  # tconv: (in, out, k, k)
        assert net.layers[3].weight.shape == (4, 6, 1, 1)
        assert net.layers[4].weight.shape == (1, 4, 3, 3)


class TestAdam:
    def _one_param_net(self):
        cae = expand(parse_arch("C(2,1)"), TaskMode.DENOISING, 1, (4, 4))
        net = init_weights(cae, np.random.default_rng(0), dtype=np.float64)
        return net

    def test_first_step_bias_corrected_delta(self):
        net = self._one_param_net()
        before = [layer.weight.copy() for layer in net.layers]
        grads = [(np.ones_like(l.weight), np.ones_like(l.bias)) for l in net.layers]
        adam_step(net, grads, lr=0.001)
        # t=1, zero moments, g=1: delta = -lr * 1 / (1 + eps)
        expected = -0.001 * (1.0 / (1.0 + 1e-8))
        for layer, prev in zip(net.layers, before):
            np.testing.assert_allclose(layer.weight - prev, expected, rtol=1e-12)
        assert net.step == 1

    def test_zero_gradient_leaves_parameters(self):
        net = self._one_param_net()
        before = [layer.weight.copy() for layer in net.layers]
        grads = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in net.layers]
        adam_step(net, grads, lr=0.1)
        for layer, prev in zip(net.layers, before):
            np.testing.assert_array_equal(layer.weight, prev)

    def test_identical_sequences_identical_parameters(self):
        rng = np.random.default_rng(5)
        grad_seq = [
            [
                (rng.normal(size=(2, 1, 1, 1)), rng.normal(size=2)),
                (rng.normal(size=(2, 2, 1, 1)), rng.normal(size=2)),
                (rng.normal(size=(1, 2, 3, 3)), rng.normal(size=1)),
            ]
            for _ in range(100)
        ]
        nets = [self._one_param_net(), self._one_param_net()]
        for net in nets:
            for grads in grad_seq:
                adam_step(net, grads, lr=0.01)
        for la, lb in zip(nets[0].layers, nets[1].layers):
            np.testing.assert_array_equal(la.weight, lb.weight)
            np.testing.assert_array_equal(la.bias, lb.bias)

    def test_non_finite_gradient_raises(self):
        net = self._one_param_net()
        grads = [(np.full_like(l.weight, np.nan), np.zeros_like(l.bias)) for l in net.layers]
        with pytest.raises(TrainingDivergedError):
            adam_step(net, grads, lr=0.01)


class TestTrainSteps:
    @staticmethod
    def identity_stream(rng, shape):
        while True:
            x = rng.uniform(0.0, 1.0, size=shape).astype(np.float32)
            yield x, x

    def test_zero_iterations_unchanged(self):
        cae = small_cae("CS(4,3)", TaskMode.DENOISING)
        net = init_weights(cae, np.random.default_rng(0))
        before = [layer.weight.copy() for layer in net.layers]
        net, trace = train_steps(net, iter([]), 0, 1e-3)
        assert trace == []
        for layer, prev in zip(net.layers, before):
            np.testing.assert_array_equal(layer.weight, prev)

    def test_identity_task_loss_decreases(self):
        cae = small_cae("CS(8,3)", TaskMode.DENOISING)
        net = init_weights(cae, np.random.default_rng(1))
        stream = self.identity_stream(np.random.default_rng(2), (4, 1, 8, 8))
        net, trace = train_steps(net, stream, 200, 1e-2)
        assert trace[-1] < trace[0]

    def test_lr_schedule_segments(self):
        assert effective_lr(1e-3, 1, (100, 200)) == pytest.approx(1e-3)
        assert effective_lr(1e-3, 100, (100, 200)) == pytest.approx(1e-3)
        assert effective_lr(1e-3, 101, (100, 200)) == pytest.approx(1e-4)
        assert effective_lr(1e-3, 200, (100, 200)) == pytest.approx(1e-4)
        assert effective_lr(1e-3, 201, (100, 200)) == pytest.approx(1e-5)
        assert effective_lr(1e-3, 300, (100, 200)) == pytest.approx(1e-5)

    def test_bit_reproducible(self):
        cae = small_cae("CS(4,3)-C(4,3)")
        outs = []
        for _ in range(2):
            net = init_weights(cae, np.random.default_rng(7))
            stream = self.identity_stream(np.random.default_rng(8), (2, 1, 8, 8))
            net, trace = train_steps(net, stream, 50, 1e-3)
            outs.append((trace, [l.weight.copy() for l in net.layers]))
        assert outs[0][0] == outs[1][0]
        for a, b in zip(outs[0][1], outs[1][1]):
            np.testing.assert_array_equal(a, b)

    def test_divergence_carries_iteration(self):
        cae = small_cae("CS(4,3)", TaskMode.DENOISING)
        net = init_weights(cae, np.random.default_rng(0))

        def poisoned():
            x = np.ones((2, 1, 8, 8), dtype=np.float32)
            yield x, x
            yield x * np.nan, x

        with pytest.raises(TrainingDivergedError) as err:
            train_steps(net, poisoned(), 2, 1e-3)
        assert err.value.iteration == 2


class TestForwardShapes:
    @pytest.mark.parametrize("mode", [TaskMode.INPAINTING, TaskMode.DENOISING])
    def test_forward_matches_trace(self, mode):
        rng = np.random.default_rng(11)
        for _ in range(25):
            depth = int(rng.integers(1, 5))
            layers = "-".join(
                f"{'CS' if rng.integers(2) else 'C'}({int(rng.choice([2, 4]))},{int(rng.choice([1, 3, 5]))})"
                for _ in range(depth)
            )
            spec = parse_arch(layers)
            try:
                cae = expand(spec, mode, 1, (16, 16))
            except Exception:
                continue
            net = init_weights(cae, rng)
            x = rng.uniform(size=(2, 1, 16, 16)).astype(np.float32)
            expected = trace_shapes(cae)
            out, caches = net._forward_cached(x)
            # pre-activation shapes per layer match the trace
            for (_, pre), shape in zip(caches[:-1], expected[:-1]):
                assert pre.shape[1:] == shape
            assert out.shape == (2, *expected[-1])
            assert out.shape[1:] == (1, 16, 16)


class TestGradcheckNetwork:
    def test_full_inpainting_cae(self):
        cae = small_cae("CS(3,3)-C(4,3)-CS(3,1)", TaskMode.INPAINTING, 1, 8)
        assert gradcheck_network(cae, batch=2) < 1e-4

    def test_denoising_cae(self):
        cae = small_cae("CS(3,3)-C(2,5)", TaskMode.DENOISING, 1, 8)
        assert gradcheck_network(cae, batch=2) < 1e-4


class TestWeightCheckpoint:
    def test_round_trip(self, tmp_path):
        cae = small_cae("CS(4,3)-C(6,5)", TaskMode.INPAINTING, 1, 8)
        net = init_weights(cae, np.random.default_rng(13))
        stream = TestTrainSteps.identity_stream(np.random.default_rng(14), (2, 1, 8, 8))
        net, _ = train_steps(net, stream, 10, 1e-3)
        path = tmp_path / "weights.bin"
        save_weights(net, path)
        loaded = load_weights(path)
        assert loaded.step == net.step
        assert loaded.cae == net.cae
        for la, lb in zip(net.layers, loaded.layers):
            assert la.spec == lb.spec
            np.testing.assert_array_equal(la.weight, lb.weight)
            np.testing.assert_array_equal(la.bias, lb.bias)
            np.testing.assert_array_equal(la.m_w, lb.m_w)
            np.testing.assert_array_equal(la.v_w, lb.v_w)
            np.testing.assert_array_equal(la.m_b, lb.m_b)
            np.testing.assert_array_equal(la.v_b, lb.v_b)
        x = np.random.default_rng(15).uniform(size=(2, 1, 8, 8)).astype(np.float32)
        np.testing.assert_array_equal(net.forward(x), loaded.forward(x))

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(Exception):
            load_weights(path)

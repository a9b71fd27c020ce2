import numpy as np
import pytest

from emotionforge import nn
from emotionforge.errors import NonFiniteActivationError, ShapeMismatchError, StaleCacheError
from emotionforge.rng import Prng


def rnd(shape, seed, scale=1.0, dtype=np.float64):
    n = int(np.prod(shape))
    return (Prng(seed).normal(n).reshape(shape) * scale).astype(dtype)


def fd_grad(f, tensor, eps=1e-6):
    """Central finite differences of scalar f() w.r.t. every tensor entry."""
    g = np.zeros_like(tensor)
    flat = tensor.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        up = f()
        flat[i] = keep - eps
        down = f()
        flat[i] = keep
        gf[i] = (up - down) / (2 * eps)
    return g


def max_rel_err(a, b):
    denom = np.abs(a) + np.abs(b)
    scale = np.where(denom < 1e-8, 1.0, denom)
    return float((np.abs(a - b) / scale).max())


class TestConv:
    def test_identity_kernel(self):
        x = rnd((2, 1, 5, 5), 0)
        w = np.ones((1, 1, 1, 1))
        y = nn.conv2d_forward(x, w, np.zeros(1), stride=1, pad=0)
        assert np.array_equal(y, x)

    def test_all_ones_kernel_on_constant(self):
        x = np.full((1, 1, 6, 6), 3.0)
        w = np.ones((1, 1, 3, 3))
        y = nn.conv2d_forward(x, w, np.array([2.0]), stride=1, pad=0)
        assert np.allclose(y, 9 * 3.0 + 2.0)

    def test_shape_formula(self):
        x = np.zeros((1, 1, 128, 128), dtype=np.float32)
        w = np.zeros((32, 1, 5, 5), dtype=np.float32)
        y = nn.conv2d_forward(x, w, np.zeros(32, dtype=np.float32), stride=2, pad=2)
        assert y.shape == (1, 32, 64, 64)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            nn.conv2d_forward(np.zeros((1, 3, 8, 8)), np.zeros((4, 2, 3, 3)),
                              np.zeros(4), 1, 1)

    def test_backward_scalar_case(self):
        x = np.array([[[[2.0]]]])
        w = np.array([[[[3.0]]]])
        dx, dw, db = nn.conv2d_backward(x, w, np.array([[[[5.0]]]]), 1, 0)
        assert (dx.item(), dw.item(), db.item()) == (15.0, 10.0, 5.0)

    def test_backward_zero_upstream(self):
        x = rnd((1, 2, 6, 6), 1)
        w = rnd((3, 2, 3, 3), 2)
        up = np.zeros((1, 3, 6, 6))
        dx, dw, db = nn.conv2d_backward(x, w, up, 1, 1)
        assert not dx.any() and not dw.any() and not db.any()

    def test_backward_matches_finite_differences(self):
        # random small case against the FD oracle; conv is linear, so the
        # pinned eps=1e-3 is exact up to float64 round-off
        x = rnd((1, 2, 6, 6), 3)
        w = rnd((3, 2, 3, 3), 4, scale=0.5)
        b = rnd((3,), 5)
        proj = rnd((1, 3, 6, 6), 6)  # fixed projection makes the output scalar

        def f():
            return float((nn.conv2d_forward(x, w, b, 1, 1) * proj).sum())

        _, dw, db = nn.conv2d_backward(x, w, proj, 1, 1)
        dx = nn.conv2d_backward(x, w, proj, 1, 1)[0]
        assert max_rel_err(dw, fd_grad(f, w, eps=1e-3)) < 1e-3
        assert max_rel_err(db, fd_grad(f, b, eps=1e-3)) < 1e-3
        assert max_rel_err(dx, fd_grad(f, x, eps=1e-3)) < 1e-3

    def test_strided_backward_matches_fd(self):
        x = rnd((2, 1, 8, 8), 7)
        w = rnd((2, 1, 5, 5), 8, scale=0.5)
        b = rnd((2,), 9)
        proj = rnd((2, 2, 4, 4), 10)

        def f():
            return float((nn.conv2d_forward(x, w, b, 2, 2) * proj).sum())

        dx, dw, db = nn.conv2d_backward(x, w, proj, 2, 2)
        assert max_rel_err(dw, fd_grad(f, w, eps=1e-3)) < 1e-3
        assert max_rel_err(dx, fd_grad(f, x, eps=1e-3)) < 1e-3


class TestRelu:
    def test_forward_backward(self):
        x = np.array([-1.0, 0.0, 2.0])
        assert nn.relu_forward(x).tolist() == [0.0, 0.0, 2.0]
        assert nn.relu_backward(x, np.array([5.0, 5.0, 5.0])).tolist() == [0.0, 0.0, 5.0]

    def test_backward_matches_fd_away_from_kink(self):
        x = rnd((4, 6), 11)
        x[np.abs(x) < 0.05] = 0.1  # keep clear of the kink for the FD probe
        proj = rnd((4, 6), 12)

        def f():
            return float((nn.relu_forward(x) * proj).sum())

        dx = nn.relu_backward(x, proj)
        assert max_rel_err(dx, fd_grad(f, x, eps=1e-3)) < 1e-3


class TestMaxpool:
    def test_window_and_routing(self):
        x = np.array([[[[1.0, 2.0], [4.0, 3.0]]]])
        out, idx = nn.maxpool_forward(x)
        assert out.item() == 4.0
        dx = nn.maxpool_backward(x.shape, idx, np.array([[[[7.0]]]]))
        assert dx.reshape(4).tolist() == [0.0, 0.0, 7.0, 0.0]

    def test_tie_goes_to_first_row_major(self):
        x = np.array([[[[5.0, 5.0], [5.0, 5.0]]]])
        _, idx = nn.maxpool_forward(x)
        assert idx.item() == 0
        dx = nn.maxpool_backward(x.shape, idx, np.array([[[[1.0]]]]))
        assert dx.reshape(4).tolist() == [1.0, 0.0, 0.0, 0.0]

    def test_odd_dims_rejected(self):
        with pytest.raises(ShapeMismatchError):
            nn.maxpool_forward(np.zeros((1, 1, 5, 4)))

    def test_backward_matches_fd(self):
        x = rnd((2, 3, 4, 4), 13)
        proj = rnd((2, 3, 2, 2), 14)

        def f():
            return float((nn.maxpool_forward(x)[0] * proj).sum())

        _, idx = nn.maxpool_forward(x)
        dx = nn.maxpool_backward(x.shape, idx, proj)
        assert max_rel_err(dx, fd_grad(f, x, eps=1e-3)) < 1e-3


class TestFc:
    def test_identity(self):
        x = rnd((3, 4), 15)
        y = nn.fc_forward(x, np.eye(4), np.zeros(4))
        assert np.allclose(y, x)

    def test_backward_matches_fd(self):
        x = rnd((3, 5), 16)
        w = rnd((4, 5), 17)
        b = rnd((4,), 18)
        proj = rnd((3, 4), 19)

        def f():
            return float((nn.fc_forward(x, w, b) * proj).sum())

        dx, dw, db = nn.fc_backward(x, w, proj)
        assert max_rel_err(dw, fd_grad(f, w, eps=1e-3)) < 1e-3
        assert max_rel_err(db, fd_grad(f, b, eps=1e-3)) < 1e-3
        assert max_rel_err(dx, fd_grad(f, x, eps=1e-3)) < 1e-3

    def test_dim_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            nn.fc_forward(np.zeros((2, 5)), np.zeros((4, 6)), np.zeros(4))


class TestDropout:
    def test_mask_scaling_and_determinism(self):
        x = np.ones((100, 100))
        y1, m1 = nn.dropout_forward(x, 0.5, Prng.derive(3, 2, 0))
        y2, m2 = nn.dropout_forward(x, 0.5, Prng.derive(3, 2, 0))
        assert np.array_equal(y1, y2) and np.array_equal(m1, m2)
        assert set(np.unique(y1)) == {0.0, 2.0}  # inverted scaling by 1/(1-p)
        assert abs(m1.mean() - 0.5) < 0.02

    def test_backward_routes_through_mask(self):
        x = np.ones((4, 4))
        y, mask = nn.dropout_forward(x, 0.5, Prng(9))
        dx = nn.dropout_backward(mask, 0.5, np.ones_like(x))
        assert np.array_equal(dx, mask * 2.0)


class TestArchitecture:
    def test_parameter_count(self):
        p = nn.init_params(seed=0)
        per_layer = [w.size + b.size for w, b in zip(p.weights, p.biases)]
        assert per_layer == [832, 18496, 73856, 2097408, 1799]
        assert p.param_count == 2_192_391

    def test_spatial_ladder(self):
        x = np.zeros((1, 1, 128, 128), dtype=np.float32)
        sizes = []
        pi = 0
        p = nn.init_params(seed=0)
        for spec in p.layers:
            if spec.kind == nn.CONV:
                x = nn.conv2d_forward(x, p.weights[pi], p.biases[pi], spec.stride, spec.pad)
                pi += 1
                sizes.append(x.shape[-1])
            elif spec.kind == nn.MAXPOOL:
                x, _ = nn.maxpool_forward(x)
                sizes.append(x.shape[-1])
            elif spec.kind == nn.FLATTEN:
                assert x.shape[1] * x.shape[2] * x.shape[3] == 8192
                break
        assert sizes == [64, 32, 32, 16, 16, 8]

    def test_init_deterministic_and_zero_biases(self):
        a = nn.init_params(seed=4)
        b = nn.init_params(seed=4)
        c = nn.init_params(seed=5)
        assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
        assert not np.array_equal(a.weights[0], c.weights[0])
        assert all(not bb.any() for bb in a.biases)

    def test_reduced_clone_shapes(self):
        p = nn.init_params(seed=1, input_hw=16)
        logits = nn.forward(p, np.zeros((2, 1, 16, 16), dtype=np.float32))
        assert logits.shape == (2, 7)
        assert p.layers[10].in_dim == 128  # 128 channels * 1 * 1


class TestForwardBackward:
    def test_logits_shape(self):
        p = nn.init_params(seed=2)
        x = rnd((3, 1, 128, 128), 20, dtype=np.float32) * 0.1 + 0.5
        assert nn.forward(p, x).shape == (3, 7)

    def test_zero_input_zero_weights(self):
        p = nn.init_params(seed=0, input_hw=16)
        for w in p.weights:
            w[:] = 0
        logits = nn.forward(p, np.zeros((2, 1, 16, 16), dtype=np.float32))
        assert not logits.any()

    def test_infer_deterministic(self):
        p = nn.init_params(seed=3, input_hw=16)
        x = rnd((2, 1, 16, 16), 21, dtype=np.float32)
        a = nn.forward(p, x)
        b = nn.forward(p, x)
        assert np.array_equal(a, b)

    def test_train_dropout_differs_from_infer(self):
        p = nn.init_params(seed=3, input_hw=16)
        x = np.abs(rnd((2, 1, 16, 16), 22, dtype=np.float32))
        infer = nn.forward(p, x, mode="infer")
        trained, _ = nn.forward(p, x, mode="train", rng=Prng.derive(3, 2, 0))
        assert not np.array_equal(infer, trained)

    def test_zero_dlogits_zero_grads(self):
        p = nn.init_params(seed=4, input_hw=16).astype(np.float64)
        x = rnd((2, 1, 16, 16), 23)
        logits, caches = nn.forward(p, x, mode="train")
        dws, dbs = nn.backward(p, caches, np.zeros_like(logits))
        assert all(not g.any() for g in dws + dbs)

    def test_gradients_additive_over_batch(self):
        p = nn.init_params(seed=5, input_hw=16).astype(np.float64)
        x = rnd((2, 1, 16, 16), 24)
        dl = rnd((2, 7), 25)
        _, caches = nn.forward(p, x, mode="train")
        dws, dbs = nn.backward(p, caches, dl)
        parts = []
        for i in range(2):
            _, c = nn.forward(p, x[i : i + 1], mode="train")
            parts.append(nn.backward(p, c, dl[i : i + 1]))
        for g, g0, g1 in zip(dws + dbs, parts[0][0] + parts[0][1], parts[1][0] + parts[1][1]):
            assert np.allclose(g, g0 + g1, atol=1e-12)

    def test_frozen_forward_matches_at_base_point(self):
        p = nn.init_params(seed=6, input_hw=16).astype(np.float64)
        x = rnd((2, 1, 16, 16), 26)
        logits, caches = nn.forward(p, x, mode="train")
        assert np.allclose(nn.forward_frozen(p, x, caches), logits)

    def test_non_finite_raises(self):
        p = nn.init_params(seed=7, input_hw=16)
        x = np.full((1, 1, 16, 16), np.nan, dtype=np.float32)
        with pytest.raises(NonFiniteActivationError):
            nn.forward(p, x)

    def test_bad_input_shape(self):
        p = nn.init_params(seed=8, input_hw=16)
        with pytest.raises(ShapeMismatchError):
            nn.forward(p, np.zeros((1, 3, 16, 16), dtype=np.float32))

    def test_stale_cache(self):
        p = nn.init_params(seed=9, input_hw=16)
        x = rnd((2, 1, 16, 16), 27, dtype=np.float32)
        _, caches = nn.forward(p, x, mode="train")
        with pytest.raises(StaleCacheError):
            nn.backward(p, caches, np.zeros((4, 7), dtype=np.float32))
        with pytest.raises(StaleCacheError):
            nn.backward(p, caches[:-1], np.zeros((2, 7), dtype=np.float32))

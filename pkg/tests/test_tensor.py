"""Tests for the tensor core: ops, backward pass, optimizer and container format."""

import numpy as np
import pytest

from bdcnet.errors import CheckpointIntegrityError, ConfigurationError, TensorUsageError, TrainingError
from bdcnet.tensor import (
    ConvSpec,
    OptimState,
    Tensor,
    add,
    conv2d,
    maxpool2,
    parameter,
    read_container,
    relu,
    sgd_step,
    sigmoid,
    step_decay,
    sum_all,
    upsample_bilinear,
    write_container,
)
from bdcnet.tensor.checkpoint import MAGIC


def naive_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int = 1) -> np.ndarray:
    """Direct nested-loop dilated convolution without padding."""
    n, c, h, width = x.shape
    o, _, kh, kw = w.shape
    out_h = h - dilation * (kh - 1)
    out_w = width - dilation * (kw - 1)
    y = np.zeros((n, o, out_h, out_w))
    for bi in range(n):
        for oc in range(o):
            for i in range(out_h):
                for j in range(out_w):
                    acc = b[oc]
                    for ic in range(c):
                        for m in range(kh):
                            for k in range(kw):
                                acc += x[bi, ic, i + dilation * m, j + dilation * k] * w[oc, ic, m, k]
                    y[bi, oc, i, j] = acc
    return y


class TestConvolution:
    """Test dilated convolution against direct oracles."""

    def test_identity_kernel(self):
        """A 1x1 kernel of weight 1 and bias 0 returns its input."""
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(1, 1, 5, 6)))
        w = Tensor(np.ones((1, 1, 1, 1)))
        b = Tensor(np.zeros(1))

        y = conv2d(x, w, b)

        np.testing.assert_allclose(y.data, x.data, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_undilated_matches_nested_loops(self, seed):
        """With r=1 the op is textbook convolution."""
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 3, 7, 6))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)

        y = conv2d(Tensor(x), Tensor(w), Tensor(b), ConvSpec(kernel=(3, 3)))

        np.testing.assert_allclose(y.data, naive_conv(x, w, b), atol=1e-6)

    def test_dilated_samples_corners_and_center(self):
        """5x5 input, 3x3 kernel, r=2: a single output summing the 9 strided samples."""
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 1, 5, 5))
        w = rng.normal(size=(1, 1, 3, 3))
        b = np.array([0.25])

        y = conv2d(Tensor(x), Tensor(w), Tensor(b), ConvSpec(kernel=(3, 3), dilation=2))

        expected = b[0] + sum(x[0, 0, 2 * m, 2 * k] * w[0, 0, m, k] for m in range(3) for k in range(3))
        assert y.shape == (1, 1, 1, 1)
        assert y.data[0, 0, 0, 0] == pytest.approx(expected, abs=1e-9)
        np.testing.assert_allclose(y.data, naive_conv(x, w, b, dilation=2), atol=1e-9)

    @pytest.mark.parametrize("rate", [1, 4, 8, 12])
    def test_impulse_response_extent(self, rate):
        """The response to an impulse spans r * (k - 1) + 1 pixels per axis."""
        size = 31
        x = np.zeros((1, 1, size, size))
        x[0, 0, size // 2, size // 2] = 1.0
        w = np.ones((1, 1, 3, 3))

        y = conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(1)), ConvSpec.same(3, rate)).data[0, 0]

        rows, cols = np.nonzero(y)
        assert rows.max() - rows.min() + 1 == rate * 2 + 1
        assert cols.max() - cols.min() + 1 == rate * 2 + 1
        assert y.shape == (size, size)

    def test_same_padding_preserves_size(self):
        spec = ConvSpec.same(3, 8)
        assert spec.padding == 8
        assert spec.output_size(20, 17) == (20, 17)

    def test_invalid_geometry(self):
        """Bad ConvSpec values and too-small inputs are configuration errors."""
        with pytest.raises(ConfigurationError):
            ConvSpec(kernel=(0, 3))
        with pytest.raises(ConfigurationError):
            ConvSpec(dilation=0)
        with pytest.raises(ConfigurationError):
            ConvSpec(kernel=(3, 3), dilation=4).output_size(5, 5)

    def test_channel_mismatch(self):
        x = Tensor(np.zeros((1, 2, 4, 4)))
        w = Tensor(np.zeros((1, 3, 3, 3)))
        with pytest.raises(ConfigurationError, match="channels"):
            conv2d(x, w, Tensor(np.zeros(1)), ConvSpec.same(3))

    def test_dtype_preserved(self):
        x = Tensor(np.ones((1, 1, 4, 4), dtype=np.float32))
        w = Tensor(np.ones((1, 1, 3, 3), dtype=np.float32))
        y = conv2d(x, w, Tensor(np.zeros(1, dtype=np.float32)), ConvSpec.same(3))
        assert y.dtype == np.float32


class TestPooling:
    """Test 2x2 max pooling."""

    def test_constant_input(self):
        y = maxpool2(Tensor(np.full((1, 2, 6, 4), 3.0)))
        assert y.shape == (1, 2, 3, 2)
        assert np.all(y.data == 3.0)

    def test_two_by_two(self):
        y = maxpool2(Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]])))
        assert y.data.tolist() == [[[[4.0]]]]

    def test_matches_window_scan(self):
        """Random 8x8 input against an exhaustive window maximum."""
        x = np.random.default_rng(3).normal(size=(1, 1, 8, 8))
        y = maxpool2(Tensor(x)).data[0, 0]
        expected = np.array([[x[0, 0, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2].max() for j in range(4)] for i in range(4)])
        np.testing.assert_array_equal(y, expected)

    def test_odd_size_replicates_border(self):
        x = np.arange(9, dtype=np.float64).reshape(1, 1, 3, 3)
        y = maxpool2(Tensor(x)).data[0, 0]
        assert y.tolist() == [[4.0, 5.0], [7.0, 8.0]]

    def test_gradient_goes_to_first_maximum(self):
        """Ties route the whole gradient to the first maximum in row-major order."""
        x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
        sum_all(maxpool2(x)).backward()
        assert x.grad[0, 0].tolist() == [[1.0, 0.0], [0.0, 0.0]]


class TestUpsample:
    """Test align-corners bilinear upsampling."""

    def test_constant_map(self):
        y = upsample_bilinear(Tensor(np.full((1, 1, 3, 2), 0.7)), 7, 9)
        np.testing.assert_allclose(y.data, 0.7)

    def test_endpoints_align(self):
        y = upsample_bilinear(Tensor(np.array([[[[0.0, 1.0]]]])), 1, 5)
        np.testing.assert_allclose(y.data[0, 0, 0], [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_downsampling_rejected(self):
        with pytest.raises(ConfigurationError):
            upsample_bilinear(Tensor(np.zeros((1, 1, 4, 4))), 2, 2)


class TestBackward:
    """Test the reverse-mode engine."""

    def test_sum_gradient_is_ones(self):
        x = Tensor(np.random.default_rng(0).normal(size=(2, 3)), requires_grad=True)
        sum_all(x).backward()
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_sigmoid_slope_at_zero(self):
        x = Tensor(np.zeros((1,)), requires_grad=True)
        sum_all(sigmoid(x)).backward()
        assert x.grad[0] == pytest.approx(0.25)

    def test_shared_intermediate(self):
        """A node consumed twice receives the sum of both gradients."""
        x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        r = relu(x)
        sum_all(add(r, r)).backward()
        np.testing.assert_array_equal(x.grad, [2.0, 0.0, 2.0])

    def test_leaf_gradients_accumulate(self):
        """Two backward passes sum into leaf gradients until zero_grad."""
        x = Tensor(np.ones(4), requires_grad=True)
        sum_all(x * 2.0).backward()
        sum_all(x * 3.0).backward()
        np.testing.assert_array_equal(x.grad, np.full(4, 5.0))
        x.zero_grad()
        assert x.grad is None

    def test_non_scalar_backward_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(TensorUsageError, match="scalar"):
            (x * 2.0).backward()

    def test_backward_without_grad_rejected(self):
        with pytest.raises(TensorUsageError):
            sum_all(Tensor(np.ones(3))).backward()

    def test_detach_cuts_graph(self):
        x = Tensor(np.ones(2), requires_grad=True)
        d = (x * 2.0).detach()
        assert d.is_leaf
        assert not d.requires_grad
        np.testing.assert_array_equal(d.numpy(), [2.0, 2.0])

    def test_item_needs_single_element(self):
        assert Tensor(np.array([[2.5]])).item() == 2.5
        with pytest.raises(TensorUsageError):
            Tensor(np.ones(2)).item()

    def test_default_dtype_is_float32(self):
        assert Tensor([1.0, 2.0]).dtype == np.float32
        assert parameter((2, 2)).dtype == np.float32


class TestSGD:
    """Test SGD with momentum and coupled weight decay."""

    def test_plain_step(self):
        """Momentum 0 and no decay: param -= lr * grad."""
        p = parameter((3,), np.array([1.0, 2.0, 3.0]))
        grad = np.array([0.5, -1.0, 2.0], dtype=np.float32)
        state = OptimState(learning_rate=0.1, momentum=0.0, weight_decay=0.0)

        sgd_step({"p": p}, {"p": grad}, state)

        np.testing.assert_allclose(p.data, [0.95, 2.1, 2.8], rtol=1e-6)

    def test_momentum_without_gradient(self):
        """Zero gradient still moves the parameter by -lr * momentum * v."""
        p = parameter((2,), np.array([1.0, 1.0]))
        state = OptimState(learning_rate=0.5, momentum=0.9, weight_decay=0.0)
        state.velocity["p"] = np.array([1.0, -2.0], dtype=np.float32)

        sgd_step({"p": p}, {"p": np.zeros(2, dtype=np.float32)}, state)

        np.testing.assert_allclose(p.data, [1.0 - 0.45, 1.0 + 0.9], rtol=1e-6)

    def test_two_steps_unrolled(self):
        """Fixed g with momentum 0.9: displacement after two steps is -lr * (g + 1.9 g)."""
        p = parameter((1,), np.array([0.0]))
        g = np.array([1.0], dtype=np.float32)
        state = OptimState(learning_rate=0.01, momentum=0.9, weight_decay=0.0)

        sgd_step({"p": p}, {"p": g}, state)
        sgd_step({"p": p}, {"p": g}, state)

        assert p.data[0] == pytest.approx(-0.01 * 2.9, rel=1e-6)

    def test_weight_decay_is_coupled(self):
        p = parameter((1,), np.array([2.0]))
        state = OptimState(learning_rate=0.1, momentum=0.0, weight_decay=0.5)
        sgd_step({"p": p}, {"p": np.zeros(1, dtype=np.float32)}, state)
        assert p.data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)

    def test_non_finite_gradient_leaves_params_untouched(self):
        a = parameter((2,), np.array([1.0, 1.0]))
        b = parameter((2,), np.array([5.0, 5.0]))
        state = OptimState(learning_rate=0.1)
        grads = {"a": np.ones(2, dtype=np.float32), "b": np.array([np.nan, 0.0], dtype=np.float32)}

        with pytest.raises(TrainingError) as exc_info:
            sgd_step({"a": a, "b": b}, grads, state)

        assert exc_info.value.term == "b"
        np.testing.assert_array_equal(a.data, [1.0, 1.0])
        assert state.velocity == {}

    def test_invalid_hyperparameters(self):
        with pytest.raises(ConfigurationError):
            OptimState(learning_rate=0.0)
        with pytest.raises(ConfigurationError):
            OptimState(learning_rate=0.1, momentum=1.0)

    def test_step_decay(self):
        assert step_decay(1e-6, 0, 10000, 0.1) == 1e-6
        assert step_decay(1e-6, 9999, 10000, 0.1) == 1e-6
        assert step_decay(1e-6, 10000, 10000, 0.1) == pytest.approx(1e-7)
        assert step_decay(1e-6, 25000, 10000, 0.1) == pytest.approx(1e-8)


class TestContainer:
    """Test the binary container format."""

    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        records = {"a": rng.normal(size=(2, 3)).astype(np.float32), "scalar": np.array(1.5, dtype=np.float32)}
        path = tmp_path / "c.bdcn"

        write_container(path, records, {"kind": "test", "note": "x = y"})
        container = read_container(path)

        assert container.meta == {"kind": "test", "note": "x = y"}
        assert list(container.records) == ["a", "scalar"]
        assert container.records["a"].tobytes() == records["a"].tobytes()
        assert container.records["scalar"].shape == ()

    def test_header_layout(self, tmp_path):
        path = tmp_path / "c.bdcn"
        write_container(path, {"w": np.zeros((1,), dtype=np.float32)})
        raw = path.read_bytes()
        assert raw[:4] == MAGIC
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:16], "little") == 1

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bdcn"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(CheckpointIntegrityError, match="magic"):
            read_container(path)

    def test_truncated_record(self, tmp_path):
        path = tmp_path / "c.bdcn"
        write_container(path, {"w": np.ones((4, 4), dtype=np.float32)})
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(CheckpointIntegrityError, match="Truncated"):
            read_container(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "c.bdcn"
        write_container(path, {"w": np.ones(2, dtype=np.float32)})
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(CheckpointIntegrityError, match="trailing"):
            read_container(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "c.bdcn"
        write_container(path, {})
        raw = bytearray(path.read_bytes())
        raw[4:8] = (7).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointIntegrityError, match="version"):
            read_container(path)

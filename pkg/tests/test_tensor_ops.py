import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hazardnet.errors import DimensionError
from hazardnet.tensor_ops import (
    Activation,
    KernelBank,
    activate,
    activate_backward,
    conv2d_backward,
    conv2d_valid,
    maxpool2x2,
    maxpool2x2_backward,
)


def finite_difference(loss, arr, h=1e-5):
    """Central-difference gradient of a scalar function w.r.t. every entry
    of arr. Independent oracle: never touches the backward code."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss()
        flat[i] = orig - h
        down = loss()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def assert_grad_close(analytic, numeric, rel=1e-6, floor=1e-9):
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    bad = diff > np.maximum(rel * scale, floor)
    assert not bad.any(), f"max deviation {diff.max()} at {np.argwhere(bad)[:5]}"


class TestConv2dValid:
    def test_all_ones_3x3(self):
        x = np.ones((1, 3, 3))
        kb = KernelBank(weights=np.ones((1, 1, 3, 3)), biases=np.zeros(1))
        out = conv2d_valid(x, kb)
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 9.0

    def test_identity_kernel_is_bitwise_identity(self):
        rng = np.random.Generator(np.random.PCG64(3))
        x = rng.uniform(-1, 1, size=(2, 5, 7))
        kb = KernelBank(weights=np.ones((2, 2, 1, 1)) * np.eye(2)[:, :, None, None],
                        biases=np.zeros(2))
        # single-map variant from the contract: one 1x1 kernel, weight 1
        x1 = x[:1]
        kb1 = KernelBank(weights=np.ones((1, 1, 1, 1)), biases=np.zeros(1))
        out = conv2d_valid(x1, kb1)
        assert np.array_equal(out, x1)
        assert conv2d_valid(x, kb).shape == (2, 5, 7)

    def test_c1_shape(self):
        x = np.zeros((1, 32, 32))
        kb = KernelBank.zeros(64, 1, 5, 5)
        assert conv2d_valid(x, kb).shape == (64, 28, 28)

    def test_bias_added_per_map(self):
        x = np.zeros((1, 4, 4))
        kb = KernelBank(weights=np.zeros((3, 1, 2, 2)), biases=np.array([1.0, -2.0, 0.5]))
        out = conv2d_valid(x, kb)
        for o, b in enumerate(kb.biases):
            assert np.all(out[o] == b)

    def test_map_count_mismatch_names_both_shapes(self):
        x = np.zeros((2, 8, 8))
        kb = KernelBank.zeros(4, 3, 3, 3)
        with pytest.raises(DimensionError, match=r"2.*3|3.*2"):
            conv2d_valid(x, kb)

    def test_kernel_larger_than_input(self):
        x = np.zeros((1, 4, 4))
        kb = KernelBank.zeros(1, 1, 5, 5)
        with pytest.raises(DimensionError):
            conv2d_valid(x, kb)

    def test_linearity_in_input(self):
        rng = np.random.Generator(np.random.PCG64(11))
        x = rng.uniform(-1, 1, size=(3, 9, 9))
        y = rng.uniform(-1, 1, size=(3, 9, 9))
        kb = KernelBank(weights=rng.uniform(-1, 1, size=(4, 3, 3, 3)), biases=np.zeros(4))
        a, b = 0.7, -1.3
        lhs = conv2d_valid(a * x + b * y, kb)
        rhs = a * conv2d_valid(x, kb) + b * conv2d_valid(y, kb)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestConv2dBackward:
    def test_zero_upstream(self):
        x = np.ones((2, 6, 6))
        kb = KernelBank.zeros(3, 2, 3, 3)
        gx, gk = conv2d_backward(x, kb, np.zeros((3, 4, 4)))
        assert not gx.any()
        assert not gk.weights.any()
        assert not gk.biases.any()

    def test_hand_derived_nine_term_sum(self):
        x = np.ones((1, 3, 3))
        kb = KernelBank(weights=np.ones((1, 1, 3, 3)), biases=np.zeros(1))
        gx, gk = conv2d_backward(x, kb, np.ones((1, 1, 1)))
        assert np.all(gx == 1.0)
        assert np.all(gk.weights == 1.0)
        assert gk.biases[0] == 1.0

    def test_matches_finite_differences(self):
        rng = np.random.Generator(np.random.PCG64(7))
        x = rng.uniform(-1, 1, size=(2, 6, 7))
        kb = KernelBank(weights=rng.uniform(-1, 1, size=(3, 2, 3, 2)),
                        biases=rng.uniform(-1, 1, size=3))
        r = rng.uniform(-1, 1, size=(3, 4, 6))  # random linear functional

        def loss():
            return float(np.sum(conv2d_valid(x, kb) * r))

        gx, gk = conv2d_backward(x, kb, r)
        assert_grad_close(gx, finite_difference(loss, x))
        assert_grad_close(gk.weights, finite_difference(loss, kb.weights))
        assert_grad_close(gk.biases, finite_difference(loss, kb.biases))

    def test_shape_mismatch(self):
        x = np.zeros((1, 5, 5))
        kb = KernelBank.zeros(2, 1, 3, 3)
        with pytest.raises(DimensionError):
            conv2d_backward(x, kb, np.zeros((2, 4, 4)))


class TestMaxPool:
    def test_two_by_two(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out, cache = maxpool2x2(x)
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 4.0
        rows, cols = cache.winners()
        assert (rows[0, 0, 0], cols[0, 0, 0]) == (1, 1)

    def test_constant_input_ties_to_first_cell(self):
        x = np.full((2, 4, 6), 3.5)
        out, cache = maxpool2x2(x)
        assert np.all(out == 3.5)
        assert not cache.offset_rows.any()
        assert not cache.offset_cols.any()

    def test_shape_halves(self):
        out, _ = maxpool2x2(np.zeros((64, 28, 28)))
        assert out.shape == (64, 14, 14)

    def test_odd_dimension_rejected(self):
        with pytest.raises(DimensionError):
            maxpool2x2(np.zeros((1, 3, 4)))

    def test_backward_zero(self):
        _, cache = maxpool2x2(np.zeros((1, 4, 4)))
        assert not maxpool2x2_backward(cache, np.zeros((1, 2, 2))).any()

    def test_backward_routes_to_argmax(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        _, cache = maxpool2x2(x)
        gx = maxpool2x2_backward(cache, np.array([[[5.0]]]))
        assert np.array_equal(gx, np.array([[[0.0, 0.0], [0.0, 5.0]]]))

    def test_backward_matches_finite_differences(self):
        rng = np.random.Generator(np.random.PCG64(13))
        x = rng.uniform(-1, 1, size=(3, 6, 8))
        r = rng.uniform(-1, 1, size=(3, 3, 4))

        def loss():
            pooled, _ = maxpool2x2(x)
            return float(np.sum(pooled * r))

        _, cache = maxpool2x2(x)
        gx = maxpool2x2_backward(cache, r)
        assert_grad_close(gx, finite_difference(loss, x))

    def test_backward_shape_mismatch(self):
        _, cache = maxpool2x2(np.zeros((1, 4, 4)))
        with pytest.raises(DimensionError):
            maxpool2x2_backward(cache, np.zeros((1, 3, 3)))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_backward_deposits_one_value_per_window(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        x = rng.uniform(-1, 1, size=(2, 6, 6))  # continuous, ties have measure zero
        grad_out = rng.uniform(0.5, 1.5, size=(2, 3, 3))
        _, cache = maxpool2x2(x)
        gx = maxpool2x2_backward(cache, grad_out)
        assert np.count_nonzero(gx) == grad_out.size


class TestActivations:
    def test_tansig_zero(self):
        assert activate(np.zeros((1, 1, 1)), Activation.TANSIG)[0, 0, 0] == 0.0

    def test_tansig_saturation(self):
        y = activate(np.full((1, 1, 1), 20.0), Activation.TANSIG)[0, 0, 0]
        assert 1.0 - y < 1e-15

    def test_purelin_identity(self):
        x = np.array([[[1.5, -2.0, 0.0]]])
        assert np.array_equal(activate(x, Activation.PURELIN), x)

    def test_tansig_matches_definition(self):
        x = np.linspace(-10, 10, 201).reshape(1, 1, -1)
        formula = 2.0 / (1.0 + np.exp(-2.0 * x)) - 1.0
        assert np.max(np.abs(activate(x, Activation.TANSIG) - formula)) < 1e-15

    @given(st.floats(-18.0, 18.0, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_tansig_open_range(self, v):
        y = activate(np.full((1, 1, 1), v), Activation.TANSIG)[0, 0, 0]
        assert -1.0 < y < 1.0

    def test_backward_passes_through_at_zero(self):
        y = np.zeros((1, 2, 2))  # tansig output 0 means derivative 1
        g = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        assert np.array_equal(activate_backward(y, g, Activation.TANSIG), g)

    def test_purelin_backward_bit_identical(self):
        y = np.ones((1, 2, 3))
        g = np.array([[[0.1, -0.2, 0.3], [7.0, 0.0, -1e-300]]])
        assert np.array_equal(activate_backward(y, g, Activation.PURELIN), g)

    def test_backward_matches_finite_differences(self):
        rng = np.random.Generator(np.random.PCG64(17))
        x = rng.uniform(-1, 1, size=(2, 4, 4))
        r = rng.uniform(-1, 1, size=(2, 4, 4))
        for kind in Activation:
            def loss():
                return float(np.sum(activate(x, kind) * r))

            gx = activate_backward(activate(x, kind), r, kind)
            assert_grad_close(gx, finite_difference(loss, x))

    def test_backward_shape_mismatch(self):
        with pytest.raises(DimensionError):
            activate_backward(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)), Activation.TANSIG)

import numpy as np
import pytest

from hazardnet.errors import ConfigError, DimensionError
from hazardnet.network import (
    NetworkConfig,
    backward,
    forward,
    init_network,
    num_params,
    shape_plan,
    zero_network,
)
from hazardnet.training import mse_gradient, mse_loss, one_hot_target

EXPECTED_PLAN = [
    ("input", 1, 32, 32),
    ("c1", 64, 28, 28),
    ("s2", 64, 14, 14),
    ("c3", 32, 12, 12),
    ("s4", 32, 6, 6),
    ("c5", 16, 1, 1),
    ("f6", 12, 1, 1),
]


def test_default_shape_plan():
    assert shape_plan(NetworkConfig()) == EXPECTED_PLAN


def test_seven_by_seven_c1_fails_on_pool_parity():
    # 32 -> 26 (c1 7x7) -> 13 (s2) -> 11 (c3 3x3): odd 11 cannot 2x2-pool
    cfg = NetworkConfig(c1_kernel=(7, 7))
    with pytest.raises(ConfigError, match="s4"):
        shape_plan(cfg)


def test_small_input_fails_at_c5():
    # 16 -> 12 (c1) -> 6 (s2) -> 4 (c3) -> 2 (s4): 2 < 6, c5 cannot fit
    cfg = NetworkConfig(input_rows=16, input_cols=16)
    with pytest.raises(ConfigError, match="c5"):
        shape_plan(cfg)


def test_non_unit_c5_output_rejected():
    cfg = NetworkConfig(c5_kernel=(5, 5))
    with pytest.raises(ConfigError, match="c5"):
        shape_plan(cfg)


def test_init_is_deterministic():
    a = init_network(NetworkConfig(), seed=42)
    b = init_network(NetworkConfig(), seed=42)
    for pa, pb in zip(a.parameter_arrays(), b.parameter_arrays()):
        assert np.array_equal(pa, pb)
    c = init_network(NetworkConfig(), seed=43)
    assert not np.array_equal(a.c1.weights, c.c1.weights)


def test_init_biases_zero():
    net = init_network(NetworkConfig(), seed=1)
    assert not net.c1.biases.any()
    assert not net.c3.biases.any()
    assert not net.c5.biases.any()
    assert not net.f6_biases.any()


def test_init_c1_mean_near_zero():
    net = init_network(NetworkConfig(), seed=42)
    assert net.c1.weights.size == 1600
    assert abs(net.c1.weights.mean()) < 0.02


def test_init_bounds():
    net = init_network(NetworkConfig(), seed=5)
    bound = np.sqrt(6.0 / (1 * 25 + 64 * 25))
    assert np.max(np.abs(net.c1.weights)) <= bound


def test_num_params_hand_count():
    net = zero_network(NetworkConfig())
    assert num_params(net) == 38_780
    assert net.c1.weights.size + net.c1.biases.size == 1_664
    assert net.c3.weights.size + net.c3.biases.size == 18_464
    assert net.c5.weights.size + net.c5.biases.size == 18_448
    assert net.f6_weights.size + net.f6_biases.size == 204


def test_forward_shapes_match_plan():
    net = init_network(NetworkConfig(), seed=42)
    image = np.zeros((1, 32, 32))
    scores, cache = forward(net, image)
    assert scores.shape == (12,)
    assert cache.c1_pre.shape == (64, 28, 28)
    assert cache.s2_out.shape == (64, 14, 14)
    assert cache.c3_pre.shape == (32, 12, 12)
    assert cache.s4_out.shape == (32, 6, 6)
    assert cache.c5_pre.shape == (16, 1, 1)
    assert cache.f6_input.shape == (16,)


def test_forward_scores_in_open_interval():
    rng = np.random.Generator(np.random.PCG64(2))
    net = init_network(NetworkConfig(), seed=2)
    scores, _ = forward(net, rng.uniform(-1, 1, size=(1, 32, 32)))
    assert np.all(scores > -1.0) and np.all(scores < 1.0)


def test_zero_network_gives_zero_scores():
    net = zero_network(NetworkConfig())
    scores, _ = forward(net, np.ones((1, 32, 32)) * 0.3)
    assert np.array_equal(scores, np.zeros(12))


def test_forward_is_pure_and_deterministic():
    net = init_network(NetworkConfig(), seed=42)
    image = np.zeros((1, 32, 32))
    s1, _ = forward(net, image)
    s2, _ = forward(net, image)
    assert np.array_equal(s1, s2)


def test_forward_rejects_wrong_shape():
    net = zero_network(NetworkConfig())
    with pytest.raises(DimensionError):
        forward(net, np.zeros((1, 16, 16)))


def test_backward_zero_grad_scores():
    net = init_network(NetworkConfig(), seed=1)
    _, cache = forward(net, np.zeros((1, 32, 32)))
    grads = backward(net, cache, np.zeros(12))
    for g in grads.arrays():
        assert not g.any()


def test_backward_is_linear_in_upstream_gradient():
    rng = np.random.Generator(np.random.PCG64(9))
    net = init_network(NetworkConfig(), seed=9)
    image = rng.uniform(-1, 1, size=(1, 32, 32))
    _, cache = forward(net, image)
    g = rng.uniform(-1, 1, size=12)
    once = backward(net, cache, g)
    twice = backward(net, cache, 2.0 * g)
    for a, b in zip(once.arrays(), twice.arrays()):
        assert np.array_equal(2.0 * a, b)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_full_network_gradient_check(seed):
    """Analytic parameter gradients of the MSE loss agree with central
    finite differences (h=1e-5) on a 300-coordinate random subsample."""
    rng = np.random.Generator(np.random.PCG64(seed))
    net = init_network(NetworkConfig(), seed=seed)
    image = rng.uniform(-1, 1, size=(1, 32, 32))
    label = int(rng.integers(0, 12))
    target = one_hot_target(label)

    scores, cache = forward(net, image)
    grads = backward(net, cache, mse_gradient(scores, target))

    params = net.parameter_arrays()
    grad_arrays = grads.arrays()
    sizes = np.array([p.size for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    picks = rng.choice(offsets[-1], size=300, replace=False)

    h = 1e-5
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        arr, local = params[k], int(flat - offsets[k])
        orig = arr.flat[local]
        arr.flat[local] = orig + h
        up = mse_loss(forward(net, image)[0], target)
        arr.flat[local] = orig - h
        down = mse_loss(forward(net, image)[0], target)
        arr.flat[local] = orig
        numeric = (up - down) / (2.0 * h)
        analytic = grad_arrays[k].flat[local]
        diff = abs(analytic - numeric)
        assert diff <= max(1e-6 * max(abs(analytic), abs(numeric)), 1e-9), (
            f"param {flat}: analytic {analytic} vs numeric {numeric}"
        )

"""The six-layer pyramidal network: C1 conv, S2 pool, C3 conv, S4 pool,
C5 conv, F6 fully connected. Feature maps shrink layer by layer until C5
collapses to 1x1, so F6 sees a flat 16-vector.

Default chain: 1x32x32 -> 64x28x28 -> 64x14x14 -> 32x12x12 -> 32x6x6
-> 16x1x1 -> 12 scores. Convolutions are fully connected across input maps;
pooling layers carry no trainable parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor_ops import (
    Activation,
    KernelBank,
    PoolCache,
    activate,
    activate_backward,
    conv2d_backward,
    conv2d_valid,
    maxpool2x2,
    maxpool2x2_backward,
)


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture description. Defaults give the 38,780-parameter network."""

    input_maps: int = 1
    input_rows: int = 32
    input_cols: int = 32
    c1_maps: int = 64
    c1_kernel: tuple[int, int] = (5, 5)
    c1_activation: Activation = Activation.TANSIG
    s2_pool: int = 2
    s2_activation: Activation = Activation.PURELIN
    c3_maps: int = 32
    c3_kernel: tuple[int, int] = (3, 3)
    c3_activation: Activation = Activation.TANSIG
    s4_pool: int = 2
    s4_activation: Activation = Activation.PURELIN
    c5_maps: int = 16
    c5_kernel: tuple[int, int] = (6, 6)
    c5_activation: Activation = Activation.TANSIG
    f6_neurons: int = 12
    f6_activation: Activation = Activation.TANSIG


def shape_plan(config: NetworkConfig) -> list[tuple[str, int, int, int]]:
    """Resolve the (layer, maps, rows, cols) chain, validating every step.

    Raises ConfigError naming the first layer whose dimensions fail: a kernel
    larger than its input, an odd size hitting a 2x2 pool, or a C5 output
    that is not exactly 1x1 (F6 requires a flat map vector).
    """
    plan = [("input", config.input_maps, config.input_rows, config.input_cols)]
    rows, cols = config.input_rows, config.input_cols
    if min(config.input_maps, rows, cols) < 1:
        raise ConfigError(f"input dimensions must be >= 1, got {plan[0][1:]}")

    conv_layers = (
        ("c1", config.c1_maps, config.c1_kernel),
        ("c3", config.c3_maps, config.c3_kernel),
        ("c5", config.c5_maps, config.c5_kernel),
    )
    for i, (name, maps, (kr, kc)) in enumerate(conv_layers):
        if maps < 1 or kr < 1 or kc < 1:
            raise ConfigError(f"layer {name}: maps and kernel sizes must be >= 1")
        if kr > rows or kc > cols:
            raise ConfigError(
                f"layer {name}: kernel {kr}x{kc} does not fit its {rows}x{cols} input"
            )
        rows, cols = rows - kr + 1, cols - kc + 1
        plan.append((name, maps, rows, cols))
        if i < 2:
            pool_name = "s2" if i == 0 else "s4"
            pool = config.s2_pool if i == 0 else config.s4_pool
            if pool != 2:
                raise ConfigError(f"layer {pool_name}: only 2x2 pooling is supported")
            if rows % 2 or cols % 2:
                raise ConfigError(
                    f"layer {pool_name}: cannot 2x2-pool odd size {rows}x{cols}"
                )
            rows, cols = rows // 2, cols // 2
            plan.append((pool_name, maps, rows, cols))

    if (rows, cols) != (1, 1):
        raise ConfigError(f"layer c5: output must be 1x1 for F6, got {rows}x{cols}")
    if config.f6_neurons < 1:
        raise ConfigError("layer f6: neuron count must be >= 1")
    plan.append(("f6", config.f6_neurons, 1, 1))
    return plan


@dataclass
class Network:
    """Instantiated parameters for a NetworkConfig."""

    config: NetworkConfig
    c1: KernelBank
    c3: KernelBank
    c5: KernelBank
    f6_weights: np.ndarray  # (f6_neurons, c5_maps)
    f6_biases: np.ndarray  # (f6_neurons,)

    def parameter_arrays(self) -> list[np.ndarray]:
        """All trainable arrays in canonical serialization order."""
        return [
            self.c1.weights, self.c1.biases,
            self.c3.weights, self.c3.biases,
            self.c5.weights, self.c5.biases,
            self.f6_weights, self.f6_biases,
        ]


@dataclass
class Gradients:
    """Loss gradients mirroring Network's parameter shapes."""

    c1: KernelBank
    c3: KernelBank
    c5: KernelBank
    f6_weights: np.ndarray
    f6_biases: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [
            self.c1.weights, self.c1.biases,
            self.c3.weights, self.c3.biases,
            self.c5.weights, self.c5.biases,
            self.f6_weights, self.f6_biases,
        ]


@dataclass
class ForwardCache:
    """Every intermediate of one forward pass, kept for backward."""

    image: np.ndarray
    c1_pre: np.ndarray
    c1_post: np.ndarray
    s2_out: np.ndarray  # purelin: pre == post
    s2_cache: PoolCache
    c3_pre: np.ndarray
    c3_post: np.ndarray
    s4_out: np.ndarray
    s4_cache: PoolCache
    c5_pre: np.ndarray
    c5_post: np.ndarray
    f6_input: np.ndarray  # (c5_maps,) flattened in map order
    f6_pre: np.ndarray
    scores: np.ndarray


def init_network(config: NetworkConfig, seed: int) -> Network:
    """Create a network with Glorot-uniform weights and zero biases.

    Weights are drawn uniformly from +-sqrt(6 / (fan_in + fan_out)), where
    for conv layers fan_in = in_maps * k_rows * k_cols and fan_out =
    out_maps * k_rows * k_cols. Draw order is the canonical parameter order
    (C1, C3, C5, F6 weights) from one PCG64 stream, so a given seed yields
    a bit-identical network.
    """
    shape_plan(config)  # reject invalid configs before allocating anything
    rng = np.random.Generator(np.random.PCG64(seed))

    def conv_bank(out_maps: int, in_maps: int, kernel: tuple[int, int]) -> KernelBank:
        kr, kc = kernel
        fan_in = in_maps * kr * kc
        fan_out = out_maps * kr * kc
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-bound, bound, size=(out_maps, in_maps, kr, kc))
        return KernelBank(weights=weights, biases=np.zeros(out_maps))

    c1 = conv_bank(config.c1_maps, config.input_maps, config.c1_kernel)
    c3 = conv_bank(config.c3_maps, config.c1_maps, config.c3_kernel)
    c5 = conv_bank(config.c5_maps, config.c3_maps, config.c5_kernel)
    bound = np.sqrt(6.0 / (config.c5_maps + config.f6_neurons))
    f6_weights = rng.uniform(-bound, bound, size=(config.f6_neurons, config.c5_maps))
    return Network(
        config=config,
        c1=c1,
        c3=c3,
        c5=c5,
        f6_weights=f6_weights,
        f6_biases=np.zeros(config.f6_neurons),
    )


def zero_network(config: NetworkConfig) -> Network:
    """All-zero parameters; useful as a fixture and for gradient containers."""
    shape_plan(config)
    return Network(
        config=config,
        c1=KernelBank.zeros(config.c1_maps, config.input_maps, *config.c1_kernel),
        c3=KernelBank.zeros(config.c3_maps, config.c1_maps, *config.c3_kernel),
        c5=KernelBank.zeros(config.c5_maps, config.c3_maps, *config.c5_kernel),
        f6_weights=np.zeros((config.f6_neurons, config.c5_maps)),
        f6_biases=np.zeros(config.f6_neurons),
    )


def num_params(network: Network) -> int:
    """Exact count of trainable scalars."""
    return sum(a.size for a in network.parameter_arrays())


def forward(network: Network, image: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Full forward pass for one image; returns (scores, cache).

    The image must match the configured input shape (default 1x32x32) with
    values normalized to [-1, 1]. Scores are the 12 tansig outputs of F6.
    """
    cfg = network.config
    expected = (cfg.input_maps, cfg.input_rows, cfg.input_cols)
    if image.shape != expected:
        raise DimensionError(f"image shape {image.shape} does not match input {expected}")

    c1_pre = conv2d_valid(image, network.c1)
    c1_post = activate(c1_pre, cfg.c1_activation)
    s2_out, s2_cache = maxpool2x2(c1_post)
    s2_out = activate(s2_out, cfg.s2_activation)

    c3_pre = conv2d_valid(s2_out, network.c3)
    c3_post = activate(c3_pre, cfg.c3_activation)
    s4_out, s4_cache = maxpool2x2(c3_post)
    s4_out = activate(s4_out, cfg.s4_activation)

    c5_pre = conv2d_valid(s4_out, network.c5)
    c5_post = activate(c5_pre, cfg.c5_activation)

    f6_input = c5_post.reshape(cfg.c5_maps)
    f6_pre = network.f6_weights @ f6_input + network.f6_biases
    scores = activate(f6_pre, cfg.f6_activation)

    cache = ForwardCache(
        image=image,
        c1_pre=c1_pre, c1_post=c1_post, s2_out=s2_out, s2_cache=s2_cache,
        c3_pre=c3_pre, c3_post=c3_post, s4_out=s4_out, s4_cache=s4_cache,
        c5_pre=c5_pre, c5_post=c5_post,
        f6_input=f6_input, f6_pre=f6_pre, scores=scores,
    )
    return scores, cache


def backward(network: Network, cache: ForwardCache, grad_scores: np.ndarray) -> Gradients:
    """Exact parameter gradients for the scalar loss with score-gradient
    grad_scores, reusing the intermediates cached by forward."""
    cfg = network.config
    grad_scores = np.asarray(grad_scores, dtype=float)
    if grad_scores.shape != (cfg.f6_neurons,):
        raise DimensionError(
            f"grad_scores shape {grad_scores.shape} does not match "
            f"f6 neurons ({cfg.f6_neurons},)"
        )

    g = activate_backward(cache.scores, grad_scores, cfg.f6_activation)
    grad_f6_w = np.outer(g, cache.f6_input)
    grad_f6_b = g.copy()
    g_c5_post = (network.f6_weights.T @ g).reshape(cfg.c5_maps, 1, 1)

    g_c5_pre = activate_backward(cache.c5_post, g_c5_post, cfg.c5_activation)
    g_s4, grad_c5 = conv2d_backward(cache.s4_out, network.c5, g_c5_pre)

    g_s4 = activate_backward(cache.s4_out, g_s4, cfg.s4_activation)
    g_c3_post = maxpool2x2_backward(cache.s4_cache, g_s4)
    g_c3_pre = activate_backward(cache.c3_post, g_c3_post, cfg.c3_activation)
    g_s2, grad_c3 = conv2d_backward(cache.s2_out, network.c3, g_c3_pre)

    g_s2 = activate_backward(cache.s2_out, g_s2, cfg.s2_activation)
    g_c1_post = maxpool2x2_backward(cache.s2_cache, g_s2)
    g_c1_pre = activate_backward(cache.c1_post, g_c1_post, cfg.c1_activation)
    _, grad_c1 = conv2d_backward(cache.image, network.c1, g_c1_pre, need_input_grad=False)

    return Gradients(
        c1=grad_c1, c3=grad_c3, c5=grad_c5,
        f6_weights=grad_f6_w, f6_biases=grad_f6_b,
    )

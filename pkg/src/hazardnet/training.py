"""Full-batch MSE training with resilient backpropagation.

The optimizer is the iRprop- variant: each parameter keeps its own step size,
grown by eta_plus while the gradient sign persists and shrunk by eta_minus on
a sign flip; on a flip the current gradient is zeroed so the parameter skips
one update instead of backtracking. Only gradient signs enter the update, so
scaling the loss by any positive constant leaves the trajectory bit-identical.

One epoch is one pass over the whole dataset in index order, producing a
single averaged gradient and exactly one optimizer step. Metrics reported for
an epoch are measured on the parameters before that step.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError, LabelError
from .network import Gradients, Network, backward, forward, zero_network

NUM_CLASSES = 12


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    eta_plus: float = 1.2
    eta_minus: float = 0.5
    delta0: float = 0.07
    delta_max: float = 50.0
    delta_min: float = 1e-6
    seed: int = 42
    target_mse: float = 0.08  # stop early once training MSE drops this low; 0 disables

    def __post_init__(self) -> None:
        if not (0.0 < self.eta_minus < 1.0 < self.eta_plus):
            raise ValueError(
                f"need 0 < eta_minus < 1 < eta_plus, got {self.eta_minus}, {self.eta_plus}"
            )
        if not (0.0 < self.delta_min <= self.delta0 <= self.delta_max):
            raise ValueError(
                f"need 0 < delta_min <= delta0 <= delta_max, got "
                f"{self.delta_min}, {self.delta0}, {self.delta_max}"
            )


@dataclass
class RpropState:
    """Per-parameter step sizes and previous-gradient memory, one array per
    parameter array, mirroring Network.parameter_arrays() order."""

    step_sizes: list[np.ndarray]
    prev_grads: list[np.ndarray]

    @classmethod
    def for_network(cls, network: Network, delta0: float) -> "RpropState":
        params = network.parameter_arrays()
        return cls(
            step_sizes=[np.full_like(p, delta0) for p in params],
            prev_grads=[np.zeros_like(p) for p in params],
        )


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    mse: float
    accuracy: float


def one_hot_target(class_index: int) -> np.ndarray:
    """Tansig-range encoding: +1 at the class index, -1 elsewhere."""
    if not 0 <= class_index < NUM_CLASSES:
        raise LabelError(f"class index {class_index} out of range 0..{NUM_CLASSES - 1}")
    target = np.full(NUM_CLASSES, -1.0)
    target[class_index] = 1.0
    return target


def mse_loss(scores: np.ndarray, target: np.ndarray) -> float:
    """Mean over the 12 output components of squared error."""
    if scores.shape != target.shape:
        raise DimensionError(f"scores {scores.shape} vs target {target.shape}")
    diff = scores - target
    return float(np.mean(diff * diff))


def mse_gradient(scores: np.ndarray, target: np.ndarray) -> np.ndarray:
    """d(mse_loss)/d(scores): component i is 2 * (scores_i - target_i) / 12."""
    if scores.shape != target.shape:
        raise DimensionError(f"scores {scores.shape} vs target {target.shape}")
    return 2.0 * (scores - target) / scores.size


def rprop_step(
    state: RpropState,
    gradients: Gradients,
    network: Network,
    config: TrainConfig,
) -> tuple[RpropState, Network]:
    """One iRprop- update, applied in place to network and state.

    Per parameter, with g the current and g_prev the stored gradient:
      - sign(g_prev * g) > 0: step size grows by eta_plus (capped at delta_max)
      - sign(g_prev * g) < 0: step size shrinks by eta_minus (floored at
        delta_min) and g is treated as zero, so the parameter does not move
      - parameter -= sign(g) * step_size; g_prev <- g (with sign(0) = 0)
    """
    params = network.parameter_arrays()
    grads = gradients.arrays()
    if len(params) != len(grads):
        raise DimensionError("gradient set does not mirror the parameter set")
    for p, g, delta, g_prev in zip(params, grads, state.step_sizes, state.prev_grads):
        if p.shape != g.shape:
            raise DimensionError(f"gradient shape {g.shape} vs parameter shape {p.shape}")
        prod = g_prev * g
        grew = prod > 0.0
        flipped = prod < 0.0
        delta[grew] = np.minimum(delta[grew] * config.eta_plus, config.delta_max)
        delta[flipped] = np.maximum(delta[flipped] * config.eta_minus, config.delta_min)
        g_eff = np.where(flipped, 0.0, g)
        p -= np.sign(g_eff) * delta
        g_prev[...] = g_eff
    return state, network


def _sample_pass(network: Network, image: np.ndarray, label: int):
    """Forward + backward for one sample; returns (loss, correct, gradients)."""
    target = one_hot_target(label)
    scores, cache = forward(network, image)
    loss = mse_loss(scores, target)
    correct = int(np.argmax(scores)) == label
    grads = backward(network, cache, mse_gradient(scores, target))
    return loss, correct, grads


def batch_gradient(
    network: Network, dataset, threads: int = 1
) -> tuple[Gradients, float, float]:
    """Average of per-sample gradients over the dataset, plus MSE and accuracy.

    Per-sample passes may run on a thread pool, but accumulation always
    happens in sample-index order, so the result is bit-identical for any
    thread count.
    """
    samples = list(dataset)
    if not samples:
        raise DataError("dataset is empty")
    n = len(samples)

    zeros = zero_network(network.config)
    total = Gradients(
        c1=zeros.c1,
        c3=zeros.c3,
        c5=zeros.c5,
        f6_weights=zeros.f6_weights,
        f6_biases=zeros.f6_biases,
    )
    loss_sum = 0.0
    correct = 0

    def run(sample):
        return _sample_pass(network, sample.tensor, sample.label)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(run, samples)
            for loss, ok, grads in results:  # map preserves submission order
                loss_sum += loss
                correct += ok
                for acc, g in zip(total.arrays(), grads.arrays()):
                    acc += g
    else:
        for sample in samples:
            loss, ok, grads = run(sample)
            loss_sum += loss
            correct += ok
            for acc, g in zip(total.arrays(), grads.arrays()):
                acc += g

    for acc in total.arrays():
        acc /= n
    return total, loss_sum / n, correct / n


def train_epoch(
    network: Network,
    dataset,
    state: RpropState,
    config: TrainConfig,
    epoch: int = 0,
    threads: int = 1,
) -> tuple[EpochMetrics, Network, RpropState]:
    """Full-batch gradient over the dataset, then exactly one rprop_step.

    The returned metrics are computed from the same forward passes that
    produced the gradient, i.e. on the pre-update parameters.
    """
    grads, mse, accuracy = batch_gradient(network, dataset, threads=threads)
    rprop_step(state, grads, network, config)
    return EpochMetrics(epoch=epoch, mse=mse, accuracy=accuracy), network, state


def fit(
    network: Network,
    dataset,
    config: TrainConfig,
    threads: int = 1,
    on_epoch=None,
) -> tuple[Network, list[EpochMetrics]]:
    """Run up to config.epochs epochs; stop early once the training MSE
    (measured pre-update) reaches config.target_mse. Returns the trained
    network and one EpochMetrics per executed epoch."""
    state = RpropState.for_network(network, config.delta0)
    history: list[EpochMetrics] = []
    for epoch in range(config.epochs):
        metrics, network, state = train_epoch(
            network, dataset, state, config, epoch=epoch, threads=threads
        )
        history.append(metrics)
        if on_epoch is not None:
            on_epoch(metrics)
        if config.target_mse > 0.0 and metrics.mse <= config.target_mse:
            break
    return network, history


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of comparing analytic gradients against central differences."""

    checked_params: int
    skipped_kinks: int
    max_rel_error: float
    worst_param: int  # flat index into the canonical parameter vector

    def passed(self, tolerance: float = 1e-6) -> bool:
        return self.max_rel_error <= tolerance


def check_gradients(
    network: Network,
    image: np.ndarray,
    label: int,
    sample_params: int = 1000,
    seed: int = 0,
    step: float = 1e-5,
    abs_floor: float = 1e-9,
) -> GradCheckReport:
    """Verify backward against central finite differences of the MSE loss.

    A seeded subsample of parameter coordinates is perturbed by +-step and the
    loss difference quotient compared with the analytic gradient. Differences
    below abs_floor count as exact agreement (they sit under the measurement
    noise of the difference quotient); otherwise the relative error
    |a - n| / max(|a|, |n|) is reported.

    Finite differences are not a valid oracle across a max-pool tie: if the
    perturbation flips any pool winner between the two stencil evaluations,
    that coordinate is counted in skipped_kinks instead of being compared.
    """
    target = one_hot_target(label)
    scores, cache = forward(network, image)
    analytic = backward(network, cache, mse_gradient(scores, target))
    analytic_flat = np.concatenate([a.ravel() for a in analytic.arrays()])
    center_winners = (
        cache.s2_cache.offset_rows, cache.s2_cache.offset_cols,
        cache.s4_cache.offset_rows, cache.s4_cache.offset_cols,
    )

    params = network.parameter_arrays()
    sizes = [p.size for p in params]
    offsets = np.cumsum([0] + sizes)
    total = offsets[-1]

    rng = np.random.Generator(np.random.PCG64(seed))
    n = min(sample_params, total)
    picks = rng.choice(total, size=n, replace=False)

    def loss_and_winners(flat_index: int, delta: float):
        k = int(np.searchsorted(offsets, flat_index, side="right") - 1)
        arr = params[k]
        local = flat_index - offsets[k]
        original = arr.flat[local]
        arr.flat[local] = original + delta
        try:
            s, c = forward(network, image)
            winners = (
                c.s2_cache.offset_rows, c.s2_cache.offset_cols,
                c.s4_cache.offset_rows, c.s4_cache.offset_cols,
            )
            return mse_loss(s, target), winners
        finally:
            arr.flat[local] = original

    max_rel = 0.0
    worst = -1
    skipped = 0
    for flat_index in picks:
        loss_plus, win_plus = loss_and_winners(flat_index, +step)
        loss_minus, win_minus = loss_and_winners(flat_index, -step)
        if any(
            not (np.array_equal(p, m) and np.array_equal(p, c))
            for p, m, c in zip(win_plus, win_minus, center_winners)
        ):
            skipped += 1
            continue
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        a = analytic_flat[flat_index]
        diff = abs(a - numeric)
        if diff <= abs_floor:
            continue
        rel = diff / max(abs(a), abs(numeric))
        if rel > max_rel:
            max_rel = rel
            worst = int(flat_index)
    return GradCheckReport(
        checked_params=n - skipped,
        skipped_kinks=skipped,
        max_rel_error=max_rel,
        worst_param=worst,
    )


def history_csv_lines(history: list[EpochMetrics]) -> list[str]:
    """Training history as `epoch,mse,accuracy` CSV lines (with header)."""
    lines = ["epoch,mse,accuracy"]
    for m in history:
        lines.append(f"{m.epoch},{m.mse!r},{m.accuracy!r}")
    return lines

"""Central-difference verification of the analytic gradients."""

from __future__ import annotations

import numpy as np

from .network import DenseScoreNet, NetworkSpec


def gradient_check(
    spec: NetworkSpec,
    seed: int,
    epsilon: float = 1e-4,
    n_samples: int = 120,
    batch_size: int = 2,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in double precision on a sample of at least ``n_samples`` parameter
    coordinates spread across every tensor. The relative error for one
    coordinate is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    net = DenseScoreNet(spec)
    params = net.init_params(seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    # Zero-initialized biases put some pre-activations exactly on the ReLU
    # kink, where a central difference is meaningless; jitter them so the
    # check runs at a generic differentiable point.
    for name, tensor in params.items():
        if name.endswith(".b"):
            tensor += rng.normal(0.0, 0.01, size=tensor.shape)
    x = rng.uniform(0.0, 1.0, size=(batch_size, 3, spec.input_side, spec.input_side))
    targets = rng.uniform(0.1, 1.0, size=(batch_size, spec.head_outputs))
    targets /= targets.sum(axis=1, keepdims=True)

    _, grads, _ = net.loss_and_gradients(params, x, targets)

    names = params.names()
    sizes = np.array([params[n].size for n in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    n_samples = min(n_samples, total)
    # Guarantee every tensor is touched, then fill with uniformly sampled coords.
    chosen = {int(offsets[i] + rng.integers(sizes[i])) for i in range(len(names))}
    while len(chosen) < n_samples:
        chosen.add(int(rng.integers(total)))

    max_rel = 0.0
    for flat_index in sorted(chosen):
        tensor_idx = int(np.searchsorted(offsets, flat_index, side="right") - 1)
        name = names[tensor_idx]
        local = flat_index - int(offsets[tensor_idx])
        tensor = params.tensors[name]
        original = tensor.flat[local]

        tensor.flat[local] = original + epsilon
        loss_plus, _, _ = net.loss_and_gradients(params, x, targets)
        tensor.flat[local] = original - epsilon
        loss_minus, _, _ = net.loss_and_gradients(params, x, targets)
        tensor.flat[local] = original

        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        analytic = float(grads[name].flat[local])
        rel = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
        max_rel = max(max_rel, rel)
    return max_rel

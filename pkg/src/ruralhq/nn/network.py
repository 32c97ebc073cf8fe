"""Dense-connection CNN that maps a square RGB image to a 10-bin score distribution.

The architecture is a single 3x3 stem convolution, four dense blocks joined
by three compress-and-pool transition layers, and one fully connected head
whose 10 logits are exponentially normalized onto the probability simplex.
Within a dense block, unit u consumes the channel-concatenation of the block
input and all previous unit outputs; each unit is a 1x1 "squeeze" convolution
(to 4x the growth rate) followed by a 3x3 convolution emitting growth_rate
channels, with ReLU after every convolution.

Training minimizes the per-bin mean squared error between predicted and
true score probabilities: the squared residuals are averaged over images
within each bin, then averaged over the 10 bins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import InvalidSpec, NonDistributionTarget, ShapeMismatch
from . import ops

N_SCORE_BINS = 10
BOTTLENECK_FACTOR = 4  # 1x1 squeeze emits 4 * growth_rate channels
SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class DenseBlockSpec:
    n_units: int
    growth_rate: int


@dataclass(frozen=True)
class TransitionSpec:
    compression: float  # output channels = floor(compression * input channels)


@dataclass(frozen=True)
class NetworkSpec:
    input_side: int
    stem_channels: int
    blocks: tuple[DenseBlockSpec, ...]
    transitions: tuple[TransitionSpec, ...]
    head_outputs: int = N_SCORE_BINS

    def validate(self) -> None:
        if len(self.blocks) != 4:
            raise InvalidSpec(f"exactly 4 dense blocks required, got {len(self.blocks)}")
        if len(self.transitions) != 3:
            raise InvalidSpec(f"exactly 3 transitions required, got {len(self.transitions)}")
        if self.head_outputs != N_SCORE_BINS:
            raise InvalidSpec(f"head must emit {N_SCORE_BINS} outputs, got {self.head_outputs}")
        if self.input_side < 1 or self.stem_channels < 1:
            raise InvalidSpec("input_side and stem_channels must be positive")
        for blk in self.blocks:
            if blk.n_units < 1 or blk.growth_rate < 1:
                raise InvalidSpec(f"bad dense block spec {blk}")
        for tr in self.transitions:
            if not 0.0 < tr.compression <= 1.0:
                raise InvalidSpec(f"compression must be in (0, 1], got {tr.compression}")

    def to_json_dict(self) -> dict:
        return {
            "input_side": self.input_side,
            "stem_channels": self.stem_channels,
            "blocks": [{"n_units": b.n_units, "growth_rate": b.growth_rate} for b in self.blocks],
            "transitions": [{"compression": t.compression} for t in self.transitions],
            "head_outputs": self.head_outputs,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            input_side=int(d["input_side"]),
            stem_channels=int(d["stem_channels"]),
            blocks=tuple(DenseBlockSpec(int(b["n_units"]), int(b["growth_rate"])) for b in d["blocks"]),
            transitions=tuple(TransitionSpec(float(t["compression"])) for t in d["transitions"]),
            head_outputs=int(d.get("head_outputs", N_SCORE_BINS)),
        )


def desk_spec(input_side: int = 64) -> NetworkSpec:
    """Default CPU-trainable network: stem 16, blocks of 2 units, growth 8, compression 0.5."""
    return NetworkSpec(
        input_side=input_side,
        stem_channels=16,
        blocks=tuple(DenseBlockSpec(n_units=2, growth_rate=8) for _ in range(4)),
        transitions=tuple(TransitionSpec(compression=0.5) for _ in range(3)),
    )


def tiny_spec(input_side: int = 8) -> NetworkSpec:
    """Smallest useful network, for gradient checking in double precision."""
    return NetworkSpec(
        input_side=input_side,
        stem_channels=8,
        blocks=tuple(DenseBlockSpec(n_units=1, growth_rate=4) for _ in range(4)),
        transitions=tuple(TransitionSpec(compression=0.5) for _ in range(3)),
    )


@dataclass(frozen=True)
class _LayerPlan:
    kind: str  # "conv3" | "conv1" | "linear"
    name: str
    in_size: int  # channels (conv) or features (linear)
    out_size: int


class Parameters:
    """Ordered, named weight tensors plus the spec they were built for.

    Order is layer order with each kernel immediately followed by its bias;
    that order is the checkpoint manifest order.
    """

    def __init__(self, spec: NetworkSpec, tensors: dict[str, np.ndarray]):
        self.spec = spec
        self.tensors = tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self.tensors.items())

    @property
    def size(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.tensors.values())).dtype

    def copy(self) -> "Parameters":
        return Parameters(self.spec, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "Parameters":
        return Parameters(self.spec, {k: v.astype(dtype) for k, v in self.tensors.items()})


class DenseScoreNet:
    """Executable form of a NetworkSpec: wiring plan, init, forward, backward."""

    def __init__(self, spec: NetworkSpec):
        spec.validate()
        self.spec = spec
        self.layers: list[_LayerPlan] = []
        self.unit_input_channels: dict[tuple[int, int], int] = {}

        side = spec.input_side
        channels = spec.stem_channels
        self.layers.append(_LayerPlan("conv3", "stem", 3, channels))
        for b, blk in enumerate(spec.blocks, start=1):
            for u in range(1, blk.n_units + 1):
                c_in = channels + (u - 1) * blk.growth_rate
                self.unit_input_channels[(b, u)] = c_in
                bottleneck = BOTTLENECK_FACTOR * blk.growth_rate
                self.layers.append(_LayerPlan("conv1", f"block{b}.unit{u}.squeeze", c_in, bottleneck))
                self.layers.append(_LayerPlan("conv3", f"block{b}.unit{u}.grow", bottleneck, blk.growth_rate))
            channels += blk.n_units * blk.growth_rate
            if b <= len(spec.transitions):
                out = int(spec.transitions[b - 1].compression * channels)
                if out < 1:
                    raise InvalidSpec(f"transition {b} compresses {channels} channels to zero")
                self.layers.append(_LayerPlan("conv1", f"transition{b}.compress", channels, out))
                channels = out
                side //= 2
                if side < 1:
                    raise InvalidSpec("spatial size collapses below 1x1 before the head")
        self.final_channels = channels
        self.final_side = side
        self.layers.append(_LayerPlan("linear", "head", channels * side * side, spec.head_outputs))

    # --- parameters --------------------------------------------------------

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        for pl in self.layers:
            if pl.kind == "conv3":
                shapes[f"{pl.name}.w"] = (pl.out_size, pl.in_size, 3, 3)
            elif pl.kind == "conv1":
                shapes[f"{pl.name}.w"] = (pl.out_size, pl.in_size, 1, 1)
            else:
                shapes[f"{pl.name}.w"] = (pl.out_size, pl.in_size)
            shapes[f"{pl.name}.b"] = (pl.out_size,)
        return shapes

    def init_params(self, seed: int, dtype=np.float32) -> Parameters:
        """He-style init: zero-mean Gaussian, variance 2/fan_in; biases zero."""
        rng = np.random.default_rng(seed)
        tensors: dict[str, np.ndarray] = {}
        for name, shape in self.tensor_shapes().items():
            if name.endswith(".b"):
                tensors[name] = np.zeros(shape, dtype=dtype)
                continue
            fan_in = int(np.prod(shape[1:]))
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            tensors[name] = w.astype(dtype)
        return Parameters(self.spec, tensors)

    # --- execution ----------------------------------------------------------

    def _check_batch(self, x: np.ndarray) -> None:
        s = self.spec.input_side
        if x.ndim != 4 or x.shape[1:] != (3, s, s):
            raise ShapeMismatch(f"expected batch of shape (N, 3, {s}, {s}), got {x.shape}")

    def forward(self, params: Parameters, x: np.ndarray, cache: list | None = None) -> np.ndarray:
        """Probabilities of shape (N, 10); pass ``cache`` to retain backprop state."""
        self._check_batch(x)
        t = params.tensors
        # Channels-last internally; the public batch layout is (N, 3, S, S).
        x = np.ascontiguousarray(np.asarray(x).transpose(0, 2, 3, 1), dtype=params.dtype)

        def conv_relu(name: str, kind: str, inp: np.ndarray) -> np.ndarray:
            fwd = ops.conv3x3_forward if kind == "conv3" else ops.conv1x1_forward
            out, mask = ops.relu_forward(fwd(inp, t[f"{name}.w"], t[f"{name}.b"]))
            if cache is not None:
                cache.append((name, kind, inp, mask))
            return out

        h = conv_relu("stem", "conv3", x)
        for b, blk in enumerate(self.spec.blocks, start=1):
            features = [h]
            for u in range(1, blk.n_units + 1):
                unit_in = features[0] if len(features) == 1 else np.concatenate(features, axis=3)
                squeezed = conv_relu(f"block{b}.unit{u}.squeeze", "conv1", unit_in)
                grown = conv_relu(f"block{b}.unit{u}.grow", "conv3", squeezed)
                features.append(grown)
            h = np.concatenate(features, axis=3)
            if b <= len(self.spec.transitions):
                h = conv_relu(f"transition{b}.compress", "conv1", h)
                pooled = ops.avgpool2_forward(h)
                if cache is not None:
                    cache.append((f"transition{b}.pool", "pool", h.shape, None))
                h = pooled
        flat = h.reshape(h.shape[0], -1)
        logits = ops.linear_forward(flat, t["head.w"], t["head.b"])
        if cache is not None:
            cache.append(("head", "linear", flat, h.shape))
        return ops.softmax(logits)

    def loss_and_gradients(
        self, params: Parameters, x: np.ndarray, targets: np.ndarray
    ) -> tuple[float, Parameters, np.ndarray]:
        """Per-bin MSE loss, exact parameter gradients, and the predictions.

        The returned loss is accumulated in float64 regardless of the
        parameter dtype so it can be checked against an independent
        re-evaluation at tight tolerance.
        """
        targets = np.asarray(targets)
        if targets.ndim != 2 or targets.shape[1] != self.spec.head_outputs:
            raise ShapeMismatch(f"targets must be (N, {self.spec.head_outputs}), got {targets.shape}")
        if targets.shape[0] != x.shape[0]:
            raise ShapeMismatch(
                f"batch has {x.shape[0]} rows but targets have {targets.shape[0]}"
            )
        y64 = targets.astype(np.float64)
        if np.any(y64 < -1e-12) or np.any(np.abs(y64.sum(axis=1) - 1.0) > SIMPLEX_TOL):
            raise NonDistributionTarget("target rows must be probability distributions")

        cache: list = []
        p = self.forward(params, x, cache=cache)
        p64 = p.astype(np.float64)
        n = p64.shape[0]
        loss = float(np.mean((p64 - y64) ** 2))

        # d loss / d probabilities, then back through the softmax to logits.
        dp = 2.0 * (p64 - y64) / (n * self.spec.head_outputs)
        dz = ops.softmax_backward(dp, p64).astype(params.dtype)

        t = params.tensors
        grads: dict[str, np.ndarray] = {}

        _, _, flat, conv_shape = cache.pop()  # head
        dflat, grads["head.w"], grads["head.b"] = ops.linear_backward(dz, flat, t["head.w"])
        dh = dflat.reshape(conv_shape)

        for b in range(len(self.spec.blocks), 0, -1):
            blk = self.spec.blocks[b - 1]
            if b <= len(self.spec.transitions):
                _, _, pre_pool_shape, _ = cache.pop()
                dh = ops.avgpool2_backward(dh, pre_pool_shape)
                dh = self._conv_relu_backward(cache, t, grads, dh)
            # Split the block-output gradient into block-input + unit slices.
            base = self.unit_input_channels[(b, 1)]
            g = blk.growth_rate
            feature_grads = [dh[..., :base]]
            feature_grads += [dh[..., base + (u - 1) * g : base + u * g] for u in range(1, blk.n_units + 1)]
            for u in range(blk.n_units, 0, -1):
                d_unit = self._conv_relu_backward(cache, t, grads, feature_grads[u])  # grow
                d_unit_in = self._conv_relu_backward(cache, t, grads, d_unit)  # squeeze
                # Distribute the unit-input gradient back onto earlier features.
                offset = 0
                for k in range(u):
                    width = feature_grads[k].shape[3]
                    feature_grads[k] = feature_grads[k] + d_unit_in[..., offset : offset + width]
                    offset += width
            dh = feature_grads[0]
        self._conv_relu_backward(cache, t, grads, dh)  # stem
        assert not cache

        ordered = {name: grads[name] for name in params.names()}
        return loss, Parameters(self.spec, ordered), p

    def _conv_relu_backward(
        self, cache: list, t: dict[str, np.ndarray], grads: dict[str, np.ndarray], dy: np.ndarray
    ) -> np.ndarray:
        name, kind, inp, mask = cache.pop()
        dy = ops.relu_backward(dy, mask)
        bwd = ops.conv3x3_backward if kind == "conv3" else ops.conv1x1_backward
        dx, dw, db = bwd(dy, inp, t[f"{name}.w"])
        grads[f"{name}.w"] = dw
        grads[f"{name}.b"] = db
        return dx


# --- module-level operations (spec surface) ----------------------------------


def build_network(spec: NetworkSpec, seed: int, dtype=np.float32) -> Parameters:
    return DenseScoreNet(spec).init_params(seed, dtype=dtype)


def forward(params: Parameters, batch: np.ndarray) -> np.ndarray:
    return DenseScoreNet(params.spec).forward(params, batch)


def loss_and_gradients(
    params: Parameters, batch: np.ndarray, targets: np.ndarray
) -> tuple[float, Parameters]:
    loss, grads, _ = DenseScoreNet(params.spec).loss_and_gradients(params, batch, targets)
    return loss, grads

"""From-scratch tensor math, backpropagation, and the dense-connection network."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import gradient_check
from .network import (
    BOTTLENECK_FACTOR,
    DenseBlockSpec,
    DenseScoreNet,
    NetworkSpec,
    Parameters,
    TransitionSpec,
    build_network,
    desk_spec,
    forward,
    loss_and_gradients,
    tiny_spec,
)

__all__ = [
    "BOTTLENECK_FACTOR",
    "DenseBlockSpec",
    "DenseScoreNet",
    "NetworkSpec",
    "Parameters",
    "TransitionSpec",
    "build_network",
    "desk_spec",
    "forward",
    "gradient_check",
    "load_checkpoint",
    "loss_and_gradients",
    "save_checkpoint",
    "tiny_spec",
]

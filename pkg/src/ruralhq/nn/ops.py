"""Array primitives with hand-written backward passes.

Activations are kept channels-last, (N, H, W, C), and every 3x3 convolution
runs as nine shifted matmuls so both the patch copies and the BLAS operands
stay contiguous; that is what makes CPU training viable. Convolution
kernels are stored (out_ch, in_ch, kh, kw) and rearranged at the call site;
linear weights are (out, in). 3x3 convolutions are stride 1 with one pixel
of zero padding, so they preserve spatial size. Patches are rebuilt in the
backward pass instead of cached, trading a little recompute for a much
smaller live set.
"""

from __future__ import annotations

import numpy as np


def _pad1(x: np.ndarray) -> np.ndarray:
    """Zero-pad one pixel on each spatial edge of an (N, H, W, C) array."""
    n, h, w, c = x.shape
    xp = np.zeros((n, h + 2, w + 2, c), dtype=x.dtype)
    xp[:, 1 : h + 1, 1 : w + 1, :] = x
    return xp


def _shifted_patches(xp: np.ndarray, h: int, w: int):
    """Yield (ki, kj, patch) where patch is the contiguous (N*H*W, C) window view."""
    c = xp.shape[3]
    for ki in range(3):
        for kj in range(3):
            patch = np.ascontiguousarray(xp[:, ki : ki + h, kj : kj + w, :])
            yield ki, kj, patch.reshape(-1, c)


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 convolution as nine shifted (N*H*W, C) @ (C, O) products.

    The shift-and-accumulate form keeps every copy and matmul operand
    contiguous, which is what makes this usable for CPU training.
    """
    n, h, wid, c = x.shape
    o = w.shape[0]
    wm = np.ascontiguousarray(w.transpose(2, 3, 1, 0))  # (3, 3, C, O)
    y: np.ndarray | None = None
    for ki, kj, patch in _shifted_patches(_pad1(x), h, wid):
        if y is None:
            y = patch @ wm[ki, kj]
        else:
            y += patch @ wm[ki, kj]
    y += b
    return y.reshape(n, h, wid, o)


def conv3x3_backward(
    dy: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dw, db) for the padded stride-1 3x3 convolution."""
    n, h, wid, c = x.shape
    o = w.shape[0]
    dyr = dy.reshape(-1, o)
    dw = np.empty((3, 3, c, o), dtype=w.dtype)
    for ki, kj, patch in _shifted_patches(_pad1(x), h, wid):
        dw[ki, kj] = patch.T @ dyr
    db = dyr.sum(axis=0)
    # dx is the correlation of dy with the flipped, channel-transposed kernel.
    w_flip = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    dx = conv3x3_forward(dy, w_flip, np.zeros(w.shape[1], dtype=w.dtype))
    return dx, dw.transpose(3, 2, 0, 1), db


def conv1x1_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, h, wid, c = x.shape
    o = w.shape[0]
    y = x.reshape(-1, c) @ w.reshape(o, c).T
    y += b
    return y.reshape(n, h, wid, o)


def conv1x1_backward(
    dy: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    o = w.shape[0]
    c = x.shape[3]
    dyr = dy.reshape(-1, o)
    xr = x.reshape(-1, c)
    dw = (dyr.T @ xr).reshape(w.shape)
    db = dyr.sum(axis=0)
    dx = (dyr @ w.reshape(o, c)).reshape(x.shape)
    return dx, dw, db


def relu_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.maximum(x, 0)
    return y, x > 0


def relu_backward(dy: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dy * mask


def avgpool2_forward(x: np.ndarray) -> np.ndarray:
    """2x2 average pool, stride 2; a trailing odd row/column is dropped."""
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    return x[:, : h2 * 2, : w2 * 2, :].reshape(n, h2, 2, w2, 2, c).mean(axis=(2, 4))


def avgpool2_backward(dy: np.ndarray, in_shape: tuple[int, ...]) -> np.ndarray:
    n, h, w, c = in_shape
    h2, w2 = h // 2, w // 2
    dx = np.zeros(in_shape, dtype=dy.dtype)
    dx[:, : h2 * 2, : w2 * 2, :] = np.repeat(np.repeat(dy, 2, axis=1), 2, axis=2)
    dx *= 0.25
    return dx


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w.T + b


def linear_backward(
    dy: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return dy @ w, dy.T @ x, dy.sum(axis=0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise exponential normalization onto the probability simplex."""
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(dp: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. probabilities back to the logits."""
    inner = (dp * p).sum(axis=1, keepdims=True)
    return p * (dp - inner)

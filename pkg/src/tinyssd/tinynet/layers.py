"""
Forward/backward kernels on NHWC arrays.

Each ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache.
"""

from __future__ import annotations

import numpy as np


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padded 3x3 convolution (stride 1).

    Args:
        x: (B, H, W, C) input.
        w: (3, 3, C, O) kernel.
        b: (O,) bias.
    """
    bsz, h, wd, c = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    cols = np.concatenate(
        [xp[:, i:i + h, j:j + wd, :] for i in range(3) for j in range(3)], axis=-1
    ).reshape(-1, 9 * c)
    out = cols @ w.reshape(9 * c, -1) + b
    return out.reshape(bsz, h, wd, -1), (cols, x.shape, w)


def conv3x3_backward(dout: np.ndarray, cache):
    cols, xshape, w = cache
    bsz, h, wd, c = xshape
    o = dout.shape[-1]
    d2 = dout.reshape(-1, o)
    dw = (cols.T @ d2).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(9 * c, o).T).reshape(bsz, h, wd, 9, c)
    dxp = np.zeros((bsz, h + 2, wd + 2, c), dtype=dout.dtype)
    for k in range(9):
        i, j = divmod(k, 3)
        dxp[:, i:i + h, j:j + wd, :] += dcols[..., k, :]
    return dxp[:, 1:-1, 1:-1, :], dw, db


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(dout, mask):
    return dout * mask


def maxpool2_forward(x: np.ndarray):
    """2x2 max pooling with stride 2; ties go to the first element in window order."""
    bsz, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2 needs even spatial sizes, got {h}x{w}")
    win = x.reshape(bsz, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(bsz, h // 2, w // 2, c, 4)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, (arg, x.shape)


def maxpool2_backward(dout, cache):
    arg, shape = cache
    bsz, h, w, c = shape
    dwin = np.zeros(dout.shape + (4,), dtype=dout.dtype)
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    return dwin.reshape(bsz, h // 2, w // 2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(shape)


def l2norm_forward(x: np.ndarray, gamma: np.ndarray, eps: float = 1e-10):
    """Normalize each location's channel vector to unit L2 norm, then scale per channel."""
    r = np.sqrt((x * x).sum(axis=-1, keepdims=True))
    n = r + eps
    xhat = x / n
    return xhat * gamma, (x, xhat, r, n, gamma)


def l2norm_backward(dout, cache):
    x, xhat, r, n, gamma = cache
    dgamma = (dout * xhat).reshape(-1, x.shape[-1]).sum(axis=0)
    g = dout * gamma
    dot = (x * g).sum(axis=-1, keepdims=True)
    safe_r = np.where(r > 0, r, 1.0)
    dx = g / n - x * dot / (n * n * safe_r)
    return dx, dgamma

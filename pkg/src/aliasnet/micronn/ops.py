"""Forward/backward kernels on ``(batch, channels, height, width)`` float64 arrays.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward`` takes
the upstream gradient and that cache.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import activations
from ..filters import Kernel, blur_subsample


def _same_pad(k: int) -> int:
    return (k - 1) // 2


def conv2d_forward(x, w, b=None, stride: int = 1, padding: int | None = None):
    """Cross-correlation with zero padding (``(k-1)//2`` by default)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weights, got {x.shape} and {w.shape}")
    bsz, cin, h, wd = x.shape
    cout, wcin, kh, kw = w.shape
    if wcin != cin:
        raise ValueError(f"weights expect {wcin} input channels, input has {cin}")
    p = _same_pad(kh) if padding is None else padding
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    ho = (h + 2 * p - kh) // stride + 1
    wo = (wd + 2 * p - kw) // stride + 1
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(bsz * ho * wo, cin * kh * kw)
    out = cols @ w.reshape(cout, -1).T
    if b is not None:
        out += b
    out = out.reshape(bsz, ho, wo, cout).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (x.shape, w, cols, stride, p)


def conv2d_backward(dout, cache):
    """Gradients ``(dx, dw, db)`` of :func:`conv2d_forward`."""
    xshape, w, cols, stride, p = cache
    bsz, cin, h, wd = xshape
    cout, _, kh, kw = w.shape
    ho, wo = dout.shape[2:]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, cout)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(cout, -1)).reshape(bsz, ho, wo, cin, kh, kw)
    dxp = np.zeros((bsz, cin, h + 2 * p, wd + 2 * p))
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    dx = dxp[:, :, p : p + h, p : p + wd] if p else dxp
    return dx, dw, db


@lru_cache(maxsize=256)
def _blur_matrix(n: int, taps: tuple, stride: int, padding: str) -> np.ndarray:
    kern = Kernel(taps).normalize()
    eye = np.eye(n)
    cols = [blur_subsample(eye[j], kern, stride, padding) for j in range(n)]
    mat = np.stack(cols, axis=1)
    mat.setflags(write=False)
    return mat


def blur_matrix(n: int, kern: Kernel, stride: int, padding: str = "reflect") -> np.ndarray:
    """The 1-D blur-then-subsample operator as a dense ``(ceil(n/stride), n)`` matrix."""
    return _blur_matrix(n, tuple(kern.taps), stride, padding)


def blur_forward(x, kern: Kernel, stride: int = 1, padding: str = "reflect"):
    """Per-channel fixed blur + subsample, applied separably as ``A_h @ x @ A_w.T``."""
    x = np.asarray(x, dtype=float)
    ah = blur_matrix(x.shape[-2], kern, stride, padding)
    aw = blur_matrix(x.shape[-1], kern, stride, padding)
    return (ah @ x) @ aw.T, (ah, aw)


def blur_backward(dout, cache):
    ah, aw = cache
    return (ah.T @ dout) @ aw


def maxpool_forward(x, k: int = 3, stride: int = 2):
    x = np.asarray(x, dtype=float)
    p = _same_pad(k)
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), constant_values=-np.inf)
    h, wd = x.shape[2:]
    ho = (h + 2 * p - k) // stride + 1
    wo = (wd + 2 * p - k) // stride + 1
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    flat = win.reshape(*win.shape[:4], k * k)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg, k, stride, p)


def maxpool_backward(dout, cache):
    xshape, arg, k, stride, p = cache
    bsz, c, h, wd = xshape
    ho, wo = dout.shape[2:]
    dxp = np.zeros((bsz, c, h + 2 * p, wd + 2 * p))
    for i in range(k):
        for j in range(k):
            hit = arg == i * k + j
            dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dout * hit
    return dxp[:, :, p : p + h, p : p + wd]


def activation_forward(x, kind: str):
    return activations.apply(kind, x), (x, kind)


def activation_backward(dout, cache):
    x, kind = cache
    return dout * activations.derivative(kind, x)


NORM_EPS = 1e-5


def norm_forward(x, gamma, beta, eps: float = NORM_EPS):
    """Standardize each sample over (C, H, W), then a learned per-channel scale and shift."""
    mu = x.mean(axis=(1, 2, 3), keepdims=True)
    var = x.var(axis=(1, 2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, inv, gamma)


def norm_backward(dout, cache):
    xhat, inv, gamma = cache
    n = xhat[0].size
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    s1 = dxhat.sum(axis=(1, 2, 3), keepdims=True)
    s2 = (dxhat * xhat).sum(axis=(1, 2, 3), keepdims=True)
    dx = inv * (dxhat - s1 / n - xhat * s2 / n)
    return dx, dgamma, dbeta


def gap_forward(x):
    return x.mean(axis=(2, 3)), x.shape


def gap_backward(dout, shape):
    h, w = shape[2:]
    return np.broadcast_to(dout[:, :, None, None] / (h * w), shape).copy()


def linear_forward(x, w, b):
    return x @ w.T + b, (x, w)


def linear_backward(dout, cache):
    x, w = cache
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient with respect to the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n

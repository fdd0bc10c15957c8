"""Dense float64 layers with hand-written backward passes, Adam, and a
finite-difference gradient checker.

Conventions
-----------
* Activations are ``(B, n, d)`` arrays; ``key_mask`` is a ``(B, n)`` boolean
  array that is ``True`` at padding positions.
* Linear maps are ``x @ W + b`` with ``W`` of shape ``(d_in, d_out)``.
* Every forward returns ``(out, cache)``; the matching backward takes
  ``(d_out, cache)`` and returns the input gradient plus a dict of parameter
  gradients.

The forward code is written so that results for one sequence do not depend
on how much padding sits next to it: reductions that cross sequence positions
are sequential (``cumsum``) and the single-row matrix-vector path of BLAS is
never taken. This is what makes batched and one-at-a-time encoding agree bit
for bit.
"""

import math

import numba
import numpy as np

from .exceptions import ConfigError, MaskError, NumericError, ShapeError

__all__ = [
    "matmul",
    "linear",
    "softmax_rows",
    "masked_softmax",
    "layer_norm_forward",
    "layer_norm_backward",
    "mhsa_forward",
    "mhsa_backward",
    "ffn_forward",
    "ffn_backward",
    "AdamState",
    "adam_step",
    "gradient_check",
]


def matmul(A, B):
    """Matrix product with shape checking and a fixed kernel choice."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    if A.shape[0] == 1:
        # (1, k) @ B goes through gemv, whose summation order differs from
        # gemm's; a zero row keeps every product on the gemm path.
        return (np.vstack([A, np.zeros_like(A)]) @ B)[:1]
    return A @ B


def linear(x, W, b):
    """Apply ``x @ W + b`` over the last axis of ``x``."""
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeError(f"linear: input {x.shape}, weight {W.shape}, bias {b.shape}")
    flat = x.reshape(-1, x.shape[-1])
    return (matmul(flat, W) + b).reshape(x.shape[:-1] + (W.shape[1],))


def _linear_backward(dy, x, W):
    dflat = dy.reshape(-1, dy.shape[-1])
    xflat = x.reshape(-1, x.shape[-1])
    dW = xflat.T @ dflat
    db = dflat.sum(axis=0)
    dx = (dflat @ W.T).reshape(x.shape)
    return dx, dW, db


def _seq_sum_last(x):
    # Left-to-right sum along the last axis; zeros appended by padding leave
    # the partial sums untouched.
    return np.cumsum(x, axis=-1)[..., -1]


def softmax_rows(A, mask=None):
    """Row-wise softmax of a 2-D array.

    ``mask`` (same shape, boolean) hides entries: they are excluded from the
    row maximum and sum and come out as exactly 0.

    Raises
    ------
    MaskError
        If some row is entirely hidden.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ShapeError(f"softmax_rows expects a 2-D array, got {A.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != A.shape:
            raise ShapeError(f"mask shape {mask.shape} != input shape {A.shape}")
    return masked_softmax(A, mask)


def masked_softmax(S, mask=None):
    """Softmax over the last axis of an array of any rank; ``mask`` broadcasts."""
    if mask is not None:
        hidden = np.broadcast_to(mask, S.shape)
        if hidden.all(axis=-1).any():
            raise MaskError("a softmax row has every entry masked")
        S = np.where(hidden, -np.inf, S)
    m = S.max(axis=-1, keepdims=True)
    e = np.exp(S - m)
    return e / _seq_sum_last(e)[..., None]


def layer_norm_forward(x, gain, bias, eps=1e-5):
    """Normalise each row of ``x`` (last axis) to zero mean, unit variance,
    then scale by ``gain`` and shift by ``bias``."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer norm: input width {d}, gain {gain.shape}, bias {bias.shape}")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv, gain)


def layer_norm_backward(dy, cache):
    xhat, inv, gain = cache
    d = xhat.shape[-1]
    flat_dy = dy.reshape(-1, d)
    flat_xhat = xhat.reshape(-1, d)
    dgain = (flat_dy * flat_xhat).sum(axis=0)
    dbias = flat_dy.sum(axis=0)
    dxhat = dy * gain
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, {"gain": dgain, "bias": dbias}


def _split_heads(x, heads):
    B, n, d = x.shape
    return x.reshape(B, n, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, h, n, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, n, h * dk)


# Stacked matmul picks kernels (and summation orders) by shape, so a padded
# batch and a lone sequence can round differently. The two attention
# contractions below accumulate term by term in a fixed order instead; padded
# keys carry zero weight and only add exact zeros at the end.


@numba.njit(cache=True, nogil=True)
def _attention_scores_kernel(Q, K, S):
    G, n, dk = Q.shape
    for g in range(G):
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for c in range(dk):
                    acc += Q[g, i, c] * K[g, j, c]
                S[g, i, j] = acc


@numba.njit(cache=True, nogil=True)
def _attention_mix_kernel(P, V, O):
    G, n, dk = V.shape
    for g in range(G):
        for i in range(n):
            for c in range(dk):
                O[g, i, c] = 0.0
            for j in range(n):
                p = P[g, i, j]
                for c in range(dk):
                    O[g, i, c] += p * V[g, j, c]


def _attention_scores(Q, K):
    B, h, n, dk = Q.shape
    S = np.empty((B * h, n, n))
    _attention_scores_kernel(np.ascontiguousarray(Q).reshape(-1, n, dk),
                             np.ascontiguousarray(K).reshape(-1, n, dk), S)
    return S.reshape(B, h, n, n)


def _attention_mix(P, V):
    B, h, n, dk = V.shape
    O = np.empty((B * h, n, dk))
    _attention_mix_kernel(np.ascontiguousarray(P).reshape(-1, n, n),
                          np.ascontiguousarray(V).reshape(-1, n, dk), O)
    return O.reshape(B, h, n, dk)


def mhsa_forward(H, params, heads, key_mask=None):
    """Multi-head self-attention.

    Parameters
    ----------
    H : ndarray of shape (B, n, d) or (n, d)
    params : dict
        ``Wq, bq, Wk, Wv, bv, Wo, bo`` and optionally ``bk``; weights
        ``(d, d)``, biases ``(d,)``. A key bias only shifts each score row by
        a constant, which softmax ignores, so it may be left out.
    heads : int
        Must divide ``d``. Scores are scaled by ``1/sqrt(d/heads)``.
    key_mask : ndarray of shape (B, n), optional
        ``True`` marks padding keys that receive no attention.

    Returns
    -------
    out : ndarray, same shape as ``H``
    cache : tuple
        Includes the attention weights ``P`` of shape ``(B, heads, n, n)``.
    """
    squeeze = H.ndim == 2
    if squeeze:
        H = H[None]
        key_mask = None if key_mask is None else np.asarray(key_mask)[None]
    B, n, d = H.shape
    if heads < 1 or d % heads:
        raise ConfigError(f"model width {d} is not divisible by {heads} heads")
    dk = d // heads
    Q = _split_heads(linear(H, params["Wq"], params["bq"]), heads)
    bk = params.get("bk")
    K = _split_heads(linear(H, params["Wk"], np.zeros(d) if bk is None else bk), heads)
    V = _split_heads(linear(H, params["Wv"], params["bv"]), heads)
    scale = 1.0 / math.sqrt(dk)
    S = _attention_scores(Q, K) * scale
    mask = None if key_mask is None else key_mask[:, None, None, :]
    P = masked_softmax(S, mask)
    O = _merge_heads(_attention_mix(P, V))
    out = linear(O, params["Wo"], params["bo"])
    cache = (H, Q, K, V, P, O, scale, heads, squeeze)
    return (out[0] if squeeze else out), cache


def mhsa_backward(dout, cache, params):
    H, Q, K, V, P, O, scale, heads, squeeze = cache
    if squeeze:
        dout = dout[None]
    dO, dWo, dbo = _linear_backward(dout, O, params["Wo"])
    dOh = _split_heads(dO, heads)
    dP = dOh @ V.transpose(0, 1, 3, 2)
    dV = P.transpose(0, 1, 3, 2) @ dOh
    dS = P * (dP - (dP * P).sum(axis=-1, keepdims=True)) * scale
    dQ = dS @ K
    dK = dS.transpose(0, 1, 3, 2) @ Q
    dH_q, dWq, dbq = _linear_backward(_merge_heads(dQ), H, params["Wq"])
    dH_k, dWk, dbk = _linear_backward(_merge_heads(dK), H, params["Wk"])
    dH_v, dWv, dbv = _linear_backward(_merge_heads(dV), H, params["Wv"])
    dH = dH_q + dH_k + dH_v
    grads = {"Wq": dWq, "bq": dbq, "Wk": dWk, "Wv": dWv, "bv": dbv, "Wo": dWo, "bo": dbo}
    if "bk" in params:
        grads["bk"] = dbk
    return (dH[0] if squeeze else dH), grads


def ffn_forward(x, params):
    """Position-wise ``ReLU(x W1 + b1) W2 + b2``."""
    W1, b1, W2, b2 = params["W1"], params["b1"], params["W2"], params["b2"]
    if W1.shape[1] != W2.shape[0] or W2.shape[1] != x.shape[-1]:
        raise ShapeError(f"ffn: W1 {W1.shape}, W2 {W2.shape}, input {x.shape}")
    pre = linear(x, W1, b1)
    act = np.maximum(pre, 0.0)
    return linear(act, W2, b2), (x, pre, act)


def ffn_backward(dy, cache, params):
    x, pre, act = cache
    dact, dW2, db2 = _linear_backward(dy, act, params["W2"])
    dpre = dact * (pre > 0)
    dx, dW1, db1 = _linear_backward(dpre, x, params["W1"])
    return dx, {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


# ---------------------------------------------------------------- optimiser


class AdamState:
    """First/second moment estimates and step counter for :func:`adam_step`."""

    def __init__(self, params, lr=0.0005, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}


def adam_step(params, grads, state):
    """In-place bias-corrected Adam update of ``params``; ``grads`` is left as is."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, p in params.items():
        g = grads[k]
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ------------------------------------------------------------ verification


def gradient_check(loss_fn, params, eps=1e-5, n_coords=200, seed=0):
    """Compare analytic gradients with central finite differences.

    Parameters
    ----------
    loss_fn : callable
        ``loss_fn(params) -> (loss, grads)`` where ``grads`` maps the same
        keys as ``params``. Called repeatedly with perturbed parameters.
    params : dict of ndarray
        Perturbed in place during the check and restored afterwards.
    n_coords : int
        Coordinates sampled uniformly over all parameters (all of them if
        there are fewer).

    Returns
    -------
    float
        ``max |a - n| / max(1e-8, |a| + |n|)`` over the sampled coordinates.
    """
    loss, grads = loss_fn(params)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss in gradient check")
    keys = list(params)
    sizes = np.array([params[k].size for k in keys])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    flat_idx = np.arange(total) if total <= n_coords else np.sort(rng.choice(total, n_coords, replace=False))
    bounds = np.cumsum(sizes)
    worst = 0.0
    for fi in flat_idx:
        ki = int(np.searchsorted(bounds, fi, side="right"))
        k = keys[ki]
        local = int(fi - (bounds[ki - 1] if ki else 0))
        view = params[k].reshape(-1)
        orig = view[local]
        view[local] = orig + eps
        fp, _ = loss_fn(params)
        view[local] = orig - eps
        fm, _ = loss_fn(params)
        view[local] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError("non-finite loss in gradient check")
        num = (fp - fm) / (2.0 * eps)
        ana = float(grads[k].reshape(-1)[local])
        err = abs(ana - num) / max(1e-8, abs(ana) + abs(num))
        worst = max(worst, err)
    return worst

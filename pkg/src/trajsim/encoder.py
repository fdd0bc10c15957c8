"""Single-layer transformer trajectory encoder.

Pipeline for a trajectory of ``n`` points ``l_i``::

    z_i = W l_i + b                 point embedding, W is (d, 2)
    h_i = z_i + pos[i]              learnable positional table
    H'  = EncoderLayer(H)           post-norm: LN(x + MHSA(x)), LN(x + FFN(x))
    v   = ReLU(mean_i H'_i)         length-independent, non-negative

Parameters live in a flat ``dict`` whose key order (:func:`param_order`) is
also the order of the checkpoint blob. Attention has no key bias: it would
add the same constant to every score in a row and cannot change the output.
"""

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import numeric
from .exceptions import ConfigError, FormatError, LengthError, NumericError
from .similarity import SIM_FUNCTIONS, resolve_sim
from .validation import check_points, check_random_seed

__all__ = [
    "SimformerConfig",
    "SimformerModel",
    "param_order",
    "init_model",
    "encode",
    "encode_batch",
    "export_attention",
    "forward_batch",
    "backward_batch",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"SIMF"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sII")
MAX_LAYERS = 4


@dataclass(frozen=True)
class SimformerConfig:
    """Encoder hyperparameters.

    ``d_ff`` defaults to ``2 * d``. ``sim_fn`` is one of ``euclidean``,
    ``cosine``, ``chebyshev`` or ``tailored``; the latter is resolved through
    ``measure``.
    """

    d: int = 128
    heads: int = 16
    layers: int = 1
    d_ff: int = None
    max_len: int = 200
    sim_fn: str = "tailored"
    measure: str = "dtw"

    def __post_init__(self):
        if self.d_ff is None:
            object.__setattr__(self, "d_ff", 2 * self.d)
        for name in ("d", "heads", "layers", "d_ff", "max_len"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.d % self.heads:
            raise ConfigError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.layers > MAX_LAYERS:
            raise ConfigError(f"at most {MAX_LAYERS} layers are supported, got {self.layers}")
        if self.sim_fn not in SIM_FUNCTIONS + ("tailored",):
            raise ConfigError(f"unknown similarity function {self.sim_fn!r}")
        try:
            resolve_sim(self.sim_fn, self.measure)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def resolved_sim(self):
        return resolve_sim(self.sim_fn, self.measure)

    def to_dict(self):
        return asdict(self)


def param_order(cfg):
    """Parameter names with shapes, in checkpoint order."""
    d, f = cfg.d, cfg.d_ff
    order = [("embed.W", (d, 2)), ("embed.b", (d,)), ("pos", (cfg.max_len, d))]
    for i in range(cfg.layers):
        p = f"layers.{i}."
        order += [
            (p + "attn.Wq", (d, d)), (p + "attn.bq", (d,)),
            (p + "attn.Wk", (d, d)),
            (p + "attn.Wv", (d, d)), (p + "attn.bv", (d,)),
            (p + "attn.Wo", (d, d)), (p + "attn.bo", (d,)),
            (p + "ln1.gain", (d,)), (p + "ln1.bias", (d,)),
            (p + "ffn.W1", (d, f)), (p + "ffn.b1", (f,)),
            (p + "ffn.W2", (f, d)), (p + "ffn.b2", (d,)),
            (p + "ln2.gain", (d,)), (p + "ln2.bias", (d,)),
        ]
    return order


class SimformerModel:
    """Config plus the parameter dict; ``step`` counts optimiser updates."""

    def __init__(self, config, params, seed=0, step=0):
        self.config = config
        self.params = params
        self.seed = seed
        self.step = step

    @property
    def n_params(self):
        return int(sum(p.size for p in self.params.values()))

    def copy(self):
        return SimformerModel(self.config, {k: v.copy() for k, v in self.params.items()}, self.seed, self.step)

    def layer_params(self, i, block):
        prefix = f"layers.{i}.{block}."
        return {k[len(prefix):]: v for k, v in self.params.items() if k.startswith(prefix)}

    def __repr__(self):
        return f"SimformerModel(d={self.config.d}, heads={self.config.heads}, layers={self.config.layers}, params={self.n_params})"


def init_model(cfg, seed):
    """Glorot-uniform weights, zero biases, unit layer-norm gains and a
    N(0, 0.02^2) positional table, all drawn from ``seed``."""
    if not isinstance(cfg, SimformerConfig):
        raise ConfigError("init_model expects a SimformerConfig")
    rng = check_random_seed(seed)
    params = {}
    for name, shape in param_order(cfg):
        leaf = name.rsplit(".", 1)[-1]
        if name == "pos":
            params[name] = rng.normal(0.0, 0.02, size=shape)
        elif leaf == "gain":
            params[name] = np.ones(shape)
        elif len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            fan_out, fan_in = (shape[0], shape[1]) if name == "embed.W" else (shape[1], shape[0])
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return SimformerModel(cfg, params, seed=int(seed), step=0)


def _prepare(model, trajs):
    pts = [check_points(t) for t in trajs]
    max_len = model.config.max_len
    for i, p in enumerate(pts):
        if p.shape[0] > max_len:
            raise LengthError(f"trajectory {i} has {p.shape[0]} points; the model supports at most {max_len}")
    return pts


def forward_batch(model, trajs, keep_cache=False):
    """Encode a batch, padding to the longest member.

    Returns ``(reps, cache)`` where ``reps`` is ``(B, d)``; ``cache`` is only
    populated when ``keep_cache`` is set (needed by :func:`backward_batch`).
    """
    pts = _prepare(model, trajs)
    cfg = model.config
    P = model.params
    B = len(pts)
    lengths = np.array([p.shape[0] for p in pts], dtype=np.int64)
    n = int(lengths.max())
    L = np.zeros((B, n, 2))
    for i, p in enumerate(pts):
        L[i, :p.shape[0]] = p
    key_mask = np.arange(n)[None, :] >= lengths[:, None]
    x = numeric.linear(L, P["embed.W"].T, P["embed.b"]) + P["pos"][:n]
    layer_caches = []
    for li in range(cfg.layers):
        attn_p = model.layer_params(li, "attn")
        ffn_p = model.layer_params(li, "ffn")
        a, c_attn = numeric.mhsa_forward(x, attn_p, cfg.heads, key_mask)
        x1, c_ln1 = numeric.layer_norm_forward(x + a, P[f"layers.{li}.ln1.gain"], P[f"layers.{li}.ln1.bias"])
        f, c_ffn = numeric.ffn_forward(x1, ffn_p)
        x, c_ln2 = numeric.layer_norm_forward(x1 + f, P[f"layers.{li}.ln2.gain"], P[f"layers.{li}.ln2.bias"])
        layer_caches.append((c_attn, c_ln1, c_ffn, c_ln2) if keep_cache else (c_attn[4],))
    valid = ~key_mask
    # Sequential sum over positions, read off at each true length.
    csum = np.cumsum(x * valid[:, :, None], axis=1)
    pooled = csum[np.arange(B), lengths - 1] / lengths[:, None]
    reps = np.maximum(pooled, 0.0)
    if not np.isfinite(reps).all():
        raise NumericError("non-finite representation")
    cache = {"L": L, "lengths": lengths, "valid": valid, "pooled": pooled, "layers": layer_caches}
    return reps, cache


def backward_batch(model, cache, dreps):
    """Parameter gradients of ``sum(dreps * reps)`` for a cached forward pass."""
    cfg = model.config
    P = model.params
    lengths, valid, pooled = cache["lengths"], cache["valid"], cache["pooled"]
    dpooled = dreps * (pooled > 0)
    dx = (dpooled / lengths[:, None])[:, None, :] * valid[:, :, None]
    grads = {}
    for li in reversed(range(cfg.layers)):
        c_attn, c_ln1, c_ffn, c_ln2 = cache["layers"][li]
        pre = f"layers.{li}."
        dr2, g = numeric.layer_norm_backward(dx, c_ln2)
        grads[pre + "ln2.gain"], grads[pre + "ln2.bias"] = g["gain"], g["bias"]
        dx1, g = numeric.ffn_backward(dr2, c_ffn, model.layer_params(li, "ffn"))
        for k, v in g.items():
            grads[pre + "ffn." + k] = v
        dx1 = dx1 + dr2
        dr1, g = numeric.layer_norm_backward(dx1, c_ln1)
        grads[pre + "ln1.gain"], grads[pre + "ln1.bias"] = g["gain"], g["bias"]
        dxa, g = numeric.mhsa_backward(dr1, c_attn, model.layer_params(li, "attn"))
        for k, v in g.items():
            grads[pre + "attn." + k] = v
        dx = dxa + dr1
    n = dx.shape[1]
    dflat = dx.reshape(-1, cfg.d)
    grads["embed.W"] = (cache["L"].reshape(-1, 2).T @ dflat).T
    grads["embed.b"] = dflat.sum(axis=0)
    dpos = np.zeros_like(P["pos"])
    dpos[:n] = dx.sum(axis=0)
    grads["pos"] = dpos
    return {k: grads[k] for k in P}


def encode(model, traj):
    """Representation of one trajectory, a non-negative ``(d,)`` vector."""
    reps, _ = forward_batch(model, [traj])
    return reps[0]


def encode_batch(model, trajs, batch_size=None):
    """Representations of many trajectories as a ``(len(trajs), d)`` array.

    Members are padded to the longest one in their batch and padding is
    masked out of attention and pooling, so each row equals :func:`encode`
    of that trajectory bit for bit.
    """
    trajs = list(getattr(trajs, "trajectories", trajs))
    if not trajs:
        return np.empty((0, model.config.d))
    if batch_size is None:
        return forward_batch(model, trajs)[0]
    # Group similar lengths to limit padding; row order is restored below.
    order = np.argsort([len(getattr(t, "points", t)) for t in trajs], kind="stable")
    out = np.empty((len(trajs), model.config.d))
    for i in range(0, len(trajs), batch_size):
        idx = order[i:i + batch_size]
        out[idx] = forward_batch(model, [trajs[j] for j in idx])[0]
    return out


def export_attention(model, traj, layer=-1):
    """Attention mass received by each point, averaged over heads and queries.

    Each softmax row sums to one, so the result sums to one as well.
    """
    _, cache = forward_batch(model, [traj])
    P = cache["layers"][layer][0]
    return P[0].mean(axis=(0, 1))


# --------------------------------------------------------------- checkpoint


def save_checkpoint(model, path):
    """Write ``magic | version | header length | JSON header | float64 blob``."""
    header = {
        "config": model.config.to_dict(),
        "seed": model.seed,
        "step": model.step,
        "param_order": [name for name, _ in param_order(model.config)],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(model.params[name], dtype="<f8").tobytes() for name, _ in param_order(model.config)
    )
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(hbytes)))
        fh.write(hbytes)
        fh.write(blob)
    return path


def load_checkpoint(path):
    data = Path(path).read_bytes()
    if len(data) < _CKPT_HEADER.size:
        raise FormatError(f"{path}: truncated checkpoint")
    magic, version, hlen = _CKPT_HEADER.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    start = _CKPT_HEADER.size
    if len(data) < start + hlen:
        raise FormatError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(data[start:start + hlen].decode("utf-8"))
        cfg = SimformerConfig(**header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: invalid checkpoint header: {exc}") from None
    order = param_order(cfg)
    expected = sum(int(np.prod(shape)) for _, shape in order) * 8
    blob = data[start + hlen:]
    if len(blob) != expected:
        raise FormatError(f"{path}: parameter blob has {len(blob)} bytes, config needs {expected}")
    params = {}
    off = 0
    for name, shape in order:
        size = int(np.prod(shape))
        params[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=off).astype(np.float64).reshape(shape)
        off += size * 8
    return SimformerModel(cfg, params, seed=header.get("seed", 0), step=header.get("step", 0))

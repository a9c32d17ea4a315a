"""Reference relation-aware multi-head self-attention.

Per head h, with relation ids rel[i][j] indexing the shared tables:

    alpha_ij = softmax_j( x_i W_Q (x_j W_K + RK[rel_ij])^T / sqrt(d_z / H) )
    z_i      = concat_h sum_j alpha_ij (x_j W_V + RV[rel_ij])

The kernel runs in double precision: it exists for verification, not speed.
One pair of embedding tables is shared by all heads and all layers; key and
value tables are independent parameters.
"""

import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import IdOutOfRange, ShapeError, StaleCache
from .relations import RELATION_COUNT


@dataclass
class RelationEmbeddingTables:
    key: np.ndarray  # (mu, d_kv)
    value: np.ndarray  # (mu, d_kv)

    def __post_init__(self):
        if self.key.shape != self.value.shape or self.key.ndim != 2:
            raise ShapeError(f"table shapes differ: {self.key.shape} vs {self.value.shape}")


@dataclass
class AttentionParams:
    w_q: np.ndarray  # (H, d_x, d_kv)
    w_k: np.ndarray
    w_v: np.ndarray

    def __post_init__(self):
        if not (self.w_q.shape == self.w_k.shape == self.w_v.shape) or self.w_q.ndim != 3:
            raise ShapeError("w_q/w_k/w_v must share shape (heads, d_x, d_kv)")

    @property
    def n_heads(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_kv(self) -> int:
        return self.w_q.shape[2]

    @property
    def d_z(self) -> int:
        return self.n_heads * self.d_kv


@dataclass
class EncoderConfig:
    n_layers: int = 1
    d_model: int = 8
    n_heads: int = 1
    seed: int = 0
    sigma_r: float = 0.02
    d_ff: int | None = None
    layer_norm_eps: float = 1e-6
    use_layer_norm: bool = True
    use_feed_forward: bool = True

    def __post_init__(self):
        if self.n_layers < 1:
            raise ShapeError("n_layers must be >= 1")
        if self.d_model % self.n_heads:
            raise ShapeError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")
        if self.sigma_r < 0:
            raise ShapeError("sigma_r must be >= 0")

    @property
    def d_kv(self) -> int:
        return self.d_model // self.n_heads


@dataclass
class LayerParams:
    attn: AttentionParams
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    ff_w1: np.ndarray
    ff_b1: np.ndarray
    ff_w2: np.ndarray
    ff_b2: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray


@dataclass
class EncoderParams:
    config: EncoderConfig
    layers: tuple[LayerParams, ...]
    tables: RelationEmbeddingTables  # single shared storage for all layers


def init_tables(config: EncoderConfig) -> RelationEmbeddingTables:
    """Fresh tables with i.i.d. normal(0, sigma_r^2) entries."""
    rng = np.random.default_rng(config.seed)
    shape = (RELATION_COUNT, config.d_kv)
    return RelationEmbeddingTables(
        key=rng.normal(0.0, config.sigma_r, shape),
        value=rng.normal(0.0, config.sigma_r, shape),
    )


def init_encoder(config: EncoderConfig, weight_scale: float = 0.02) -> EncoderParams:
    rng = np.random.default_rng(config.seed)
    d, d_ff = config.d_model, config.d_ff or 4 * config.d_model
    layers = []
    for _ in range(config.n_layers):
        attn = AttentionParams(
            w_q=rng.normal(0.0, weight_scale, (config.n_heads, d, config.d_kv)),
            w_k=rng.normal(0.0, weight_scale, (config.n_heads, d, config.d_kv)),
            w_v=rng.normal(0.0, weight_scale, (config.n_heads, d, config.d_kv)),
        )
        layers.append(
            LayerParams(
                attn=attn,
                ln1_gain=np.ones(d),
                ln1_bias=np.zeros(d),
                ff_w1=rng.normal(0.0, weight_scale, (d, d_ff)),
                ff_b1=np.zeros(d_ff),
                ff_w2=rng.normal(0.0, weight_scale, (d_ff, d)),
                ff_b2=np.zeros(d),
                ln2_gain=np.ones(d),
                ln2_bias=np.zeros(d),
            )
        )
    return EncoderParams(config, tuple(layers), init_tables(config))


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_inputs(x, rel, params: AttentionParams, tables: RelationEmbeddingTables):
    x = np.asarray(x, dtype=np.float64)
    rel = np.asarray(rel)
    if x.ndim != 2:
        raise ShapeError(f"x must be (n, d_x), got {x.shape}")
    n = x.shape[0]
    if rel.shape != (n, n):
        raise ShapeError(f"rel must be ({n}, {n}), got {rel.shape}")
    if not np.issubdtype(rel.dtype, np.integer):
        rel = rel.astype(np.int64)
    if x.shape[1] != params.w_q.shape[1]:
        raise ShapeError(f"x width {x.shape[1]} vs params d_x {params.w_q.shape[1]}")
    if params.d_kv != tables.key.shape[1]:
        raise ShapeError(f"head width {params.d_kv} vs table width {tables.key.shape[1]}")
    mu = tables.key.shape[0]
    if rel.size and (int(rel.min()) < 0 or int(rel.max()) >= mu):
        raise IdOutOfRange(f"relation ids must lie in [0, {mu})")
    return x, rel


@dataclass
class AttentionCache:
    x: np.ndarray
    rel: np.ndarray
    params: AttentionParams
    tables: RelationEmbeddingTables
    q: np.ndarray  # (H, n, d_kv)
    k: np.ndarray
    v: np.ndarray
    alpha: np.ndarray  # (H, n, n)
    scale: float

    def check(self, upstream: np.ndarray) -> None:
        h, n, d_kv = self.q.shape
        ok = (
            self.alpha.shape == (h, n, n)
            and self.k.shape == self.q.shape == self.v.shape
            and self.rel.shape == (n, n)
            and self.x.shape[0] == n
            and self.tables.key.shape[1] == d_kv
        )
        if not ok:
            raise StaleCache("cached arrays no longer agree with each other")
        if upstream.shape != (n, h * d_kv):
            raise StaleCache(f"upstream shape {upstream.shape}, cache expects {(n, h * d_kv)}")


def attend(x, rel, params: AttentionParams, tables: RelationEmbeddingTables, return_cache: bool = False):
    """Forward pass; returns (n, d_z) outputs, optionally with the cache."""
    x, rel = _check_inputs(x, rel, params, tables)
    n = x.shape[0]
    scale = math.sqrt(params.d_z / params.n_heads)
    q = np.einsum("nd,hdk->hnk", x, params.w_q)
    k = np.einsum("nd,hdk->hnk", x, params.w_k)
    v = np.einsum("nd,hdk->hnk", x, params.w_v)
    rk = tables.key[rel]  # (n, n, d_kv)
    rv = tables.value[rel]
    scores = (np.einsum("hik,hjk->hij", q, k) + np.einsum("hik,ijk->hij", q, rk)) / scale
    alpha = _softmax(scores)
    ctx = np.einsum("hij,hjk->hik", alpha, v) + np.einsum("hij,ijk->hik", alpha, rv)
    z = ctx.transpose(1, 0, 2).reshape(n, params.d_z)
    if not return_cache:
        return z
    return z, AttentionCache(x, rel, params, tables, q, k, v, alpha, scale)


def vanilla_attend(x, params: AttentionParams):
    """Plain scaled-dot-product self-attention with the same weights."""
    x = np.asarray(x, dtype=np.float64)
    outs = []
    scale = math.sqrt(params.d_z / params.n_heads)
    for h in range(params.n_heads):
        q = x @ params.w_q[h]
        k = x @ params.w_k[h]
        v = x @ params.w_v[h]
        alpha = _softmax(q @ k.T / scale)
        outs.append(alpha @ v)
    return np.concatenate(outs, axis=1)


@dataclass
class AttentionGrads:
    x: np.ndarray
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    key: np.ndarray  # relation table gradients
    value: np.ndarray


def attend_backward(upstream, cache: AttentionCache) -> AttentionGrads:
    """Exact gradients of the forward map for every parameter group."""
    upstream = np.asarray(upstream, dtype=np.float64)
    cache.check(upstream)
    params, tables, rel = cache.params, cache.tables, cache.rel
    h_count, n, d_kv = cache.q.shape
    dz = upstream.reshape(n, h_count, d_kv).transpose(1, 0, 2)  # (H, n, d_kv)
    rk = tables.key[rel]
    rv = tables.value[rel]

    # through the value mix
    dalpha = np.einsum("hik,hjk->hij", dz, cache.v) + np.einsum("hik,ijk->hij", dz, rv)
    dv = np.einsum("hij,hik->hjk", cache.alpha, dz)
    d_value = np.zeros_like(tables.value)
    np.add.at(d_value, rel, np.einsum("hij,hik->ijk", cache.alpha, dz))

    # through the softmax and scaling
    inner = (cache.alpha * dalpha).sum(axis=-1, keepdims=True)
    draw = cache.alpha * (dalpha - inner) / cache.scale

    # through the score terms
    dq = np.einsum("hij,hjk->hik", draw, cache.k) + np.einsum("hij,ijk->hik", draw, rk)
    dk = np.einsum("hij,hik->hjk", draw, cache.q)
    d_key = np.zeros_like(tables.key)
    np.add.at(d_key, rel, np.einsum("hij,hik->ijk", draw, cache.q))

    dx = (
        np.einsum("hnk,hdk->nd", dq, params.w_q)
        + np.einsum("hnk,hdk->nd", dk, params.w_k)
        + np.einsum("hnk,hdk->nd", dv, params.w_v)
    )
    dw_q = np.einsum("nd,hnk->hdk", cache.x, dq)
    dw_k = np.einsum("nd,hnk->hdk", cache.x, dk)
    dw_v = np.einsum("nd,hnk->hdk", cache.x, dv)
    return AttentionGrads(dx, dw_q, dw_k, dw_v, d_key, d_value)


def _layer_norm(x, gain, bias, eps):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gain + bias


def _forward_blocks(x, enc: EncoderParams, attn_fn):
    cfg = enc.config
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != cfg.d_model:
        raise ShapeError(f"encoder input must be (n, {cfg.d_model}), got {h.shape}")
    for layer in enc.layers:
        a_in = _layer_norm(h, layer.ln1_gain, layer.ln1_bias, cfg.layer_norm_eps) if cfg.use_layer_norm else h
        h = h + attn_fn(a_in, layer)
        if cfg.use_feed_forward:
            f_in = _layer_norm(h, layer.ln2_gain, layer.ln2_bias, cfg.layer_norm_eps) if cfg.use_layer_norm else h
            h = h + np.maximum(f_in @ layer.ff_w1 + layer.ff_b1, 0.0) @ layer.ff_w2 + layer.ff_b2
    return h


def encode(x, rel, enc: EncoderParams):
    """Pre-norm encoder stack; every layer reads the one shared table pair."""
    return _forward_blocks(x, enc, lambda h, layer: attend(h, rel, layer.attn, enc.tables))


def encode_vanilla(x, enc: EncoderParams):
    """Same block plumbing with plain self-attention, for equivalence checks."""
    return _forward_blocks(x, enc, lambda h, layer: vanilla_attend(h, layer.attn))


# --- checkpointing ---------------------------------------------------------

_CHECKPOINT_FORMAT = "rasat-graph-encoder"


def _field_arrays(enc: EncoderParams):
    for i, layer in enumerate(enc.layers):
        yield f"layers.{i}.attn.w_q", layer.attn.w_q
        yield f"layers.{i}.attn.w_k", layer.attn.w_k
        yield f"layers.{i}.attn.w_v", layer.attn.w_v
        yield f"layers.{i}.ln1_gain", layer.ln1_gain
        yield f"layers.{i}.ln1_bias", layer.ln1_bias
        yield f"layers.{i}.ff_w1", layer.ff_w1
        yield f"layers.{i}.ff_b1", layer.ff_b1
        yield f"layers.{i}.ff_w2", layer.ff_w2
        yield f"layers.{i}.ff_b2", layer.ff_b2
        yield f"layers.{i}.ln2_gain", layer.ln2_gain
        yield f"layers.{i}.ln2_bias", layer.ln2_bias
    yield "tables.key", enc.tables.key
    yield "tables.value", enc.tables.value


def save_checkpoint(path, enc: EncoderParams) -> None:
    """JSON header (shapes, seed, sigma_r, field order) + f64 LE payload."""
    fields = [{"name": name, "shape": list(arr.shape)} for name, arr in _field_arrays(enc)]
    header = {
        "format": _CHECKPOINT_FORMAT,
        "version": 1,
        "config": {
            "n_layers": enc.config.n_layers,
            "d_model": enc.config.d_model,
            "n_heads": enc.config.n_heads,
            "seed": enc.config.seed,
            "sigma_r": enc.config.sigma_r,
            "d_ff": enc.config.d_ff,
            "layer_norm_eps": enc.config.layer_norm_eps,
            "use_layer_norm": enc.config.use_layer_norm,
            "use_feed_forward": enc.config.use_feed_forward,
        },
        "fields": fields,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _name, arr in _field_arrays(enc):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> EncoderParams:
    with open(path, "rb") as f:
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        if header.get("format") != _CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not an encoder checkpoint")
        config = EncoderConfig(**header["config"])
        arrays = {}
        for spec in header["fields"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * count), dtype="<f8").reshape(shape).copy()
            arrays[spec["name"]] = data
    layers = []
    for i in range(config.n_layers):
        layers.append(
            LayerParams(
                attn=AttentionParams(
                    w_q=arrays[f"layers.{i}.attn.w_q"],
                    w_k=arrays[f"layers.{i}.attn.w_k"],
                    w_v=arrays[f"layers.{i}.attn.w_v"],
                ),
                ln1_gain=arrays[f"layers.{i}.ln1_gain"],
                ln1_bias=arrays[f"layers.{i}.ln1_bias"],
                ff_w1=arrays[f"layers.{i}.ff_w1"],
                ff_b1=arrays[f"layers.{i}.ff_b1"],
                ff_w2=arrays[f"layers.{i}.ff_w2"],
                ff_b2=arrays[f"layers.{i}.ff_b2"],
                ln2_gain=arrays[f"layers.{i}.ln2_gain"],
                ln2_bias=arrays[f"layers.{i}.ln2_bias"],
            )
        )
    tables = RelationEmbeddingTables(arrays["tables.key"], arrays["tables.value"])
    return EncoderParams(config, tuple(layers), tables)


# --- self-verification (backs the attn-check command) -----------------------


def _random_instance(rng, with_encoder=False):
    n = int(rng.integers(2, 7))
    n_heads = int(rng.choice([1, 2]))
    d_kv = int(rng.choice([2, 4]))
    d_z = n_heads * d_kv
    d_x = d_z if with_encoder else int(rng.choice([d_z, 3, 5]))
    params = AttentionParams(
        w_q=rng.normal(0.0, 0.5, (n_heads, d_x, d_kv)),
        w_k=rng.normal(0.0, 0.5, (n_heads, d_x, d_kv)),
        w_v=rng.normal(0.0, 0.5, (n_heads, d_x, d_kv)),
    )
    tables = RelationEmbeddingTables(
        key=rng.normal(0.0, 0.5, (RELATION_COUNT, d_kv)),
        value=rng.normal(0.0, 0.5, (RELATION_COUNT, d_kv)),
    )
    x = rng.normal(0.0, 1.0, (n, d_x))
    rel = rng.integers(0, RELATION_COUNT, (n, n))
    return x, rel, params, tables


def _loss_and_grads(x, rel, params, tables, g):
    z, cache = attend(x, rel, params, tables, return_cache=True)
    return float((z * g).sum()), attend_backward(g, cache)


def _fd_max_rel_err(x, rel, params, tables, g, step=1e-5):
    """Central finite differences of sum(z * g) against analytic gradients."""
    _, grads = _loss_and_grads(x, rel, params, tables, g)
    worst = 0.0

    def loss():
        return float((attend(x, rel, params, tables) * g).sum())

    groups = [
        (x, grads.x),
        (params.w_q, grads.w_q),
        (params.w_k, grads.w_k),
        (params.w_v, grads.w_v),
        (tables.key, grads.key),
        (tables.value, grads.value),
    ]
    for array, grad in groups:
        flat = array.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + step
            up = loss()
            flat[idx] = keep - step
            down = loss()
            flat[idx] = keep
            fd = (up - down) / (2 * step)
            denom = max(abs(fd), abs(gflat[idx]), 1e-6)
            worst = max(worst, abs(fd - gflat[idx]) / denom)
    return worst


def verification_report(seed: int = 0, grad_instances: int = 50) -> dict:
    """Run the kernel invariant checks; values and pass flags per check."""
    rng = np.random.default_rng(seed)

    row_dev = 0.0
    for _ in range(20):
        x, rel, params, tables = _random_instance(rng)
        _, cache = attend(x, rel, params, tables, return_cache=True)
        row_dev = max(row_dev, float(np.abs(cache.alpha.sum(axis=-1) - 1.0).max()))

    zero_err = 0.0
    for _ in range(20):
        x, rel, params, tables = _random_instance(rng)
        zero_tables = RelationEmbeddingTables(np.zeros_like(tables.key), np.zeros_like(tables.value))
        zero_err = max(
            zero_err,
            float(np.abs(attend(x, rel, params, zero_tables) - vanilla_attend(x, params)).max()),
        )

    grad_err = 0.0
    for _ in range(grad_instances):
        x, rel, params, tables = _random_instance(rng)
        g = rng.normal(0.0, 1.0, (x.shape[0], params.d_z))
        grad_err = max(grad_err, _fd_max_rel_err(x, rel, params, tables, g))

    perm_err = 0.0
    for _ in range(10):
        x, rel, params, tables = _random_instance(rng, with_encoder=True)
        cfg = EncoderConfig(n_layers=2, d_model=params.d_z, n_heads=params.n_heads, seed=seed)
        enc = init_encoder(cfg)
        enc = replace(enc, tables=tables)
        pi = rng.permutation(x.shape[0])
        out = encode(x, rel, enc)
        out_pi = encode(x[pi], rel[np.ix_(pi, pi)], enc)
        perm_err = max(perm_err, float(np.abs(out_pi - out[pi]).max()))

    return {
        "softmax_row_deviation": {"max": row_dev, "tolerance": 1e-9, "ok": row_dev < 1e-9},
        "zero_embedding_error": {"max": zero_err, "tolerance": 1e-9, "ok": zero_err < 1e-9},
        "gradient_check_rel_error": {"max": grad_err, "tolerance": 1e-4, "ok": grad_err < 1e-4},
        "permutation_equivariance": {"max": perm_err, "tolerance": 1e-9, "ok": perm_err < 1e-9},
    }

"""The multi-modal multi-task network.

Three frozen per-modality feature vectors are projected to a common token
width, adapted down to the encoder width, passed through a stack of
pre-norm transformer encoder layers (LN -> self-attention -> residual,
LN -> feed-forward with GELU -> residual) with no positional embeddings,
mean-pooled over the token set, and classified by four CORAL ordinal heads
plus one binary head.

Backward passes are explicit: forward builds a cache, backward walks it in
reverse and accumulates into Parameter.grad.
"""

from __future__ import annotations

import io
import json
import os
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .data_io import HEADS, MODALITIES, NUM_CLASSES, FeatureRecord
from .errors import ConfigError, DataError, FormatError, LabelError
from .ordinal import (CoralHead, coral_forward, coral_forward_backward,
                      coral_loss, coral_loss_grad, coral_predict,
                      extend_labels_batch)
from .rng import RngState
from .tensor_core import (Parameter, Tensor, bce_with_logits, dropout_backward,
                          dropout_forward, gelu, gelu_backward,
                          layer_norm_backward, layer_norm_forward, sigmoid,
                          softmax_rows, softmax_rows_backward)

CHECKPOINT_MAGIC = b"MMT1"
CHECKPOINT_VERSION = 1

ORDINAL_HEADS = ("sentiment", "humour", "sarcasm", "offensive")


@dataclass
class ModelConfig:
    """Every architecture hyperparameter, explicit and serializable."""

    d_image: int = 1792
    d_clip: int = 512
    d_text: int = 768
    d_common: int = 512
    d_model: int = 64
    layers: int = 4
    heads_per_layer: tuple[int, ...] = (8, 8, 16, 16)
    ff_multiplier: int = 4
    dropout_rate: float = 0.1
    activation: str = "gelu"
    ln_eps: float = 1e-5
    # train humour/sarcasm/offensive as binary presence heads (K=2) instead
    # of 0-3 intensity; their scores then feed Task B directly
    binary_intensity_heads: bool = False

    def __post_init__(self):
        self.heads_per_layer = tuple(self.heads_per_layer)

    def validate(self) -> None:
        for name in ("d_image", "d_clip", "d_text", "d_common", "d_model",
                     "layers", "ff_multiplier"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if len(self.heads_per_layer) != self.layers:
            raise ConfigError(
                f"heads_per_layer has {len(self.heads_per_layer)} entries "
                f"for {self.layers} layers")
        for h in self.heads_per_layer:
            if h < 1 or self.d_model % h != 0:
                raise ConfigError(
                    f"d_model {self.d_model} not divisible by head count {h}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.activation != "gelu":
            raise ConfigError(f"unsupported activation {self.activation!r}")
        if self.ln_eps <= 0:
            raise ConfigError(f"ln_eps must be positive, got {self.ln_eps}")

    def modality_dim(self, modality: str) -> int:
        return {"image": self.d_image, "clip": self.d_clip, "text": self.d_text}[modality]

    def head_num_classes(self, head: str) -> int:
        if self.binary_intensity_heads and head in ("humour", "sarcasm", "offensive"):
            return 2
        return NUM_CLASSES[head]


@dataclass
class HeadOutputs:
    """Raw head logits: K-1 columns per ordinal head, 1 for motivation."""

    sentiment_logits: Tensor
    humour_logits: Tensor
    sarcasm_logits: Tensor
    offensive_logits: Tensor
    motivation_logit: Tensor

    def by_head(self, head: str) -> Tensor:
        if head == "motivation":
            return self.motivation_logit
        return getattr(self, f"{head}_logits")


class MmmtModel:
    """Parameter container with canonical ordering for init and checkpoints."""

    def __init__(self, config: ModelConfig, params: dict[str, Parameter]):
        self.config = config
        self.params = params
        self.heads = {
            h: CoralHead(w=params[f"head_{h}.w"], b=params[f"head_{h}.b"],
                         num_classes=config.head_num_classes(h))
            for h in ORDINAL_HEADS
        }

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def param(self, name: str) -> Parameter:
        return self.params[name]

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad[...] = 0.0

    def clone(self) -> "MmmtModel":
        params = {name: Parameter(name, p.value.copy())
                  for name, p in self.params.items()}
        return MmmtModel(self.config, params)


def _param_specs(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """Canonical (name, shape, init kind) list; fixes RNG consumption order."""
    specs: list[tuple[str, tuple[int, ...], str]] = []
    for m in MODALITIES:
        d_in = cfg.modality_dim(m)
        specs.append((f"proj_{m}.w", (d_in, cfg.d_common), "uniform"))
        specs.append((f"proj_{m}.b", (cfg.d_common,), "zero"))
    specs.append(("adapter.w", (cfg.d_common, cfg.d_model), "uniform"))
    specs.append(("adapter.b", (cfg.d_model,), "zero"))
    d = cfg.d_model
    dff = cfg.ff_multiplier * d
    for i in range(cfg.layers):
        specs.append((f"enc{i}.ln1.gain", (d,), "one"))
        specs.append((f"enc{i}.ln1.bias", (d,), "zero"))
        for proj in ("q", "k", "v", "o"):
            specs.append((f"enc{i}.attn.w{proj}", (d, d), "uniform"))
            specs.append((f"enc{i}.attn.b{proj}", (d,), "zero"))
        specs.append((f"enc{i}.ln2.gain", (d,), "one"))
        specs.append((f"enc{i}.ln2.bias", (d,), "zero"))
        specs.append((f"enc{i}.ff.w1", (d, dff), "uniform"))
        specs.append((f"enc{i}.ff.b1", (dff,), "zero"))
        specs.append((f"enc{i}.ff.w2", (dff, d), "uniform"))
        specs.append((f"enc{i}.ff.b2", (d,), "zero"))
    for h in HEADS:
        specs.append((f"head_{h}.w", (d,), "uniform"))
        width = 1 if h == "motivation" else cfg.head_num_classes(h) - 1
        specs.append((f"head_{h}.b", (width,), "zero"))
    return specs


def parameter_count(cfg: ModelConfig) -> int:
    """Closed-form parameter count for a config."""
    n = 0
    for m in MODALITIES:
        n += cfg.modality_dim(m) * cfg.d_common + cfg.d_common
    n += cfg.d_common * cfg.d_model + cfg.d_model
    d = cfg.d_model
    dff = cfg.ff_multiplier * d
    per_layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * dff + dff) + (dff * d + d)
    n += cfg.layers * per_layer
    for h in HEADS:
        n += d + (1 if h == "motivation" else cfg.head_num_classes(h) - 1)
    return n


def init_model(cfg: ModelConfig, rng: RngState) -> MmmtModel:
    """Deterministic init: weights uniform(+-sqrt(1/fan_in)), biases zero,
    layer-norm gains one."""
    cfg.validate()
    params: dict[str, Parameter] = {}
    for name, shape, kind in _param_specs(cfg):
        if kind == "uniform":
            fan_in = shape[0]
            radius = np.sqrt(1.0 / fan_in)
            value = rng.uniform_signed(int(np.prod(shape)), radius).reshape(shape)
        elif kind == "one":
            value = np.ones(shape)
        else:
            value = np.zeros(shape)
        params[name] = Parameter(name, value)
    return MmmtModel(cfg, params)


# ---------------------------------------------------------------------------
# forward / backward

def assemble_features(records: list[FeatureRecord],
                      modality_mask: tuple[str, ...],
                      cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Stack enabled modality vectors into float64 [batch, d_m] arrays."""
    mask = tuple(m for m in MODALITIES if m in modality_mask)
    if not mask:
        raise ConfigError("modality mask is empty")
    unknown = set(modality_mask) - set(MODALITIES)
    if unknown:
        raise ConfigError(f"unknown modalities in mask: {sorted(unknown)}")
    feats: dict[str, np.ndarray] = {}
    for m in mask:
        d = cfg.modality_dim(m)
        rows = np.empty((len(records), d), dtype=np.float64)
        for i, rec in enumerate(records):
            vec = rec.vector(m)
            if vec is None:
                raise DataError(f"record {rec.id}: modality {m} missing")
            if vec.shape != (d,):
                raise DataError(f"record {rec.id}: {m} vector has dim "
                                f"{vec.shape[0]}, model expects {d}")
            rows[i] = vec
        feats[m] = rows
    return feats


def _forward_cache(model: MmmtModel, feats: dict[str, np.ndarray],
                   order: tuple[str, ...], training: bool,
                   rng: RngState | None):
    cfg = model.config
    P = model.params
    B = next(iter(feats.values())).shape[0]
    T = len(order)
    D = cfg.d_model
    if training and cfg.dropout_rate > 0.0 and rng is None:
        raise ConfigError("training forward with dropout needs an RngState")

    cache: dict = {"order": order, "B": B, "T": T}
    tokens = []
    for m in order:
        tokens.append(feats[m] @ P[f"proj_{m}.w"].value + P[f"proj_{m}.b"].value)
    x0 = np.stack(tokens, axis=1)                     # [B, T, C]
    flat0 = x0.reshape(B * T, cfg.d_common)
    a = flat0 @ P["adapter.w"].value + P["adapter.b"].value
    x = a.reshape(B, T, D)
    cache["feats"] = feats
    cache["flat0"] = flat0

    cache["layers"] = []
    for i in range(cfg.layers):
        lc: dict = {}
        H = cfg.heads_per_layer[i]
        dh = D // H
        scale = 1.0 / np.sqrt(dh)

        lc["res1"] = x
        xf = x.reshape(B * T, D)
        ln1, xhat1, istd1 = layer_norm_forward(
            xf, P[f"enc{i}.ln1.gain"].value, P[f"enc{i}.ln1.bias"].value, cfg.ln_eps)
        lc["ln1"], lc["xhat1"], lc["istd1"] = ln1, xhat1, istd1

        q = ln1 @ P[f"enc{i}.attn.wq"].value + P[f"enc{i}.attn.bq"].value
        k = ln1 @ P[f"enc{i}.attn.wk"].value + P[f"enc{i}.attn.bk"].value
        v = ln1 @ P[f"enc{i}.attn.wv"].value + P[f"enc{i}.attn.bv"].value
        qh = q.reshape(B, T, H, dh).transpose(0, 2, 1, 3).reshape(B * H, T, dh)
        kh = k.reshape(B, T, H, dh).transpose(0, 2, 1, 3).reshape(B * H, T, dh)
        vh = v.reshape(B, T, H, dh).transpose(0, 2, 1, 3).reshape(B * H, T, dh)
        scores = np.matmul(qh, kh.transpose(0, 2, 1)) * scale
        probs = softmax_rows(scores.reshape(-1, T)).reshape(B * H, T, T)
        ctx = np.matmul(probs, vh)                    # [B*H, T, dh]
        ctx2 = (ctx.reshape(B, H, T, dh).transpose(0, 2, 1, 3)
                .reshape(B * T, D))
        attn_out = ctx2 @ P[f"enc{i}.attn.wo"].value + P[f"enc{i}.attn.bo"].value
        attn_out, mask_attn = dropout_forward(attn_out, cfg.dropout_rate, rng, training)
        lc.update(qh=qh, kh=kh, vh=vh, probs=probs, ctx2=ctx2,
                  mask_attn=mask_attn, H=H, dh=dh, scale=scale)
        x = lc["res1"] + attn_out.reshape(B, T, D)

        lc["res2"] = x
        xf2 = x.reshape(B * T, D)
        ln2, xhat2, istd2 = layer_norm_forward(
            xf2, P[f"enc{i}.ln2.gain"].value, P[f"enc{i}.ln2.bias"].value, cfg.ln_eps)
        f1 = ln2 @ P[f"enc{i}.ff.w1"].value + P[f"enc{i}.ff.b1"].value
        g = gelu(f1)
        f2 = g @ P[f"enc{i}.ff.w2"].value + P[f"enc{i}.ff.b2"].value
        f2, mask_ff = dropout_forward(f2, cfg.dropout_rate, rng, training)
        lc.update(ln2=ln2, xhat2=xhat2, istd2=istd2, f1=f1, g=g, mask_ff=mask_ff)
        x = lc["res2"] + f2.reshape(B, T, D)
        cache["layers"].append(lc)

    pooled = x.mean(axis=1)                           # [B, D]
    cache["pooled"] = pooled

    logits = {}
    for h in ORDINAL_HEADS:
        logits[h] = coral_forward(pooled, model.heads[h])
    mot = pooled @ P["head_motivation.w"].value + P["head_motivation.b"].value
    logits["motivation"] = mot[:, None]
    outputs = HeadOutputs(
        sentiment_logits=logits["sentiment"],
        humour_logits=logits["humour"],
        sarcasm_logits=logits["sarcasm"],
        offensive_logits=logits["offensive"],
        motivation_logit=logits["motivation"])
    return outputs, cache


def forward(model: MmmtModel, records: list[FeatureRecord],
            modality_mask: tuple[str, ...] = MODALITIES,
            training: bool = False, rng: RngState | None = None,
            token_order: tuple[str, ...] | None = None) -> HeadOutputs:
    """Run the network on a batch of records.

    `token_order` overrides the insertion order of the enabled modality
    tokens; outputs are invariant to it (no positional embeddings, mean
    pooling), which the tests assert.
    """
    feats = assemble_features(records, modality_mask, model.config)
    order = tuple(m for m in MODALITIES if m in feats)
    if token_order is not None:
        if sorted(token_order) != sorted(order):
            raise ConfigError(f"token_order {token_order} does not match enabled "
                              f"modalities {order}")
        order = tuple(token_order)
    outputs, _ = _forward_cache(model, feats, order, training, rng)
    return outputs


def backward(model: MmmtModel, cache: dict, dlogits: dict[str, Tensor]) -> None:
    """Accumulate parameter gradients given d(loss)/d(head logits)."""
    cfg = model.config
    P = model.params
    B, T, D = cache["B"], cache["T"], cfg.d_model
    pooled = cache["pooled"]

    dpooled = np.zeros_like(pooled)
    for h in ORDINAL_HEADS:
        if h in dlogits:
            dpooled += coral_forward_backward(dlogits[h], pooled, model.heads[h])
    if "motivation" in dlogits:
        dmot = dlogits["motivation"][:, 0]
        P["head_motivation.w"].grad += pooled.T @ dmot
        P["head_motivation.b"].grad += dmot.sum(keepdims=True)
        dpooled += dmot[:, None] * P["head_motivation.w"].value[None, :]

    dx = np.broadcast_to(dpooled[:, None, :] / T, (B, T, D)).copy()

    for i in reversed(range(cfg.layers)):
        lc = cache["layers"][i]
        H, dh, scale = lc["H"], lc["dh"], lc["scale"]

        # feed-forward sublayer
        df2 = dropout_backward(dx.reshape(B * T, D), lc["mask_ff"])
        dg = df2 @ P[f"enc{i}.ff.w2"].value.T
        P[f"enc{i}.ff.w2"].grad += lc["g"].T @ df2
        P[f"enc{i}.ff.b2"].grad += df2.sum(axis=0)
        df1 = gelu_backward(lc["f1"], dg)
        dln2 = df1 @ P[f"enc{i}.ff.w1"].value.T
        P[f"enc{i}.ff.w1"].grad += lc["ln2"].T @ df1
        P[f"enc{i}.ff.b1"].grad += df1.sum(axis=0)
        dxf2, dgain2, dbias2 = layer_norm_backward(
            dln2, lc["xhat2"], lc["istd2"], P[f"enc{i}.ln2.gain"].value)
        P[f"enc{i}.ln2.gain"].grad += dgain2
        P[f"enc{i}.ln2.bias"].grad += dbias2
        dx = dx + dxf2.reshape(B, T, D)

        # attention sublayer
        dattn = dropout_backward(dx.reshape(B * T, D), lc["mask_attn"])
        dctx2 = dattn @ P[f"enc{i}.attn.wo"].value.T
        P[f"enc{i}.attn.wo"].grad += lc["ctx2"].T @ dattn
        P[f"enc{i}.attn.bo"].grad += dattn.sum(axis=0)
        dctx = (dctx2.reshape(B, T, H, dh).transpose(0, 2, 1, 3)
                .reshape(B * H, T, dh))
        dprobs = np.matmul(dctx, lc["vh"].transpose(0, 2, 1))
        dvh = np.matmul(lc["probs"].transpose(0, 2, 1), dctx)
        dscores = softmax_rows_backward(
            lc["probs"].reshape(-1, T), dprobs.reshape(-1, T)).reshape(B * H, T, T)
        dqh = np.matmul(dscores, lc["kh"]) * scale
        dkh = np.matmul(dscores.transpose(0, 2, 1), lc["qh"]) * scale

        def unfold(arr):
            return (arr.reshape(B, H, T, dh).transpose(0, 2, 1, 3)
                    .reshape(B * T, D))

        dq, dk, dv = unfold(dqh), unfold(dkh), unfold(dvh)
        dln1 = np.zeros((B * T, D))
        for proj, dmat in (("q", dq), ("k", dk), ("v", dv)):
            dln1 += dmat @ P[f"enc{i}.attn.w{proj}"].value.T
            P[f"enc{i}.attn.w{proj}"].grad += lc["ln1"].T @ dmat
            P[f"enc{i}.attn.b{proj}"].grad += dmat.sum(axis=0)
        dxf1, dgain1, dbias1 = layer_norm_backward(
            dln1, lc["xhat1"], lc["istd1"], P[f"enc{i}.ln1.gain"].value)
        P[f"enc{i}.ln1.gain"].grad += dgain1
        P[f"enc{i}.ln1.bias"].grad += dbias1
        dx = dx + dxf1.reshape(B, T, D)

    da = dx.reshape(B * T, D)
    P["adapter.w"].grad += cache["flat0"].T @ da
    P["adapter.b"].grad += da.sum(axis=0)
    dflat0 = da @ P["adapter.w"].value.T
    dx0 = dflat0.reshape(B, T, cfg.d_common)
    for idx, m in enumerate(cache["order"]):
        dt = dx0[:, idx, :]
        P[f"proj_{m}.w"].grad += cache["feats"][m].T @ dt
        P[f"proj_{m}.b"].grad += dt.sum(axis=0)


# ---------------------------------------------------------------------------
# loss and prediction

def _validate_labels(outputs: HeadOutputs, labels: dict[str, np.ndarray],
                     head_mask) -> None:
    for h in head_mask:
        if h not in labels:
            raise LabelError(f"no label array for head {h}")
        arr = labels[h]
        k = 2 if h == "motivation" else outputs.by_head(h).shape[1] + 1
        bad = (arr < 0) | (arr >= k)
        if bad.any():
            i = int(np.argmax(bad))
            raise LabelError(f"{h} label {int(arr[i])} at batch index {i} outside "
                             f"[0, {k - 1}]")


def prepare_labels(model: MmmtModel, labels: dict[str, np.ndarray]
                   ) -> dict[str, np.ndarray]:
    """Map gold labels onto the model's head widths: when an intensity head
    is trained as binary (K=2), its 0-3 gold ranks collapse to presence."""
    out = dict(labels)
    for h in ORDINAL_HEADS:
        if h in out and model.heads[h].num_classes == 2 and NUM_CLASSES[h] > 2:
            arr = np.asarray(out[h])
            out[h] = np.where(arr > 0, 1, arr)  # keeps -1 (absent) intact
    return out


def multitask_loss(outputs: HeadOutputs, labels: dict[str, np.ndarray],
                   head_mask: tuple[str, ...] = HEADS,
                   head_weights: dict[str, float] | None = None
                   ) -> tuple[float, dict[str, float]]:
    """Weighted sum (default weights 1.0) of the enabled heads' losses."""
    head_mask = _normalize_head_mask(head_mask)
    _validate_labels(outputs, labels, head_mask)
    per_head: dict[str, float] = {}
    total = 0.0
    for h in head_mask:
        w = 1.0 if head_weights is None else head_weights.get(h, 1.0)
        if h == "motivation":
            targets = labels[h].astype(np.float64)[:, None]
            loss = float(bce_with_logits(outputs.motivation_logit, targets).mean())
        else:
            k = outputs.by_head(h).shape[1] + 1
            ext = extend_labels_batch(labels[h], k)
            loss = coral_loss(outputs.by_head(h), ext)
        per_head[h] = loss
        total += w * loss
    return total, per_head


def multitask_loss_grad(outputs: HeadOutputs, labels: dict[str, np.ndarray],
                        head_mask: tuple[str, ...] = HEADS,
                        head_weights: dict[str, float] | None = None
                        ) -> dict[str, Tensor]:
    """d(total)/d(logits) per enabled head."""
    head_mask = _normalize_head_mask(head_mask)
    _validate_labels(outputs, labels, head_mask)
    grads: dict[str, Tensor] = {}
    for h in head_mask:
        w = 1.0 if head_weights is None else head_weights.get(h, 1.0)
        if h == "motivation":
            targets = labels[h].astype(np.float64)[:, None]
            B = targets.shape[0]
            grads[h] = w * (sigmoid(outputs.motivation_logit) - targets) / B
        else:
            k = outputs.by_head(h).shape[1] + 1
            ext = extend_labels_batch(labels[h], k)
            grads[h] = w * coral_loss_grad(outputs.by_head(h), ext)
    return grads


def _normalize_head_mask(head_mask) -> tuple[str, ...]:
    mask = tuple(h for h in HEADS if h in head_mask)
    if not mask:
        raise ConfigError("head mask is empty")
    unknown = set(head_mask) - set(HEADS)
    if unknown:
        raise ConfigError(f"unknown heads in mask: {sorted(unknown)}")
    return mask


def predict(outputs: HeadOutputs) -> dict[str, np.ndarray]:
    """Integer labels per head: threshold counting for ordinal heads,
    sigma(logit) > 0.5 for motivation."""
    out = {}
    for h in ORDINAL_HEADS:
        out[h] = coral_predict(outputs.by_head(h))
    out["motivation"] = (outputs.motivation_logit[:, 0] > 0.0).astype(np.int64)
    return out


def loss_and_grads(model: MmmtModel, records: list[FeatureRecord],
                   modality_mask: tuple[str, ...] = MODALITIES,
                   head_mask: tuple[str, ...] = HEADS,
                   labels: dict[str, np.ndarray] | None = None,
                   training: bool = False, rng: RngState | None = None,
                   head_weights: dict[str, float] | None = None
                   ) -> tuple[float, dict[str, float]]:
    """Forward + loss + backward; accumulates into existing grads."""
    from .data_io import gather_labels
    feats = assemble_features(records, modality_mask, model.config)
    order = tuple(m for m in MODALITIES if m in feats)
    outputs, cache = _forward_cache(model, feats, order, training, rng)
    if labels is None:
        labels = prepare_labels(model, gather_labels(records))
    total, per_head = multitask_loss(outputs, labels, head_mask, head_weights)
    dlogits = multitask_loss_grad(outputs, labels, head_mask, head_weights)
    backward(model, cache, dlogits)
    return total, per_head


# ---------------------------------------------------------------------------
# checkpoint serialization

def save_model(model: MmmtModel, path: str, extra_meta: dict | None = None) -> None:
    """Write the checkpoint: magic, JSON meta block, named float64 blobs.

    Written to a temp file and renamed, so an interrupted save never leaves
    a corrupt checkpoint at `path`.
    """
    meta = {"model_config": asdict(model.config)}
    if extra_meta:
        meta.update(extra_meta)
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    buf.write(struct.pack("<I", len(meta_bytes)))
    buf.write(meta_bytes)
    buf.write(struct.pack("<I", len(model.params)))
    for name, p in model.params.items():
        nb = name.encode("utf-8")
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", p.value.ndim))
        buf.write(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
        buf.write(p.value.astype("<f8").tobytes())
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(buf.getvalue())
    os.replace(tmp, path)


def load_model(path: str) -> tuple[MmmtModel, dict]:
    """Read a checkpoint; returns (model, meta). Bit-exact round trip."""
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise FormatError(f"truncated checkpoint while reading {what}", off)
        chunk = data[off:off + n]
        off += n
        return chunk

    if take(4, "magic") != CHECKPOINT_MAGIC:
        raise FormatError("bad checkpoint magic", 0)
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    (meta_len,) = struct.unpack("<I", take(4, "meta length"))
    meta = json.loads(take(meta_len, "meta block").decode("utf-8"))
    cfg_dict = dict(meta["model_config"])
    cfg_dict["heads_per_layer"] = tuple(cfg_dict["heads_per_layer"])
    cfg = ModelConfig(**cfg_dict)
    cfg.validate()

    (num_params,) = struct.unpack("<I", take(4, "parameter count"))
    expected = _param_specs(cfg)
    if num_params != len(expected):
        raise FormatError(f"checkpoint has {num_params} parameters, config "
                          f"implies {len(expected)}", off - 4)
    params: dict[str, Parameter] = {}
    for name, shape, _ in expected:
        (name_len,) = struct.unpack("<H", take(2, "parameter name length"))
        got_name = take(name_len, "parameter name").decode("utf-8")
        if got_name != name:
            raise FormatError(f"parameter {got_name!r} where {name!r} expected",
                              off - name_len)
        (ndim,) = struct.unpack("<B", take(1, "parameter ndim"))
        got_shape = struct.unpack(f"<{ndim}I", take(4 * ndim, "parameter shape"))
        if got_shape != shape:
            raise FormatError(f"parameter {name}: shape {got_shape} != {shape}", off)
        raw = take(8 * int(np.prod(shape)), f"parameter {name} data")
        value = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        params[name] = Parameter(name, value)
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes after last parameter", off)
    return MmmtModel(cfg, params), meta

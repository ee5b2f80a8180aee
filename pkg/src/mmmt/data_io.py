"""Label schema, feature-file serialization, split statistics, synthetic
data, and imbalance-corrected oversampling.

The on-disk feature format ("MMF1") is little-endian and bit-exact:

    magic "MMF1" | u32 version=1 | u32 d_image | u32 d_clip | u32 d_text
    | u64 record_count
    per record:
      u16 id_len | id utf-8 bytes
      u8 presence mask (bit0 image, bit1 clip, bit2 text)
      present vectors as float32 LE, in (image, clip, text) order
      five i8 labels, -1 = absent, in (sentiment, humour, sarcasm,
      offensive, motivation) order

A CSV manifest (id plus the five label columns, blank = absent) covers
label-only interchange; predictions are written in the same layout.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, FormatError, LabelError
from .rng import RngState

MAGIC = b"MMF1"
VERSION = 1

MODALITIES = ("image", "clip", "text")
HEADS = ("sentiment", "humour", "sarcasm", "offensive", "motivation")
NUM_CLASSES = {"sentiment": 3, "humour": 4, "sarcasm": 4, "offensive": 4, "motivation": 2}

DEFAULT_DIMS = (1792, 512, 768)  # common EfficientNet-B4 / CLIP ViT-B-32 / sentence-encoder widths


@dataclass
class LabelSet:
    """One meme's labels; None marks an absent (unlabeled) entry."""

    sentiment: int | None = None
    humour: int | None = None
    sarcasm: int | None = None
    offensive: int | None = None
    motivation: int | None = None

    def get(self, head: str) -> int | None:
        return getattr(self, head)

    def validate(self, record_id: str = "?") -> None:
        for head in HEADS:
            v = getattr(self, head)
            if v is not None and not 0 <= v < NUM_CLASSES[head]:
                raise LabelError(
                    f"record {record_id}: {head} label {v} outside "
                    f"[0, {NUM_CLASSES[head] - 1}]")


@dataclass
class FeatureRecord:
    """One meme as up to three frozen modality vectors plus labels."""

    id: str
    image_vec: np.ndarray | None = None
    clip_vec: np.ndarray | None = None
    text_vec: np.ndarray | None = None
    labels: LabelSet = field(default_factory=LabelSet)

    def vector(self, modality: str) -> np.ndarray | None:
        return getattr(self, f"{modality}_vec")


@dataclass
class SplitStats:
    """Per-class label counts per task; absent labels excluded."""

    counts: dict[str, np.ndarray]
    total: int

    def as_dict(self) -> dict:
        return {h: [int(c) for c in self.counts[h]] for h in HEADS}


# ---------------------------------------------------------------------------
# MMF1 serialization

def write_feature_file(records: list[FeatureRecord], dims: tuple[int, int, int],
                       path: str) -> None:
    """Serialize records; vectors must match dims exactly. Atomic write."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<III", *dims))
    buf.write(struct.pack("<Q", len(records)))
    for rec in records:
        rec.labels.validate(rec.id)
        idb = rec.id.encode("utf-8")
        buf.write(struct.pack("<H", len(idb)))
        buf.write(idb)
        mask = 0
        for bit, m in enumerate(MODALITIES):
            if rec.vector(m) is not None:
                mask |= 1 << bit
        buf.write(struct.pack("<B", mask))
        for m, d in zip(MODALITIES, dims):
            vec = rec.vector(m)
            if vec is None:
                continue
            vec = np.asarray(vec, dtype=np.float32)
            if vec.shape != (d,):
                raise DataError(
                    f"record {rec.id}: {m} vector shape {tuple(vec.shape)} "
                    f"!= header dim ({d},)")
            buf.write(vec.astype("<f4").tobytes())
        lab = [rec.labels.get(h) for h in HEADS]
        buf.write(struct.pack("<5b", *[-1 if v is None else v for v in lab]))
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(buf.getvalue())
    os.replace(tmp, path)


def read_feature_file(path: str) -> tuple[list[FeatureRecord], tuple[int, int, int]]:
    """Parse an MMF1 file; malformed input raises FormatError with offset."""
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise FormatError(f"truncated file while reading {what}", off)
        chunk = data[off:off + n]
        off += n
        return chunk

    magic = take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    dims = struct.unpack("<III", take(12, "dims"))
    (count,) = struct.unpack("<Q", take(8, "record count"))

    records = []
    for i in range(count):
        (id_len,) = struct.unpack("<H", take(2, f"record {i} id length"))
        rec_id = take(id_len, f"record {i} id").decode("utf-8")
        (mask,) = struct.unpack("<B", take(1, f"record {i} presence mask"))
        if mask >> 3:
            raise FormatError(f"record {i} has invalid presence mask {mask:#x}", off - 1)
        vecs: dict[str, np.ndarray | None] = {}
        for bit, (m, d) in enumerate(zip(MODALITIES, dims)):
            if mask & (1 << bit):
                raw = take(4 * d, f"record {i} {m} vector")
                vecs[m] = np.frombuffer(raw, dtype="<f4").copy()
            else:
                vecs[m] = None
        lab_off = off
        lab = struct.unpack("<5b", take(5, f"record {i} labels"))
        fields = {}
        for h, v in zip(HEADS, lab):
            if v == -1:
                fields[h] = None
            elif 0 <= v < NUM_CLASSES[h]:
                fields[h] = int(v)
            else:
                raise FormatError(f"record {i} ({rec_id}): {h} label {v} out of range",
                                  lab_off)
        records.append(FeatureRecord(
            id=rec_id, image_vec=vecs["image"], clip_vec=vecs["clip"],
            text_vec=vecs["text"], labels=LabelSet(**fields)))
    return records, dims


# ---------------------------------------------------------------------------
# CSV label manifest (same layout as prediction output)

def write_label_manifest(ids: list[str], labels: list[LabelSet], path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", *HEADS])
        for rec_id, lab in zip(ids, labels):
            w.writerow([rec_id] + ["" if lab.get(h) is None else lab.get(h)
                                   for h in HEADS])


def read_label_manifest(path: str) -> tuple[list[str], list[LabelSet]]:
    ids, labels = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["id", *HEADS]:
            raise DataError(f"manifest header {header} != ['id', {', '.join(HEADS)}]")
        for row in reader:
            if len(row) != 6:
                raise DataError(f"manifest row for {row[:1]} has {len(row)} columns")
            fields = {h: (None if cell == "" else int(cell))
                      for h, cell in zip(HEADS, row[1:])}
            lab = LabelSet(**fields)
            lab.validate(row[0])
            ids.append(row[0])
            labels.append(lab)
    return ids, labels


# ---------------------------------------------------------------------------
# statistics

def compute_stats(records: list[FeatureRecord]) -> SplitStats:
    """Exact per-class counts per task, skipping absent labels."""
    counts = {h: np.zeros(NUM_CLASSES[h], dtype=np.int64) for h in HEADS}
    for rec in records:
        for h in HEADS:
            v = rec.labels.get(h)
            if v is None:
                continue
            if not 0 <= v < NUM_CLASSES[h]:
                raise LabelError(f"record {rec.id}: {h} label {v} out of range")
            counts[h][v] += 1
    return SplitStats(counts=counts, total=len(records))


# label-count reference for the three shared-task splits (7000/1500/1500)
SPLIT_LABEL_COUNTS = {
    "train": {
        "sentiment": (973, 4510, 1517),
        "humour": (918, 3666, 1865, 551),
        "sarcasm": (3871, 1759, 1069, 301),
        "offensive": (5182, 1107, 529, 182),
        "motivation": (6714, 286),
    },
    "val": {
        "sentiment": (200, 975, 325),
        "humour": (229, 745, 419, 107),
        "sarcasm": (804, 388, 246, 62),
        "offensive": (1110, 238, 107, 45),
        "motivation": (1430, 70),
    },
    "test": {
        "sentiment": (451, 971, 78),
        "humour": (62, 892, 398, 148),
        "sarcasm": (185, 248, 892, 175),
        "offensive": (943, 457, 87, 13),
        "motivation": (1480, 20),
    },
}

SPLIT_SIZES = {"train": 7000, "val": 1500, "test": 1500}


def _largest_remainder(counts: tuple[int, ...], n: int) -> np.ndarray:
    """Scale integer counts to sum n, exact when n equals the original sum."""
    total = sum(counts)
    quotas = [c * n / total for c in counts]
    base = np.array([int(q) for q in quotas], dtype=np.int64)
    short = n - int(base.sum())
    remainders = sorted(range(len(counts)),
                        key=lambda i: (-(quotas[i] - base[i]), i))
    for i in remainders[:short]:
        base[i] += 1
    return base


def split_label_assignment(split: str, n: int, seed: int) -> dict[str, np.ndarray]:
    """Per-task label arrays whose class counts match a reference split.

    At n equal to the split size the counts are reproduced exactly; other n
    are scaled by largest remainder. Each task is shuffled independently so
    tasks are uncorrelated.
    """
    if split not in SPLIT_LABEL_COUNTS:
        raise ConfigError(f"unknown split {split!r}, expected one of "
                          f"{sorted(SPLIT_LABEL_COUNTS)}")
    rng = RngState(seed)
    out = {}
    for h in HEADS:
        counts = _largest_remainder(SPLIT_LABEL_COUNTS[split][h], n)
        arr = np.repeat(np.arange(len(counts), dtype=np.int8), counts)
        rng.derive(hash_tag(h)).shuffle(arr)
        out[h] = arr
    return out


def hash_tag(name: str) -> int:
    """Stable 64-bit tag for a short ascii name (stream derivation)."""
    tag = 0
    for ch in name.encode("ascii"):
        tag = (tag * 131 + ch) & ((1 << 64) - 1)
    return tag


# ---------------------------------------------------------------------------
# synthetic data

_ANCHOR_SEED = 0x5EEDA11C


def _anchor(modality_idx: int, task_idx: int, cls: int, num_classes: int,
            dim: int, lo: int, hi: int) -> np.ndarray:
    """Deterministic class anchor confined to dims [lo, hi) of one modality.

    Per task the anchors are evenly spaced points along one fixed direction,
    in class order, so rank structure is present in the geometry. Anchors
    depend only on (modality, task, class, dim), never on the dataset seed,
    so files generated with different seeds share geometry.
    """
    rng = RngState(_ANCHOR_SEED).derive(
        (modality_idx + 1) * 1_000_003 + (task_idx + 1) * 10_007).derive(dim)
    direction = rng.gaussian(hi - lo)
    direction /= np.sqrt((direction * direction).sum())
    position = (2 * cls - (num_classes - 1)) / (num_classes - 1)
    vec = np.zeros(dim, dtype=np.float64)
    vec[lo:hi] = direction * (position * np.sqrt(hi - lo))
    return vec


def anchor_for(modality: str, head: str, cls: int, dim: int) -> np.ndarray:
    """Public anchor lookup (used by the nearest-anchor sanity classifier)."""
    m = MODALITIES.index(modality)
    t = HEADS.index(head)
    block = dim // len(HEADS)
    return _anchor(m, t, cls, NUM_CLASSES[head], dim, t * block, (t + 1) * block)


def generate_synthetic(n: int, seed: int, separability: float,
                       class_weights: dict[str, list[float]] | None = None,
                       labels: dict[str, np.ndarray] | None = None,
                       dims: tuple[int, int, int] = DEFAULT_DIMS) -> list[FeatureRecord]:
    """Deterministic synthetic feature records.

    Each modality vector is  separability * (sum of that record's per-task
    class anchors)  +  (1 - separability) * unit gaussian noise, so
    separability 1 is learnable by construction and 0 is pure noise.
    Labels are drawn from `class_weights` per task (uniform when omitted)
    unless explicit `labels` arrays are supplied.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if not 0.0 <= separability <= 1.0:
        raise ConfigError(f"separability must be in [0, 1], got {separability}")

    rng = RngState(seed)
    drawn: dict[str, np.ndarray] = {}
    for t_idx, h in enumerate(HEADS):
        if labels is not None and h in labels:
            arr = np.asarray(labels[h], dtype=np.int8)
            if arr.shape != (n,):
                raise ConfigError(f"labels[{h}] must have length {n}")
            drawn[h] = arr
            continue
        k = NUM_CLASSES[h]
        if class_weights and h in class_weights:
            w = np.asarray(class_weights[h], dtype=np.float64)
            if w.shape != (k,) or (w < 0).any() or w.sum() <= 0:
                raise ConfigError(f"class_weights[{h}] must be {k} nonnegative "
                                  f"values with positive sum")
        else:
            w = np.ones(k)
        cum = np.cumsum(w / w.sum())
        cum[-1] = 1.0
        drawn[h] = rng.choice_weighted(cum, n).astype(np.int8)

    # per-modality anchor tables: [task, class, dim]
    records: list[FeatureRecord] = []
    vectors: dict[str, np.ndarray] = {}
    for m_idx, (m, d) in enumerate(zip(MODALITIES, dims)):
        block = d // len(HEADS)
        table = np.zeros((len(HEADS), max(NUM_CLASSES.values()), d))
        for t_idx, h in enumerate(HEADS):
            for c in range(NUM_CLASSES[h]):
                table[t_idx, c] = _anchor(m_idx, t_idx, c, NUM_CLASSES[h], d,
                                          t_idx * block, (t_idx + 1) * block)
        signal = np.zeros((n, d))
        for t_idx, h in enumerate(HEADS):
            signal += table[t_idx, drawn[h].astype(np.int64)]
        noise = rng.gaussian(n * d).reshape(n, d)
        vectors[m] = (separability * signal + (1.0 - separability) * noise
                      ).astype(np.float32)

    for i in range(n):
        records.append(FeatureRecord(
            id=f"syn-{i:06d}",
            image_vec=vectors["image"][i],
            clip_vec=vectors["clip"][i],
            text_vec=vectors["text"][i],
            labels=LabelSet(**{h: int(drawn[h][i]) for h in HEADS})))
    return records


# ---------------------------------------------------------------------------
# oversampling

def oversample_indices(records: list[FeatureRecord], target_head: str,
                       seed: int) -> np.ndarray:
    """One epoch of with-replacement indices, weighted against imbalance.

    target_head in HEADS: weight proportional to 1/freq(class of that head),
    giving a uniform expected class distribution for it. "mean-inverse":
    weight proportional to the mean over heads (with a label present) of
    1/freq. Epoch length equals len(records).
    """
    if target_head != "mean-inverse" and target_head not in HEADS:
        raise ConfigError(f"target_head must be one of {HEADS} or 'mean-inverse', "
                          f"got {target_head!r}")
    n = len(records)
    if n == 0:
        raise DataError("cannot oversample an empty record list")

    heads = HEADS if target_head == "mean-inverse" else (target_head,)
    freq: dict[str, np.ndarray] = {}
    for h in heads:
        counts = np.zeros(NUM_CLASSES[h], dtype=np.int64)
        for rec in records:
            v = rec.labels.get(h)
            if v is not None:
                counts[v] += 1
        empty = [c for c in range(NUM_CLASSES[h]) if counts[c] == 0]
        if empty:
            warnings.warn(f"head {h}: classes {empty} have zero support and are "
                          f"excluded from oversampling weights")
        freq[h] = counts

    weights = np.zeros(n, dtype=np.float64)
    for i, rec in enumerate(records):
        inv, present = 0.0, 0
        for h in heads:
            v = rec.labels.get(h)
            if v is None:
                if target_head != "mean-inverse":
                    raise LabelError(f"record {rec.id}: no {h} label for "
                                     f"single-head oversampling")
                continue
            inv += 1.0 / freq[h][v]
            present += 1
        if present == 0:
            raise LabelError(f"record {rec.id}: no labels for any oversampling head")
        weights[i] = inv / present

    cum = np.cumsum(weights / weights.sum())
    cum[-1] = 1.0
    return RngState(seed).choice_weighted(cum, n)


def gather_labels(records: list[FeatureRecord], heads=HEADS) -> dict[str, np.ndarray]:
    """Label arrays per head, -1 for absent."""
    out = {}
    for h in heads:
        out[h] = np.array([-1 if r.labels.get(h) is None else r.labels.get(h)
                           for r in records], dtype=np.int64)
    return out

"""Shared-task metrics.

Weighted F1 per head, intensity-to-binary mapping, Task A/B/C aggregation,
and the stored reference score tables used for comparison output. The
zero-division convention is F1 = 0 for a class with undefined precision or
recall (weight 0 when support is 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import HEADS, NUM_CLASSES, FeatureRecord, gather_labels
from .errors import InputError

BINARY_SUBTASKS = ("humour", "sarcasm", "offensive", "motivation")


def weighted_f1(preds, golds, num_classes: int) -> float:
    """Support-weighted mean of per-class F1 scores.

    Classes are 0..num_classes-1. A class with zero predicted and zero
    actual positives contributes F1 = 0 (and weight 0 if its support is 0).
    """
    preds = np.asarray(preds, dtype=np.int64)
    golds = np.asarray(golds, dtype=np.int64)
    if preds.shape != golds.shape or preds.ndim != 1:
        raise InputError(f"preds shape {preds.shape} != golds shape {golds.shape}")
    if preds.size == 0:
        raise InputError("empty inputs")
    for name, arr in (("preds", preds), ("golds", golds)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise InputError(f"{name} contain values outside [0, {num_classes - 1}]")

    n = golds.size
    total = 0.0
    for c in range(num_classes):
        tp = int(np.sum((preds == c) & (golds == c)))
        fp = int(np.sum((preds == c) & (golds != c)))
        fn = int(np.sum((preds != c) & (golds == c)))
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / support if support > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        total += (support / n) * f1
    # the exact value is <= 1; the float sum can overshoot by an ulp
    return min(total, 1.0)


def binarize_task_c(ranks) -> np.ndarray:
    """Intensity ranks to binary presence: 0 stays 0, {1,2,3} map to 1."""
    arr = np.asarray(ranks, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() > 3):
        raise InputError("intensity ranks must lie in [0, 3]")
    return (arr > 0).astype(np.int64)


@dataclass
class MetricsReport:
    """Per-head scores plus the three task aggregates (None = unavailable)."""

    per_head_multiclass: dict[str, float | None]
    per_head_binary: dict[str, float | None]
    task_a: float | None
    task_b: float | None
    task_c: float | None
    mean: float | None

    def as_dict(self) -> dict:
        return {
            "per_head_multiclass": dict(self.per_head_multiclass),
            "per_head_binary": dict(self.per_head_binary),
            "task_a": self.task_a,
            "task_b": self.task_b,
            "task_c": self.task_c,
            "mean": self.mean,
        }


def _check_score(name: str, v: float | None) -> None:
    if v is not None and not 0.0 <= v <= 1.0:
        raise InputError(f"{name} score {v} outside [0, 1]")


def aggregate(sentiment: float | None,
              binary: dict[str, float | None],
              multiclass: dict[str, float | None]) -> MetricsReport:
    """Task aggregates: A = sentiment F1, B = mean of the four binary
    subtask F1s, C = mean of the four multiclass subtask F1s (motivation is
    identical in both), mean = mean(A, B, C). A missing subtask marks the
    affected aggregates unavailable."""
    _check_score("sentiment", sentiment)
    b_vals, c_vals = [], []
    for h in BINARY_SUBTASKS:
        _check_score(f"binary {h}", binary.get(h))
        _check_score(f"multiclass {h}", multiclass.get(h))
        b_vals.append(binary.get(h))
        c_vals.append(multiclass.get(h))
    task_b = sum(b_vals) / 4 if all(v is not None for v in b_vals) else None
    task_c = sum(c_vals) / 4 if all(v is not None for v in c_vals) else None
    task_a = sentiment
    if task_a is not None and task_b is not None and task_c is not None:
        mean = (task_a + task_b + task_c) / 3
    else:
        mean = None
    return MetricsReport(
        per_head_multiclass={"sentiment": sentiment, **multiclass},
        per_head_binary=dict(binary),
        task_a=task_a, task_b=task_b, task_c=task_c, mean=mean)


def evaluate_predictions(pred_labels: dict[str, np.ndarray],
                         gold_labels: dict[str, np.ndarray],
                         binary_heads: tuple[str, ...] = ()) -> MetricsReport:
    """Full report from per-head integer predictions and golds.

    Records with an absent gold label (-1) are excluded per head; a head
    with no labeled records at all is marked unavailable. Heads listed in
    `binary_heads` were trained as K=2 presence heads: they are scored
    against binarized golds and contribute no multiclass (Task C) score.
    """
    multiclass: dict[str, float | None] = {}
    binary: dict[str, float | None] = {}
    for h in HEADS:
        gold = np.asarray(gold_labels[h])
        pred = np.asarray(pred_labels[h])
        present = gold >= 0
        if not present.any():
            multiclass[h] = None
            if h in BINARY_SUBTASKS:
                binary[h] = None
            continue
        if h in binary_heads:
            multiclass[h] = None
            binary[h] = weighted_f1(pred[present],
                                    binarize_task_c(gold[present]), 2)
            continue
        multiclass[h] = weighted_f1(pred[present], gold[present], NUM_CLASSES[h])
        if h == "motivation":
            binary[h] = multiclass[h]
        elif h in BINARY_SUBTASKS:
            binary[h] = weighted_f1(binarize_task_c(pred[present]),
                                    binarize_task_c(gold[present]), 2)
    sentiment = multiclass["sentiment"]
    return aggregate(sentiment, binary,
                     {h: multiclass[h] for h in BINARY_SUBTASKS})


def evaluate_model(model, records: list[FeatureRecord],
                   modality_mask) -> MetricsReport:
    """Predict on records (eval mode) and score against their gold labels."""
    from .model import forward, predict
    outputs = forward(model, records, modality_mask, training=False)
    preds = predict(outputs)
    golds = gather_labels(records)
    binary_heads = tuple(h for h in ("humour", "sarcasm", "offensive")
                         if model.heads[h].num_classes == 2)
    return evaluate_predictions(preds, golds, binary_heads=binary_heads)


def head_f1_scores(report: MetricsReport, head_mask) -> dict[str, float]:
    """F1 per enabled head for the early-stopping metric: the multiclass
    score, or the binary score for heads trained as binary."""
    out = {}
    for h in head_mask:
        v = report.per_head_multiclass.get(h)
        if v is None:
            v = report.per_head_binary.get(h)
        if v is None:
            raise InputError(f"head {h} has no score in report")
        out[h] = v
    return out


# ---------------------------------------------------------------------------
# stored reference score records (comparison output only, never recomputed)

_TABLE2_ROWS = [
    # (emotion, task, only_text, mmmt)
    ("sentiment", "A", 0.5072, 0.5318),
    ("humour", "B", 0.9239, 0.8111),
    ("humour", "C", 0.4131, 0.4036),
    ("sarcasm", "B", 0.6386, 0.8191),
    ("sarcasm", "C", 0.1604, 0.3083),
    ("offensive", "B", 0.5581, 0.485),
    ("offensive", "C", 0.5045, 0.485),
    ("motivation", "BC", 0.9764, 0.98),
]

_TABLE3_ROWS = [
    ("only_text", 0.5072, 0.7743, 0.5136, 0.5984),
    ("mmmt", 0.5318, 0.7738, 0.5443, 0.6166),
]

ABLATION_ORDER: tuple[tuple[str, ...], ...] = (
    ("text",),
    ("image",),
    ("clip",),
    ("image", "text"),
    ("clip", "image"),
    ("clip", "text"),
    ("image", "clip", "text"),
)

_TABLE5_ROWS = [
    (("text",), 0.5127, 0.6494, 0.5001, 0.5541),
    (("image",), 0.5139, 0.6404, 0.5117, 0.5553),
    (("clip",), 0.5113, 0.6559, 0.4835, 0.5502),
    (("image", "text"), 0.5118, 0.6452, 0.5041, 0.5537),
    (("clip", "image"), 0.5077, 0.6398, 0.5053, 0.5510),
    (("clip", "text"), 0.5118, 0.6551, 0.5032, 0.5567),
    (("image", "clip", "text"), 0.5178, 0.6394, 0.5029, 0.5534),
]

_TABLE7_ROWS = [
    ("BLUE", 0.5318, 0.8059, 0.5443, 0.6273),
    ("BROWALLIA", 0.5255, 0.767, 0.5453, 0.6126),
    ("Amazon PARS", 0.5025, 0.7609, 0.5564, 0.6066),
    ("HCILab", 0.4995, 0.7414, 0.5301, 0.5903),
    ("weipengfei", 0.4887, 0.6915, 0.5033, 0.5612),
    ("BASELINE", 0.434, 0.7358, 0.5105, 0.5601),
    ("Yet", 0.5088, 0.6106, 0.51, 0.5431),
    ("Greeny", 0.5037, 0.6106, 0.484, 0.5328),
    ("Little Flower", 0.5081, 0.8229, None, None),
]


def reference_tables() -> dict:
    """Embedded reference records (test-set scores by emotion and by task,
    the validation modality ablation, and the leaderboard)."""
    return {
        "table2": [
            {"emotion": e, "task": t, "only_text": a, "mmmt": b}
            for e, t, a, b in _TABLE2_ROWS
        ],
        "table3": [
            {"model": m, "task_a": a, "task_b": b, "task_c": c, "mean": d}
            for m, a, b, c, d in _TABLE3_ROWS
        ],
        "table5": [
            {"modalities": mods, "task_a": a, "task_b": b, "task_c": c, "mean": d}
            for mods, a, b, c, d in _TABLE5_ROWS
        ],
        "table7": [
            {"team": t, "task_a": a, "task_b": b, "task_c": c, "mean": d}
            for t, a, b, c, d in _TABLE7_ROWS
        ],
    }


def format_report(report: MetricsReport) -> str:
    """Human-readable metrics block."""
    def fmt(v):
        return "N/A" if v is None else f"{v:.4f}"

    lines = ["head        multiclass  binary"]
    for h in HEADS:
        mc = report.per_head_multiclass.get(h)
        bi = report.per_head_binary.get(h) if h in BINARY_SUBTASKS else None
        lines.append(f"{h:<11} {fmt(mc):>10}  {fmt(bi):>6}")
    lines.append("")
    lines.append(f"task_a {fmt(report.task_a)}  task_b {fmt(report.task_b)}  "
                 f"task_c {fmt(report.task_c)}  mean {fmt(report.mean)}")
    return "\n".join(lines)

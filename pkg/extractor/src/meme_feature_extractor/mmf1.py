"""Writer for the MMF1 feature-file wire format.

Independent implementation of the classification engine's documented
format: little-endian, magic "MMF1", u32 version=1, three u32 dims, u64
record count; per record a u16-length-prefixed UTF-8 id, a u8 modality
presence bitmask (bit0 image, bit1 clip, bit2 text), present vectors as
float32, and five i8 labels with -1 for absent.
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

LABEL_ORDER = ("sentiment", "humour", "sarcasm", "offensive", "motivation")


def write_mmf1(records: list[dict], dims: tuple[int, int, int], path: str) -> None:
    """records: dicts with id, image/clip/text float32 arrays, labels dict."""
    buf = io.BytesIO()
    buf.write(b"MMF1")
    buf.write(struct.pack("<I", 1))
    buf.write(struct.pack("<III", *dims))
    buf.write(struct.pack("<Q", len(records)))
    for rec in records:
        idb = rec["id"].encode("utf-8")
        buf.write(struct.pack("<H", len(idb)))
        buf.write(idb)
        mask = 0
        for bit, key in enumerate(("image", "clip", "text")):
            if rec.get(key) is not None:
                mask |= 1 << bit
        buf.write(struct.pack("<B", mask))
        for key, d in zip(("image", "clip", "text"), dims):
            vec = rec.get(key)
            if vec is None:
                continue
            vec = np.asarray(vec, dtype=np.float32)
            if vec.shape != (d,):
                raise ValueError(f"record {rec['id']}: {key} vector shape "
                                 f"{vec.shape} != ({d},)")
            buf.write(vec.astype("<f4").tobytes())
        labels = rec.get("labels", {})
        buf.write(struct.pack("<5b", *[labels.get(h, -1) if labels.get(h) is not None
                                       else -1 for h in LABEL_ORDER]))
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(buf.getvalue())
    os.replace(tmp, path)

"""The extraction pipeline: CSV of memes in, MMF1 feature file out.

Input CSV columns: id, image (path, relative paths resolve against the
CSV's directory), caption, then optionally sentiment, humour, sarcasm,
offensive, motivation. Unreadable images are skipped and logged with
their id; output record order matches input row order.
"""

from __future__ import annotations

import csv
import logging
import os

from PIL import Image

from .encoders import build_encoders
from .manifest import ExtractionManifest, save_manifest
from .mmf1 import LABEL_ORDER, write_mmf1

log = logging.getLogger("meme_feature_extractor")

LABEL_RANGES = {"sentiment": 3, "humour": 4, "sarcasm": 4, "offensive": 4,
                "motivation": 2}


class ExtractionError(Exception):
    pass


def read_input_csv(path: str) -> list[dict]:
    base = os.path.dirname(os.path.abspath(path))
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"id", "image", "caption"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ExtractionError(
                f"input CSV needs columns {sorted(required)}, got "
                f"{reader.fieldnames}")
        for row in reader:
            image_path = row["image"]
            if not os.path.isabs(image_path):
                image_path = os.path.join(base, image_path)
            labels = {}
            for h in LABEL_ORDER:
                cell = (row.get(h) or "").strip()
                if cell == "":
                    labels[h] = None
                    continue
                v = int(cell)
                if not 0 <= v < LABEL_RANGES[h]:
                    raise ExtractionError(f"row {row['id']}: {h} label {v} "
                                          f"out of range")
                labels[h] = v
            rows.append({"id": row["id"], "image_path": image_path,
                         "caption": row["caption"], "labels": labels})
    return rows


def run_extraction(manifest: ExtractionManifest) -> dict:
    """Extract features for every readable input row; returns a summary."""
    manifest.validate()
    rows = read_input_csv(manifest.input_csv)

    loaded = []
    for row in rows:
        try:
            with Image.open(row["image_path"]) as im:
                row["image"] = im.convert("RGB").copy()
        except OSError as e:
            log.warning("skipping %s: unreadable image (%s)", row["id"], e)
            continue
        loaded.append(row)
    if not loaded:
        raise ExtractionError("no input rows produced a readable image")

    image_enc, clip_enc, text_enc = build_encoders(manifest)
    dims = (image_enc.dim, clip_enc.dim, text_enc.dim)

    records = []
    bs = manifest.batch_size
    for start in range(0, len(loaded), bs):
        chunk = loaded[start:start + bs]
        images = [r["image"] for r in chunk]
        captions = [r["caption"] for r in chunk]
        image_vecs = image_enc.encode(images)
        clip_vecs = clip_enc.encode(images)
        text_vecs = text_enc.encode(captions)
        for i, row in enumerate(chunk):
            records.append({"id": row["id"], "image": image_vecs[i],
                            "clip": clip_vecs[i], "text": text_vecs[i],
                            "labels": row["labels"]})

    write_mmf1(records, dims, manifest.output_path)
    manifest.dims = dims
    save_manifest(manifest, manifest.output_path + ".manifest.json")
    log.info("wrote %d records (skipped %d) to %s, dims %s",
             len(records), len(rows) - len(loaded), manifest.output_path, dims)
    return {"written": len(records), "skipped": len(rows) - len(loaded),
            "dims": dims, "output": manifest.output_path}

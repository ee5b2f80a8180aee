import csv
import json
import os

import pytest
from PIL import Image, ImageDraw

from meme_feature_extractor.manifest import EncoderSpec, ExtractionManifest

# tiny untrained architectures so tests run offline and fast
TINY_CLIP_CONFIG = {
    "image_size": 32, "patch_size": 8, "hidden_size": 32,
    "num_hidden_layers": 2, "num_attention_heads": 2,
    "intermediate_size": 64, "projection_dim": 16,
}

TINY_TEXT_CONFIG = {
    "model_type": "bert", "vocab_size": 60, "hidden_size": 32,
    "num_hidden_layers": 2, "num_attention_heads": 2,
    "intermediate_size": 64, "max_position_embeddings": 128,
}

VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + \
    list("abcdefghijklmnopqrstuvwxyz") + \
    ["meme", "cat", "dog", "monday", "когда", "##s", "##ing", "very",
     "funny", "not", "motivational", "when", "you", "the", "a", "is"]


def make_meme(path: str, seed: int, caption: str) -> None:
    img = Image.new("RGB", (96, 96), color=(seed * 37 % 255, seed * 91 % 255,
                                            seed * 53 % 255))
    draw = ImageDraw.Draw(img)
    draw.rectangle([8 + seed, 8, 40 + seed, 40], fill=(255, 255, 255))
    draw.text((4, 70), caption[:12], fill=(0, 0, 0))
    img.save(path)


@pytest.fixture(scope="session")
def tokenizer_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("tok")
    with open(d / "vocab.txt", "w") as f:
        f.write("\n".join(VOCAB) + "\n")
    with open(d / "tokenizer_config.json", "w") as f:
        json.dump({"tokenizer_class": "BertTokenizer",
                   "do_lower_case": True}, f)
    return str(d)


@pytest.fixture(scope="session")
def sample_memes(tmp_path_factory):
    """4 labeled memes: 3 valid images plus 1 deliberately corrupt file."""
    d = tmp_path_factory.mktemp("memes")
    rows = [
        ("meme-01", "im01.png", "funny cat meme", (1, 2, 0, 0, 0)),
        ("meme-02", "im02.png", "monday is not motivational", (0, 1, 3, 1, 1)),
        ("meme-03", "im03.png", "very funny dog", (2, 3, 1, 0, 0)),
        ("meme-04", "broken.png", "the unreadable one", (1, 0, 0, 0, 1)),
    ]
    for rec_id, name, caption, _ in rows[:3]:
        make_meme(str(d / name), hash(rec_id) % 97, caption)
    with open(d / "broken.png", "wb") as f:
        f.write(b"this is not an image at all")
    csv_path = d / "memes.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "image", "caption", "sentiment", "humour",
                    "sarcasm", "offensive", "motivation"])
        for rec_id, name, caption, labels in rows:
            w.writerow([rec_id, name, caption, *labels])
    return str(csv_path)


@pytest.fixture
def tiny_manifest(sample_memes, tokenizer_dir, tmp_path):
    return ExtractionManifest(
        input_csv=sample_memes,
        output_path=str(tmp_path / "features.mmf1"),
        image_encoder=EncoderSpec(kind="torchvision", model="efficientnet_b0",
                                  pretrained=False),
        clip_encoder=EncoderSpec(kind="hf_clip",
                                 local_config=dict(TINY_CLIP_CONFIG)),
        text_encoder=EncoderSpec(kind="hf_text",
                                 local_config=dict(TINY_TEXT_CONFIG),
                                 local_tokenizer=tokenizer_dir),
        batch_size=2,
        seed=7,
    )

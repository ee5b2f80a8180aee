"""Extraction manifest: what to read, which encoders to run, where to write.

The manifest is a JSON file. Each encoder spec names either a published
checkpoint (`model`, downloaded on first use) or a locally constructed
architecture (`local_config`, untrained, seeded init) for offline runs and
tests. The resolved output dims are recorded back into the manifest copy
written next to the feature file, and always equal the file header dims.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class EncoderSpec:
    """One encoder: kind is 'torchvision', 'hf_clip', or 'hf_text'."""

    kind: str
    model: str | None = None          # checkpoint name (hub / torchvision)
    pretrained: bool = True           # False: architecture only, seeded init
    local_config: dict | None = None  # hf_*: build from this config, no hub
    local_tokenizer: str | None = None  # hf_text: local tokenizer path

    def validate(self) -> None:
        if self.kind not in ("torchvision", "hf_clip", "hf_text"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.model is None and self.local_config is None:
            raise ValueError(f"{self.kind}: need a model name or a local_config")
        if self.kind == "hf_text" and self.local_config is not None \
                and self.local_tokenizer is None:
            raise ValueError("hf_text with local_config needs local_tokenizer")


def _default_image():
    return EncoderSpec(kind="torchvision", model="efficientnet_b4")


def _default_clip():
    return EncoderSpec(kind="hf_clip", model="openai/clip-vit-base-patch32")


def _default_text():
    return EncoderSpec(kind="hf_text",
                       model="sentence-transformers/all-mpnet-base-v2")


@dataclass
class ExtractionManifest:
    input_csv: str = ""
    output_path: str = ""
    image_encoder: EncoderSpec = field(default_factory=_default_image)
    clip_encoder: EncoderSpec = field(default_factory=_default_clip)
    text_encoder: EncoderSpec = field(default_factory=_default_text)
    batch_size: int = 16
    device: str = "cpu"
    seed: int = 0                     # used only for untrained inits
    dims: tuple[int, int, int] | None = None  # resolved at extraction time

    def validate(self) -> None:
        if not self.input_csv or not self.output_path:
            raise ValueError("manifest needs input_csv and output_path")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for spec in (self.image_encoder, self.clip_encoder, self.text_encoder):
            spec.validate()

    def to_json(self) -> str:
        d = asdict(self)
        if self.dims is not None:
            d["dims"] = list(self.dims)
        return json.dumps(d, indent=2, sort_keys=True)


def load_manifest(path: str) -> ExtractionManifest:
    with open(path) as f:
        raw = json.load(f)
    for key in ("image_encoder", "clip_encoder", "text_encoder"):
        if key in raw:
            raw[key] = EncoderSpec(**raw[key])
    if raw.get("dims") is not None:
        raw["dims"] = tuple(raw["dims"])
    manifest = ExtractionManifest(**raw)
    manifest.validate()
    return manifest


def save_manifest(manifest: ExtractionManifest, path: str) -> None:
    with open(path, "w") as f:
        f.write(manifest.to_json() + "\n")

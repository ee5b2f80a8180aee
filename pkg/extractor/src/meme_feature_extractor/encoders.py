"""Frozen encoder wrappers.

Every encoder is loaded once, switched to eval mode, and has gradients
disabled; extraction never mutates weights. Untrained variants (for
offline use) are seeded so repeated runs produce identical features.
"""

from __future__ import annotations

import numpy as np
import torch
from PIL import Image

from .manifest import EncoderSpec


def _freeze(module: torch.nn.Module) -> torch.nn.Module:
    module.eval()
    for p in module.parameters():
        p.requires_grad_(False)
    return module


class ImageFeatureEncoder:
    """torchvision CNN with the classifier stripped: pooled backbone features."""

    def __init__(self, spec: EncoderSpec, device: str, seed: int):
        import torchvision.models as tvm

        name = spec.model or "efficientnet_b4"
        if spec.pretrained:
            weights = tvm.get_model_weights(name).DEFAULT
            self.transform = weights.transforms()
        else:
            torch.manual_seed(seed)
            weights = None
            from torchvision import transforms as T
            self.transform = T.Compose([
                T.Resize(64), T.CenterCrop(64), T.ToTensor(),
                T.Normalize([0.5, 0.5, 0.5], [0.5, 0.5, 0.5]),
            ])
        model = tvm.get_model(name, weights=weights)
        for attr in ("classifier", "fc", "head"):
            if hasattr(model, attr):
                setattr(model, attr, torch.nn.Identity())
                break
        self.device = torch.device(device)
        self.model = _freeze(model).to(self.device)
        self.dim = int(self._forward([Image.new("RGB", (64, 64))]).shape[1])

    def _forward(self, images: list[Image.Image]) -> torch.Tensor:
        batch = torch.stack([self.transform(im.convert("RGB")) for im in images])
        with torch.no_grad():
            out = self.model(batch.to(self.device))
        return out.reshape(out.shape[0], -1)

    def encode(self, images: list[Image.Image]) -> np.ndarray:
        return self._forward(images).cpu().numpy().astype(np.float32)


class ClipImageEncoder:
    """CLIP vision tower with projection: one joint-space vector per image."""

    def __init__(self, spec: EncoderSpec, device: str, seed: int):
        from transformers import (CLIPImageProcessor, CLIPVisionConfig,
                                  CLIPVisionModelWithProjection)

        if spec.local_config is not None:
            torch.manual_seed(seed)
            config = CLIPVisionConfig(**spec.local_config)
            model = CLIPVisionModelWithProjection(config)
            self.processor = CLIPImageProcessor(
                size={"shortest_edge": config.image_size},
                crop_size={"height": config.image_size,
                           "width": config.image_size})
        else:
            model = CLIPVisionModelWithProjection.from_pretrained(spec.model)
            self.processor = CLIPImageProcessor.from_pretrained(spec.model)
        self.device = torch.device(device)
        self.model = _freeze(model).to(self.device)
        self.dim = int(model.config.projection_dim)

    def encode(self, images: list[Image.Image]) -> np.ndarray:
        inputs = self.processor(images=[im.convert("RGB") for im in images],
                                return_tensors="pt")
        with torch.no_grad():
            out = self.model(pixel_values=inputs["pixel_values"].to(self.device))
        return out.image_embeds.cpu().numpy().astype(np.float32)


class SentenceEncoder:
    """Transformer text encoder with attention-masked mean pooling."""

    def __init__(self, spec: EncoderSpec, device: str, seed: int):
        from transformers import AutoConfig, AutoModel, AutoTokenizer

        if spec.local_config is not None:
            torch.manual_seed(seed)
            config = AutoConfig.for_model(**spec.local_config)
            model = AutoModel.from_config(config)
            self.tokenizer = AutoTokenizer.from_pretrained(spec.local_tokenizer)
        else:
            model = AutoModel.from_pretrained(spec.model)
            self.tokenizer = AutoTokenizer.from_pretrained(spec.model)
        self.device = torch.device(device)
        self.model = _freeze(model).to(self.device)
        self.dim = int(model.config.hidden_size)

    def encode(self, captions: list[str]) -> np.ndarray:
        tokens = self.tokenizer(captions, padding=True, truncation=True,
                                max_length=128, return_tensors="pt")
        tokens = {k: v.to(self.device) for k, v in tokens.items()}
        with torch.no_grad():
            out = self.model(**tokens)
        hidden = out.last_hidden_state
        mask = tokens["attention_mask"].unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1e-9)
        return pooled.cpu().numpy().astype(np.float32)


def build_encoders(manifest) -> tuple[ImageFeatureEncoder, ClipImageEncoder,
                                      SentenceEncoder]:
    image = ImageFeatureEncoder(manifest.image_encoder, manifest.device,
                                manifest.seed)
    clip = ClipImageEncoder(manifest.clip_encoder, manifest.device,
                            manifest.seed + 1)
    text = SentenceEncoder(manifest.text_encoder, manifest.device,
                           manifest.seed + 2)
    return image, clip, text

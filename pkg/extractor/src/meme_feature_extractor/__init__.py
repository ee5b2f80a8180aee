"""Feature extraction from meme images and captions.

Three frozen encoders (a torchvision CNN, a CLIP image encoder, and a
sentence embedding model) turn each meme into the three fixed-width
vectors the classification engine trains on, written as an MMF1 feature
file.
"""

from .manifest import EncoderSpec, ExtractionManifest
from .extract import ExtractionError, run_extraction

__version__ = "0.1.0"

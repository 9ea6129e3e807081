"""Pretrained-backbone feature extraction writing the GEVB format."""

from .extract import BACKBONES, EmbedJob, extract_features, list_images
from .gevb import write_gevb

__version__ = "0.1.0"

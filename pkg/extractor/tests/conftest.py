import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

import numpy as np
import pytest
import torch
from PIL import Image


def _save_tiny_vit(path, image_size: int, layers: int, heads: int):
    from transformers import ViTConfig, ViTImageProcessor, ViTModel

    cfg = ViTConfig(hidden_size=32, num_hidden_layers=layers,
                    num_attention_heads=heads, intermediate_size=64,
                    image_size=image_size, patch_size=16)
    torch.manual_seed(0)
    ViTModel(cfg).save_pretrained(path)
    ViTImageProcessor(size={"height": image_size,
                            "width": image_size}).save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """32px ViT: grid 2x2, seq_len 5 — fast path for most tests."""
    return _save_tiny_vit(tmp_path_factory.mktemp("vit32"), 32, 2, 2)


@pytest.fixture(scope="session")
def vit224_model_dir(tmp_path_factory):
    """224px ViT with standard patch 16: grid 14x14, seq_len 197."""
    return _save_tiny_vit(tmp_path_factory.mktemp("vit224"), 224, 1, 2)


@pytest.fixture(scope="session")
def image_path(tmp_path_factory):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    path = tmp_path_factory.mktemp("img") / "input.png"
    Image.fromarray(pixels).save(path)
    return path

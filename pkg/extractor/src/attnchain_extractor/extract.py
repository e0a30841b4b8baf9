"""Capture post-softmax attention from a pretrained vision transformer
and write it in the attnchain manifest/NPY interchange format."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import ImageDecodeError, ModelLoadError, ShapeMismatch
from .wire import save_manifest, save_npy_f32


@dataclass(frozen=True)
class ExtractionSpec:
    model_id: str
    image_path: str
    output_dir: str
    resize: int | None = None  # square side; None = the model's native size
    dtype: str = "f32"


def _load_model(model_id: str):
    from transformers import AutoImageProcessor, AutoModel

    try:
        # eager attention: fused kernels don't expose the probability
        # matrices we are here to dump
        model = AutoModel.from_pretrained(model_id, attn_implementation="eager")
        processor = AutoImageProcessor.from_pretrained(model_id)
    except Exception as exc:
        raise ModelLoadError(f"cannot load {model_id!r}: {exc}") from exc
    model.eval()
    return model, processor


def _load_image(path) -> Image.Image:
    try:
        return Image.open(path).convert("RGB")
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise ImageDecodeError(f"cannot decode image {path}: {exc}") from exc


def extract(spec: ExtractionSpec) -> Path:
    """Run one image through the model, dump every layer's [heads, s, s]
    post-softmax attention as f32 NPY, and return the manifest path."""
    if spec.dtype != "f32":
        raise ValueError(f"only f32 export is supported, got {spec.dtype!r}")
    model, processor = _load_model(spec.model_id)
    image = _load_image(spec.image_path)

    kwargs = {}
    interpolate = False
    if spec.resize is not None:
        kwargs["size"] = {"height": spec.resize, "width": spec.resize}
        interpolate = spec.resize != getattr(model.config, "image_size", spec.resize)
    inputs = processor(images=image, return_tensors="pt", **kwargs)

    model_kwargs = {"output_attentions": True}
    if interpolate:
        model_kwargs["interpolate_pos_encoding"] = True
    with torch.no_grad():
        out = model(**inputs, **model_kwargs)
    if out.attentions is None:
        raise ModelLoadError(
            f"{spec.model_id!r} did not return attention weights")

    height, width = inputs["pixel_values"].shape[-2:]
    patch = model.config.patch_size
    grid = (height // patch, width // patch)
    seq_len = out.attentions[0].shape[-1]
    n_special = seq_len - grid[0] * grid[1]
    if n_special < 0:
        raise ShapeMismatch(
            f"seq_len {seq_len} smaller than grid {grid[0]}x{grid[1]}")
    special_tokens = list(range(n_special))  # class/register prefix tokens

    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for layer, att in enumerate(out.attentions):
        arr = att[0].to(torch.float32).cpu().numpy()
        if arr.ndim != 3 or arr.shape[1:] != (seq_len, seq_len):
            raise ShapeMismatch(
                f"layer {layer}: expected [heads, {seq_len}, {seq_len}], "
                f"got {list(arr.shape)}")
        if np.max(np.abs(arr.sum(axis=-1) - 1.0)) > 1e-3:
            raise ShapeMismatch(
                f"layer {layer}: rows deviate from sum 1 beyond f32 "
                "softmax tolerance")
        rel = f"layer{layer}.npy"
        save_npy_f32(out_dir / rel, arr)
        entries.append((layer, arr.shape[0], rel))

    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest_path, seq_len, grid, special_tokens, entries)
    return manifest_path

"""Spatial segmentation maps from attention vectors and the three scoring
metrics (pixel accuracy, two-class mIoU, average precision)."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_chain import ChainConfig, StochasticMatrix
from .errors import DimensionMismatch, MissingGrid, ParseError, SchemaViolation
from .ops import AttentionTensor, Direction, aggregate_heads, multi_bounce
from .tensor_io import format_float


@dataclass(frozen=True)
class SegMap:
    """Pre-threshold saliency scores and (optionally) the binary mask."""

    scores: np.ndarray
    mask: np.ndarray | None = None


@dataclass(frozen=True)
class SegMetrics:
    accuracy: float
    miou: float
    ap: float


def bilinear_upsample(scores: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel-center alignment."""
    in_h, in_w = scores.shape
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - 1)
    y1 = np.clip(y0 + 1, 0, in_h - 1)
    x1 = np.clip(x0 + 1, 0, in_w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = scores[np.ix_(y0, x0)] * (1 - wx) + scores[np.ix_(y0, x1)] * wx
    bot = scores[np.ix_(y1, x0)] * (1 - wx) + scores[np.ix_(y1, x1)] * wx
    return top * (1 - wy[:, 0])[:, None] + bot * wy[:, 0][:, None]


def attention_to_map(tensor: AttentionTensor, target_token: int, n: int,
                     direction: Direction, scheme: str, cfg: ChainConfig,
                     layer_set: list[int] | None = None,
                     out_size: tuple | None = None) -> SegMap:
    """Saliency map for a target token: aggregate heads per layer, average
    the chosen layers, multi-bounce from the target, and reshape the
    spatial entries to the grid (optionally upsampled)."""
    if tensor.grid is None:
        raise MissingGrid("attention_to_map requires a spatial grid")
    if layer_set is None:
        layer_set = list(range(tensor.layers))
    if not layer_set:
        raise ValueError("layer_set must be non-empty")
    per_layer = []
    for li in layer_set:
        if not 0 <= li < tensor.layers:
            raise DimensionMismatch(f"layer {li} out of range")
        per_layer.append(aggregate_heads(list(tensor.matrices[li]), scheme))
    pooled = sum(m.entries for m in per_layer) / len(per_layer)
    pooled = pooled / pooled.sum(axis=1)[:, None]
    v = multi_bounce(StochasticMatrix(pooled), target_token, n, direction)

    special = set(tensor.special_tokens)
    spatial = np.array([v.probs[i] for i in range(tensor.seq_len)
                        if i not in special])
    h, w = tensor.grid
    scores = spatial.reshape(h, w)
    if out_size is not None:
        scores = bilinear_upsample(scores, out_size[0], out_size[1])
    return SegMap(scores)


def threshold(seg: SegMap, rule: str = "mean", t: float | None = None) -> SegMap:
    """Binarize scores: "mean" uses the spatial mean, "fixed" uses t.
    The comparison is strict, so constant maps yield an all-false mask."""
    if rule == "mean":
        cut = float(seg.scores.mean())
    elif rule == "fixed":
        if t is None:
            raise ValueError("fixed rule requires a threshold value")
        cut = float(t)
    else:
        raise ValueError(f"unknown threshold rule {rule!r}")
    return SegMap(seg.scores, seg.scores > cut)


def _iou(pred: np.ndarray, gt: np.ndarray) -> float:
    union = np.logical_or(pred, gt).sum()
    if union == 0:
        return 1.0  # empty-union class: vacuously perfect
    return float(np.logical_and(pred, gt).sum() / union)


def average_precision(scores: np.ndarray, gt: np.ndarray) -> float:
    """Area under the pixelwise precision-recall curve.

    Pixels are sorted by descending score; equal scores are processed as a
    group, with precision sampled once all the group's positives are
    counted. Returns 0 when the ground truth has no positives.
    """
    scores = scores.reshape(-1)
    gt = gt.reshape(-1).astype(bool)
    total_pos = int(gt.sum())
    if total_pos == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    g_sorted = gt[order]
    ap = 0.0
    tp = 0
    seen = 0
    i = 0
    while i < s_sorted.size:
        j = i
        while j < s_sorted.size and s_sorted[j] == s_sorted[i]:
            j += 1
        group_pos = int(g_sorted[i:j].sum())
        tp += group_pos
        seen += j - i
        if group_pos:
            ap += group_pos * (tp / seen)
        i = j
    return ap / total_pos


def evaluate(pred: SegMap, gt: np.ndarray) -> SegMetrics:
    """Score a prediction against a boolean ground-truth mask."""
    gt = np.asarray(gt, dtype=bool)
    if pred.scores.shape != gt.shape:
        raise DimensionMismatch(
            f"prediction shape {pred.scores.shape} != ground truth {gt.shape}"
        )
    if pred.mask is None:
        raise ValueError("prediction has no binary mask; call threshold() first")
    mask = pred.mask
    accuracy = float((mask == gt).mean())
    miou = 0.5 * (_iou(mask, gt) + _iou(~mask, ~gt))
    ap = average_precision(pred.scores, gt)
    return SegMetrics(accuracy, miou, ap)


# -- ground-truth mask I/O ---------------------------------------------------

def read_mask(path) -> np.ndarray:
    """Read a ground-truth mask: binary PGM (P5, nonzero = foreground) or
    CSV of 0/1 values."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"P5":
        fields = []
        pos = 2
        while len(fields) < 3:
            while pos < len(data) and data[pos:pos + 1].isspace():
                pos += 1
            if data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
                continue
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
        pos += 1  # single whitespace after maxval
        try:
            w, h, maxval = (int(f) for f in fields)
        except ValueError as exc:
            raise ParseError(f"{path}: malformed PGM header") from exc
        if maxval > 255:
            raise SchemaViolation(f"{path}: 16-bit PGM unsupported")
        pixels = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8)
        if pixels.size != w * h:
            raise ParseError(f"{path}: truncated PGM pixel data")
        return (pixels.reshape(h, w) > 0)
    try:
        rows = [[float(x) for x in line.split(",")]
                for line in data.decode("ascii").strip().splitlines()]
        return np.array(rows) > 0.5
    except ValueError as exc:
        raise ParseError(f"{path}: mask is neither P5 PGM nor numeric CSV") from exc


def write_metrics_csv(path, rows: list[tuple]) -> None:
    """Batch metrics CSV: image_id, accuracy, miou, ap, plus a mean row."""
    if not rows:
        raise ValueError("no metric rows to write")
    lines = []
    for image_id, m in rows:
        lines.append(",".join([str(image_id), format_float(m.accuracy),
                               format_float(m.miou), format_float(m.ap)]))
    means = [sum(getattr(m, f) for _, m in rows) / len(rows)
             for f in ("accuracy", "miou", "ap")]
    lines.append(",".join(["mean"] + [format_float(x) for x in means]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")

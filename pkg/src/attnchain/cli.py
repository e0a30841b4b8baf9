"""Command-line surface: validate tensors, compute ranks/bounces/lambda2,
segment, order tokens for masking, and generate synthetic chains.

Exit codes: 0 success, 1 domain error, 2 usage or parse error. Every
invocation is deterministic given its flags and seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import core_chain, ops, segmentation, spectral, synth, tensor_io
from .core_chain import ChainConfig
from .errors import ChainError, MissingFile, ParseError, SchemaViolation
from .tensor_io import format_float

_PARSE_ERRORS = (ParseError, SchemaViolation, MissingFile)


def _thread_count(value: str | None) -> int:
    if value is None:
        value = os.environ.get("ATTNCHAIN_THREADS", "auto")
    if value == "auto":
        return os.cpu_count() or 1
    count = int(value)
    if count < 1:
        raise ValueError("--threads must be >= 1")
    return count


def parallel_map(fn, items, threads: int):
    """Order-preserving map over a thread pool; thread count never changes
    any output, only wall time."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _write_provenance(out_dir: Path, command: str, args: argparse.Namespace):
    doc = {"command": command,
           "args": {k: v for k, v in sorted(vars(args).items())
                    if k != "func" and not callable(v)}}
    (out_dir / "provenance.json").write_text(
        json.dumps(doc, indent=2, default=str) + "\n", encoding="utf-8")


def _config(args) -> ChainConfig:
    return ChainConfig(alpha=args.alpha, tau=args.tau, max_iters=args.max_iters)


def _select_matrix(tensor, args, threads):
    """Resolve --layer/--head/--aggregate into a single chain."""
    layer = args.layer
    if not 0 <= layer < tensor.layers:
        raise SchemaViolation(f"--layer {layer} out of range (layers={tensor.layers})")
    heads = list(tensor.matrices[layer])
    if args.head is not None:
        if not 0 <= args.head < len(heads):
            raise SchemaViolation(f"--head {args.head} out of range")
        return heads[args.head]
    return ops.aggregate_heads(heads, args.aggregate)


def _write_vector_csv(path: Path, v, ranked=False):
    order = ops.rank_tokens(v) if ranked else range(v.n)
    lines = []
    for rank, idx in enumerate(order):
        fields = [str(idx), format_float(v.probs[idx])]
        if ranked:
            fields.append(str(rank))
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _maybe_heatmap(v, manifest, path: Path):
    if manifest.grid is not None:
        tensor_io.export_heatmap(v, manifest.grid, manifest.special_tokens,
                                 path, fmt="pgm")


# -- commands -----------------------------------------------------------------

def cmd_validate(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    ok = True
    print("layer,head,max_row_sum_deviation,min_entry,nan_count")
    for entry in manifest.entries:
        arr = tensor_io.load_array(manifest.entry_path(entry))
        for h in range(entry.heads):
            mat = arr[h]
            nan_count = int(np.isnan(mat).sum())
            finite = np.isfinite(mat).all()
            deviation = (float(np.max(np.abs(mat.sum(axis=1) - 1.0)))
                         if finite else float("nan"))
            min_entry = float(mat.min()) if finite else float("nan")
            passes = finite and min_entry >= -1e-9
            if not passes:
                ok = False
                print(f"FAIL at layer {entry.layer} head {h}", file=sys.stderr)
            print(f"{entry.layer},{h},{format_float(deviation)},"
                  f"{format_float(min_entry)},{nan_count}")
    return 0 if ok else 1


def cmd_tokenrank(args) -> int:
    threads = _thread_count(args.threads)
    manifest = tensor_io.load_manifest(args.manifest)
    tensor = tensor_io.load_attention_tensor(manifest)
    m = _select_matrix(tensor, args, threads)
    result = ops.token_rank(m, _config(args), ops.Direction(args.direction))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_vector_csv(out_dir / "tokenrank.csv", result.vector, ranked=True)
    _maybe_heatmap(result.vector, manifest, out_dir / "tokenrank.pgm")
    _write_provenance(out_dir, "tokenrank", args)
    print(f"iterations={result.iterations} residual={format_float(result.residual)} "
          f"converged={result.converged}")
    return 0


def cmd_bounce(args) -> int:
    threads = _thread_count(args.threads)
    manifest = tensor_io.load_manifest(args.manifest)
    tensor = tensor_io.load_attention_tensor(manifest)
    m = _select_matrix(tensor, args, threads)
    direction = ops.Direction(args.direction)
    cfg = _config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for spec_n in args.n.split(","):
        spec_n = spec_n.strip()
        if spec_n == "inf":
            v = ops.token_rank(m, cfg, direction).vector
            tag = "inf"
        else:
            count = int(spec_n)
            if count == 0:
                v = core_chain.StateVector.one_hot(m.n, args.token)
            else:
                v = ops.multi_bounce(m, args.token, count, direction)
            tag = str(count)
        _write_vector_csv(out_dir / f"bounce_n{tag}.csv", v)
        _maybe_heatmap(v, manifest, out_dir / f"bounce_n{tag}.pgm")
    _write_provenance(out_dir, "bounce", args)
    return 0


def cmd_lambda2(args) -> int:
    threads = _thread_count(args.threads)
    manifest = tensor_io.load_manifest(args.manifest)
    tensor = tensor_io.load_attention_tensor(manifest)
    if not 0 <= args.layer < tensor.layers:
        raise SchemaViolation(f"--layer {args.layer} out of range")
    heads = list(tensor.matrices[args.layer])
    values = parallel_map(spectral.lambda2, heads, threads)
    total = sum(values)
    weights = ([v / total for v in values] if total >= 1e-12
               else [1.0 / len(values)] * len(values))
    lines = ["head,lambda2,weight"]
    for h, (val, w) in enumerate(zip(values, weights)):
        lines.append(f"{h},{format_float(val)},{format_float(w)}")
    report = "\n".join(lines) + "\n"
    print(report, end="")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "lambda2.csv").write_text(report, encoding="ascii")
        _write_provenance(out_dir, "lambda2", args)
    return 0


def cmd_segment(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    tensor = tensor_io.load_attention_tensor(manifest)
    if args.layers == "all":
        layer_set = list(range(tensor.layers))
    else:
        layer_set = [int(x) for x in args.layers.split(",")]
    seg = segmentation.attention_to_map(
        tensor, args.token, args.n, ops.Direction(args.direction),
        args.scheme, _config(args), layer_set)
    seg = segmentation.threshold(seg, "mean")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = [",".join(format_float(x) for x in row) for row in seg.scores]
    (out_dir / "segment_scores.csv").write_text("\n".join(lines) + "\n",
                                                encoding="ascii")
    h, w = seg.scores.shape
    lo, hi = seg.scores.min(), seg.scores.max()
    pix = (np.rint(255.0 * (seg.scores - lo) / (hi - lo)).astype(np.uint8)
           if hi > lo else np.zeros_like(seg.scores, dtype=np.uint8))
    with open(out_dir / "segment_scores.pgm", "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())
    with open(out_dir / "segment_mask.pgm", "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write((seg.mask.astype(np.uint8) * 255).tobytes())

    if args.gt:
        gt = segmentation.read_mask(args.gt)
        metrics = segmentation.evaluate(seg, gt)
        segmentation.write_metrics_csv(out_dir / "segment_metrics.csv",
                                       [("image", metrics)])
        print(f"accuracy={format_float(metrics.accuracy)} "
              f"miou={format_float(metrics.miou)} ap={format_float(metrics.ap)}")
    _write_provenance(out_dir, "segment", args)
    return 0


def cmd_mask_order(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    tensor = tensor_io.load_attention_tensor(manifest)
    order = ops.masking_order(tensor, args.strategy, _config(args),
                              layer_fraction=args.layer_fraction, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["rank,token_index"]
    lines += [f"{rank},{idx}" for rank, idx in enumerate(order)]
    (out_dir / "mask_order.csv").write_text("\n".join(lines) + "\n",
                                            encoding="ascii")
    _write_provenance(out_dir, "mask-order", args)
    return 0


def cmd_synth(args) -> int:
    if args.kind == "random":
        if args.seed is None:
            raise ValueError("--kind random requires --seed")
        mats = [synth.random_chain(args.n, args.seed + h)
                for h in range(args.heads)]
    elif args.kind == "block":
        mats = [synth.block_chain(args.n, args.blocks, args.intra_mass)
                for _ in range(args.heads)]
    elif args.kind == "relay":
        mats = [synth.relay_chain() for _ in range(args.heads)]
    else:
        raise ValueError(f"unknown synth kind {args.kind!r}")
    out_dir = Path(args.out)
    manifest_path = synth.write_single_layer_manifest(out_dir, mats)
    _write_provenance(out_dir, "synth", args)
    print(str(manifest_path))
    return 0


# -- parser -------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, default=0.85,
                   help="teleportation weight (default: 0.85)")
    p.add_argument("--tau", type=float, default=1e-10,
                   help="squared L2 convergence threshold (default: 1e-10)")
    p.add_argument("--max-iters", type=int, default=1000,
                   help="power iteration cap (default: 1000)")
    p.add_argument("--threads", default=None,
                   help="worker threads, or 'auto' (default: "
                        "ATTNCHAIN_THREADS or auto); never changes outputs")


def _add_selection(p: argparse.ArgumentParser):
    p.add_argument("--layer", type=int, default=0,
                   help="layer index (default: 0)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--head", type=int, default=None,
                       help="use a single head instead of aggregating")
    group.add_argument("--aggregate", choices=["uniform", "lambda2"],
                       default="uniform",
                       help="head aggregation scheme (default: uniform)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnchain",
        description="Interpret attention matrices as Markov chains.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="stochasticity report for a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("tokenrank", help="steady-state token importance")
    p.add_argument("manifest")
    _add_selection(p)
    p.add_argument("--direction", choices=["incoming", "outgoing"],
                   default="incoming")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_tokenrank)

    p = sub.add_parser("bounce", help="n-th order attention vectors")
    p.add_argument("manifest")
    p.add_argument("--token", type=int, required=True)
    p.add_argument("--n", default="1",
                   help="comma list of bounce counts; 'inf' = tokenrank")
    _add_selection(p)
    p.add_argument("--direction", choices=["incoming", "outgoing"],
                   default="incoming")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_bounce)

    p = sub.add_parser("lambda2", help="per-head |lambda2| and weights")
    p.add_argument("manifest")
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_lambda2)

    p = sub.add_parser("segment", help="segmentation map for a target token")
    p.add_argument("manifest")
    p.add_argument("--token", type=int, required=True)
    p.add_argument("--n", type=int, default=2,
                   help="bounce count (default: 2)")
    p.add_argument("--direction", choices=["incoming", "outgoing"],
                   default="outgoing")
    p.add_argument("--layers", default="all",
                   help="comma list of layer indices, or 'all'")
    p.add_argument("--scheme", choices=["uniform", "lambda2"],
                   default="lambda2")
    p.add_argument("--gt", default=None, help="ground-truth mask (PGM or CSV)")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("mask-order", help="token masking order per strategy")
    p.add_argument("manifest")
    p.add_argument("--strategy", choices=list(ops.MASKING_STRATEGIES),
                   required=True)
    p.add_argument("--layer-fraction", type=float, default=0.5,
                   help="fraction of leading layers to pool (default: 0.5)")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for the random strategy")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_mask_order)

    p = sub.add_parser("synth", help="generate a synthetic manifest")
    p.add_argument("--kind", choices=["random", "block", "relay"],
                   required=True)
    p.add_argument("--n", type=int, default=8, help="state count (default: 8)")
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--intra-mass", type=float, default=0.98)
    p.add_argument("--heads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ChainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

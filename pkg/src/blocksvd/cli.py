"""Command-line front end.

Subcommands: ``gen`` (synthetic low-rank store), ``svd`` (two-pass block
decomposition), ``svd-naive`` (re-streaming baseline), ``rpca``
(low-rank / sparse split, optionally straight from a frame directory),
``cost`` (per-stage cost model), ``bench`` (size sweep emitting CSV).
"""

import argparse
import csv
import json
import sys
import time

import numpy as np

from .frames import FrameStack, export_frames, ingest_frames
from .rpca import RpcaConfig, ialm_rpca
from .rsvd import (SketchConfig, brsvd_run, estimate_costs,
                   relative_frobenius_error, rsvd_naive_ooc)
from .store import MatrixStore
from .synth import SyntheticSpec, gen_lowrank, shape_from_ratio

_SUFFIXES = {
    "k": 1000, "m": 1000 ** 2, "g": 1000 ** 3,
    "kib": 1 << 10, "mib": 1 << 20, "gib": 1 << 30,
    "kb": 1000, "mb": 1000 ** 2, "gb": 1000 ** 3,
}


def parse_bytes(text):
    """'134217728', '128MiB', '1g' -> byte count."""
    s = text.strip().lower()
    for suf in sorted(_SUFFIXES, key=len, reverse=True):
        if s.endswith(suf):
            return int(float(s[: -len(suf)]) * _SUFFIXES[suf])
    return int(s)


def parse_ratio(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"ratio must be m:n:k, got {text!r}")
    return tuple(int(p) for p in parts)


def _dtype(precision):
    return np.float32 if precision == "f32" else np.float64


def _partitions(text):
    return "auto" if text == "auto" else int(text)


def _add_sketch_flags(p):
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--oversample", type=int, default=10)
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--partitions", type=_partitions, default="auto")
    p.add_argument("--memory-budget", type=parse_bytes, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="write a JSON report here")


def build_parser():
    ap = argparse.ArgumentParser(prog="blocksvd")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic low-rank store")
    shape = p.add_mutually_exclusive_group(required=True)
    shape.add_argument("--ratio", type=parse_ratio,
                       help="shape ratio m:n:k, combined with --size")
    shape.add_argument("--m", type=int)
    p.add_argument("--size", type=parse_bytes, help="target size with --ratio")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    for name, help_text in (("svd", "two-pass block randomized SVD"),
                            ("svd-naive", "re-streaming baseline")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input", required=True)
        _add_sketch_flags(p)

    p = sub.add_parser("rpca", help="robust PCA (low-rank + sparse split)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help=".oocm store")
    src.add_argument("--frames", help="directory of PGM frames")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--oversample", type=int, default=10)
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--mu0", type=float, default=None)
    p.add_argument("--rho", type=float, default=1.5)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--memory-budget", type=parse_bytes, default=None)
    p.add_argument("--output-lowrank", default=None)
    p.add_argument("--output-sparse", default=None)
    p.add_argument("--report", default=None)

    p = sub.add_parser("cost", help="per-stage flop/word cost model")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--variant", choices=("naive", "proposed"), required=True)

    p = sub.add_parser("bench", help="sweep sizes, emit CSV")
    p.add_argument("--ratios", type=parse_ratio, nargs="+",
                   default=[(1024, 32, 1), (256, 256, 1)])
    p.add_argument("--sizes", type=parse_bytes, nargs="+",
                   default=[parse_bytes("64MiB"), parse_bytes("256MiB")])
    p.add_argument("--max-size", type=parse_bytes,
                   default=parse_bytes("8GiB"),
                   help="safety cap on any single generated store")
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--rank", type=int, default=10)
    p.add_argument("--oversample", type=int, default=10)
    p.add_argument("--memory-budget", type=parse_bytes,
                   default=parse_bytes("128MiB"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workdir", default=".")
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    return ap


def _cmd_gen(args):
    dtype = _dtype(args.precision)
    if args.ratio is not None:
        if args.size is None:
            raise SystemExit("--ratio requires --size")
        m, n, k = shape_from_ratio(args.ratio, args.size, np.dtype(dtype).itemsize)
    else:
        if args.n is None or args.k is None:
            raise SystemExit("--m requires --n and --k")
        m, n, k = args.m, args.n, args.k
    spec = SyntheticSpec(m=m, n=n, k=k, dtype=dtype, seed=args.seed)
    store = gen_lowrank(spec, args.out, overwrite=True)
    print(json.dumps({"path": args.out, "m": m, "n": n, "k": k,
                      "bytes": store.payload_bytes}))
    store.close()
    return 0


def _run_svd(args, runner):
    store = MatrixStore(args.input)
    cfg = SketchConfig(target_rank=args.rank, oversampling=args.oversample,
                       power_exponent=args.power, partitions=args.partitions,
                       master_seed=args.seed)
    t0 = time.perf_counter()
    factors, stats = runner(store, cfg, memory_budget_bytes=args.memory_budget)
    seconds = time.perf_counter() - t0
    # Snapshot counters before the error check adds its own extra pass.
    passes, reads, words = stats.full_passes, stats.block_reads, stats.words_read
    error = relative_frobenius_error(store, factors)
    report = {
        "m": store.m,
        "n": store.n,
        "rank": args.rank,
        "oversample": args.oversample,
        "power": args.power,
        "full_passes": float(passes),
        "block_reads": reads,
        "words_read": words,
        "seconds": seconds,
        "relative_frobenius_error": error,
        "stages": stats.stage_log,
    }
    if args.report:
        with open(args.report, "w") as f:
            json.dump(report, f, indent=2)
    print(json.dumps(report))
    store.close()
    return 0


def _cmd_rpca(args):
    if args.frames:
        import tempfile
        store_path = tempfile.mktemp(suffix=".oocm")
        source, stack = ingest_frames(args.frames, store_path)
    else:
        source = MatrixStore(args.input)
        stack = None
    cfg = RpcaConfig(target_rank=args.rank, oversampling=args.oversample,
                     power_exponent=args.power, lam=args.lam, mu0=args.mu0,
                     rho=args.rho, tol=args.tol,
                     max_iterations=args.max_iters, master_seed=args.seed,
                     memory_budget_bytes=args.memory_budget)
    result = ialm_rpca(source, cfg)
    if stack is not None:
        if args.output_lowrank:
            export_frames(result.L, stack, args.output_lowrank, clamp=True)
        if args.output_sparse:
            export_frames(result.S, stack, args.output_sparse, clamp=False)
    if args.report:
        with open(args.report, "w") as f:
            f.write(result.to_json_lines() + "\n")
    print(json.dumps({
        "iterations": result.iterations,
        "converged": result.converged,
        "final_residual": result.residual_history[-1],
    }))
    source.close()
    return 0


def _cmd_cost(args):
    report = estimate_costs(args.m, args.n, args.l, args.q, args.variant)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cmd_bench(args):
    import os

    rows = []
    for ratio in args.ratios:
        for size in args.sizes:
            if size > args.max_size:
                continue
            m, n, k = shape_from_ratio(ratio, size, 8)
            path = os.path.join(
                args.workdir,
                f"bench_{ratio[0]}x{ratio[1]}x{ratio[2]}_{size}.oocm",
            )
            spec = SyntheticSpec(m=m, n=n, k=k, seed=args.seed)
            store = gen_lowrank(spec, path, overwrite=True)
            cfg = SketchConfig(target_rank=args.rank,
                               oversampling=args.oversample,
                               power_exponent=args.power,
                               master_seed=args.seed)
            for variant, runner in (("proposed", brsvd_run),
                                    ("naive", rsvd_naive_ooc)):
                t0 = time.perf_counter()
                factors, stats = runner(
                    store, cfg, memory_budget_bytes=args.memory_budget)
                seconds = time.perf_counter() - t0
                passes = stats.full_passes
                error = relative_frobenius_error(store, factors)
                rows.append({
                    "size_bytes": store.payload_bytes,
                    "ratio": f"{ratio[0]}:{ratio[1]}:{ratio[2]}",
                    "variant": variant,
                    "passes": float(passes),
                    "seconds": seconds,
                    "error": error,
                })
            store.close()
            os.remove(path)
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.DictWriter(out, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    if out is not sys.stdout:
        out.close()
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "svd":
            return _run_svd(args, brsvd_run)
        if args.command == "svd-naive":
            return _run_svd(args, rsvd_naive_ooc)
        if args.command == "rpca":
            return _cmd_rpca(args)
        if args.command == "cost":
            return _cmd_cost(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return 2
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"blocksvd: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

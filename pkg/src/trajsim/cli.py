"""``trajsim`` command line.

Exit codes: 0 success, 2 usage error, 3 data or file-format error,
4 numeric failure. Every command writes ``<output>.manifest.json`` next to
its main output; all other outputs depend only on inputs, flags and seeds.
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .distance import DistanceMeasure, compute_matrix, load_matrix, save_matrix
from .encoder import SimformerConfig, encode_batch, export_attention, init_model, load_checkpoint, save_checkpoint
from .evaluation import evaluate_representations
from .exceptions import ArgumentError, ConfigError, NumericError, TrajsimError
from .metrics import concentration_stats, log10_surface_ratio, similarity_histogram
from .search import BENCH_METHODS, benchmark_query
from .training import TrainConfig, history_csv, train
from .trajectory import (
    filter_by_bbox,
    filter_by_length,
    generate_synthetic,
    normalize,
    parse_dataset,
    read_norm_stats,
    split,
    write_dataset,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
MAX_GT_SIZE = 20_000


class UsageError(Exception):
    pass


def _tool_version():
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _now():
    return datetime.now(timezone.utc).isoformat()


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` through a rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_manifest(args, outputs, inputs, started):
    primary = Path(outputs[0])
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command,
        "flags": flags,
        "seeds": {k: v for k, v in flags.items() if "seed" in k},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "tool_version": _tool_version(),
        "started": started,
        "finished": _now(),
    }
    atomic_write(primary.with_name(primary.name + ".manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _int_list(text):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _size_list(text):
    out = []
    for item in text.split(","):
        item = item.strip().lower()
        mult = 1000 if item.endswith("k") else 1
        try:
            out.append(int(float(item[:-1] if mult > 1 else item) * mult))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad size {item!r}") from None
    if not out or min(out) < 2:
        raise argparse.ArgumentTypeError(f"sizes must be >= 2, got {text!r}")
    return out


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _bbox(text):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bbox needs four numbers, got {text!r}") from None
    if len(vals) != 4 or not (vals[0] < vals[1] and vals[2] < vals[3]):
        raise argparse.ArgumentTypeError("bbox must be lon_min,lon_max,lat_min,lat_max with min < max")
    return vals


def _alpha(text):
    if text == "auto":
        return None
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be 'auto' or a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("alpha must be positive")
    return v


def _load_data(path, fmt):
    ds = parse_dataset(path, format=fmt)
    stats = read_norm_stats(path)
    if stats is not None:
        ds = type(ds)(ds.name, ds.trajectories, True, stats)
    return ds


# ----------------------------------------------------------------- commands


def cmd_gen(args):
    ds = generate_synthetic(args.count, args.len_min, args.len_max, args.seed)
    write_dataset(ds, args.out, args.format)
    return [args.out], []


def cmd_preprocess(args):
    ds = _load_data(args.inp, args.format)
    total = len(ds)
    ds = filter_by_length(ds, args.min_len, args.max_len)
    if args.bbox is not None:
        ds = filter_by_bbox(ds, *args.bbox)
    kept = len(ds)
    print(f"retained {kept} of {total} trajectories (dropped {total - kept})")
    if kept == 0:
        print("warning: no trajectories left after filtering", file=sys.stderr)
        atomic_write(args.out, "")
        return [args.out], [args.inp]
    if args.normalize:
        ds = normalize(ds)
    write_dataset(ds, args.out, args.format)
    return [args.out], [args.inp]


def cmd_gt(args):
    ds = _load_data(args.inp, args.format)
    if len(ds) > args.max_n:
        raise UsageError(f"refusing to compute a {len(ds)} x {len(ds)} matrix; the cap is {args.max_n}")
    scale = args.scale
    if scale not in ("max", "mean", "none"):
        try:
            scale = float(scale)
        except ValueError:
            raise UsageError(f"--scale must be max, mean, none or a number, got {scale!r}") from None
    gt = compute_matrix(ds, args.measure, alpha=args.alpha, worker_count=args.workers, scale=scale)
    save_matrix(gt, args.out)
    print(f"{gt.measure.value}: n={gt.n} alpha={gt.alpha} scale={gt.scale!r}")
    return [args.out], [args.inp]


def cmd_train(args):
    ds = _load_data(args.data, args.format)
    gt = load_matrix(args.gt)
    if gt.n != len(ds):
        raise ConfigError(f"matrix covers {gt.n} trajectories but the dataset has {len(ds)}")
    sp = split(ds, args.split_seed)
    longest = int(ds.lengths.max())
    if longest > args.max_len:
        raise ConfigError(f"dataset has a {longest}-point trajectory; raise --max-len or filter it out")
    max_len = args.max_len
    cfg = SimformerConfig(
        d=args.d, heads=args.heads, layers=args.layers, d_ff=args.d_ff,
        max_len=max_len, sim_fn=args.sim, measure=gt.measure.value,
    )
    tcfg = TrainConfig(
        lr=args.lr, batch_size=args.batch, pairs_per_anchor=args.pairs,
        max_epochs=args.epochs, patience=args.patience, seed=args.seed, max_steps=args.max_steps,
    )
    model = init_model(cfg, args.seed)

    def log(rec):
        if not args.quiet:
            print(f"epoch {rec.epoch}: loss={rec.train_loss:.6g} val_hr10={rec.val_hr10:.4f}", flush=True)

    best, history = train(model, ds, gt, tcfg, sp.train_ids, sp.val_ids, log=log)
    out = Path(args.out_ckpt)
    save_checkpoint(best, out)
    hist_path = out.with_name(out.name + ".history.csv")
    atomic_write(hist_path, history_csv(history))
    split_path = out.with_name(out.name + ".split.json")
    atomic_write(split_path, json.dumps(sp.to_dict(), sort_keys=True) + "\n")
    return [out, hist_path, split_path], [args.data, args.gt]


def _check_compatible(model, ds, gt):
    if gt.n != len(ds):
        raise ConfigError(f"matrix covers {gt.n} trajectories but the dataset has {len(ds)}")
    longest = int(ds.lengths.max())
    if longest > model.config.max_len:
        raise ConfigError(f"dataset has a {longest}-point trajectory; the checkpoint supports {model.config.max_len}")
    if model.config.sim_fn == "tailored" and model.config.measure != gt.measure.value:
        raise ConfigError(f"checkpoint was trained for {model.config.measure}, matrix holds {gt.measure.value}")


def cmd_eval(args):
    model = load_checkpoint(args.ckpt)
    ds = _load_data(args.data, args.format)
    gt = load_matrix(args.gt)
    _check_compatible(model, ds, gt)
    test_ids = np.array(split(ds, args.split_seed).test_ids, dtype=np.int64)
    pool = len(test_ids) - 1
    ks = sorted(set(args.k))
    inv_ks = sorted(set(args.inv_k))
    if max(ks + inv_ks) > pool:
        raise UsageError(f"k={max(ks + inv_ks)} exceeds the {pool} candidates per test query")
    recall = [(args.t, k) for k in ks if k > args.t]
    queries = None
    if args.queries != "all":
        try:
            nq = int(args.queries)
        except ValueError:
            raise UsageError(f"--queries must be 'all' or a count, got {args.queries!r}") from None
        if not 1 <= nq <= len(test_ids):
            raise UsageError(f"--queries must be in [1, {len(test_ids)}]")
        rng = np.random.default_rng(args.seed)
        queries = np.sort(rng.choice(test_ids, size=nq, replace=False))
    reps = encode_batch(model, [ds[i] for i in test_ids], batch_size=32)
    report = evaluate_representations(
        reps, gt, test_ids, model.config.sim_fn, ks=ks, recall=recall,
        inversion_ks=inv_ks, measure=model.config.measure, queries=queries,
    )
    atomic_write(args.out_report, report.to_json())
    print(report.to_json(), end="")
    return [args.out_report], [args.ckpt, args.data, args.gt]


def cmd_bench(args):
    ds = _load_data(args.data, args.format)
    methods = [m.strip() for m in args.methods.split(",")]
    aliases = {"brute": "brute_exact", "nonlearning": "non_learning", "non_learning": "non_learning",
               "learned": "learned", "brute_exact": "brute_exact"}
    try:
        methods = [aliases[m] for m in methods]
    except KeyError as exc:
        raise UsageError(f"unknown method {exc.args[0]!r}; choose from brute, nonlearning, learned") from None
    if max(args.sizes) > len(ds):
        raise UsageError(f"size {max(args.sizes)} exceeds the {len(ds)} trajectories available")
    model = None
    if "learned" in methods:
        if args.ckpt is None:
            raise UsageError("the learned method needs --ckpt")
        model = load_checkpoint(args.ckpt)
    rows = ["method,n,k,mean_ms,std_ms"]
    for n in args.sizes:
        subset = ds.subset(range(n))
        reps = encode_batch(model, subset.trajectories, batch_size=32) if model is not None else None
        for method in methods:
            rep = benchmark_query(subset, method, args.k, args.queries, args.seed, measure=args.measure,
                                  model=model, reps=reps, radius=args.radius)
            if rep.times_ms:
                rows.append(rep.csv_row())
                print(rows[-1], flush=True)
    atomic_write(args.out, "\n".join(rows) + "\n")
    return [args.out], [args.data] + ([args.ckpt] if args.ckpt else [])


def cmd_analyze(args):
    inputs = []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.mode == "ratio":
        if args.d_min > args.d_max:
            raise UsageError("--d-min must not exceed --d-max")
        w.writerow(["d", "log10_R"])
        for d in range(args.d_min, args.d_max + 1):
            w.writerow([d, repr(log10_surface_ratio(d))])
    elif args.mode == "histogram":
        if args.gt is None:
            raise UsageError("histogram mode needs --gt")
        gt = load_matrix(args.gt)
        inputs.append(args.gt)
        iu = np.triu_indices(gt.n, 1)
        values = gt.similarities()[iu]
        counts = similarity_histogram(values, args.bins)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for b, c in enumerate(counts):
            w.writerow([repr(b / args.bins), repr((b + 1) / args.bins), int(c)])
    else:
        if args.ckpt is None or args.data is None:
            raise UsageError(f"{args.mode} mode needs --ckpt and --data")
        model = load_checkpoint(args.ckpt)
        ds = _load_data(args.data, args.format)
        inputs += [args.ckpt, args.data]
        if args.mode == "attention":
            if args.id is None or not 0 <= args.id < len(ds):
                raise UsageError(f"attention mode needs --id in [0, {len(ds) - 1}]")
            weights = export_attention(model, ds[args.id])
            w.writerow(["point_index", "weight"])
            for i, v in enumerate(weights):
                w.writerow([i, repr(float(v))])
        else:
            ids = list(range(len(ds))) if args.split_seed is None else list(split(ds, args.split_seed).test_ids)
            reps = encode_batch(model, [ds[i] for i in ids], batch_size=32)
            stats = concentration_stats(reps)
            w.writerow(["dim", "mean", "std"])
            for k, (m, s) in enumerate(zip(stats.means, stats.stds)):
                w.writerow([k, repr(float(m)), repr(float(s))])
            print(f"avg_std={stats.avg_std!r}")
    atomic_write(args.out, buf.getvalue())
    return [args.out], inputs


# ------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="trajsim", description="Trajectory similarity learning toolkit.")
    p.add_argument("--version", action="version", version=_tool_version())
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = {"choices": ("csv", "jsonl"), "default": "csv", "help": "trajectory file format"}

    g = sub.add_parser("gen", help="generate synthetic random-walk trajectories")
    g.add_argument("--count", type=_positive_int, required=True)
    g.add_argument("--len-min", type=_positive_int, default=10)
    g.add_argument("--len-max", type=_positive_int, default=200)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--format", **fmt)
    g.set_defaults(func=cmd_gen)

    g = sub.add_parser("preprocess", help="length/box filtering and normalization")
    g.add_argument("--in", dest="inp", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--min-len", type=_positive_int, default=10)
    g.add_argument("--max-len", type=_positive_int, default=200)
    g.add_argument("--bbox", type=_bbox, default=None, help="lon_min,lon_max,lat_min,lat_max")
    g.add_argument("--normalize", action="store_true")
    g.add_argument("--format", **fmt)
    g.set_defaults(func=cmd_preprocess)

    g = sub.add_parser("gt", help="exact pairwise distance matrix")
    g.add_argument("--in", dest="inp", required=True)
    g.add_argument("--measure", choices=[m.value for m in DistanceMeasure], required=True)
    g.add_argument("--alpha", type=_alpha, default=None, help="'auto' (16 for dtw, 8 otherwise) or a number")
    g.add_argument("--scale", default="max", help="distance unit of the similarity transform: max, mean, none or a number")
    g.add_argument("--workers", type=_positive_int, default=1)
    g.add_argument("--max-n", type=_positive_int, default=MAX_GT_SIZE)
    g.add_argument("--out", required=True)
    g.add_argument("--format", **fmt)
    g.set_defaults(func=cmd_gt)

    g = sub.add_parser("train", help="train an encoder")
    g.add_argument("--data", required=True)
    g.add_argument("--gt", required=True)
    g.add_argument("--split-seed", type=int, default=0)
    g.add_argument("--sim", choices=("euclidean", "cosine", "chebyshev", "tailored"), default="tailored")
    g.add_argument("--d", type=_positive_int, default=128)
    g.add_argument("--heads", type=_positive_int, default=16)
    g.add_argument("--layers", type=_positive_int, default=1)
    g.add_argument("--d-ff", type=_positive_int, default=None)
    g.add_argument("--max-len", type=_positive_int, default=200)
    g.add_argument("--lr", type=float, default=5e-4)
    g.add_argument("--batch", type=_positive_int, default=20)
    g.add_argument("--pairs", type=_positive_int, default=20)
    g.add_argument("--epochs", type=int, default=200)
    g.add_argument("--patience", type=_positive_int, default=20)
    g.add_argument("--max-steps", type=_positive_int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-ckpt", required=True)
    g.add_argument("--quiet", action="store_true")
    g.add_argument("--format", **fmt)
    g.set_defaults(func=cmd_train)

    g = sub.add_parser("eval", help="top-k metrics on the test split")
    g.add_argument("--ckpt", required=True)
    g.add_argument("--data", required=True)
    g.add_argument("--gt", required=True)
    g.add_argument("--split-seed", type=int, default=0)
    g.add_argument("--k", type=_int_list, default=[1, 10, 50])
    g.add_argument("--t", type=_positive_int, default=10)
    g.add_argument("--inv-k", type=_int_list, default=[10, 20, 50, 100])
    g.add_argument("--queries", default="all")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-report", required=True)
    g.add_argument("--format", **fmt)
    g.set_defaults(func=cmd_eval)

    g = sub.add_parser("bench", help="query-time benchmark")
    g.add_argument("--data", required=True)
    g.add_argument("--measure", choices=[m.value for m in DistanceMeasure], default="dtw")
    g.add_argument("--methods", default="brute,nonlearning,learned")
    g.add_argument("--sizes", type=_size_list, default=[1000, 5000, 10000])
    g.add_argument("--k", type=_positive_int, default=50)
    g.add_argument("--queries", type=int, default=100)
    g.add_argument("--radius", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ckpt", default=None)
    g.add_argument("--out", required=True)
    g.add_argument("--format", **fmt)
    g.set_defaults(func=cmd_bench)

    g = sub.add_parser("analyze", help="surface ratio, concentration, histogram or attention export")
    g.add_argument("--mode", choices=("ratio", "concentration", "histogram", "attention"), required=True)
    g.add_argument("--d-min", type=_positive_int, default=2)
    g.add_argument("--d-max", type=_positive_int, default=256)
    g.add_argument("--gt", default=None)
    g.add_argument("--bins", type=_positive_int, default=20)
    g.add_argument("--ckpt", default=None)
    g.add_argument("--data", default=None)
    g.add_argument("--split-seed", type=int, default=None, help="restrict concentration to this split's test ids")
    g.add_argument("--id", type=int, default=None)
    g.add_argument("--out", required=True)
    g.add_argument("--format", **fmt)
    g.set_defaults(func=cmd_analyze)
    return p


def main(argv=None):
    parser = build_parser()
    started = _now()
    try:
        args = parser.parse_args(argv)
        outputs, inputs = args.func(args)
        write_manifest(args, outputs, inputs, started)
        return EXIT_OK
    except UsageError as exc:
        print(f"trajsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"trajsim: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArgumentError as exc:
        print(f"trajsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrajsimError, OSError, json.JSONDecodeError) as exc:
        print(f"trajsim: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

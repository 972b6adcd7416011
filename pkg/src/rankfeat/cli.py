"""Command-line entry point: ``rankfeat {score,eval,diagnose,synth,bench-pi,bench}``.

Exit codes: 0 on success, 1 on I/O or format errors (and numerical
failures), 2 on validation errors. Feature files are NPY arrays of shape
``(N, C, HW)``, or ``(C, HW)`` for a single sample. Score files are CSV
``index,score`` with a ``.manifest.json`` sidecar, or a JSON document with
the manifest embedded. Manifests carry no timestamp unless
``--record-time`` is given, so reruns are byte-identical.
"""
import argparse
import csv
import datetime
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import diagnostics, evalkit, scoring, synth
from .errors import ConvergenceError, InvalidInputError, NpyFormatError, RankFeatError
from .linalg import power_iteration, singular_values, subtract_rank_n
from .npyio import read_npy, write_npy
from .pipeline import ClassifierHead, FeatureMatrix, LinearLayer, forward_head, forward_layer, head_logits

VERSION = "0.1.0"

DIAG_COLUMNS = ("index", "explained_variance", "sigma2", "t", "n",
                "lambda_minus", "lambda_plus", "kl_before", "kl_after")

__all__ = ["main", "read_npy", "write_npy", "DIAG_COLUMNS"]


# -- output helpers -----------------------------------------------------------

def _clean(obj):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _json_text(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _fmt(x):
    return repr(float(x))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _manifest(args, argv, seeds=(), configs=None, synthetic=False):
    m = {
        "tool": "rankfeat",
        "version": VERSION,
        "command": ["rankfeat", *argv],
        "seeds": list(seeds),
        "configs": configs or {},
        "timestamp": None,
    }
    if synthetic:
        # results from generated data are not comparable to real-backbone numbers
        m["data"] = "synthetic"
    if getattr(args, "record_time", False):
        m["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return m


def _write_table(path, header, rows, manifest, key="rows"):
    """CSV plus sidecar manifest, or a JSON document with both inside."""
    if path.endswith(".json"):
        doc = {"manifest": manifest, key: [dict(zip(header, r)) for r in rows]}
        _write_text(path, _json_text(doc))
    else:
        _write_text(path, _csv_text(header, rows))
        _write_text(path + ".manifest.json", _json_text(manifest))


# -- input helpers ------------------------------------------------------------

def _batch(path, name):
    a = read_npy(path)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise InvalidInputError(f"{name} {path}: expected (N, C, HW) or (C, HW), got shape {a.shape}")
    return a


def _features(a, name):
    if a.shape[1] < 1 or a.shape[2] < 1:
        raise InvalidInputError(f"{name}: empty feature maps of shape {a.shape[1:]}")
    return [FeatureMatrix.from_array(x) for x in a]


def _head(spec):
    parts = spec.split(",")
    if len(parts) != 2:
        raise InvalidInputError("--head takes two paths: W.npy,b.npy")
    w = read_npy(parts[0])
    b = read_npy(parts[1])
    if w.ndim != 2:
        raise InvalidInputError(f"--head weight {parts[0]}: must be 2-D, got shape {w.shape}")
    if b.ndim != 1:
        raise InvalidInputError(f"--head bias {parts[1]}: must be 1-D, got shape {b.shape}")
    return ClassifierHead(w, b)


def _layer(path):
    if path is None:
        return None
    m = read_npy(path)
    if m.ndim != 2:
        raise InvalidInputError(f"--layer {path}: must be 2-D, got shape {m.shape}")
    return LinearLayer(m)


def _read_scores(path):
    if path.endswith(".json"):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise NpyFormatError(f"{path}: invalid JSON ({exc.msg})", exc.pos) from None
        rows = doc.get("scores", doc) if isinstance(doc, dict) else doc
        vals = [r["score"] if isinstance(r, dict) else r for r in rows]
    else:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "score" not in reader.fieldnames:
                raise InvalidInputError(f"{path}: CSV needs a 'score' column")
            vals = [row["score"] for row in reader]
    try:
        return np.array([float(v) for v in vals], dtype=np.float64)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{path}: non-numeric score") from None


def _pair(text, sep, name):
    try:
        a, b = (int(v) for v in text.lower().split(sep))
    except ValueError:
        raise InvalidInputError(f"{name} must look like 256{sep}400, got {text!r}") from None
    return a, b


def _int_list(text, name):
    try:
        vals = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise InvalidInputError(f"{name} must be a comma-separated list of integers") from None
    if not vals or min(vals) < 1:
        raise InvalidInputError(f"{name} entries must be >= 1")
    return vals


# -- score --------------------------------------------------------------------

def _react_config(args):
    if args.react_tau is None:
        raise InvalidInputError("--method react needs --react-tau <value|calibrate:path>")
    if args.react_tau.startswith("calibrate:"):
        path = args.react_tau.split(":", 1)[1]
        cal = _features(_batch(path, "--react-tau calibration"), "--react-tau calibration")
        return scoring.calibrate_react_tau(cal, args.react_percentile)
    try:
        return scoring.ReActConfig(float(args.react_tau))
    except ValueError:
        raise InvalidInputError(f"--react-tau: not a number: {args.react_tau!r}") from None


def _score_fn(args, head, layer, pruned, react_cfg):
    """Return ``fn(feature) -> (score, logits or None)`` for the chosen method."""
    method = args.method
    odin_cfg = scoring.OdinConfig(args.odin_temperature)

    def fn(prev):
        feat = forward_layer(prev, layer) if layer is not None else prev
        if method == "msp":
            return scoring.msp_score(forward_head(feat, head)), None
        if method == "odin":
            return scoring.odin_score(forward_head(feat, head), odin_cfg), None
        if method == "energy":
            y = forward_head(feat, head)
            return scoring.energy_score(y), y
        if method == "react":
            y = head_logits(scoring.react_transform(feat, react_cfg), head)
            return scoring.energy_score(y), y
        if method == "rankfeat":
            r = scoring.rankfeat_score(feat, head, args.pi_iters)
            return r.score, r.logits
        lifted = forward_layer(prev, pruned)
        if method == "rankweight":
            y = forward_head(lifted, head)
            return scoring.energy_score(y), y
        r = scoring.rankfeat_score(lifted, head, args.pi_iters)
        return r.score, r.logits

    return fn


def cmd_score(args, argv):
    head = _head(args.head)
    layer = _layer(args.layer)
    if args.method in synth.LAYER_METHODS and layer is None:
        raise InvalidInputError(f"--method {args.method} needs --layer")
    if args.fuse and args.method in ("msp", "odin"):
        raise InvalidInputError("--fuse combines logits; use an energy-family method")
    if args.pi_iters < 0:
        raise InvalidInputError("--pi-iters must be >= 0")
    feats = _features(_batch(args.features, "--features"), "--features")
    expect = layer.mat.shape[0] if layer is not None else feats[0].channels if feats else head.in_features
    if layer is not None and feats and layer.mat.shape[1] != feats[0].channels:
        raise InvalidInputError(f"--layer has {layer.mat.shape[1]} input channels, --features has {feats[0].channels}")
    if expect != head.in_features:
        raise InvalidInputError(f"--head expects {head.in_features} channels, features have {expect}")
    fused = None
    if args.fuse:
        fused = _features(_batch(args.fuse, "--fuse"), "--fuse")
        if len(fused) != len(feats):
            raise InvalidInputError(f"--fuse has {len(fused)} samples, --features has {len(feats)}")
    react_cfg = _react_config(args) if args.method == "react" else None
    pruned = scoring.rankweight_prune(layer) if args.method in synth.LAYER_METHODS else None
    fn = _score_fn(args, head, layer, pruned, react_cfg)

    if fused is None:
        scores = [s for s, _ in scoring.map_ordered(fn, feats, args.jobs)]
    else:
        def both(pair):
            return scoring.fuse_logits(fn(pair[0])[1], fn(pair[1])[1])
        scores = scoring.map_ordered(both, list(zip(feats, fused)), args.jobs)

    manifest = _manifest(args, argv, configs={
        "method": args.method, "pi_iters": args.pi_iters,
        "odin_temperature": args.odin_temperature,
        "react_tau": None if react_cfg is None else react_cfg.tau,
        "react_percentile": args.react_percentile,
        "fuse": bool(args.fuse), "n": len(scores),
    })
    rows = [(i, _fmt(s)) for i, s in enumerate(scores)]
    if args.out.endswith(".json"):
        rows = [(i, float(s)) for i, s in enumerate(scores)]
    _write_table(args.out, ("index", "score"), rows, manifest, key="scores")
    return 0


# -- eval ---------------------------------------------------------------------

def cmd_eval(args, argv):
    ids = _read_scores(args.id)
    oods = _read_scores(args.ood)
    if ids.size == 0 or oods.size == 0:
        raise InvalidInputError("--id and --ood must both contain scores")
    report = evalkit.evaluate(evalkit.ScoreSet(ids, oods), args.tpr).as_dict()
    text = _json_text(report)
    sys.stdout.write(text)
    if args.out:
        _write_text(args.out, _json_text({"manifest": _manifest(args, argv, configs={"tpr": args.tpr}),
                                          "report": report}))
    return 0


# -- diagnose -----------------------------------------------------------------

def _diag_row(x, args):
    mat = x.mat
    s = singular_values(mat)
    k = min(args.top_k, s.size)
    ev = diagnostics.explained_variance(s, min(args.explained_k, s.size))
    fit, kl = diagnostics.feature_kl(mat, args.bins, args.epsilon)
    after = None
    if args.remove_rank1:
        reduced = subtract_rank_n(mat, 1)
        after = diagnostics.feature_kl(reduced, args.bins, args.epsilon)[1].kl if np.any(reduced) else None
    top = list(s[:k]) + [None] * (args.top_k - k)
    return top, [ev, fit.sigma2, fit.t, fit.n, fit.lambda_minus, fit.lambda_plus, kl.kl, after]


def cmd_diagnose(args, argv):
    if args.top_k < 1 or args.explained_k < 1:
        raise InvalidInputError("--top-k and --explained-k must be >= 1")
    feats = _features(_batch(args.features, "--features"), "--features")
    results = scoring.map_ordered(lambda x: _diag_row(x, args), feats, args.jobs)
    header = [DIAG_COLUMNS[0]] + [f"s{j + 1}" for j in range(args.top_k)] + list(DIAG_COLUMNS[1:])

    def cell(v):
        return "" if v is None else (str(v) if isinstance(v, int) else _fmt(v))

    rows = [[str(i)] + [cell(v) for v in top + rest] for i, (top, rest) in enumerate(results)]
    if results:
        cols = list(zip(*[top + rest for top, rest in results]))
        means = []
        for c in cols:
            vals = [v for v in c if v is not None]
            means.append(float(np.mean(vals)) if len(vals) == len(c) else None)
        rows.append(["mean"] + [cell(v) for v in means])
    manifest = _manifest(args, argv, configs={
        "bins": args.bins, "epsilon": args.epsilon, "remove_rank1": args.remove_rank1,
        "explained_k": args.explained_k, "top_k": args.top_k, "n": len(feats),
    })
    _write_text(args.out, _csv_text(header, rows))
    _write_text(args.out + ".manifest.json", _json_text(manifest))
    return 0


# -- synth --------------------------------------------------------------------

def _synth_config(args, spike, seed, pathway_spike=0.0):
    return synth.SynthConfig(args.channels, args.height, args.width, spike, args.bulk_scale,
                             seed, args.nonnegative, pathway_spike)


def cmd_synth(args, argv):
    if args.n < 0:
        raise InvalidInputError("--n must be >= 0")
    base = _synth_config(args, args.spike, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    mats = []
    ratios = []
    seeds = []
    for i in range(args.n):
        seed = synth.sample_seed(args.seed, i, 0, stride=1)
        x = synth.gen_feature(_synth_config(args, args.spike, seed))
        mats.append(x.mat)
        ratios.append(synth.spike_ratio(x))
        seeds.append(seed)
    batch = np.stack(mats) if mats else np.zeros((0, args.channels, base.spatial))
    write_npy(batch, os.path.join(args.out_dir, "features.npy"))
    files = ["features.npy"]
    if args.head_classes:
        head = synth.gen_head(args.head_classes, args.channels, args.head_seed)
        write_npy(head.weight, os.path.join(args.out_dir, "head_W.npy"))
        write_npy(head.bias, os.path.join(args.out_dir, "head_b.npy"))
        files += ["head_W.npy", "head_b.npy"]
    finite = [r for r in ratios if math.isfinite(r)]
    manifest = _manifest(args, argv, seeds=seeds, synthetic=True, configs={
        "synth": base.as_dict(), "n": args.n, "seed_scheme": "seed + index",
        "head_classes": args.head_classes, "head_seed": args.head_seed if args.head_classes else None,
    })
    manifest["files"] = files
    manifest["summary"] = {"mean_spike_ratio": float(np.mean(finite)) if finite else None,
                           "min_spike_ratio": min(finite) if finite else None}
    _write_text(os.path.join(args.out_dir, "manifest.json"), _json_text(manifest))
    return 0


# -- bench-pi -----------------------------------------------------------------

def cmd_bench_pi(args, argv):
    iters = _int_list(args.iters, "--iters")
    rows_n, cols_n = _pair(args.shape, "x", "--shape")
    if args.trials < 1:
        raise InvalidInputError("--trials must be >= 1")
    mats = []
    for i in range(args.trials):
        cfg = synth.SynthConfig(rows_n, cols_n, 1, args.spike, 1.0, synth.sample_seed(args.seed, i, 0, 1))
        mats.append(synth.gen_feature(cfg).mat)
    exact = [float(singular_values(m)[0]) for m in mats]
    header = ["iters", "median_rel_error", "max_rel_error"] + (["ms_per_matrix"] if args.timing else [])
    rows = []
    for k in iters:
        errs = []
        t0 = time.perf_counter()
        for m, s in zip(mats, exact):
            res = power_iteration(m, max_iters=k, tol=args.tol)
            errs.append(abs(res.triplet.s - s) / s)
        elapsed = time.perf_counter() - t0
        row = [str(k), _fmt(np.median(errs)), _fmt(max(errs))]
        if args.timing:
            row.append(f"{1000.0 * elapsed / len(mats):.3f}")
        rows.append(row)
    manifest = _manifest(args, argv, seeds=[args.seed], synthetic=True, configs={
        "iters": iters, "shape": [rows_n, cols_n], "trials": args.trials,
        "spike": args.spike, "tol": args.tol, "timing": args.timing,
    })
    text = _csv_text(header, rows)
    sys.stdout.write(text)
    if args.out:
        _write_text(args.out, text)
        _write_text(args.out + ".manifest.json", _json_text(manifest))
    return 0


# -- bench --------------------------------------------------------------------

def cmd_bench(args, argv):
    methods = [m for m in args.methods.split(",") if m]
    if args.n < 1:
        raise InvalidInputError("--n must be >= 1")
    id_cfg = _synth_config(args, args.id_spike, 0)
    ood_cfg = _synth_config(args, args.ood_spike, 0, args.ood_pathway_spike)
    head = synth.gen_head(args.head_classes, args.channels, args.head_seed)
    layer = None
    if args.layer_seed is not None:
        layer = synth.gen_layer(args.channels, args.channels, args.layer_seed, args.layer_spike)
    bench = synth.gen_benchmark(id_cfg, ood_cfg, args.n, head, args.seed, methods, layer=layer,
                                pi_iters=args.pi_iters, odin_temperature=args.odin_temperature,
                                react_percentile=args.react_percentile, jobs=args.jobs)
    rows = []
    for m in methods:
        r = evalkit.evaluate(bench.score_sets[m], args.tpr)
        rows.append((m, _fmt(r.fpr95), _fmt(r.auroc)))
    manifest = _manifest(args, argv, seeds=[args.seed], synthetic=True, configs={
        "benchmark": bench.manifest, "head_classes": args.head_classes, "head_seed": args.head_seed,
        "layer_seed": args.layer_seed, "layer_spike": args.layer_spike, "tpr": args.tpr,
    })
    text = _csv_text(("method", "fpr95", "auroc"), rows)
    sys.stdout.write(text)
    if args.out:
        _write_text(args.out, text)
        _write_text(args.out + ".manifest.json", _json_text(manifest))
    return 0


# -- parser -------------------------------------------------------------------

def _add_synth_flags(p):
    p.add_argument("--channels", type=int, default=64)
    p.add_argument("--height", type=int, default=14)
    p.add_argument("--width", type=int, default=14)
    p.add_argument("--bulk-scale", type=float, default=1.0)
    p.add_argument("--nonnegative", action="store_true", help="clamp features at zero")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="rankfeat", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"rankfeat {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--record-time", action="store_true", help="put a UTC timestamp in the manifest")
    common.add_argument("--jobs", type=int, default=1, help="worker threads; output order is unchanged")

    p = sub.add_parser("score", parents=[common], help="score a batch of features")
    p.add_argument("--features", required=True)
    p.add_argument("--head", required=True, metavar="W.npy,b.npy")
    p.add_argument("--method", choices=synth.METHODS, default="rankfeat")
    p.add_argument("--pi-iters", type=int, default=0, help="0 uses the exact SVD")
    p.add_argument("--layer", help="layer matrix applied before the head (required for RankWeight)")
    p.add_argument("--react-tau", help="threshold, or calibrate:ID_FEATURES.npy")
    p.add_argument("--react-percentile", type=float, default=scoring.DEFAULT_REACT_PERCENTILE)
    p.add_argument("--odin-temperature", type=float, default=scoring.DEFAULT_ODIN_TEMPERATURE)
    p.add_argument("--fuse", help="second feature batch; scores the mean of both logit vectors")
    p.add_argument("--out", required=True, help=".csv (with sidecar manifest) or .json")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", parents=[common], help="FPR95 and AUROC from two score files")
    p.add_argument("--id", required=True)
    p.add_argument("--ood", required=True)
    p.add_argument("--tpr", type=float, default=evalkit.DEFAULT_TPR)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", parents=[common], help="spectral and MP diagnostics per sample")
    p.add_argument("--features", required=True)
    p.add_argument("--bins", type=int, default=diagnostics.DEFAULT_BINS)
    p.add_argument("--epsilon", type=float, default=diagnostics.DEFAULT_EPSILON)
    p.add_argument("--remove-rank1", action="store_true")
    p.add_argument("--explained-k", type=int, default=1)
    p.add_argument("--top-k", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("synth", parents=[common], help="write seeded synthetic features")
    _add_synth_flags(p)
    p.add_argument("--spike", type=float, default=0.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--head-classes", type=int, default=0, help="also write a random head with Q classes")
    p.add_argument("--head-seed", type=int, default=7)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench-pi", parents=[common], help="power iteration error against the SVD")
    p.add_argument("--iters", default="5,20,100")
    p.add_argument("--shape", default="256x400")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spike", type=float, default=2.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--timing", action="store_true", help="add wall-clock column (not reproducible)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench_pi)

    p = sub.add_parser("bench", parents=[common], help="synthetic ID-vs-OOD benchmark")
    _add_synth_flags(p)
    p.add_argument("--id-spike", type=float, default=1.2)
    p.add_argument("--ood-spike", type=float, default=4.0)
    p.add_argument("--ood-pathway-spike", type=float, default=0.0)
    p.add_argument("--n", type=int, default=500, help="samples per side")
    p.add_argument("--methods", default="msp,odin,energy,react,rankfeat")
    p.add_argument("--head-classes", type=int, default=10)
    p.add_argument("--head-seed", type=int, default=7)
    p.add_argument("--layer-seed", type=int, help="add a random layer (needed for RankWeight)")
    p.add_argument("--layer-spike", type=float, default=0.0)
    p.add_argument("--pi-iters", type=int, default=0)
    p.add_argument("--react-percentile", type=float, default=scoring.DEFAULT_REACT_PERCENTILE)
    p.add_argument("--odin-temperature", type=float, default=scoring.DEFAULT_ODIN_TEMPERATURE)
    p.add_argument("--tpr", type=float, default=evalkit.DEFAULT_TPR)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("rankfeat: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args, argv)
    except (NpyFormatError, OSError, ConvergenceError) as exc:
        print(f"rankfeat: error: {exc}", file=sys.stderr)
        return 1
    except (RankFeatError, ValueError) as exc:
        print(f"rankfeat: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

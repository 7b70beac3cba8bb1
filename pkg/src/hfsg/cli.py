"""Command-line entry point: ``hfsg <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .aggregator import (aggregate_signatures, build_activation_matrix, compute_power_shares,
                         cond_mirror, file_digest, make_datasets, pearson)
from .bench import EXPERIMENTS, MODELS, run_experiment
from .config import RunConfig, describe_keys, format_value, parse_config
from .corpus import pseudo_real_corpus
from .errors import HfsgError, PipelineError
from .features import (FeatureLayout, feature_matrix, form_factor, phase_shift, temporal_centroid,
                       wavelet_energy)
from .genmodel import make_submetered
from .latent import fit_pca, load_model, project, reconstruct, reconstruction_mae, save_model
from .metrics3d import EmbeddedCloud, evaluate, evaluate_clouds
from .rng import stream
from .signalio import (SignatureMatrix, generate_voltage_reference, read_matrix,
                       write_signature_matrix)


# --- small helpers -------------------------------------------------------------

def _parse_sets(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_matrix_csv(path, data, integer=False):
    data = np.atleast_2d(np.asarray(data))
    with open(path, "w") as fh:
        for row in data:
            fh.write(",".join(str(int(v)) if integer else repr(float(v)) for v in row) + "\n")


def _write_manifest(path, config, extra):
    lines = [f"hfsg_version={__version__}"]
    lines += [f"{k}={format_value(v)}" for k, v in config.as_dict().items()]
    lines += [f"{k}={v}" for k, v in extra.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def _default_model(seed=0):
    corpus = pseudo_real_corpus(200, seed=seed)
    return fit_pca(corpus, variance_threshold=0.99)


# --- subcommands ---------------------------------------------------------------

def cmd_corpus(args):
    x = pseudo_real_corpus(args.n, n_samples=args.samples, seed=args.seed)
    write_signature_matrix(x, args.out)
    print(f"wrote {x.n_rows} x {x.n_samples} pseudo-real signatures to {args.out}")


def cmd_train(args):
    x = read_matrix(args.input)
    t0 = time.perf_counter()
    model = fit_pca(x, args.components, args.variance_threshold)
    elapsed = time.perf_counter() - t0
    mae = reconstruction_mae(x, reconstruct(model, project(model, x)))
    save_model(model, args.out)
    print(f"components={model.n_components} explained_variance={model.explained_variance_ratio.sum():.6f} "
          f"mae={mae:.6g} fit_seconds={elapsed:.2f}")
    print(f"wrote {args.out}")


def cmd_generate(args):
    model = load_model(args.model)
    cfg = RunConfig(seed=args.seed, n_samples=args.samples, n_classes=args.classes,
                    modes_per_class=args.modes, brands_per_class=args.brands, separability=args.sep)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        latent = make_submetered(cfg.generation(), model)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_signature_matrix(SignatureMatrix(latent.z, 1.0, 1), out / "z.sigmat")
    _write_csv(out / "labels.csv", ["row", "y_g", "y_class", "y_brand"],
               [(i, int(g), int(c), int(b)) for i, (g, c, b)
                in enumerate(zip(latent.y_g, latent.y_class, latent.y_brand))])
    _write_manifest(out / "manifest.cfg", cfg, {
        "model_sha256": file_digest(args.model), "effective_n_samples": len(latent),
        "n_components": model.n_components})
    print(f"wrote {len(latent)} latent rows to {out}")


def _load_run_config(args, base=None):
    overrides = _parse_sets(args.set)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    return parse_config(args.config, overrides, base)


def cmd_synth(args):
    cfg = _load_run_config(args)
    if args.model:
        split = make_datasets(cfg, model_path=args.model)
    else:
        split = make_datasets(cfg, real=read_matrix(args.real))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for part, d in (("train", split.train), ("test", split.test)):
        write_signature_matrix(d.x_a, out / f"x_{part}.sigmat")
        _write_matrix_csv(out / f"p_{part}.csv", d.p_a)
        _write_matrix_csv(out / f"yclass_{part}.csv", d.y_class_ind, integer=True)
        _write_matrix_csv(out / f"ybrand_{part}.csv", d.y_brand_ind, integer=True)
        _write_matrix_csv(out / f"activation_{part}.csv", d.activation.a, integer=True)
        names += [f"x_{part}.sigmat", f"p_{part}.csv", f"yclass_{part}.csv", f"ybrand_{part}.csv",
                  f"activation_{part}.csv"]
    prov = split.train.provenance
    extra = {
        "source": "model" if args.model else "real",
        "input_sha256": file_digest(args.model or args.real),
        "effective_n_samples": prov["effective_n_samples"],
        "n_components": prov["n_components"],
        "n_train": len(split.train),
        "n_test": len(split.test),
        "train_brands": " ".join(str(int(b)) for b in split.train_brands),
        "test_brands": " ".join(str(int(b)) for b in split.test_brands),
        "notes": " | ".join(prov["notes"]) or "none",
    }
    extra.update({f"sha256_{n}": file_digest(out / n) for n in names})
    _write_manifest(out / "manifest.cfg", cfg, extra)
    for note in prov["notes"]:
        print(f"warning: {note}", file=sys.stderr)
    print(f"wrote {len(split.train)} train and {len(split.test)} test scenarios to {out}")


def cmd_evaluate(args):
    model = load_model(args.model)
    report = evaluate(read_matrix(args.real), read_matrix(args.synthetic), model, args.knn_k)
    _write_csv(args.out, ["name", "grid", "value"],
               [(name, "" if g is None else _fmt(g), _fmt(v)) for name, g, v in report.rows()])
    print(f"IP_alpha={report.ip_alpha:.4f} IR_beta={report.ir_beta:.4f} "
          f"authenticity={report.authenticity:.4f}")


def cmd_features(args):
    x = read_matrix(args.input)
    layout = FeatureLayout(n_samples=x.n_samples, samples_per_cycle=x.samples_per_cycle,
                           wavelet_levels=args.wavelet_levels, vi_points=args.vi_points)
    f0 = x.sample_rate_hz / x.samples_per_cycle
    v = generate_voltage_reference(f0, x.sample_rate_hz, x.n_samples, args.voltage_amplitude)
    feats = feature_matrix(x.data, v, layout)
    _write_csv(args.out, layout.names(), ([repr(float(a)) for a in row] for row in feats))
    print(f"wrote {feats.shape[0]} x {feats.shape[1]} features to {args.out}")


def cmd_bench(args):
    preset, values = EXPERIMENTS[args.experiment]
    cfg = _load_run_config(args, base=preset)
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    if args.values:
        values = [float(v) if args.experiment != "concurrency" else int(v) for v in args.values.split(",")]
    model = load_model(args.model) if args.model else _default_model()
    result = run_experiment(args.experiment, cfg, model, values, models, seeds=range(args.seeds))
    _write_csv(args.out, ["sweep_value", "model", "seed", "r2"],
               [(_fmt(v), m, s, _fmt(r)) for v, m, s, r in result.records])
    for m in result.models():
        medians = " ".join(f"{v}:{r:.3f}" for v, r in zip(result.values, result.table(m)))
        print(f"{m}: median R2 {medians}")


# --- selftest ------------------------------------------------------------------

def _selftest_checks(model):
    """Yield ``(name, passed, detail)`` for each embedded invariant check."""
    corpus = pseudo_real_corpus(40, n_samples=3000, seed=7)
    small = fit_pca(corpus, variance_threshold=0.999)
    mae = reconstruction_mae(corpus, reconstruct(small, project(small, corpus)))
    peak = float(np.max(np.abs(corpus.data)))
    yield "pca_round_trip", mae <= 0.01 * peak, f"mae/peak={mae / peak:.2e}"

    model = model or small
    cfg = RunConfig(n_samples=40, n_aggregate=50, k_min=1, k_max=3)
    v = generate_voltage_reference(60.0, model.sample_rate_hz, model.n_samples)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        x_g = cond_mirror(reconstruct(model, make_submetered(cfg.generation(), model)), v)
    act = build_activation_matrix(cfg.n_aggregate, x_g.n_rows, cfg.k_min, cfg.k_max, stream(0, "selftest"))
    x_a = aggregate_signatures(act, x_g)
    naive = np.array([[sum(x_g.data[j, t] for j in np.flatnonzero(row)) for t in range(0, x_g.n_samples, 97)]
                      for row in act.a])
    err = float(np.max(np.abs(x_a[:, ::97] - naive) / np.maximum(np.abs(naive), 1e-300)))
    sums = act.row_sums()
    kirch = err <= 1e-12 and sums.min() >= cfg.k_min and sums.max() <= cfg.k_max
    yield "kirchhoff", bool(kirch), f"max_rel_err={err:.1e}"

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        again = cond_mirror(x_g, v)
        r = np.array([pearson(row, v.samples) if np.ptp(row) > 0 else 0.0 for row in x_g.data])
    yield "mirror", bool(np.all(r >= 0) and np.array_equal(again.data, x_g.data)), f"min_r={r.min():.3f}"

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        y_class = np.arange(x_g.n_rows) % cfg.n_classes
        p = compute_power_shares(act, x_g, v, y_class, True, cfg.n_classes)
    yield "power_shares", bool(np.all(np.abs(p.sum(axis=1) - 1) <= 1e-9)), ""

    pts = stream(0, "selftest", "metric").normal(size=(60, 4))
    same = evaluate_clouds(EmbeddedCloud.from_points(pts), EmbeddedCloud.from_points(pts))
    far = evaluate_clouds(EmbeddedCloud.from_points(pts), EmbeddedCloud.from_points(pts + 1e3))
    ok = same.ip_alpha >= 0.95 and same.authenticity <= 0.05 and np.all(far.p_alpha_curve == 0) \
        and far.authenticity >= 0.99
    yield "metric_self_test", bool(ok), f"ip={same.ip_alpha:.3f} auth_far={far.authenticity:.3f}"

    vr = generate_voltage_reference(60.0, 30000.0, 30000)
    sine = vr.samples
    quad = np.roll(sine, 125)
    ff = float(form_factor(sine))
    th0 = float(phase_shift(sine, vr)[0])
    th90 = float(phase_shift(quad, vr)[0])
    prefix = sine[:16384]
    parseval = abs(wavelet_energy(sine, 8).sum() - np.sum(prefix * prefix)) / np.sum(prefix * prefix)
    tc = float(temporal_centroid(sine, 500))
    ok = (abs(ff - np.pi / (2 * np.sqrt(2))) <= 1e-4 and abs(th0) <= 1e-9 and abs(th90 - np.pi / 2) <= 1e-6
          and parseval <= 1e-9 and 1 <= tc <= 60)
    yield "feature_identities", bool(ok), f"ff={ff:.6f} theta90={th90:.7f}"


def cmd_selftest(args):
    rows = []
    model = None
    if args.model:
        try:
            model = load_model(args.model)
            rows.append(("load_model", True, args.model))
        except (HfsgError, OSError) as exc:
            rows.append(("load_model", False, f"load: {exc}"))
    if all(ok for _, ok, _ in rows):
        try:
            rows.extend(_selftest_checks(model))
        except HfsgError as exc:
            rows.append(("pipeline", False, str(exc)))
    width = max(len(name) for name, _, _ in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    failed = sum(not ok for _, ok, _ in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return 1 if failed else 0


# --- parser --------------------------------------------------------------------

def _config_epilog():
    lines = ["run config keys (key=value file or --set key=value):"]
    lines += [f"  {key:<20} default {default:<8} {text}" for key, default, text in describe_keys()]
    return "\n".join(lines)


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="hfsg", description=__doc__, epilog=_config_epilog(),
                                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"hfsg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="write a pseudo-real harmonic signature corpus")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--samples", type=int, default=30000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("train", help="fit the PCA latent space on real signatures")
    p.add_argument("--input", required=True, help="SIGMAT or CSV signature matrix")
    p.add_argument("--components", type=int, default=50)
    p.add_argument("--variance-threshold", type=float, default=None,
                   help="choose L by cumulative explained variance (overrides --components)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample labelled latent points")
    p.add_argument("--model", required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--brands", type=int, default=2)
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--sep", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("synth", help="synthesize a labelled aggregate dataset",
                       epilog=_config_epilog(), formatter_class=fmt)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="PCAMOD file")
    src.add_argument("--real", help="real signatures to fit the latent space on")
    p.add_argument("--config", help="flat key=value run config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="alpha-precision, beta-recall and authenticity")
    p.add_argument("--real", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("features", help="extract the flattened NILM feature matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--voltage-amplitude", type=float, default=1.0)
    p.add_argument("--wavelet-levels", type=int, default=8)
    p.add_argument("--vi-points", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("bench", help="run a generalization experiment",
                       epilog=_config_epilog(), formatter_class=fmt)
    p.add_argument("--experiment", required=True, choices=sorted(EXPERIMENTS))
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--models", default=",".join(MODELS))
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..n-1)")
    p.add_argument("--values", help="comma-separated sweep values (default: the experiment's own)")
    p.add_argument("--model", help="PCAMOD file; default fits one on a pseudo-real corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="run the embedded invariant checks")
    p.add_argument("--model", help="also check that this PCAMOD file loads and is used")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        status = args.func(args)
    except PipelineError as exc:
        print(f"hfsg {args.command}: {exc.stage} stage failed: {exc.cause}", file=sys.stderr)
        return 2
    except (HfsgError, OSError, argparse.ArgumentTypeError) as exc:
        print(f"hfsg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return int(status or 0)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point (``murmurscale`` / ``python -m murmurscale``).

Exit status: 0 on success, 1 for invalid arguments or configuration,
2 for unreadable, missing or malformed input files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import synth
from .classify import ModelSpec, TrainedModel, evaluate, train
from .classify.protocols import balanced_experiment, stratified_split, weighted_experiment
from .config import (
    DATA_ENV_VAR,
    FEATURE_PRESETS,
    MODEL_PRESETS,
    ConfigError,
    RunConfig,
    git_blob_hash,
    make_manifest,
)
from .features import (
    FeatureConfig,
    FeatureMatrix,
    build_feature_matrix,
    truncate_dyadic,
    write_manifest,
)
from .io import LabelTableError, WavFormatError, read_label_table, read_wav, write_wav
from .monofractal import spectrum_slope, wavelet_spectrum
from .multifractal import multifractal_analysis, q_grid
from .stats import screen_features
from .wavelets import dwt_forward, make_filter

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _dump(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise InputError(f"config file {path} not found")
        cfg = RunConfig.load(path)
    else:
        cfg = RunConfig()
    overrides = {}
    if getattr(args, "preset", None):
        overrides["model"] = MODEL_PRESETS[args.preset]
    if getattr(args, "feature_preset", None):
        merged = {**cfg.features.to_dict(), **FEATURE_PRESETS[args.feature_preset]}
        overrides["features"] = FeatureConfig.from_dict(merged)
    for name in ("seed", "repetitions", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg.validate()


def _read_signal(path) -> np.ndarray:
    return read_wav(path).samples


def _filter(args):
    return make_filter(args.wavelet)


# ------------------------------------------------------------------ commands


def cmd_decompose(args) -> int:
    x = _read_signal(args.wav)
    x = truncate_dyadic(x, "prefix")
    decomp = dwt_forward(x, _filter(args), args.depth)
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "index", "coefficient"])
        for k, v in enumerate(decomp.smooth):
            w.writerow(["smooth", k, repr(float(v))])
        for j in decomp.levels:
            for k, v in enumerate(decomp.details[j]):
                w.writerow([j, k, repr(float(v))])
    config = {"wavelet": args.wavelet, "depth": args.depth, "input": str(args.wav)}
    _dump(_manifest_path(out), make_manifest("decompose", config, None, n=decomp.n))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    x = truncate_dyadic(_read_signal(args.wav), "prefix")
    decomp = dwt_forward(x, _filter(args))
    spec = wavelet_spectrum(decomp, args.boundary)
    out = Path(args.out)
    spec.to_csv(out)
    lo = args.j_min if args.j_min is not None else max(1, decomp.J - 5)
    hi = args.j_max if args.j_max is not None else decomp.J
    fit = spectrum_slope(spec, lo, hi)
    result = {"slope": fit.slope, "intercept": fit.intercept, "hurst": fit.hurst, "r2": fit.r2,
              "j_range": list(fit.j_range), "skipped_levels": list(fit.skipped_levels)}
    config = {"wavelet": args.wavelet, "boundary": args.boundary, "j_range": [lo, hi],
              "input": str(args.wav)}
    _dump(_manifest_path(out), make_manifest("spectrum", config, None, fit=result))
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_mfspectrum(args) -> int:
    x = truncate_dyadic(_read_signal(args.wav), "prefix")
    decomp = dwt_forward(x, _filter(args))
    lo = args.j_min if args.j_min is not None else max(1, decomp.J - 5)
    hi = args.j_max if args.j_max is not None else decomp.J
    pf, ms, desc = multifractal_analysis(
        decomp, q_grid(args.q_preset), (lo, hi), level_a=args.level_a,
        boundary=args.boundary, extrapolate=not args.no_extrapolate,
    )
    out = Path(args.out)
    ms.to_csv(out)
    record = desc.as_record()
    record["effectively_monofractal"] = desc.effectively_monofractal
    record["extrapolated"] = list(desc.extrapolated)
    config = {"wavelet": args.wavelet, "q_preset": args.q_preset, "j_range": [lo, hi],
              "level_a": args.level_a, "boundary": args.boundary,
              "extrapolate": not args.no_extrapolate, "input": str(args.wav)}
    _dump(_manifest_path(out), make_manifest("mfspectrum", config, None, descriptors=record))
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK


def _collect_recordings(directory: Path, labels_path):
    if not directory.is_dir():
        raise InputError(f"recording directory {directory} not found")
    table = read_label_table(labels_path) if labels_path else None
    recordings, failures, excluded, notes = [], [], [], []
    for path in sorted(directory.glob("*.wav")):
        rid = path.stem
        label = None
        if table is not None:
            label = table.label_for(rid)
            if label is None:
                excluded.append(rid)
                continue
        try:
            rec = read_wav(path)
        except WavFormatError as exc:
            failures.append({"id": rid, "error": f"WavFormatError: {exc}"})
            continue
        notes.extend(rec.warnings)
        recordings.append((rec.samples, label, rid))
    if table is not None:
        notes.extend(table.warnings)
    return recordings, failures, excluded, notes


def _extract_matrix(directory: Path, labels_path, cfg: RunConfig):
    recordings, read_failures, excluded, notes = _collect_recordings(directory, labels_path)
    if not recordings:
        raise InputError(f"no readable labeled recordings in {directory}")
    matrix = build_feature_matrix(recordings, cfg.features, workers=cfg.workers)
    matrix.failures = read_failures + matrix.failures
    extra = {"n_rows": len(matrix), "failures": matrix.failures,
             "excluded_unlabeled_or_unknown": excluded, "n_excluded": len(excluded),
             "warnings": notes}
    return matrix, extra


def cmd_features(args) -> int:
    cfg = _load_config(args)
    matrix, extra = _extract_matrix(Path(args.directory), args.labels, cfg)
    out = Path(args.out)
    matrix.to_csv(out)
    extra["matrix_hash"] = git_blob_hash(out.read_bytes())
    _dump(_manifest_path(out), make_manifest("features", cfg.to_dict() | {"hash": cfg.hash()},
                                             cfg.seed, **extra))
    return EXIT_OK


def _load_matrix(path) -> tuple[FeatureMatrix, str]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"feature matrix {path} not found")
    return FeatureMatrix.from_csv(path), git_blob_hash(path.read_bytes())


def cmd_screen(args) -> int:
    matrix, digest = _load_matrix(args.matrix)
    table = screen_features(matrix)
    out = Path(args.out)
    table.to_csv(out)
    _dump(_manifest_path(out), make_manifest("screen", {"matrix": str(args.matrix)}, None,
                                             matrix_hash=digest))
    return EXIT_OK


def _xy(matrix: FeatureMatrix, names):
    from .classify.protocols import matrix_arrays

    X, y, ids, dropped = matrix_arrays(matrix, names)
    return X, y, dropped


def cmd_train(args) -> int:
    cfg = _load_config(args)
    matrix, digest = _load_matrix(args.matrix)
    X, y, dropped = _xy(matrix, cfg.feature_names)
    rng = np.random.default_rng([cfg.seed, 0])
    tr, te = stratified_split(y, 0.2, rng)
    model = train(cfg.model.with_params(seed=cfg.seed), X[tr], y[tr],
                  feature_names=cfg.feature_names)
    report = evaluate(model, X[te], y[te])
    out = Path(args.out)
    _dump(out, report.to_dict())
    if args.model_out:
        Path(args.model_out).write_text(model.to_json())
    _dump(_manifest_path(out), make_manifest("train", cfg.to_dict() | {"hash": cfg.hash()},
                                             cfg.seed, matrix_hash=digest, dropped_rows=dropped,
                                             fit_info=_jsonable(model.info)))
    print(report.to_json())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model_path = Path(args.model)
    if not model_path.is_file():
        raise InputError(f"model file {model_path} not found")
    model = TrainedModel.from_json(model_path.read_text())
    matrix, digest = _load_matrix(args.matrix)
    names = model.feature_names or matrix.feature_names
    X, y, dropped = _xy(matrix, names)
    report = evaluate(model, X, y)
    out = Path(args.out)
    _dump(out, report.to_dict())
    _dump(_manifest_path(out), make_manifest("evaluate", {"model": model.spec.to_dict()},
                                             model.spec.seed, matrix_hash=digest,
                                             dropped_rows=dropped))
    print(report.to_json())
    return EXIT_OK


def _jsonable(d: dict) -> dict:
    return {k: v for k, v in d.items() if isinstance(v, (int, float, str, bool, type(None)))}


def _reproduction_matrix(args, cfg: RunConfig):
    if args.matrix:
        matrix, digest = _load_matrix(args.matrix)
        return matrix, digest, {}
    data_dir = Path(args.data_dir) if args.data_dir else cfg.resolve_data_dir()
    if data_dir is None:
        raise InputError(f"no data directory: pass --data-dir, set {DATA_ENV_VAR}, "
                         "or give --matrix")
    labels = data_dir / "training_data.csv"
    wav_dir = data_dir / "training_data"
    missing = [str(p) for p in (labels, wav_dir) if not p.exists()]
    if missing:
        raise InputError(f"dataset inventory incomplete, missing: {', '.join(missing)}")
    n_wav = len(list(wav_dir.glob("*.wav")))
    if n_wav == 0:
        raise InputError(f"no .wav files under {wav_dir}")
    matrix, extra = _extract_matrix(wav_dir, labels, cfg)
    out_dir = Path(args.out).parent
    csv_path = out_dir / (Path(args.out).stem + ".features.csv")
    matrix.to_csv(csv_path)
    extra["n_wav_files"] = n_wav
    return matrix, git_blob_hash(csv_path.read_bytes()), extra


def cmd_reproduce_balanced(args) -> int:
    cfg = _load_config(args)
    matrix, digest, extra = _reproduction_matrix(args, cfg)
    summary = balanced_experiment(matrix, cfg.model, cfg.repetitions, cfg.seed,
                                  workers=cfg.workers, feature_names=cfg.feature_names)
    out = Path(args.out)
    _dump(out, summary.to_dict())
    _dump(_manifest_path(out), make_manifest("reproduce-balanced",
                                             cfg.to_dict() | {"hash": cfg.hash()}, cfg.seed,
                                             matrix_hash=digest, **extra))
    print(json.dumps({"mean": summary.mean, "sd": summary.sd}, sort_keys=True))
    return EXIT_OK


def cmd_reproduce_weighted(args) -> int:
    cfg = _load_config(args)
    matrix, digest, extra = _reproduction_matrix(args, cfg)
    grid = cfg.weight_grid if args.search else (cfg.model.class_weights,)
    result = weighted_experiment(matrix, cfg.model, grid, cfg.seed, folds=cfg.folds,
                                 workers=cfg.workers, feature_names=cfg.feature_names)
    out = Path(args.out)
    _dump(out, result.to_dict())
    _dump(_manifest_path(out), make_manifest("reproduce-weighted",
                                             cfg.to_dict() | {"hash": cfg.hash()}, cfg.seed,
                                             matrix_hash=digest, **extra))
    print(result.report.to_json())
    return EXIT_OK


def cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.kind == "fbm":
        x = synth.fbm(args.n, args.hurst, rng)
    elif args.kind == "fgn":
        x = synth.davies_harte_fgn(args.n, args.hurst, rng)
    elif args.kind == "cascade":
        depth = int(args.n).bit_length() - 1
        if 2**depth != args.n:
            raise ValueError(f"cascade length must be a power of two, got {args.n}")
        x = synth.binomial_cascade(depth, args.p)
    else:
        x = synth.white_noise(args.n, rng)
    out = Path(args.out)
    if out.suffix.lower() == ".csv":
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value"])
            w.writerows([[repr(float(v))] for v in x])
    else:
        peak = float(np.max(np.abs(x)))
        # leave headroom so that rounding never clips
        write_wav(out, 0.9 * x / peak if peak > 0 else x, args.rate)
    config = {"kind": args.kind, "n": args.n, "hurst": args.hurst, "p": args.p,
              "rate": args.rate}
    _dump(_manifest_path(out), make_manifest("synth", config, args.seed))
    return EXIT_OK


# -------------------------------------------------------------------- parser


def _add_wavelet_args(p):
    p.add_argument("--wavelet", default="db6", help="haar or dbN (default db6)")


def _add_run_args(p, workers=True):
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--preset", choices=sorted(MODEL_PRESETS), help="named model setting")
    p.add_argument("--feature-preset", choices=sorted(FEATURE_PRESETS))
    p.add_argument("--seed", type=int)
    if workers:
        p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="murmurscale", description="Wavelet multiscale features for "
                     "heart-sound recordings and murmur classifiers.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("decompose", help="WAV -> per-level DWT coefficient CSV")
    p.add_argument("wav")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--depth", type=int)
    _add_wavelet_args(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("spectrum", help="WAV -> wavelet spectrum CSV and slope fit")
    p.add_argument("wav")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--j-min", type=int)
    p.add_argument("--j-max", type=int)
    p.add_argument("--boundary", choices=("periodic", "interior"), default="periodic")
    _add_wavelet_args(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("mfspectrum", help="WAV -> (q, alpha, f) CSV and descriptors")
    p.add_argument("wav")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--j-min", type=int)
    p.add_argument("--j-max", type=int)
    p.add_argument("--q-preset", default="two-sided")
    p.add_argument("--level-a", type=float, default=-0.2)
    p.add_argument("--boundary", choices=("periodic", "interior"), default="interior")
    p.add_argument("--no-extrapolate", action="store_true")
    _add_wavelet_args(p)
    p.set_defaults(func=cmd_mfspectrum)

    p = sub.add_parser("features", help="directory of WAVs -> feature matrix CSV")
    p.add_argument("directory")
    p.add_argument("--labels", help="annotation CSV (patient id + murmur columns)")
    p.add_argument("--out", "-o", required=True)
    _add_run_args(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("screen", help="feature matrix -> rank-sum test table")
    p.add_argument("matrix")
    p.add_argument("--out", "-o", required=True)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("train", help="fit on an 80%% split, report on the rest")
    p.add_argument("matrix")
    p.add_argument("--out", "-o", required=True, help="EvalReport JSON")
    p.add_argument("--model-out", help="write fitted parameters as JSON")
    _add_run_args(p, workers=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on a feature matrix")
    p.add_argument("matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--out", "-o", required=True)
    p.set_defaults(func=cmd_evaluate)

    for name, func, helptext in (
        ("reproduce-balanced", cmd_reproduce_balanced, "repeated subsampled protocol"),
        ("reproduce-weighted", cmd_reproduce_weighted, "class-weighted protocol"),
    ):
        p = sub.add_parser(name, help=helptext)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--data-dir", help=f"dataset root (default ${DATA_ENV_VAR})")
        src.add_argument("--matrix", help="precomputed feature matrix CSV")
        p.add_argument("--out", "-o", required=True)
        p.add_argument("--repetitions", type=int)
        if name == "reproduce-weighted":
            p.add_argument("--search", action="store_true",
                           help="search the configured weight grid instead of the preset weights")
        _add_run_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="write a synthetic test signal")
    p.add_argument("--kind", choices=("fbm", "fgn", "cascade", "noise"), required=True)
    p.add_argument("--n", type=int, default=16384)
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--p", type=float, default=0.7, help="cascade weight")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=int, default=4000)
    p.add_argument("--out", "-o", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, WavFormatError, LabelTableError, OSError) as exc:
        print(f"murmurscale {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"murmurscale {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

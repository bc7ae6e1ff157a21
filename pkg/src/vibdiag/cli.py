"""Command-line entry point.

Subcommands follow the pipeline stages: ``synth`` and ``ingest`` produce
recordings and segment caches, ``extract`` writes train/test feature
tables, ``train`` writes a model bundle, ``eval`` writes confusion
matrices, ``sweep`` writes an accuracy-versus-parameter table and
``predict`` prints per-segment diagnoses.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import logging
import os
import sys
from pathlib import Path

import yaml

from . import pipeline
from .bundle import load_bundle, save_bundle
from .errors import InvalidParameter, VibDiagError
from .pipeline import FeatureSetSpec, FeatureTable, TrainConfig
from .signal_io import (
    DatasetManifest,
    FaultClass,
    ManifestEntry,
    generate_synthetic,
    load_signal,
    read_manifest,
    save_vsig,
    segment,
    write_manifest,
)

log = logging.getLogger("vibdiag")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
BUNDLE_NAME = "bundle.vdmb"
_SPEC_FLAGS = ("mfd_k", "eps_min", "mfcc_l", "n_filters", "fft_size", "n_frames")


class UsageError(Exception):
    """Bad flags, config keys or missing input paths."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    manifest: Path | None
    seed: int | None
    out: Path
    features: FeatureSetSpec
    train: TrainConfig
    train_fraction: float = 0.7

    def require_seed(self) -> int:
        if self.seed is None:
            raise UsageError("a seed is required (--seed or 'seed' in the config file)")
        return self.seed

    def require_manifest(self) -> Path:
        if self.manifest is None:
            raise UsageError("a manifest is required (--manifest or 'manifest' in the config file)")
        return self.manifest


def _read_config_file(path) -> tuple:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise UsageError(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a key-value mapping")
    return doc, path.parent


_CONFIG_KEYS = {"manifest", "seed", "out", "features", "classifiers", "train_fraction", "train"}


def build_config(args) -> RunConfig:
    """Merge the config file (if any) with command-line overrides."""
    doc, base = ({}, Path("."))
    if getattr(args, "config", None):
        doc, base = _read_config_file(args.config)
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")

    manifest = getattr(args, "manifest", None)
    if manifest is None and doc.get("manifest") is not None:
        manifest = base / str(doc["manifest"])
    if manifest is not None:
        manifest = Path(manifest)
        if not manifest.is_file():
            raise UsageError(f"manifest not found: {manifest}")

    seed = args.seed if getattr(args, "seed", None) is not None else doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise UsageError(f"seed must be an integer, got {seed!r}")
    out = Path(args.out) if getattr(args, "out", None) else Path(doc.get("out", "."))

    feat = doc.get("features", {})
    if isinstance(feat, str):
        feat = {"kind": feat}
    if not isinstance(feat, dict):
        raise UsageError("'features' must be a feature kind or a mapping")
    feat = dict(feat)
    if getattr(args, "features", None):
        feat["kind"] = args.features
    for key in _SPEC_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            feat[key] = value
    bad = set(feat) - set(FeatureSetSpec.__dataclass_fields__)
    if bad:
        raise UsageError(f"unknown feature parameters: {', '.join(sorted(bad))}")
    spec = FeatureSetSpec(**feat)

    train = dict(doc.get("train", {}) or {})
    bad = set(train) - set(TrainConfig.__dataclass_fields__)
    if bad:
        raise UsageError(f"unknown train parameters: {', '.join(sorted(bad))}")
    classifiers = doc.get("classifiers")
    if getattr(args, "classifiers", None):
        classifiers = [c.strip() for c in args.classifiers.split(",") if c.strip()]
    if classifiers is not None:
        train["classifiers"] = classifiers
    if seed is not None:
        train["seed"] = seed
    train_cfg = TrainConfig.from_dict(train)

    fraction = getattr(args, "train_fraction", None)
    if fraction is None:
        fraction = doc.get("train_fraction", 0.7)
    return RunConfig(manifest, seed, out, spec, train_cfg, float(fraction))


# ---------------------------------------------------------------------------
# helpers


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_segments(manifest_path: Path) -> list:
    """Segments of every readable recording; failures go to the error stream."""
    manifest = read_manifest(manifest_path)
    segments = []
    for entry in manifest.entries:
        try:
            sig = load_signal(manifest.resolve(entry), entry)
            segments.extend(segment(sig))
        except VibDiagError as exc:
            print(f"error: {entry.path}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return segments


def _class_counts(labels) -> str:
    counts = {c: 0 for c in FaultClass}
    for lab in labels:
        counts[FaultClass(int(lab))] += 1
    return " ".join(f"{c.slug}={n}" for c, n in counts.items())


def _mkdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _read_table(path) -> FeatureTable:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"feature table not found: {path}")
    return FeatureTable.from_csv(path.read_text())


def _extract_split(cfg: RunConfig) -> tuple:
    manifest = cfg.require_manifest()
    seed = cfg.require_seed()
    segments = _load_segments(manifest)
    if not segments:
        raise VibDiagError(f"no usable segments in {manifest}")
    table = pipeline.extract_features(segments, cfg.features)
    train, test = pipeline.split(table, cfg.train_fraction, seed)
    return train, test, _digest(manifest)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    cfg = build_config(args)
    seed = cfg.require_seed()
    classes = [FaultClass.parse(c) for c in args.classes.split(",")] if args.classes else list(FaultClass)
    if not args.duration > 0:
        raise InvalidParameter(f"duration must be positive, got {args.duration}")
    out = _mkdir(cfg.out)
    entries = []
    for fc in classes:
        sig = generate_synthetic(fc, args.duration, seed=seed)
        name = f"{fc.slug}.vsig"
        try:
            save_vsig(sig.samples, out / name)
        except OSError as exc:
            raise UsageError(f"cannot write {out / name}: {exc}") from exc
        entries.append(ManifestEntry(name, fc, sig.shaft_speed_rpm, sig.sample_rate_hz))
    write_manifest(DatasetManifest(tuple(entries), out), out / "manifest.yaml")
    print(f"wrote {len(entries)} recordings and {out / 'manifest.yaml'}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = build_config(args)
    manifest_path = cfg.require_manifest()
    manifest = read_manifest(manifest_path)
    out = _mkdir(cfg.out / "segments")
    entries, labels = [], []
    for i, entry in enumerate(manifest.entries):
        try:
            sig = load_signal(manifest.resolve(entry), entry)
            segs = segment(sig)
        except VibDiagError as exc:
            print(f"error: {entry.path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        kept = len(segs) * len(segs[0])
        name = f"{i:03d}-{Path(entry.path).stem}.vsig"
        save_vsig(sig.samples[:kept], out / name)
        entries.append(ManifestEntry(name, entry.label, entry.shaft_speed_rpm, entry.sample_rate_hz))
        labels.extend([entry.label] * len(segs))
    if not labels:
        print("error: no segments could be produced", file=sys.stderr)
        return EXIT_USAGE
    write_manifest(DatasetManifest(tuple(entries), out), out / "manifest.yaml")
    print(f"segments: {_class_counts(labels)}")
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = build_config(args)
    train, test, _ = _extract_split(cfg)
    out = _mkdir(cfg.out)
    _write_text(out / "train.csv", train.to_csv())
    _write_text(out / "test.csv", test.to_csv())
    print(f"features: kind={cfg.features.kind} dim={cfg.features.flat_dim} "
          f"train={len(train)} test={len(test)}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = build_config(args)
    out = _mkdir(cfg.out)
    if args.table:
        train = _read_table(args.table)
        created_from = _digest(Path(args.table))
    else:
        train, test, created_from = _extract_split(cfg)
        _write_text(out / "train.csv", train.to_csv())
        _write_text(out / "test.csv", test.to_csv())
    bundle = pipeline.train_all(train, cfg.train, created_from)
    save_bundle(bundle, out / BUNDLE_NAME)
    print(f"trained {','.join(bundle.classifiers)} on {len(train)} segments -> {out / BUNDLE_NAME}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = build_config(args)
    out = _mkdir(cfg.out)
    bundle_path = Path(args.bundle) if args.bundle else out / BUNDLE_NAME
    if not bundle_path.is_file():
        raise UsageError(f"bundle not found: {bundle_path}")
    table = _read_table(args.table if args.table else out / "test.csv")
    bundle = load_bundle(bundle_path)
    matrices = pipeline.evaluate(bundle, table)
    lines = ["classifier,accuracy"]
    for name, cm in matrices.items():
        _write_text(out / f"confusion_{name}.csv", cm.to_csv())
        lines.append(f"{name},{cm.accuracy:.4f}")
        print(cm.render(f"{name.upper()} (accuracy {cm.accuracy:.2f}%)"))
        print()
    _write_text(out / "accuracy.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def _parse_values(text: str) -> tuple:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"sweep values must look like '2..20' or '9,10,11', got {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    seed = cfg.require_seed()
    parameter = args.param
    values = _parse_values(args.values) if args.values else None
    base = cfg.features
    if (parameter == "mfd_k") != (base.kind == "mfd"):
        base = FeatureSetSpec("mfd" if parameter == "mfd_k" else "mfcc")
    segments = _load_segments(cfg.require_manifest())
    if not segments:
        raise VibDiagError("no usable segments for the sweep")
    result = pipeline.sweep(parameter, segments, cfg.train, base, values, cfg.train_fraction, seed)
    out = _mkdir(cfg.out)
    _write_text(out / f"sweep_{parameter}.csv", result.to_csv())
    print(result.to_csv(), end="")
    for name in result.accuracy:
        print(f"{name}: spread {result.spread(name):.2f} points, best {parameter}={result.best_value(name)}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = build_config(args)
    bundle_path = Path(args.bundle)
    if not bundle_path.is_file():
        raise UsageError(f"bundle not found: {bundle_path}")
    bundle = load_bundle(bundle_path)
    if args.table:
        table = _read_table(args.table)
        ids = [f"row{i}" for i in range(len(table))]
    else:
        segments = _load_segments(cfg.require_manifest())
        table = pipeline.extract_features(segments, bundle.feature_spec)
        ids = [f"{src}#{idx}" for src, idx in table.ids]
    preds = pipeline.predict(bundle, table)
    for i, seg_id in enumerate(ids):
        for name, rows in preds.items():
            cls_, scores = rows[i]
            detail = " ".join(f"{FaultClass(c).slug}={v:.6g}" for c, v in sorted(scores.items()))
            print(f"{seg_id} {name} {FaultClass(cls_).display} {detail}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(p, *, features=False, seed=True, manifest=True, classifiers=False):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", help="output directory")
    if seed:
        p.add_argument("--seed", type=int)
    if manifest:
        p.add_argument("--manifest", help="dataset manifest (YAML)")
    if features:
        p.add_argument("--features", choices=pipeline.FEATURE_KINDS)
        p.add_argument("--mfd-k", dest="mfd_k", type=int)
        p.add_argument("--eps-min", dest="eps_min", type=int)
        p.add_argument("--mfcc-l", dest="mfcc_l", type=int)
        p.add_argument("--n-filters", dest="n_filters", type=int)
        p.add_argument("--fft-size", dest="fft_size", type=int)
        p.add_argument("--n-frames", dest="n_frames", type=int)
        p.add_argument("--train-fraction", dest="train_fraction", type=float)
    if classifiers:
        p.add_argument("--classifiers", help="comma list drawn from svm,hmm,gmm,enn")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibdiag", description="Bearing fault diagnosis from vibration signals.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to the error stream")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic recordings and a manifest")
    _common(p, manifest=False)
    p.add_argument("--duration", type=float, default=34.0, help="seconds per class (default 34)")
    p.add_argument("--classes", help="comma list of classes (default all four)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="load, segment and cache recordings")
    _common(p, seed=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="write train/test feature tables")
    _common(p, features=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train classifiers into a model bundle")
    _common(p, features=True, classifiers=True)
    p.add_argument("--table", help="training feature table (default: extract from the manifest)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="confusion matrices of a bundle on a test table")
    _common(p, seed=False, manifest=False)
    p.add_argument("--bundle", help=f"model bundle (default OUT/{BUNDLE_NAME})")
    p.add_argument("--table", help="test feature table (default OUT/test.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="accuracy against MFD size or MFCC count")
    _common(p, features=True, classifiers=True)
    p.add_argument("--param", choices=tuple(pipeline.SWEEP_RANGES), default="mfd_k")
    p.add_argument("--values", help="e.g. 2..20 or 9,12,16 (default: full range)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="diagnose segments with a saved bundle")
    _common(p, seed=False)
    p.add_argument("--bundle", required=True)
    p.add_argument("--table", help="feature table to classify instead of a manifest")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stop quietly
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except (UsageError, InvalidParameter) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VibDiagError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

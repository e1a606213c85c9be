"""Command-line interface: ``wct <command> [options]``.

Exit status: 0 on success, 1 on usage errors, 2 on data errors (missing or
malformed inputs). Settings come from flags, then ``--set``, then ``--config``,
then built-in defaults; environment variables are ignored.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULTS, Config, ConfigError, load_config
from .eval import roc, roc_svg, roc_to_csv
from .features import LABEL_NAMES, LABEL_VALUES, LabeledDataset, dataset_to_csv, fit_normalizer, normalize_dataset, read_dataset
from .imaging import centered_crop, read_pgm_file, write_pgm_file
from .pipeline import (
    DataError,
    ExperimentSpec,
    Manifest,
    ManifestEntry,
    PipelineError,
    SynthSpec,
    compare,
    extract_dataset,
    fit_classifier,
    load_classifier,
    load_image,
    read_manifest,
    run_experiment,
    save_classifier,
    segment_image,
    select_features,
    synth_dataset,
)
from .selection import describe_subset, history_to_csv
from .wavelet import decompose, pyramid_images

log = logging.getLogger("wct")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--config", metavar="PATH", help="key = value config file", **d)
    p.add_argument("--seed", type=int, metavar="N", help="root seed for every random stream", **d)
    p.add_argument("--out", metavar="DIR", help="output directory", **d)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)", **d)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr", **d)


def _add_data_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--manifest", metavar="CSV", help="image manifest (path,label,id)")
    g.add_argument("--features", metavar="CSV", help="precomputed per-image feature CSV")


def _add_experiment_flags(p: argparse.ArgumentParser, classifier: bool = True) -> None:
    p.add_argument("--domain", choices=("wavelet", "graylevel"))
    if classifier:
        p.add_argument("--classifier", choices=("svm", "bpn"))
    p.add_argument("--kernel", choices=("linear", "polynomial", "gaussian"))
    p.add_argument("--selection", choices=("ga", "all", "fixed"))
    p.add_argument("--folds", type=int, metavar="K", help="outer cross-validation folds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wct", description="Wavelet co-occurrence texture classification pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_, description=help_)
        _add_globals(p, suppress=True)
        return p

    p = add("synth", "write a synthetic normal/abnormal PGM corpus with a manifest")
    p.add_argument("--n-normal", type=int)
    p.add_argument("--n-abnormal", type=int)
    p.add_argument("--size", type=int, help="image side in pixels")

    p = add("extract", "compute feature vectors for images")
    p.add_argument("images", nargs="*", metavar="PGM")
    p.add_argument("--manifest", metavar="CSV")
    p.add_argument("--domain", choices=("wavelet", "graylevel"))
    p.add_argument("--blocks", action="store_true", help="one row per block instead of per image")
    p.add_argument("--subbands", metavar="DIR", help="also write every wavelet subband of each image as PGM")

    p = add("select", "run GA feature selection on a whole dataset")
    _add_data_source(p)
    _add_experiment_flags(p, classifier=False)

    p = add("train", "fit a classifier on a whole dataset and save it as JSON")
    _add_data_source(p)
    _add_experiment_flags(p)
    p.add_argument("--model", metavar="PATH", help="output model file (default OUT/model.json)")

    p = add("evaluate", "cross-validate one technique and write its reports")
    _add_data_source(p)
    _add_experiment_flags(p)

    p = add("segment", "mark abnormal blocks of images with a trained model")
    p.add_argument("images", nargs="*", metavar="PGM")
    p.add_argument("--manifest", metavar="CSV")
    p.add_argument("--model", metavar="PATH", required=True)

    p = add("roc", "ROC curve and AUC from a predictions CSV (id,label,...,score)")
    p.add_argument("--predictions", metavar="CSV", required=True)

    p = add("compare", "run all four techniques and write summary reports")
    p.add_argument("--manifest", metavar="CSV", required=True)
    p.add_argument("--kernel", choices=("linear", "polynomial", "gaussian"))
    p.add_argument("--folds", type=int, metavar="K")
    return parser


# --- helpers ---------------------------------------------------------------------


def _config(args) -> Config:
    cfg = load_config(getattr(args, "config", None))
    for item in getattr(args, "set", None) or ():
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (p.strip() for p in item.split("=", 1))
        if key not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        try:
            cfg = cfg.with_values(**{key.replace(".", "__"): DEFAULTS[key][0](value)})
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {exc}") from exc
    flags = {
        "seed": getattr(args, "seed", None),
        "experiment__domain": getattr(args, "domain", None),
        "experiment__classifier": getattr(args, "classifier", None),
        "experiment__selection": getattr(args, "selection", None),
        "svm__kernel": getattr(args, "kernel", None),
        "cv__folds": getattr(args, "folds", None),
        "synth__n_normal": getattr(args, "n_normal", None),
        "synth__n_abnormal": getattr(args, "n_abnormal", None),
        "synth__size": getattr(args, "size", None),
    }
    return cfg.with_values(**flags)


def _out_dir(args, command: str) -> Path:
    out = getattr(args, "out", None)
    if not out:
        raise UsageError(f"{command} requires --out DIR")
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {path}: {exc.strerror or exc}") from exc
    return path


def _load_data(args, spec: ExperimentSpec) -> LabeledDataset:
    if args.manifest:
        return extract_dataset(read_manifest(args.manifest), spec.pathway)
    path = Path(args.features)
    if not path.is_file():
        raise DataError(f"feature file not found: {path}")
    try:
        return read_dataset(path)
    except ValueError as exc:
        raise DataError(f"invalid feature file {path}: {exc}") from exc


def _image_entries(args) -> list[ManifestEntry]:
    entries = list(read_manifest(args.manifest).entries) if args.manifest else []
    for p in args.images:
        path = Path(p)
        if not path.is_file():
            raise DataError(f"image not found: {path}")
        entries.append(ManifestEntry(path, 0, path.stem))
    if not entries:
        raise UsageError("give PGM files or --manifest")
    return entries


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


# --- commands --------------------------------------------------------------------


def cmd_synth(args, cfg: Config) -> int:
    out = _out_dir(args, "synth")
    spec = SynthSpec(size=cfg["synth.size"])
    manifest = synth_dataset(out, cfg["synth.n_normal"], cfg["synth.n_abnormal"], cfg["seed"], spec)
    print(f"wrote {len(manifest)} images and {out / 'manifest.csv'}")
    return 0


def cmd_extract(args, cfg: Config) -> int:
    spec = ExperimentSpec.from_config(cfg)
    pathway = spec.pathway
    entries = _image_entries(args)
    ids, labels, rows = [], [], []
    sub_dir = Path(args.subbands) if args.subbands else None
    for e in entries:
        img = load_image(e)
        if sub_dir is not None:
            sub_dir.mkdir(parents=True, exist_ok=True)
            cropped = centered_crop(img, pathway.block)
            for name, band in pyramid_images(decompose(cropped, 2)).items():
                write_pgm_file(sub_dir / f"{e.id}_{name}.pgm", band)
        if args.blocks:
            (n_rows, n_cols), X = pathway.block_matrix(img)
            for k, x in enumerate(X):
                ids.append(f"{e.id}:r{k // n_cols}c{k % n_cols}")
                labels.append(e.label)
                rows.append(x)
        else:
            ids.append(e.id)
            labels.append(e.label)
            rows.append(pathway.image_vector(img))
    labeled = all(v in LABEL_NAMES for v in labels)
    data = LabeledDataset(np.array(rows), np.array(labels if labeled else [1] * len(rows)), tuple(ids))
    text = dataset_to_csv(data, labels=labeled)
    if getattr(args, "out", None):
        _write(_out_dir(args, "extract") / "features.csv", text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_select(args, cfg: Config) -> int:
    spec = ExperimentSpec.from_config(cfg, experiment__selection="ga")
    data = _load_data(args, spec)
    train = normalize_dataset(fit_normalizer(data), data)
    subset, result = select_features(train, spec, "final")
    names = spec.pathway.names if spec.pathway.dim == data.dim else None
    rep = result.best_report
    summary = (
        f"best subset: {describe_subset(subset, names)}\n"
        f"bits: {rep.bits}\nJ: {rep.J:.17g}\nfitness: {rep.fitness:.17g}\n"
        f"distinct subsets evaluated: {result.evaluations}\n"
    )
    sys.stdout.write(summary)
    if getattr(args, "out", None):
        out = _out_dir(args, "select")
        _write(out / "ga_history.csv", history_to_csv(result.history))
        _write(out / "selection.txt", summary + "\nconfig:\n" + spec.config_echo())
    return 0


def cmd_train(args, cfg: Config) -> int:
    spec = ExperimentSpec.from_config(cfg)
    data = _load_data(args, spec)
    clf = fit_classifier(data, spec, "final")
    if args.model:
        path = Path(args.model)
        path.parent.mkdir(parents=True, exist_ok=True)
    else:
        path = _out_dir(args, "train") / "model.json"
    clf.model.metadata.update({"technique": spec.name, "root_seed": spec.seed})
    save_classifier(clf, path)
    names = spec.pathway.names if spec.pathway.dim == data.dim else None
    print(f"{spec.name}: features {describe_subset(clf.subset, names)}; model written to {path}")
    return 0


def cmd_evaluate(args, cfg: Config) -> int:
    spec = ExperimentSpec.from_config(cfg)
    source = read_manifest(args.manifest) if args.manifest else _load_data(args, spec)
    out = _out_dir(args, "evaluate")
    report = run_experiment(source, spec)
    report.write(out)
    print(f"{spec.name}: pooled accuracy {report.accuracy:.4f}, AUC {report.auc:.4f}; reports in {out}")
    return 0


def cmd_segment(args, cfg: Config) -> int:
    clf = load_classifier(args.model)
    entries = _image_entries(args)
    out = _out_dir(args, "segment")
    lines = ["id,rows,cols,abnormal_blocks"]
    for e in entries:
        img = load_image(e)
        mask, over = segment_image(img, clf)
        write_pgm_file(out / f"{e.id}_mask.pgm", mask.to_image())
        write_pgm_file(out / f"{e.id}_overlay.pgm", over)
        (out / f"{e.id}_grid.txt").write_text(mask.to_text())
        rows, cols = mask.grid.shape
        lines.append(f"{e.id},{rows},{cols},{mask.abnormal_count}")
        print(f"{e.id}: {mask.abnormal_count}/{rows * cols} blocks abnormal")
    _write(out / "segments.csv", "\n".join(lines) + "\n")
    return 0


def cmd_roc(args, cfg: Config) -> int:
    path = Path(args.predictions)
    try:
        rows = list(csv.DictReader(io.StringIO(path.read_text())))
    except OSError as exc:
        raise DataError(f"cannot read predictions {path}: {exc.strerror or exc}") from exc
    try:
        labels = [LABEL_VALUES[r["label"]] for r in rows]
        scores = [float(r["score"]) for r in rows]
    except (KeyError, ValueError) as exc:
        raise DataError(f"predictions {path} need 'label' and 'score' columns: {exc}") from exc
    curve = roc(scores, labels)
    print(f"AUC {curve.auc:.6f}")
    if getattr(args, "out", None):
        out = _out_dir(args, "roc")
        _write(out / "roc.csv", roc_to_csv(curve))
        _write(out / "roc.svg", roc_svg({path.stem: curve}))
    return 0


def cmd_compare(args, cfg: Config) -> int:
    spec = ExperimentSpec.from_config(cfg)
    manifest: Manifest = read_manifest(args.manifest)
    out = _out_dir(args, "compare")
    report = compare(manifest, spec, progress=lambda name: log.info("running %s", name))
    report.write(out)
    sys.stdout.write(report.summary_text())
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "select": cmd_select,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "segment": cmd_segment,
    "roc": cmd_roc,
    "compare": cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
        cfg = _config(args)
        if args.command not in ("synth", "roc"):
            ExperimentSpec.from_config(cfg)  # validate the merged settings before any work
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"wct: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (ConfigError, PipelineError, ValueError, OSError) as exc:
        print(f"wct: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end orchestration: manifests, synthetic data, experiments, reports, segmentation.

One labeled vector per image: the mean of the block feature vectors over the
largest centered tiling of the image. Cross-validation therefore runs over
images, and every fitting step (normalization, GA selection, classifier) sees
only the training split of its fold.

All randomness derives from one root seed through named sub-streams
(``substream_seed``), so a (manifest, spec, seed) triple reproduces every
output byte.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import zlib
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import bpn, svm
from .config import Config
from .eval import (
    ConfusionMatrix,
    CvPlan,
    CvResult,
    RocCurve,
    aligned_text,
    cross_validate,
    format_percent,
    kfold_plan,
    loocv_plan,
    metrics,
    metrics_rows,
    roc,
    roc_svg,
    roc_to_csv,
)
from .features import (
    ABNORMAL,
    LABEL_NAMES,
    LABEL_VALUES,
    NORMAL,
    LabeledDataset,
    NormalizationParams,
    apply_normalizer,
    fit_normalizer,
    format_float,
    normalize_dataset,
)
from .imaging import BlockSpec, GrayImage, centered_crop, extract_blocks, read_pgm_file, write_pgm_file
from .selection import GaConfig, GaResult, describe_subset, run_ga, svm_cv_evaluator
from .texture import GlcmSpec, extract_gray, extract_wct, gray_feature_names, wavelet_feature_names
from .wavelet import DETAIL_NAMES, decompose

log = logging.getLogger(__name__)

DOMAINS = ("wavelet", "graylevel")
CLASSIFIERS = ("svm", "bpn")
SELECTIONS = ("ga", "all", "fixed")


class PipelineError(Exception):
    pass


class DataError(PipelineError):
    """Bad or missing input data; the CLI maps this to exit code 2."""


class StageError(DataError):
    def __init__(self, stage: str, item: str, cause: Exception | str):
        self.stage, self.item, self.cause = stage, item, cause
        super().__init__(f"{stage} failed for {item}: {cause}")


# --- seeding -------------------------------------------------------------------


def substream_seed(root: int, name: str, *path: int) -> int:
    """Deterministic 32-bit seed for the named sub-stream of ``root``."""
    if root < 0:
        raise PipelineError(f"seed must be non-negative, got {root}")
    ss = np.random.SeedSequence([int(root), zlib.crc32(name.encode()), *(int(p) for p in path)])
    return int(ss.generate_state(1)[0])


def substream(root: int, name: str, *path: int) -> np.random.Generator:
    return np.random.default_rng(substream_seed(root, name, *path))


# --- manifests -------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: int
    id: str


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        ids = [e.id for e in self.entries]
        if len(set(paths)) != len(paths):
            raise DataError("manifest paths must be unique")
        if len(set(ids)) != len(ids):
            raise DataError("manifest ids must be unique")
        for e in self.entries:
            if e.label not in (ABNORMAL, NORMAL):
                raise DataError(f"bad label for {e.id}: {e.label}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=int)


def manifest_to_csv(manifest: Manifest, base: Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "label", "id"])
    for e in manifest.entries:
        p = e.path
        if base is not None:
            try:
                p = p.relative_to(base)
            except ValueError:
                pass
        w.writerow([p.as_posix(), LABEL_NAMES[e.label], e.id])
    return buf.getvalue()


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    path = Path(path)
    path.write_text(manifest_to_csv(manifest, path.parent))


def read_manifest(path: str | Path) -> Manifest:
    """Read ``path,label,id`` rows; relative image paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["path", "label", "id"]:
        raise DataError(f"manifest {path} must start with a 'path,label,id' header")
    entries = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise DataError(f"manifest {path}:{line_no}: expected 3 columns, got {len(row)}")
        p, label, ident = (c.strip() for c in row)
        if label not in LABEL_VALUES:
            raise DataError(f"manifest {path}:{line_no}: unknown label {label!r}")
        img_path = Path(p)
        if not img_path.is_absolute():
            img_path = path.parent / img_path
        entries.append(ManifestEntry(img_path, LABEL_VALUES[label], ident))
    if not entries:
        raise DataError(f"manifest {path} lists no images")
    try:
        return Manifest(tuple(entries))
    except DataError as exc:
        raise DataError(f"manifest {path}: {exc}") from exc


# --- synthetic corpus ------------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings.

    Background: a constant plus low-frequency sinusoids plus Gaussian noise.
    Abnormal images add a rectangular checkerboard patch whose cells are
    anchored to the image grid, so its period (two cells) falls in the
    second-level detail band.
    """

    size: int = 128
    base_range: tuple[float, float] = (90.0, 150.0)
    field_terms: int = 4
    max_frequency: int = 2  # cycles per image
    field_amplitude: tuple[float, float] = (3.0, 8.0)
    noise_std: float = 4.0
    patch_size: tuple[int, int] = (80, 104)
    checker_cell: int = 4
    patch_amplitude: tuple[float, float] = (25.0, 40.0)

    def __post_init__(self):
        lo, hi = self.patch_size
        if not 1 <= lo <= hi <= self.size:
            raise PipelineError(f"patch size range {self.patch_size} does not fit a {self.size}-pixel image")
        if self.checker_cell < 1 or self.noise_std < 0:
            raise PipelineError("checker_cell must be >= 1 and noise_std >= 0")


@dataclass(frozen=True)
class PatchRect:
    top: int
    left: int
    height: int
    width: int

    def overlap(self, top: int, left: int, size: int) -> int:
        """Pixels shared with the square ``size`` block at (top, left)."""
        h = min(self.top + self.height, top + size) - max(self.top, top)
        w = min(self.left + self.width, left + size) - max(self.left, left)
        return max(h, 0) * max(w, 0)


@dataclass(frozen=True)
class SynthImage:
    image: GrayImage
    background: GrayImage  # the same image without the patch
    patch: PatchRect | None


def _to_uint8(field_: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(field_ + 0.5), 0, 255).astype(np.uint8)


def synth_image(rng: np.random.Generator, abnormal: bool, spec: SynthSpec = SynthSpec()) -> SynthImage:
    n = spec.size
    yy, xx = np.mgrid[0:n, 0:n]
    f = np.full((n, n), rng.uniform(*spec.base_range))
    for _ in range(spec.field_terms):
        fy, fx = rng.integers(-spec.max_frequency, spec.max_frequency + 1, 2)
        amp = rng.uniform(*spec.field_amplitude)
        f += amp * np.sin(2 * np.pi * (fx * xx + fy * yy) / n + rng.uniform(0, 2 * np.pi))
    f += rng.normal(0.0, spec.noise_std, (n, n))
    background = GrayImage(_to_uint8(f))
    if not abnormal:
        return SynthImage(background, background, None)
    # the patch is drawn after the background, so the background never depends on the label
    ph, pw = (int(v) for v in rng.integers(spec.patch_size[0], spec.patch_size[1] + 1, 2))
    top = int(rng.integers(0, n - ph + 1))
    left = int(rng.integers(0, n - pw + 1))
    amp = rng.uniform(*spec.patch_amplitude)
    cell = spec.checker_cell
    py, px = yy[top : top + ph, left : left + pw] // cell, xx[top : top + ph, left : left + pw] // cell
    f[top : top + ph, left : left + pw] += amp * np.where((py + px) % 2 == 0, 1.0, -1.0)
    return SynthImage(GrayImage(_to_uint8(f)), background, PatchRect(top, left, ph, pw))


def synth_case(seed: int, label: int, index: int, spec: SynthSpec = SynthSpec()) -> SynthImage:
    rng = substream(seed, "synth", 1 if label == ABNORMAL else 0, index)
    return synth_image(rng, label == ABNORMAL, spec)


def patches_to_csv(patches: dict[str, PatchRect]) -> str:
    lines = ["id,top,left,height,width"]
    lines += [f"{k},{r.top},{r.left},{r.height},{r.width}" for k, r in patches.items()]
    return "\n".join(lines) + "\n"


def read_patches(path: str | Path) -> dict[str, PatchRect]:
    path = Path(path)
    try:
        rows = list(csv.DictReader(io.StringIO(path.read_text())))
    except OSError as exc:
        raise DataError(f"cannot read patch file {path}: {exc.strerror or exc}") from exc
    return {r["id"]: PatchRect(int(r["top"]), int(r["left"]), int(r["height"]), int(r["width"])) for r in rows}


def synth_dataset(
    out_dir: str | Path, n_normal: int = 50, n_abnormal: int = 50, seed: int = 0, spec: SynthSpec = SynthSpec()
) -> Manifest:
    """Write PGM images, ``manifest.csv`` and ``patches.csv`` (ground-truth rectangles)."""
    if n_normal < 1 or n_abnormal < 1:
        raise PipelineError("synth needs at least one image per class")
    out = Path(out_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    entries, patches = [], {}
    for label, count in ((NORMAL, n_normal), (ABNORMAL, n_abnormal)):
        for k in range(count):
            ident = f"{LABEL_NAMES[label]}_{k:03d}"
            case = synth_case(seed, label, k, spec)
            path = out / "images" / f"{ident}.pgm"
            write_pgm_file(path, case.image)
            entries.append(ManifestEntry(path, label, ident))
            if case.patch is not None:
                patches[ident] = case.patch
    manifest = Manifest(tuple(entries))
    write_manifest(manifest, out / "manifest.csv")
    (out / "patches.csv").write_text(patches_to_csv(patches))
    return manifest


# --- feature pathway -------------------------------------------------------------


@dataclass(frozen=True)
class Pathway:
    """How an image becomes feature vectors: domain, tiling and co-occurrence settings."""

    domain: str = "wavelet"
    block: BlockSpec = BlockSpec()
    glcm: GlcmSpec = GlcmSpec()
    include_level1: bool = False

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise PipelineError(f"unknown domain {self.domain!r}; expected one of {DOMAINS}")
        if self.domain == "graylevel" and self.include_level1:
            raise PipelineError("include_level1 applies to the wavelet domain only")
        if self.domain == "wavelet" and self.block.block_size % 4:
            raise PipelineError(f"wavelet blocks must be a multiple of 4 pixels, got {self.block.block_size}")

    @property
    def names(self) -> list[str]:
        if self.domain == "wavelet":
            return wavelet_feature_names(self.include_level1)
        return gray_feature_names()

    @property
    def dim(self) -> int:
        return len(self.names)

    def block_features(self, block: GrayImage) -> np.ndarray:
        if self.domain == "wavelet":
            return extract_wct(block, self.glcm, self.include_level1)
        return extract_gray(block, self.glcm)

    def block_matrix(self, img: GrayImage) -> tuple[tuple[int, int], np.ndarray]:
        """Feature rows for every block of ``img`` (from the top-left), with the grid shape."""
        grid = self.block.grid_shape(img.height, img.width)
        return grid, np.array([self.block_features(b) for b in extract_blocks(img, self.block)])

    def image_vector(self, img: GrayImage) -> np.ndarray:
        """Mean block vector over the largest centered tiling."""
        crop = centered_crop(img, self.block)
        return np.mean([self.block_features(b) for b in extract_blocks(crop, self.block)], axis=0)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "block_size": self.block.block_size,
            "stride": self.block.stride,
            "glcm_distance": self.glcm.distance,
            "glcm_angles": list(self.glcm.angles),
            "glcm_levels": self.glcm.levels,
            "include_level1": self.include_level1,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Pathway:
        return cls(
            d["domain"],
            BlockSpec(d["block_size"], d["stride"]),
            GlcmSpec(d["glcm_distance"], tuple(d["glcm_angles"]), d["glcm_levels"]),
            bool(d.get("include_level1", False)),
        )


def load_image(entry: ManifestEntry) -> GrayImage:
    try:
        return read_pgm_file(entry.path)
    except OSError as exc:
        raise StageError("load", f"{entry.id} ({entry.path})", exc.strerror or exc) from exc
    except ValueError as exc:
        raise StageError("load", f"{entry.id} ({entry.path})", exc) from exc


def extract_dataset(manifest: Manifest, pathway: Pathway) -> LabeledDataset:
    rows = []
    for e in manifest.entries:
        img = load_image(e)
        try:
            rows.append(pathway.image_vector(img))
        except ValueError as exc:
            raise StageError("feature extraction", e.id, exc) from exc
    return LabeledDataset(np.array(rows), manifest.labels, tuple(e.id for e in manifest.entries))


def dominant_subband(img: GrayImage, pathway: Pathway) -> str:
    """Level-2 detail subband with the largest coefficient variance, summed over the image's blocks."""
    crop = centered_crop(img, pathway.block)
    var = np.zeros(3)
    for b in extract_blocks(crop, pathway.block):
        var += [np.var(s) for s in decompose(b, 2).level(2).details]
    return DETAIL_NAMES[int(np.argmax(var))] + "2"


# --- experiment specification --------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    pathway: Pathway = Pathway()
    classifier: str = "svm"
    kernel: svm.KernelSpec = svm.KernelSpec()
    selection: str = "ga"
    subset: tuple[int, ...] = ()  # used when selection == "fixed"
    ga: GaConfig = GaConfig()
    inner_folds: int = 5
    cv_scheme: str = "kfold"
    cv_folds: int = 10
    stratified: bool = True
    svm: svm.SvmConfig = svm.SvmConfig()
    bpn: bpn.BpnConfig = bpn.BpnConfig()
    bpn_hidden: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise PipelineError(f"unknown classifier {self.classifier!r}; expected one of {CLASSIFIERS}")
        if self.selection not in SELECTIONS:
            raise PipelineError(f"unknown selection {self.selection!r}; expected one of {SELECTIONS}")
        if self.selection == "fixed":
            if not self.subset:
                raise PipelineError("fixed selection needs a non-empty subset")
            if any(not 0 <= i < self.pathway.dim for i in self.subset):
                raise PipelineError(f"subset {self.subset} out of range for {self.pathway.dim} features")
        if self.cv_scheme not in ("kfold", "loocv"):
            raise PipelineError(f"unknown cv scheme {self.cv_scheme!r}")
        if self.cv_folds < 2 or self.inner_folds < 2:
            raise PipelineError("fold counts must be >= 2")
        if self.seed < 0:
            raise PipelineError(f"seed must be non-negative, got {self.seed}")

    @property
    def name(self) -> str:
        parts = ["WT"] if self.pathway.domain == "wavelet" else []
        parts.append("SGLDM")
        if self.selection == "ga":
            parts.append("GA")
        parts.append(self.classifier.upper())
        return "+".join(parts)

    @property
    def slug(self) -> str:
        return self.name.lower().replace("+", "_")

    @classmethod
    def from_config(cls, cfg: Config, **overrides) -> ExperimentSpec:
        """Build a spec from config values; keyword overrides use config keys with ``__`` for dots."""
        cfg = cfg.with_values(**overrides) if overrides else cfg
        pathway = Pathway(
            cfg["experiment.domain"],
            BlockSpec(cfg["block.size"], cfg["block.stride"]),
            GlcmSpec(cfg["glcm.distance"], cfg["glcm.angles"], cfg["glcm.levels"]),
            cfg["features.include_level1"],
        )
        kernel = svm.KernelSpec(cfg["svm.kernel"], cfg["svm.gamma"], cfg["svm.degree"], cfg["svm.coef0"])
        return cls(
            pathway=pathway,
            classifier=cfg["experiment.classifier"],
            kernel=kernel,
            selection=cfg["experiment.selection"],
            subset=tuple(cfg["experiment.subset"]),
            ga=GaConfig(
                population_size=cfg["ga.population_size"],
                crossover_prob=cfg["ga.crossover_prob"],
                mutation_rate=cfg["ga.mutation_rate"],
                penalty_w=cfg["ga.penalty_w"],
                target_size=cfg["ga.target_size"],
                generations=cfg["ga.generations"],
                penalty_mode=cfg["ga.penalty_mode"],
            ),
            inner_folds=cfg["ga.inner_folds"],
            cv_scheme=cfg["cv.scheme"],
            cv_folds=cfg["cv.folds"],
            stratified=cfg["cv.stratified"],
            svm=svm.SvmConfig(C=cfg["svm.C"], tol=cfg["svm.tol"], max_passes=cfg["svm.max_passes"]),
            bpn=bpn.BpnConfig(
                learning_rate=cfg["bpn.learning_rate"],
                momentum=cfg["bpn.momentum"],
                target_error=cfg["bpn.target_error"],
                max_epochs=cfg["bpn.max_epochs"],
                init_range=cfg["bpn.init_range"],
            ),
            bpn_hidden=cfg["bpn.hidden"] or None,
            seed=cfg["seed"],
        )

    def to_config(self) -> Config:
        """The effective settings as config keys (seeds of sub-streams are derived, not stored)."""
        p, k, g = self.pathway, self.kernel, self.ga
        return Config().with_values(
            seed=self.seed,
            block__size=p.block.block_size,
            block__stride=p.block.stride,
            glcm__distance=p.glcm.distance,
            glcm__angles=tuple(p.glcm.angles),
            glcm__levels=p.glcm.levels,
            features__include_level1=p.include_level1,
            experiment__domain=p.domain,
            experiment__classifier=self.classifier,
            experiment__selection=self.selection,
            experiment__subset=tuple(self.subset),
            cv__scheme=self.cv_scheme,
            cv__folds=self.cv_folds,
            cv__stratified=self.stratified,
            ga__population_size=g.population_size,
            ga__crossover_prob=g.crossover_prob,
            ga__mutation_rate=g.mutation_rate,
            ga__penalty_w=g.penalty_w,
            ga__target_size=g.target_size,
            ga__generations=g.generations,
            ga__penalty_mode=g.penalty_mode,
            ga__inner_folds=self.inner_folds,
            svm__kernel=k.kind,
            svm__gamma=k.gamma,
            svm__degree=k.degree,
            svm__coef0=k.coef0,
            svm__C=self.svm.C,
            svm__tol=self.svm.tol,
            svm__max_passes=self.svm.max_passes,
            bpn__learning_rate=self.bpn.learning_rate,
            bpn__momentum=self.bpn.momentum,
            bpn__target_error=self.bpn.target_error,
            bpn__max_epochs=self.bpn.max_epochs,
            bpn__init_range=self.bpn.init_range,
            bpn__hidden=self.bpn_hidden or 0,
        )

    def config_echo(self) -> str:
        return "".join(line + "\n" for line in self.to_config().to_text().splitlines() if not line.startswith("synth."))


# --- fitted classifier -------------------------------------------------------------


@dataclass
class FittedClassifier:
    """Normalize with training-set bounds, keep the selected columns, score with the model.

    The normalization parameters and feature subset live on the wrapped model,
    so a saved model never re-fits anything at prediction time.
    """

    kind: str
    model: svm.SvmModel | bpn.BpnModel
    pathway: Pathway = Pathway()
    selection: GaResult | None = field(default=None, repr=False)

    @property
    def subset(self) -> tuple[int, ...]:
        return tuple(self.model.feature_subset)

    @property
    def threshold(self) -> float:
        return 0.0 if self.kind == "svm" else 0.5

    def transform(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return apply_normalizer(self.model.normalization, X)[:, list(self.subset)]

    def scores(self, X) -> np.ndarray:
        """SVM decision values or BPN sigmoid outputs; larger means more abnormal."""
        return self.model.decision_function(self.transform(X))

    def predict(self, X) -> np.ndarray:
        return np.where(self.scores(X) >= self.threshold, ABNORMAL, NORMAL)

    def to_dict(self) -> dict:
        return {
            "format": "wct-classifier",
            "version": 1,
            "classifier": self.kind,
            "pathway": self.pathway.to_dict(),
            "feature_names": [self.pathway.names[i] for i in self.subset if i < self.pathway.dim],
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> FittedClassifier:
        if d.get("format") != "wct-classifier" or d.get("version") != 1:
            raise DataError(f"unsupported model document: {d.get('format')!r} v{d.get('version')!r}")
        kind = d["classifier"]
        model = svm.SvmModel.from_dict(d["model"]) if kind == "svm" else bpn.BpnModel.from_dict(d["model"])
        return cls(kind, model, Pathway.from_dict(d["pathway"]))


def save_classifier(clf: FittedClassifier, path: str | Path) -> None:
    Path(path).write_text(json.dumps(clf.to_dict(), indent=1, sort_keys=True) + "\n")


def load_classifier(path: str | Path) -> FittedClassifier:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        return FittedClassifier.from_dict(doc)
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc.strerror or exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"invalid model file {path}: {exc}") from exc


SelectionCache = dict


def _selection_key(spec: ExperimentSpec, train: LabeledDataset, tag: str) -> tuple:
    return (spec.pathway, spec.kernel, spec.svm, spec.ga, spec.inner_folds, spec.seed, tag, train.ids, train.X.tobytes())


def select_features(
    train: LabeledDataset, spec: ExperimentSpec, tag: str, cache: SelectionCache | None = None
) -> tuple[tuple[int, ...], GaResult | None]:
    """Feature subset for an already-normalized training split.

    GA selection uses the SVM internal-CV evaluator whatever the final
    classifier is, so its result depends only on the data, the GA/SVM settings
    and the seed; ``cache`` lets the SVM and BPN arms of one run share it.
    """
    if spec.selection == "all":
        return tuple(range(train.dim)), None
    if spec.selection == "fixed":
        return tuple(spec.subset), None
    key = _selection_key(spec, train, tag)
    if cache is not None and key in cache:
        return cache[key]
    J = svm_cv_evaluator(
        train,
        spec.kernel,
        replace(spec.svm, rng_seed=substream_seed(spec.seed, f"svm/inner/{tag}")),
        spec.inner_folds,
        substream_seed(spec.seed, f"folds/inner/{tag}"),
    )
    result = run_ga(train, replace(spec.ga, rng_seed=substream_seed(spec.seed, f"ga/{tag}")), J)
    out = (result.subset, result)
    if cache is not None:
        cache[key] = out
    return out


def fit_classifier(
    train: LabeledDataset, spec: ExperimentSpec, tag: str = "final", cache: SelectionCache | None = None
) -> FittedClassifier:
    """Normalize, select and train on ``train`` only."""
    norm = fit_normalizer(train)
    train_n = normalize_dataset(norm, train)
    subset, ga_result = select_features(train_n, spec, tag, cache)
    reduced = train_n.select(subset)
    if spec.classifier == "svm":
        model = svm.train(reduced, spec.kernel, replace(spec.svm, rng_seed=substream_seed(spec.seed, f"svm/{tag}")))
        model = replace(model, feature_subset=subset, normalization=norm)
    else:
        cfg = replace(spec.bpn, rng_seed=substream_seed(spec.seed, f"bpn/{tag}"))
        model, epochs, mse = bpn.train(reduced, cfg, spec.bpn_hidden)
        model.feature_subset, model.normalization = subset, norm
        log.debug("bpn %s: %d epochs, mse %.4g", tag, epochs, mse)
    return FittedClassifier(spec.classifier, model, spec.pathway, ga_result)


# --- experiments ----------------------------------------------------------------


def _fmt_metric(v: float | None) -> str:
    return "" if v is None else format_float(v)


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    data: LabeledDataset
    plan: CvPlan
    cv: CvResult
    curve: RocCurve
    fold_subsets: list[tuple[int, ...]]
    dominant_subbands: dict[str, int] | None = None

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def feature_names(self) -> list[str]:
        names = self.spec.pathway.names
        return names if len(names) == self.data.dim else [f"f{k:02d}" for k in range(self.data.dim)]

    @property
    def accuracy(self) -> float:
        return self.cv.accuracy

    @property
    def auc(self) -> float:
        return self.curve.auc

    @property
    def modal_subset(self) -> tuple[int, ...]:
        """Most frequent fold subset; ties go to the one seen first."""
        counts = Counter(self.fold_subsets)
        best = max(counts.values())
        return next(s for s in self.fold_subsets if counts[s] == best)

    @property
    def selected_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.modal_subset]

    def folds_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "n_normal", "n_abnormal", "tp", "tn", "fp", "fn", "sensitivity", "specificity", "accuracy", "features"])
        counts = self.plan.fold_class_counts(self.data.y)
        for f, (cm, m, subset) in enumerate(zip(self.cv.fold_matrices, self.cv.fold_metrics, self.fold_subsets)):
            w.writerow(
                [f, *counts[f], cm.tp, cm.tn, cm.fp, cm.fn]
                + [_fmt_metric(m.sensitivity), _fmt_metric(m.specificity), _fmt_metric(m.accuracy)]
                + [";".join(self.feature_names[i] for i in subset)]
            )
        return buf.getvalue()

    def predictions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "label", "fold", "score", "prediction"])
        for i, ident in enumerate(self.data.ids):
            w.writerow(
                [
                    ident,
                    LABEL_NAMES[int(self.data.y[i])],
                    int(self.plan.folds[i]),
                    format_float(self.cv.scores[i]),
                    LABEL_NAMES[int(self.cv.predictions[i])],
                ]
            )
        return buf.getvalue()

    def summary_text(self) -> str:
        n_pos = int(np.sum(self.data.y == ABNORMAL))
        scheme = f"{self.plan.k}-fold{' stratified' if self.plan.stratified else ''}" if self.plan.scheme == "kfold" else "leave-one-out"
        counts = Counter(self.fold_subsets)
        lines = [
            f"technique: {self.name}",
            f"cases: {len(self.data)} ({len(self.data) - n_pos} normal, {n_pos} abnormal)",
            f"cross-validation: {scheme}",
            f"pooled accuracy: {format_float(self.accuracy)} ({self.cv.pooled.correct}/{self.cv.pooled.total})",
            f"mean fold accuracy: {format_float(self.cv.mean_fold_accuracy)}",
            f"AUC: {format_float(self.auc)}",
            f"selected features (modal, {counts[self.modal_subset]}/{len(self.fold_subsets)} folds): "
            + describe_subset(self.modal_subset, self.feature_names),
        ]
        if self.dominant_subbands:
            lines.append(
                "max-variance level-2 subband (images): "
                + ", ".join(f"{k} {v}" for k, v in sorted(self.dominant_subbands.items()))
            )
        lines += ["", aligned_text(metrics_rows({self.name: self.cv.pooled})).rstrip(), "", "config:"]
        return "\n".join(lines) + "\n" + self.spec.config_echo()

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "folds.csv": self.folds_csv(),
            "predictions.csv": self.predictions_csv(),
            "summary.txt": self.summary_text(),
            "roc.csv": roc_to_csv(self.curve),
            "roc.svg": roc_svg({self.name: self.curve}, title=f"ROC: {self.name}"),
        }
        for name, text in files.items():
            (out / name).write_text(text)
        return [out / n for n in files]


def make_plan(data: LabeledDataset, spec: ExperimentSpec) -> CvPlan:
    if spec.cv_scheme == "loocv":
        return loocv_plan(data)
    return kfold_plan(data, spec.cv_folds, substream_seed(spec.seed, "folds"), spec.stratified)


def run_experiment(
    source: Manifest | LabeledDataset,
    spec: ExperimentSpec,
    cache: SelectionCache | None = None,
) -> ExperimentReport:
    """Extract (unless given vectors), cross-validate with in-fold selection, and score the ROC."""
    data = extract_dataset(source, spec.pathway) if isinstance(source, Manifest) else source
    plan = make_plan(data, spec)
    subsets: dict[int, tuple[int, ...]] = {}

    def trainer(train: LabeledDataset, fold: int) -> FittedClassifier:
        try:
            clf = fit_classifier(train, spec, f"fold{fold}", cache)
        except ValueError as exc:
            raise StageError("training", f"{spec.name} fold {fold}", exc) from exc
        subsets[fold] = clf.subset
        return clf

    result = cross_validate(data, plan, trainer)
    curve = roc(result.scores, data.y)
    dominant = None
    if isinstance(source, Manifest) and spec.pathway.domain == "wavelet":
        dominant = dict(Counter(dominant_subband(load_image(e), spec.pathway) for e in source.entries))
    return ExperimentReport(spec, data, plan, result, curve, [subsets[f] for f in sorted(subsets)], dominant)


# --- the four-arm comparison ----------------------------------------------------


ARMS = (("wavelet", "svm"), ("graylevel", "svm"), ("wavelet", "bpn"), ("graylevel", "bpn"))


@dataclass
class CompareReport:
    reports: list[ExperimentReport]

    def by_arm(self, domain: str, classifier: str) -> ExperimentReport:
        return next(r for r in self.reports if r.spec.pathway.domain == domain and r.spec.classifier == classifier)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["si_no", "technique", "accuracy", "accuracy_percent", "auc", "sensitivity", "specificity", "mean_fold_accuracy", "selected_features"])
        for k, r in enumerate(self.reports, start=1):
            m = metrics(r.cv.pooled)
            w.writerow(
                [k, r.name, format_float(r.accuracy), format_percent(r.accuracy), format_float(r.auc)]
                + [_fmt_metric(m.sensitivity), _fmt_metric(m.specificity), format_float(r.cv.mean_fold_accuracy)]
                + [";".join(r.selected_names)]
            )
        return buf.getvalue()

    def summary_text(self) -> str:
        rows = [["SI-No", "Technique", "Classification Accuracy", "AUC"]]
        rows += [[str(k), r.name, format_percent(r.accuracy), f"{r.auc:.4f}"] for k, r in enumerate(self.reports, start=1)]
        return aligned_text(rows)

    def classifier_table(self, classifier: str) -> str:
        """Wavelet vs gray-level metrics for one classifier, one column per domain."""
        cols = {}
        for r in self.reports:
            if r.spec.classifier == classifier:
                cols["Wavelet domain" if r.spec.pathway.domain == "wavelet" else "Gray level domain"] = r.cv.pooled
        return aligned_text(metrics_rows(cols))

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for r in self.reports:
            written += r.write(out / r.spec.slug)
        files = {
            "summary.csv": self.summary_csv(),
            "summary.txt": self.summary_text(),
            "svm_domains.txt": self.classifier_table("svm"),
            "bpn_domains.txt": self.classifier_table("bpn"),
        }
        for domain in DOMAINS:
            curves = {r.name: r.curve for r in self.reports if r.spec.pathway.domain == domain}
            files[f"roc_{domain}.svg"] = roc_svg(curves, title=f"ROC, {domain} domain")
        for name, text in files.items():
            (out / name).write_text(text)
        return written + [out / n for n in files]


def compare(
    source: Manifest | dict[str, LabeledDataset],
    base: ExperimentSpec = ExperimentSpec(),
    progress: Callable[[str], None] | None = None,
) -> CompareReport:
    """Run WT+SGLDM+GA+SVM, SGLDM+GA+SVM, WT+SGLDM+GA+BPN and SGLDM+GA+BPN.

    Features are extracted once per domain and GA results are shared between
    the two classifiers of a domain (they use the same evaluator and seeds).
    """
    datasets: dict[str, LabeledDataset] = {}
    cache: SelectionCache = {}
    reports = []
    dominant = None
    for domain, classifier in ARMS:
        level1 = base.pathway.include_level1 and domain == "wavelet"
        spec = replace(base, pathway=replace(base.pathway, domain=domain, include_level1=level1), classifier=classifier)
        if domain not in datasets:
            datasets[domain] = extract_dataset(source, spec.pathway) if isinstance(source, Manifest) else source[domain]
        if progress:
            progress(spec.name)
        report = run_experiment(datasets[domain], spec, cache)
        if isinstance(source, Manifest) and domain == "wavelet":
            if dominant is None:
                dominant = dict(Counter(dominant_subband(load_image(e), spec.pathway) for e in source.entries))
            report.dominant_subbands = dominant
        reports.append(report)
    return CompareReport(reports)


# --- block-level segmentation --------------------------------------------------------


@dataclass(frozen=True)
class RegionMask:
    grid: np.ndarray  # (rows, cols) of +1 abnormal / -1 normal
    scores: np.ndarray  # classifier score per block, same shape
    block: BlockSpec
    image_shape: tuple[int, int]  # (height, width)

    def __post_init__(self):
        rows, cols = self.block.grid_shape(*self.image_shape)
        if self.grid.shape != (rows, cols) or self.scores.shape != (rows, cols):
            raise PipelineError(f"mask grid {self.grid.shape} does not match the block grid {(rows, cols)}")

    @property
    def abnormal_count(self) -> int:
        return int(np.sum(self.grid == ABNORMAL))

    def block_origin(self, r: int, c: int) -> tuple[int, int]:
        return r * self.block.stride, c * self.block.stride

    def to_image(self) -> GrayImage:
        """Binary mask at image resolution: 255 inside abnormal blocks."""
        out = np.zeros(self.image_shape, dtype=np.uint8)
        b = self.block.block_size
        for r, c in zip(*np.nonzero(self.grid == ABNORMAL)):
            top, left = self.block_origin(r, c)
            out[top : top + b, left : left + b] = 255
        return GrayImage(out)

    def to_text(self) -> str:
        return "\n".join("".join("#" if v == ABNORMAL else "." for v in row) for row in self.grid) + "\n"


def overlay(img: GrayImage, mask: RegionMask, width: int = 1) -> GrayImage:
    """Copy of ``img`` with a 255-valued border drawn around every abnormal block."""
    out = img.pixels.copy()
    b = mask.block.block_size
    for r, c in zip(*np.nonzero(mask.grid == ABNORMAL)):
        top, left = mask.block_origin(r, c)
        out[top : top + width, left : left + b] = 255
        out[top + b - width : top + b, left : left + b] = 255
        out[top : top + b, left : left + width] = 255
        out[top : top + b, left + b - width : left + b] = 255
    return GrayImage(out)


def segment_image(img: GrayImage, clf: FittedClassifier, block: BlockSpec | None = None) -> tuple[RegionMask, GrayImage]:
    """Classify every block of ``img`` (tiled from the top-left) and draw the abnormal ones."""
    block = clf.pathway.block if block is None else block
    if block != clf.pathway.block:
        raise PipelineError(f"block spec {block} does not match the model's feature pathway {clf.pathway.block}")
    grid, X = clf.pathway.block_matrix(img)
    scores = clf.scores(X).reshape(grid)
    labels = np.where(scores >= clf.threshold, ABNORMAL, NORMAL).astype(np.int8)
    mask = RegionMask(labels, scores, block, (img.height, img.width))
    return mask, overlay(img, mask)


def block_truth(patch: PatchRect | None, mask_or_shape, block: BlockSpec) -> tuple[np.ndarray, np.ndarray]:
    """(inside, touched) boolean grids: blocks entirely inside the patch, and blocks overlapping it."""
    shape = mask_or_shape.image_shape if isinstance(mask_or_shape, RegionMask) else mask_or_shape
    rows, cols = block.grid_shape(*shape)
    inside = np.zeros((rows, cols), dtype=bool)
    touched = np.zeros((rows, cols), dtype=bool)
    if patch is None:
        return inside, touched
    b = block.block_size
    for r in range(rows):
        for c in range(cols):
            ov = patch.overlap(r * block.stride, c * block.stride, b)
            inside[r, c] = ov == b * b
            touched[r, c] = ov > 0
    return inside, touched


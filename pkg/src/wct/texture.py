"""Co-occurrence matrices and the nine second-order texture features.

Feature order everywhere is ENT, ENE, CON, SA, VAR, COR, MP, IDM, CT. A wavelet
feature vector concatenates that block for the H2, V2 and D2 subbands, so
feature ``9 * band + k`` is feature ``k`` of band ``band``.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .imaging import GrayImage, QuantizedImage, quantize
from .wavelet import DETAIL_NAMES, decompose


class TextureError(ValueError):
    pass


FEATURE_NAMES = ("ENT", "ENE", "CON", "SA", "VAR", "COR", "MP", "IDM", "CT")
FEATURE_LONG_NAMES = (
    "entropy",
    "energy",
    "contrast",
    "sum average",
    "variance",
    "correlation",
    "max probability",
    "inverse difference moment",
    "cluster tendency",
)
ANGLES = (0, 45, 90, 135)


@dataclass(frozen=True)
class GlcmSpec:
    distance: int = 1
    angles: tuple[int, ...] = ANGLES
    levels: int = 64

    def __post_init__(self):
        if self.distance < 1:
            raise TextureError(f"distance must be >= 1, got {self.distance}")
        angles = tuple(self.angles)
        if not angles or any(a not in ANGLES for a in angles):
            raise TextureError(f"angles must be a non-empty subset of {ANGLES}, got {angles}")
        if len(set(angles)) != len(angles):
            raise TextureError("duplicate angles")
        if self.levels < 2:
            raise TextureError(f"levels must be >= 2, got {self.levels}")
        object.__setattr__(self, "angles", angles)


@dataclass(frozen=True)
class Glcm:
    levels: int
    p: np.ndarray


@dataclass(frozen=True)
class WctFeatures:
    entropy: float
    energy: float
    contrast: float
    sum_average: float
    variance: float
    correlation: float
    max_probability: float
    idm: float
    cluster_tendency: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


assert len(fields(WctFeatures)) == len(FEATURE_NAMES)


def wavelet_feature_names(include_level1: bool = False) -> list[str]:
    bands = [f"{b}2" for b in DETAIL_NAMES]
    if include_level1:
        bands += [f"{b}1" for b in DETAIL_NAMES]
    return [f"{band}_{name}" for band in bands for name in FEATURE_NAMES]


def gray_feature_names() -> list[str]:
    return list(FEATURE_NAMES)


def quantize_subband(sb, levels: int) -> QuantizedImage:
    """Min-max rescale coefficients onto 0..levels-1, rounding half up.

    A constant subband has no range to rescale and maps to all zeros.
    """
    if levels < 2:
        raise TextureError(f"levels must be >= 2, got {levels}")
    x = np.asarray(sb, dtype=float)
    if not np.all(np.isfinite(x)):
        raise TextureError("subband contains non-finite coefficients")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return QuantizedImage(np.zeros(x.shape, dtype=np.intp), levels)
    q = np.floor((x - lo) / (hi - lo) * (levels - 1) + 0.5).astype(np.intp)
    return QuantizedImage(np.clip(q, 0, levels - 1), levels)


def _offset(angle: int, d: int) -> tuple[int, int]:
    return {0: (0, d), 45: (-d, d), 90: (-d, 0), 135: (-d, -d)}[angle]


def _pair_views(v: np.ndarray, dr: int, dc: int) -> tuple[np.ndarray, np.ndarray]:
    h, w = v.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    return v[r0:r1, c0:c1], v[r0 + dr : r1 + dr, c0 + dc : c1 + dc]


def glcm_counts(q: QuantizedImage, distance: int, angle: int) -> np.ndarray:
    """Symmetric co-occurrence counts (each pair counted as (i,j) and (j,i))."""
    if angle not in ANGLES:
        raise TextureError(f"unsupported angle {angle}")
    dr, dc = _offset(angle, distance)
    a, b = _pair_views(q.values, dr, dc)
    if a.size == 0:
        raise TextureError(
            f"no pixel pairs at distance {distance}, angle {angle} in a {q.width}x{q.height} image"
        )
    g = q.levels
    counts = np.bincount((a * g + b).ravel(), minlength=g * g).reshape(g, g)
    return counts + counts.T


def glcm_single(q: QuantizedImage, distance: int = 1, angle: int = 0) -> Glcm:
    counts = glcm_counts(q, distance, angle)
    return Glcm(q.levels, counts / counts.sum())


def glcm_averaged(q: QuantizedImage, spec: GlcmSpec = GlcmSpec()) -> Glcm:
    """Mean of the normalized per-angle matrices."""
    mats = [glcm_single(q, spec.distance, a).p for a in spec.angles]
    return Glcm(q.levels, np.mean(mats, axis=0))


def haralick(glcm: Glcm) -> WctFeatures:
    p = np.asarray(glcm.p, dtype=float)
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise TextureError(f"co-occurrence matrix must sum to 1, sums to {total!r}")
    g = p.shape[0]
    i, j = np.indices((g, g), dtype=float)
    idx = np.arange(g, dtype=float)
    px, py = p.sum(axis=1), p.sum(axis=0)
    mu_x, mu_y = idx @ px, idx @ py
    sd_x = np.sqrt(((idx - mu_x) ** 2) @ px)
    sd_y = np.sqrt(((idx - mu_y) ** 2) @ py)

    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum()) + 0.0  # -0.0 -> 0.0 for a point mass
    p_sum = np.bincount((i + j).astype(np.intp).ravel(), weights=p.ravel(), minlength=2 * g - 1)
    mu = 0.5 * (mu_x + mu_y)
    if sd_x * sd_y > 1e-15:
        correlation = float(((i - mu_x) * (j - mu_y) * p).sum() / (sd_x * sd_y))
    else:
        # degenerate marginals: correlation is undefined, report 0
        correlation = 0.0
    return WctFeatures(
        entropy=entropy,
        energy=float((p * p).sum()),
        contrast=float(((i - j) ** 2 * p).sum()),
        sum_average=float(np.arange(2 * g - 1) @ p_sum),
        variance=float(((i - mu) ** 2 * p).sum()),
        correlation=correlation,
        max_probability=float(p.max()),
        idm=float((p / (1.0 + (i - j) ** 2)).sum()),
        cluster_tendency=float(((i + j - mu_x - mu_y) ** 2 * p).sum()),
    )


def subband_features(sb, spec: GlcmSpec = GlcmSpec()) -> np.ndarray:
    q = quantize_subband(sb, spec.levels)
    return haralick(glcm_averaged(q, spec)).as_array()


def extract_wct(block, spec: GlcmSpec = GlcmSpec(), include_level1: bool = False) -> np.ndarray:
    """27 wavelet co-occurrence features: the nine features for H2, V2, D2 in that order."""
    pyr = decompose(block, 2)
    bands = list(pyr.level(2).details)
    if include_level1:
        bands += list(pyr.level(1).details)
    return np.concatenate([subband_features(b, spec) for b in bands])


def extract_gray(block: GrayImage, spec: GlcmSpec = GlcmSpec()) -> np.ndarray:
    """Nine co-occurrence features computed directly on the gray-level block."""
    q = quantize(block, spec.levels)
    return haralick(glcm_averaged(q, spec)).as_array()

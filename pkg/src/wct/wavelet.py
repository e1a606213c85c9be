"""Separable 2-D Daubechies-2 wavelet transform with periodic boundaries.

Analysis keeps even-indexed outputs of a periodic correlation::

    approx[n] = sum_k h[k] * x[(2n + k) mod N]
    detail[n] = sum_k g[k] * x[(2n + k) mod N]

With orthonormal filters this is an orthogonal change of basis, so synthesis is
the transpose and both perfect reconstruction and energy preservation hold to
rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .imaging import GrayImage


class WaveletError(ValueError):
    pass


Subband = np.ndarray

DETAIL_NAMES = ("H", "V", "D")


@lru_cache(maxsize=None)
def _filters() -> tuple[np.ndarray, np.ndarray]:
    s3 = np.sqrt(3.0)
    h = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * np.sqrt(2.0))
    g = np.array([(-1) ** k * h[3 - k] for k in range(4)])
    h.setflags(write=False)
    g.setflags(write=False)
    return h, g


def db2_filters() -> tuple[np.ndarray, np.ndarray]:
    """Daubechies order-2 scaling (lowpass) and wavelet (highpass) filters, 4 taps each."""
    h, g = _filters()
    return h.copy(), g.copy()


@lru_cache(maxsize=64)
def _analysis_index(n: int) -> np.ndarray:
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(4)[None, :]) % n
    idx.setflags(write=False)
    return idx


def _check_length(n: int, what: str) -> None:
    if n < 4 or n % 2:
        raise WaveletError(f"{what} must be even and >= 4, got {n}")


def _analyze_last(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, g = _filters()
    windows = x[..., _analysis_index(x.shape[-1])]
    return windows @ h, windows @ g


def _synthesize_last(a: np.ndarray, d: np.ndarray) -> np.ndarray:
    h, g = _filters()
    half = a.shape[-1]
    n = 2 * half
    out = np.zeros(a.shape[:-1] + (n,))
    base = 2 * np.arange(half)
    for k in range(4):
        # for fixed k the target indices are distinct, so fancy += is safe
        out[..., (base + k) % n] += h[k] * a + g[k] * d
    return out


def dwt1d(signal) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise WaveletError("dwt1d expects a 1-D signal")
    _check_length(x.shape[0], "signal length")
    return _analyze_last(x)


def idwt1d(approx, detail) -> np.ndarray:
    a = np.asarray(approx, dtype=float)
    d = np.asarray(detail, dtype=float)
    if a.shape != d.shape or a.ndim != 1:
        raise WaveletError("approx and detail must be 1-D sequences of equal length")
    return _synthesize_last(a, d)


@dataclass(frozen=True)
class DecompositionLevel:
    approx: Subband
    horizontal: Subband
    vertical: Subband
    diagonal: Subband

    def __post_init__(self):
        shapes = {b.shape for b in (self.approx, self.horizontal, self.vertical, self.diagonal)}
        if len(shapes) != 1:
            raise WaveletError(f"subbands of one level must share dimensions, got {sorted(shapes)}")

    @property
    def details(self) -> tuple[Subband, Subband, Subband]:
        return self.horizontal, self.vertical, self.diagonal


@dataclass(frozen=True)
class WaveletPyramid:
    levels: list[DecompositionLevel] = field(default_factory=list)

    def level(self, k: int) -> DecompositionLevel:
        """1-based access, matching the A1/H1/... naming."""
        return self.levels[k - 1]


def dwt2d(mat) -> DecompositionLevel:
    """One separable level: filter along rows, then along columns."""
    x = np.asarray(mat, dtype=float)
    if x.ndim != 2:
        raise WaveletError("dwt2d expects a 2-D array")
    _check_length(x.shape[0], "row count")
    _check_length(x.shape[1], "column count")
    if not np.all(np.isfinite(x)):
        raise WaveletError("input contains non-finite values")
    lo, hi = _analyze_last(x)  # along each row
    ll, lh = (b.T for b in _analyze_last(lo.T))  # along each column
    hl, hh = (b.T for b in _analyze_last(hi.T))
    return DecompositionLevel(approx=ll, horizontal=lh, vertical=hl, diagonal=hh)


def idwt2d(level: DecompositionLevel) -> np.ndarray:
    lo = _synthesize_last(level.approx.T, level.horizontal.T).T
    hi = _synthesize_last(level.vertical.T, level.diagonal.T).T
    return _synthesize_last(lo, hi)


def decompose(img, levels: int = 2) -> WaveletPyramid:
    """Multi-level decomposition; level k+1 transforms the approximation of level k."""
    if levels < 1:
        raise WaveletError(f"levels must be >= 1, got {levels}")
    x = img.pixels if isinstance(img, GrayImage) else img
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise WaveletError("decompose expects a 2-D image")
    multiple = 2**levels
    if x.shape[0] % multiple or x.shape[1] % multiple:
        raise WaveletError(
            f"image dimensions {x.shape[1]}x{x.shape[0]} must be multiples of {multiple} for {levels} levels"
        )
    out = []
    current = x
    for _ in range(levels):
        lvl = dwt2d(current)
        out.append(lvl)
        current = lvl.approx
    return WaveletPyramid(out)


def reconstruct(pyramid: WaveletPyramid) -> np.ndarray:
    if not pyramid.levels:
        raise WaveletError("empty pyramid")
    current = pyramid.levels[-1].approx
    for lvl in reversed(pyramid.levels):
        if current.shape != lvl.approx.shape:
            raise WaveletError(f"level dimension mismatch: {current.shape} vs {lvl.approx.shape}")
        current = idwt2d(DecompositionLevel(current, lvl.horizontal, lvl.vertical, lvl.diagonal))
    return current


def max_variance_subband(pyramid: WaveletPyramid, level: int = 2) -> str:
    """Name of the detail subband (e.g. ``"D2"``) whose coefficients have the largest variance."""
    lvl = pyramid.level(level)
    variances = [float(np.var(b)) for b in lvl.details]
    return f"{DETAIL_NAMES[int(np.argmax(variances))]}{level}"


def subband_image(band) -> GrayImage:
    """Min-max scale a subband onto 0..255 for viewing; a constant band maps to 0."""
    x = np.asarray(band, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return GrayImage(np.zeros(x.shape, dtype=np.uint8))
    return GrayImage(np.floor((x - lo) / (hi - lo) * 255 + 0.5).astype(np.uint8))


def pyramid_images(pyramid: WaveletPyramid) -> dict[str, GrayImage]:
    """Viewable images of every subband keyed ``A1``, ``H1``, ..., ``D2``."""
    out = {}
    for k, lvl in enumerate(pyramid.levels, start=1):
        for name, band in zip(("A", *DETAIL_NAMES), (lvl.approx, *lvl.details)):
            out[f"{name}{k}"] = subband_image(band)
    return out

"""Binary support vector machine trained by sequential minimal optimization.

The decision function is ``f(x) = sum_i alpha_i y_i K(x_i, x) + bias``; labels
are +1 (abnormal) and -1 (normal).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .features import LabeledDataset, NormalizationParams

MODEL_VERSION = 1
SV_THRESHOLD = 1e-8


class SvmError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    gamma: float = 1.0
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "gaussian"):
            raise SvmError(f"unknown kernel {self.kind!r}")
        if self.kind == "gaussian" and not self.gamma > 0:
            raise SvmError(f"gaussian gamma must be > 0, got {self.gamma}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise SvmError(f"polynomial degree must be an integer >= 1, got {self.degree}")

    @classmethod
    def linear(cls) -> KernelSpec:
        return cls("linear")

    @classmethod
    def polynomial(cls, degree: int = 3, coef0: float = 1.0) -> KernelSpec:
        return cls("polynomial", degree=degree, coef0=coef0)

    @classmethod
    def gaussian(cls, gamma: float = 1.0) -> KernelSpec:
        return cls("gaussian", gamma=gamma)

    def gram(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise SvmError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
        if self.kind == "gaussian":
            sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
            return np.exp(-self.gamma * np.maximum(sq, 0.0))
        dot = A @ B.T
        if self.kind == "linear":
            return dot
        return (dot + self.coef0) ** int(self.degree)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "gamma": self.gamma}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "degree": int(self.degree), "coef0": self.coef0}
        return {"kind": "linear"}

    @classmethod
    def from_dict(cls, d: dict) -> KernelSpec:
        return cls(**d)


def kernel_eval(k: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise SvmError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if k.kind == "gaussian":
        d = x - y
        return float(np.exp(-k.gamma * (d @ d)))
    if k.kind == "linear":
        return float(x @ y)
    return float((x @ y + k.coef0) ** int(k.degree))


@dataclass(frozen=True)
class SvmConfig:
    C: float = 10.0
    tol: float = 1e-3
    max_passes: int = 20
    rng_seed: int = 0
    max_steps: int = 100_000

    def __post_init__(self):
        if not self.C > 0:
            raise SvmError(f"C must be > 0, got {self.C}")
        if not self.tol > 0:
            raise SvmError(f"tol must be > 0, got {self.tol}")
        if self.max_passes < 1:
            raise SvmError("max_passes must be >= 1")


@numba.njit(cache=True)
def _take_step(i, j, K, y, alpha, E, b, C):
    if i == j:
        return False, b
    ai, aj = alpha[i], alpha[j]
    yi, yj = y[i], y[j]
    if yi != yj:
        lo = max(0.0, aj - ai)
        hi = min(C, C + aj - ai)
    else:
        lo = max(0.0, ai + aj - C)
        hi = min(C, ai + aj)
    if hi - lo < 1e-12:
        return False, b
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    if eta <= 1e-12:
        return False, b
    aj_new = aj + yj * (E[i] - E[j]) / eta
    if aj_new > hi:
        aj_new = hi
    elif aj_new < lo:
        aj_new = lo
    if abs(aj_new - aj) < 1e-12 * (aj_new + aj + 1e-12):
        return False, b
    eps = 1e-12 * C
    if aj_new < eps:
        aj_new = 0.0
    elif aj_new > C - eps:
        aj_new = C
    ai_new = ai + yi * yj * (aj - aj_new)
    # snap rounding residue onto the box so bound checks stay exact
    if ai_new < eps:
        ai_new = 0.0
    elif ai_new > C - eps:
        ai_new = C
    dai = ai_new - ai
    daj = aj_new - aj
    b1 = b - E[i] - yi * dai * K[i, i] - yj * daj * K[i, j]
    b2 = b - E[j] - yi * dai * K[i, j] - yj * daj * K[j, j]
    if 0.0 < ai_new < C:
        b_new = b1
    elif 0.0 < aj_new < C:
        b_new = b2
    else:
        b_new = 0.5 * (b1 + b2)
    n = y.shape[0]
    db = b_new - b
    for t in range(n):
        E[t] += yi * dai * K[i, t] + yj * daj * K[j, t] + db
    alpha[i] = ai_new
    alpha[j] = aj_new
    return True, b_new


@numba.njit(cache=True)
def _smo(K, y, C, tol, max_passes, max_steps, seed):
    np.random.seed(seed)
    n = y.shape[0]
    alpha = np.zeros(n)
    E = -y.copy()
    b = 0.0
    skip = np.zeros(n, dtype=np.bool_)
    stalls = 0
    steps = 0
    while steps < max_steps:
        # i: smallest error among points whose y*alpha may increase,
        # j: largest error among points whose y*alpha may decrease.
        # This pair maximizes E_j - E_i, i.e. |E_i - E_j| over feasible partners.
        i = -1
        j = -1
        for t in range(n):
            up = (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0.0)
            low = (y[t] > 0 and alpha[t] > 0.0) or (y[t] < 0 and alpha[t] < C)
            if up and not skip[t] and (i < 0 or E[t] < E[i]):
                i = t
            if low and (j < 0 or E[t] > E[j]):
                j = t
        if i < 0 or j < 0 or E[j] - E[i] <= tol:
            break
        steps += 1
        ok, b = _take_step(i, j, K, y, alpha, E, b, C)
        if not ok:
            start = np.random.randint(0, n)
            for t in range(n):
                k = (start + t) % n
                if E[k] - E[i] > tol:
                    ok, b = _take_step(i, k, K, y, alpha, E, b, C)
                    if ok:
                        break
        if ok:
            if stalls:
                skip[:] = False
                stalls = 0
        else:
            skip[i] = True
            stalls += 1
            if stalls >= max_passes:
                break
    return alpha, b, steps


def _bias(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, C: float, fallback: float) -> float:
    """Average of y_i - sum_j alpha_j y_j K_ij over unbounded support vectors.

    Without unbounded vectors, take the midpoint of the interval allowed by the
    bounded ones.
    """
    s = K @ (alpha * y)
    g = y - s
    free = (alpha > SV_THRESHOLD) & (alpha < C - SV_THRESHOLD)
    if free.any():
        return float(g[free].mean())
    at_zero = alpha <= SV_THRESHOLD
    at_c = ~at_zero
    lower = g[(at_zero & (y > 0)) | (at_c & (y < 0))]
    upper = g[(at_zero & (y < 0)) | (at_c & (y > 0))]
    if lower.size and upper.size:
        return float(0.5 * (lower.max() + upper.min()))
    return fallback


def smo_solve(K: np.ndarray, y: np.ndarray, cfg: SvmConfig = SvmConfig()) -> tuple[np.ndarray, float, int]:
    """Solve the dual for a precomputed Gram matrix; returns (alphas, bias, steps)."""
    yf = np.asarray(y, dtype=float)
    K = np.ascontiguousarray(K, dtype=float)
    alpha, b, steps = _smo(K, yf, float(cfg.C), float(cfg.tol), int(cfg.max_passes), int(cfg.max_steps), int(cfg.rng_seed))
    alpha[alpha < SV_THRESHOLD] = 0.0
    return alpha, _bias(K, yf, alpha, cfg.C, b), steps


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    sv_labels: np.ndarray
    bias: float
    kernel: KernelSpec
    feature_subset: tuple[int, ...] | None = None
    normalization: NormalizationParams | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise SvmError(f"dimension mismatch: model expects {self.dim}, got {X.shape[1]}")
        return self.kernel.gram(X, self.support_vectors) @ (self.alphas * self.sv_labels) + self.bias

    def to_dict(self) -> dict:
        return {
            "format": "wct-svm",
            "version": MODEL_VERSION,
            "kernel": self.kernel.to_dict(),
            "feature_subset": None if self.feature_subset is None else list(self.feature_subset),
            "normalization": None if self.normalization is None else self.normalization.to_dict(),
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "labels": self.sv_labels.astype(int).tolist(),
            "bias": self.bias,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SvmModel:
        if d.get("format") != "wct-svm" or d.get("version") != MODEL_VERSION:
            raise SvmError(f"unsupported model document: {d.get('format')!r} v{d.get('version')!r}")
        norm = d.get("normalization")
        subset = d.get("feature_subset")
        return cls(
            support_vectors=np.array(d["support_vectors"], dtype=float),
            alphas=np.array(d["alphas"], dtype=float),
            sv_labels=np.array(d["labels"], dtype=float),
            bias=float(d["bias"]),
            kernel=KernelSpec.from_dict(d["kernel"]),
            feature_subset=None if subset is None else tuple(subset),
            normalization=None if norm is None else NormalizationParams.from_dict(norm),
            metadata=dict(d.get("metadata", {})),
        )


def train(data: LabeledDataset, kernel: KernelSpec = KernelSpec(), cfg: SvmConfig = SvmConfig()) -> SvmModel:
    y = data.y
    if not (np.any(y == 1) and np.any(y == -1)):
        raise SvmError("training data must contain both classes")
    K = kernel.gram(data.X, data.X)
    alpha, bias, steps = smo_solve(K, y, cfg)
    sv = alpha > 0
    if not sv.any():
        raise SvmError("training produced no support vectors")
    return SvmModel(
        support_vectors=data.X[sv].copy(),
        alphas=alpha[sv],
        sv_labels=y[sv].astype(float),
        bias=bias,
        kernel=kernel,
        metadata={"C": cfg.C, "tol": cfg.tol, "max_passes": cfg.max_passes, "seed": cfg.rng_seed, "steps": steps},
    )


def decision_value(model: SvmModel, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(model.decision_function(x[None, :])[0])


def predict(model: SvmModel, x) -> int:
    """Sign of the decision value; an exact zero counts as +1."""
    return 1 if decision_value(model, x) >= 0.0 else -1


def sign_labels(scores) -> np.ndarray:
    return np.where(np.asarray(scores) >= 0.0, 1, -1)

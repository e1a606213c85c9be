"""Genetic-algorithm wrapper feature selection.

A chromosome is a 0/1 array with one bit per feature. Fitness is

    fitness(X) = J(X) - w * (|X| - d)

where ``J`` is a classification accuracy for the selected subset ``X``, ``w`` the
penalty coefficient and ``d`` the target subset size. The ``signed`` penalty
mode keeps the formula literally, so subsets smaller than ``d`` gain a bonus;
``absolute`` uses ``w * abs(|X| - d)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .eval import kfold_plan
from .features import LabeledDataset
from .svm import KernelSpec, SvmConfig, smo_solve

log = logging.getLogger(__name__)

Evaluator = Callable[[tuple[int, ...]], float]


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 30
    crossover_prob: float = 1.0
    mutation_rate: float = 0.1
    penalty_w: float = 0.5
    target_size: int = 4
    generations: int = 100
    rng_seed: int = 0
    penalty_mode: str = "signed"

    def __post_init__(self):
        if not 0 <= self.crossover_prob <= 1 or not 0 <= self.mutation_rate <= 1:
            raise SelectionError("probabilities must lie in [0, 1]")
        if self.population_size < 2 or self.population_size % 2:
            raise SelectionError(f"population size must be even and >= 2, got {self.population_size}")
        if self.generations < 1:
            raise SelectionError("generations must be >= 1")
        if self.penalty_mode not in ("signed", "absolute"):
            raise SelectionError(f"unknown penalty mode {self.penalty_mode!r}")


@dataclass(frozen=True)
class FitnessReport:
    bits: str
    J: float
    fitness: float
    generation: int

    @property
    def size(self) -> int:
        return self.bits.count("1")


# --- encoding ----------------------------------------------------------------


def parse_bits(text: str) -> np.ndarray:
    if any(ch not in "01" for ch in text):
        raise SelectionError(f"not a bit string: {text!r}")
    return np.array([ch == "1" for ch in text], dtype=np.uint8)


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def decode(bits) -> tuple[int, ...]:
    """0-based indices of the selected features (bit k selects feature k+1 in 1-based numbering)."""
    if isinstance(bits, str):
        bits = parse_bits(bits)
    return tuple(int(i) for i in np.flatnonzero(np.asarray(bits)))


def encode(indices, n_features: int) -> np.ndarray:
    bits = np.zeros(n_features, dtype=np.uint8)
    bits[list(indices)] = 1
    return bits


def describe_subset(indices, names=None) -> str:
    """Human-readable subset: names when given, otherwise 1-based positions."""
    if names is None:
        return "{" + ", ".join(str(i + 1) for i in indices) + "}"
    return ", ".join(names[i] for i in indices)


# --- fitness -------------------------------------------------------------------


def penalty(size: int, cfg: GaConfig) -> float:
    excess = size - cfg.target_size
    return cfg.penalty_w * (abs(excess) if cfg.penalty_mode == "absolute" else excess)


def fitness_value(J: float, size: int, cfg: GaConfig) -> float:
    return J - penalty(size, cfg)


def evaluate_fitness(bits, J: Evaluator, cfg: GaConfig, generation: int = 0) -> FitnessReport:
    subset = decode(bits)
    key = bits_to_str(bits)
    if not subset:
        log.debug("empty feature subset in generation %d gets fitness -inf", generation)
        return FitnessReport(key, 0.0, -math.inf, generation)
    acc = float(J(subset))
    return FitnessReport(key, acc, fitness_value(acc, len(subset), cfg), generation)


# --- operators -----------------------------------------------------------------


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ascending ranks; tied values share the mean of their ranks."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    start = 0
    for end in range(1, len(values) + 1):
        if end == len(values) or sorted_vals[end] != sorted_vals[start]:
            ranks[order[start:end]] = 0.5 * (start + 1 + end)
            start = end
    return ranks


def rank_probabilities(fitnesses) -> np.ndarray:
    ranks = _average_ranks(np.asarray(fitnesses, dtype=float))
    return ranks / ranks.sum()


def rank_roulette(fitnesses, rng: np.random.Generator) -> int:
    """Index drawn with probability proportional to its fitness rank."""
    f = np.asarray(fitnesses, dtype=float)
    if f.size == 0:
        raise SelectionError("empty population")
    if f.size == 1:
        return 0
    cdf = np.cumsum(rank_probabilities(f))
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), f.size - 1))


def crossover(a, b, rng: np.random.Generator | None = None, cut: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Single-point crossover; the cut point is uniform on [1, D-1] unless given."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise SelectionError(f"chromosome length mismatch: {a.size} vs {b.size}")
    if cut is None:
        if a.size < 2:
            return a.copy(), b.copy()
        cut = int(rng.integers(1, a.size))
    return np.concatenate([a[:cut], b[cut:]]), np.concatenate([b[:cut], a[cut:]])


def mutate(bits, rate: float, rng: np.random.Generator) -> np.ndarray:
    bits = np.asarray(bits)
    flips = rng.random(bits.size) < rate
    return (bits ^ flips).astype(np.uint8)


def replacement_index(population, fitnesses, parents: tuple[int, int], child, child_fitness: float) -> int:
    """Which population slot an offspring takes over.

    Better than both parents: the parent closer in Hamming distance (first
    parent on ties). Between the parents: the worse parent. Otherwise the
    least fit member of the population.
    """
    ia, ib = parents
    fa, fb = fitnesses[ia], fitnesses[ib]
    if child_fitness > fa and child_fitness > fb:
        child = np.asarray(child)
        da = int(np.sum(np.asarray(population[ia]) != child))
        db = int(np.sum(np.asarray(population[ib]) != child))
        if da != db:
            return ia if da < db else ib
        return min(ia, ib) if ia != ib else ia
    if child_fitness > min(fa, fb):
        return ia if fa < fb else ib
    return int(np.argmin(np.asarray(fitnesses, dtype=float)))


def replace(population, fitnesses, parents: tuple[int, int], child, child_fitness: float):
    """Return (population, fitnesses, replaced index) with the offspring inserted."""
    idx = replacement_index(population, fitnesses, parents, child, child_fitness)
    pop = [np.asarray(p).copy() for p in population]
    fit = list(fitnesses)
    pop[idx] = np.asarray(child).copy()
    fit[idx] = child_fitness
    return pop, fit, idx


# --- driver ----------------------------------------------------------------------


@dataclass
class GaResult:
    best: np.ndarray
    best_report: FitnessReport
    history: list[FitnessReport] = field(default_factory=list)
    best_by_generation: list[float] = field(default_factory=list)  # index 0 = initial population
    evaluations: int = 0

    @property
    def subset(self) -> tuple[int, ...]:
        return decode(self.best)


def run_ga(data, cfg: GaConfig, J: Evaluator) -> GaResult:
    """Steady-state GA: each generation breeds ``population_size / 2`` parent pairs.

    Every offspring is mutated, evaluated and immediately placed by
    ``replacement_index``. The best chromosome ever evaluated is returned. J is
    cached by bit string, so it must be deterministic.
    """
    n = data.dim if isinstance(data, LabeledDataset) else int(data)
    if n < 1:
        raise SelectionError("need at least one feature")
    rng = np.random.default_rng(cfg.rng_seed)
    cache: dict[str, float] = {}
    history: list[FitnessReport] = []

    def cached_J(subset):
        key = bits_to_str(encode(subset, n))
        if key not in cache:
            cache[key] = J(subset)
        return cache[key]

    def evaluate(bits, generation):
        try:
            rep = evaluate_fitness(bits, cached_J, cfg, generation)
        except Exception as exc:
            raise SelectionError(f"fitness evaluation failed in generation {generation}: {exc}") from exc
        history.append(rep)
        return rep

    population = [(rng.random(n) < 0.5).astype(np.uint8) for _ in range(cfg.population_size)]
    reports = [evaluate(c, 0) for c in population]
    fitnesses = [r.fitness for r in reports]
    best_i = int(np.argmax(fitnesses))
    best, best_rep = population[best_i].copy(), reports[best_i]
    best_by_gen = [best_rep.fitness]

    for gen in range(1, cfg.generations + 1):
        for _ in range(cfg.population_size // 2):
            ia = rank_roulette(fitnesses, rng)
            ib = rank_roulette(fitnesses, rng)
            while ib == ia:
                ib = rank_roulette(fitnesses, rng)
            if rng.random() < cfg.crossover_prob:
                children = crossover(population[ia], population[ib], rng)
            else:
                children = (population[ia].copy(), population[ib].copy())
            for child in children:
                child = mutate(child, cfg.mutation_rate, rng)
                rep = evaluate(child, gen)
                slot = replacement_index(population, fitnesses, (ia, ib), child, rep.fitness)
                population[slot] = child
                fitnesses[slot] = rep.fitness
                if rep.fitness > best_rep.fitness:
                    best, best_rep = child.copy(), rep
        best_by_gen.append(best_rep.fitness)

    return GaResult(best, best_rep, history, best_by_gen, len(cache))


def history_to_csv(history: list[FitnessReport]) -> str:
    lines = ["generation,bits,J,fitness"]
    lines += [f"{r.generation},{r.bits},{r.J:.17g},{r.fitness:.17g}" for r in history]
    return "\n".join(lines) + "\n"


# --- J: SVM accuracy under internal cross-validation ------------------------------


def svm_cv_evaluator(
    train: LabeledDataset,
    kernel: KernelSpec = KernelSpec(),
    svm_cfg: SvmConfig = SvmConfig(),
    folds: int = 5,
    seed: int = 0,
) -> Evaluator:
    """J(X): pooled accuracy of a stratified k-fold CV of the SVM on ``train`` restricted to X.

    ``train`` is expected to be normalized already. Uses only the data it is
    given, so calling it on a training split cannot leak test cases.
    """
    per_class = min(int(np.sum(train.y > 0)), int(np.sum(train.y < 0)))
    k = min(folds, per_class)
    if k < 2:
        raise SelectionError("each class needs at least two cases for internal cross-validation")
    plan = kfold_plan(train.y, k, seed)
    splits = [plan.split(f) for f in range(k)]
    y = train.y.astype(float)

    def J(subset: tuple[int, ...]) -> float:
        X = train.X[:, list(subset)]
        K = kernel.gram(X, X)
        correct = 0
        for tr, te in splits:
            alpha, bias, _ = smo_solve(K[np.ix_(tr, tr)], y[tr], svm_cfg)
            f = K[np.ix_(te, tr)] @ (alpha * y[tr]) + bias
            correct += int(np.sum(np.where(f >= 0, 1.0, -1.0) == y[te]))
        return correct / len(y)

    return J

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from planted import planted_dataset
from wct.selection import (
    GaConfig,
    SelectionError,
    bits_to_str,
    crossover,
    decode,
    describe_subset,
    encode,
    evaluate_fitness,
    fitness_value,
    history_to_csv,
    mutate,
    rank_probabilities,
    rank_roulette,
    replace,
    replacement_index,
    run_ga,
    svm_cv_evaluator,
)

CFG5 = GaConfig(target_size=5, penalty_w=0.5)


def test_decode_examples():
    assert [i + 1 for i in decode("00101000")] == [3, 5]
    assert decode("0000") == ()
    assert decode("1" * 6) == tuple(range(6))
    assert bits_to_str(encode((2, 4), 8)) == "00101000"
    assert describe_subset((2, 4)) == "{3, 5}"
    assert describe_subset((0,), ["H2_ENT"]) == "H2_ENT"
    with pytest.raises(SelectionError):
        decode("0102")


def test_fitness_examples():
    assert fitness_value(0.96, 5, CFG5) == pytest.approx(0.96)
    assert fitness_value(0.96, 7, CFG5) == pytest.approx(-0.04)
    assert fitness_value(0.90, 3, CFG5) == pytest.approx(1.90)
    absolute = GaConfig(target_size=5, penalty_mode="absolute")
    assert fitness_value(0.90, 3, absolute) == pytest.approx(-0.10)


def test_empty_subset_is_never_selected():
    rep = evaluate_fitness("000", lambda s: pytest.fail("J must not be called"), CFG5)
    assert rep.fitness == -math.inf


def test_rank_probabilities():
    assert rank_probabilities([3.0, 7.0]).tolist() == pytest.approx([1 / 3, 2 / 3])
    assert rank_probabilities([1.0, 1.0, 1.0]).tolist() == pytest.approx([1 / 3] * 3)
    assert rank_probabilities([5.0, -math.inf, 5.0]).tolist() == pytest.approx([2.5 / 6, 1 / 6, 2.5 / 6])


def test_rank_roulette_frequencies():
    rng = np.random.default_rng(0)
    draws = np.array([rank_roulette([0.2, 0.9], rng) for _ in range(30_000)])
    assert abs(np.mean(draws == 1) - 2 / 3) < 0.02
    draws = np.array([rank_roulette([1.0] * 5, rng) for _ in range(30_000)])
    assert np.all(np.abs(np.bincount(draws, minlength=5) / 30_000 - 0.2) < 0.02)
    assert rank_roulette([4.2], rng) == 0


def test_crossover_examples():
    a, b = crossover(np.array([1, 1, 1, 1]), np.array([0, 0, 0, 0]), cut=2)
    assert bits_to_str(a) == "1100" and bits_to_str(b) == "0011"
    same = np.array([1, 0, 1])
    for cut in (1, 2):
        c, d = crossover(same, same, cut=cut)
        assert np.array_equal(c, same) and np.array_equal(d, same)
    with pytest.raises(SelectionError):
        crossover(np.zeros(3), np.zeros(4), cut=1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
def test_crossover_preserves_bits(seed, n):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 2, n), rng.integers(0, 2, n)
    c, d = crossover(a, b, rng)
    assert np.array_equal(c + d, a + b)


def test_mutation():
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, 27).astype(np.uint8)
    assert np.array_equal(mutate(bits, 0.0, rng), bits)
    assert np.array_equal(mutate(bits, 1.0, rng), 1 - bits)
    flips = [np.sum(mutate(bits, 0.1, rng) != bits) for _ in range(10_000)]
    assert abs(np.mean(flips) - 2.7) < 0.1


def test_replacement_rules():
    pop = [np.array(b) for b in ([1, 1, 0, 0], [0, 0, 1, 1], [1, 0, 1, 0])]
    fit = [0.8, 0.5, 0.1]
    child = np.array([1, 1, 0, 1])  # closer to parent 0
    assert replacement_index(pop, fit, (0, 1), child, 0.9) == 0
    assert replacement_index(pop, fit, (1, 0), child, 0.9) == 0
    assert replacement_index(pop, fit, (0, 1), child, 0.6) == 1
    assert replacement_index(pop, fit, (0, 1), child, 0.3) == 2
    tie = np.array([1, 0, 0, 1])  # equally far from both parents
    assert replacement_index(pop, fit, (1, 0), tie, 0.9) == 0
    new_pop, new_fit, idx = replace(pop, fit, (0, 1), child, 0.3)
    assert idx == 2 and new_fit == [0.8, 0.5, 0.3] and np.array_equal(new_pop[2], child)
    assert fit == [0.8, 0.5, 0.1]


def test_config_validation():
    with pytest.raises(SelectionError):
        GaConfig(population_size=7)
    with pytest.raises(SelectionError):
        GaConfig(mutation_rate=1.5)
    with pytest.raises(SelectionError):
        GaConfig(penalty_mode="other")


def toy_J(subset):
    # rewards features 0 and 3, small cost per extra feature
    return (0 in subset) * 0.5 + (3 in subset) * 0.4 - 0.01 * len(subset)


def test_run_ga_deterministic():
    cfg = GaConfig(generations=5, rng_seed=11, population_size=10)
    a, b = run_ga(6, cfg, toy_J), run_ga(6, cfg, toy_J)
    assert history_to_csv(a.history) == history_to_csv(b.history)
    assert a.subset == b.subset


def test_one_generation_hand_simulation():
    cfg = GaConfig(generations=1, rng_seed=3, population_size=6)
    res = run_ga(5, cfg, toy_J)
    initial = [r.fitness for r in res.history if r.generation == 0]
    offspring = [r.fitness for r in res.history if r.generation == 1]
    assert len(initial) == 6 and len(offspring) == 6
    assert res.best_by_generation[0] == max(initial)
    assert res.best_report.fitness == max(initial + offspring) == res.best_by_generation[1]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_best_ever_monotone(seed):
    res = run_ga(8, GaConfig(generations=8, rng_seed=seed, population_size=8), toy_J)
    assert all(b >= a for a, b in zip(res.best_by_generation, res.best_by_generation[1:]))
    assert res.best_report.fitness == max(r.fitness for r in res.history)


def test_failing_evaluator_names_generation():
    def bad(subset):
        raise RuntimeError("boom")

    with pytest.raises(SelectionError, match="generation 0"):
        run_ga(4, GaConfig(generations=1, population_size=4), bad)


def test_svm_evaluator():
    d = planted_dataset(0, shift=6.0)
    J = svm_cv_evaluator(d, folds=5, seed=0)
    assert J((0,)) == 1.0
    assert J((4,)) < 0.8
    assert J((0, 1)) == J((0, 1))
    with pytest.raises(SelectionError):
        svm_cv_evaluator(d.subset([0, 1, 39]), folds=5)


def test_population_stationary_without_variation():
    cfg = GaConfig(generations=4, rng_seed=2, population_size=6, mutation_rate=0.0)
    res = run_ga(5, cfg, toy_J)
    # with no mutation, offspring only recombine existing bits; every offspring is
    # built from columns present in the initial population
    initial = {r.bits for r in res.history if r.generation == 0}
    cols = [{b[i] for b in initial} for i in range(5)]
    for r in res.history:
        assert all(r.bits[i] in cols[i] for i in range(5))


def test_history_fitness_recheckable():
    cfg = GaConfig(generations=3, rng_seed=4, population_size=6, target_size=2)
    res = run_ga(6, cfg, toy_J)
    for r in res.history:
        if r.size:
            assert r.fitness == fitness_value(r.J, r.size, cfg)
            assert r.J == toy_J(decode(r.bits))
    sizes = {len([r for r in res.history if r.generation == g]) for g in range(1, 4)}
    assert sizes == {6}

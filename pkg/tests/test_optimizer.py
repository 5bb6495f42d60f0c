import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from hawkfenn.benchfns import get_function
from hawkfenn.errors import ContractViolation, NonFiniteError
from hawkfenn.optimizer import (
    ALGORITHMS, Evaluator, HawkPopulation, OptimizerConfig, adaptive_threshold,
    gaussian_perturbation_vector, hho_phase_update, ieea_candidates, ieea_update, levy_flight_vector,
    opposite, qobl_update, quasi_opposite, run, run_stem, scalability_sweep, with_seed)

from oracles import mantegna_sigma, sample_kurtosis


# --- threshold -------------------------------------------------------------

def test_threshold_values():
    assert adaptive_threshold(0, 500) == 1.0
    assert adaptive_threshold(500, 500) == pytest.approx(0.23840584404423515, abs=1e-15)
    assert adaptive_threshold(250, 500) == pytest.approx(0.5378828427399902, abs=1e-15)


def test_threshold_errors():
    with pytest.raises(ContractViolation):
        adaptive_threshold(0, 0)
    with pytest.raises(ContractViolation):
        adaptive_threshold(11, 10)


# --- random vectors --------------------------------------------------------

def test_gaussian_vector_moments_and_determinism():
    v = gaussian_perturbation_vector(10**6, np.random.default_rng(1))
    assert abs(v.mean()) < 0.01
    assert abs(v.var() - 1) < 0.02
    a = gaussian_perturbation_vector(5, np.random.default_rng(7))
    b = gaussian_perturbation_vector(5, np.random.default_rng(7))
    assert np.array_equal(a, b)
    assert gaussian_perturbation_vector(0, np.random.default_rng(0)).shape == (0,)


def test_levy_heavy_tailed_and_symmetric():
    v = levy_flight_vector(10**6, np.random.default_rng(2))
    assert sample_kurtosis(v) > 3.0
    # median of |step| matches the Mantegna ratio of normals, well below the tails
    assert np.median(np.abs(v)) < 5 * mantegna_sigma(1.5)
    half = v.size // 2
    assert ks_2samp(v[:half], -v[half:]).pvalue > 0.01
    assert np.array_equal(levy_flight_vector(4, np.random.default_rng(3)),
                          levy_flight_vector(4, np.random.default_rng(3)))
    assert levy_flight_vector((3, 2), np.random.default_rng(0)).shape == (3, 2)


# --- IEEA -------------------------------------------------------------------

def test_ieea_scripted_example():
    X = np.array([[1.0, 1.0]])
    rabbit = np.zeros(2)
    ones = np.ones((1, 2))
    cand = ieea_candidates(X, rabbit, np.array([0.5]), ones, ones, a=0.9)
    np.testing.assert_array_equal(cand, [[0.5, 0.5]])


def test_ieea_zero_noise_collapses():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(4, 3))
    rabbit = rng.normal(size=3)
    zero = np.zeros((4, 3))
    np.testing.assert_array_equal(ieea_candidates(X, rabbit, np.full(4, 0.1), zero, zero, 0.5), X)
    np.testing.assert_array_equal(ieea_candidates(X, rabbit, np.full(4, 0.9), zero, zero, 0.5),
                                  np.tile(rabbit, (4, 1)))


def test_ieea_second_branch_by_hand():
    X = np.array([[2.0, -1.0]])
    rabbit = np.array([1.0, 3.0])
    rg1 = np.array([[0.5, 2.0]])
    rg2 = np.array([[-1.0, 1.0]])
    # rabbit + rand * rg1 * (rg2 * rabbit - X)
    expect = [1.0 + 0.8 * 0.5 * (-1.0 - 2.0), 3.0 + 0.8 * 2.0 * (3.0 + 1.0)]
    np.testing.assert_allclose(ieea_candidates(X, rabbit, np.array([0.8]), rg1, rg2, 0.3), [expect])


# --- QOBL -------------------------------------------------------------------

def test_quasi_opposite_examples():
    rng = np.random.default_rng(0)
    assert opposite(2.0, 0.0, 10.0) == 8.0
    q = quasi_opposite(np.full(1000, 2.0), 0.0, 10.0, rng)
    assert q.min() >= 5.0 and q.max() <= 8.0
    assert np.all(quasi_opposite(np.full(10, 5.0), 0.0, 10.0, rng) == 5.0)
    q = quasi_opposite(np.full(1000, 1.0), -1.0, 1.0, rng)
    assert q.min() >= -1.0 and q.max() <= 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3), st.floats(0, 1), st.integers(0, 2**31))
def test_quasi_opposite_containment_property(lo, width, frac, seed):
    hi = lo + width
    x = lo + frac * width
    xo = opposite(x, lo, hi)
    assert opposite(xo, lo, hi) == pytest.approx(x, abs=1e-9 * max(1.0, abs(x)))
    c = (lo + hi) / 2
    q = quasi_opposite(np.array([x]), lo, hi, np.random.default_rng(seed))[0]
    assert min(c, xo) <= q <= max(c, xo)


# --- population updates -----------------------------------------------------

def _pop(fn, n, seed):
    rng = np.random.default_rng(seed)
    X = fn.lower + rng.random((n, fn.dim)) * (fn.upper - fn.lower)
    ev = Evaluator(fn)
    return HawkPopulation.from_positions(X, ev(X)), ev


def test_hho_final_iteration_is_hard_besiege():
    fn = get_function("sphere", 4)
    pop, ev = _pop(fn, 12, 0)
    old_f = pop.fitness.copy()
    rabbit = pop.rabbit_position.copy()
    seed = 11
    hho_phase_update(pop, fn.lower, fn.upper, 10, 10, np.random.default_rng(seed), ev)
    # replay the first three draws: E0, q, r
    g = np.random.default_rng(seed)
    g.random(12), g.random(12)
    r = g.random(12)
    for i in range(12):
        if r[i] >= 0.5 or old_f[i] > fn.batch(rabbit[None])[0]:
            # E = 0: besiege and the first dive candidate both land on the rabbit
            np.testing.assert_array_equal(pop.positions[i], rabbit)


def test_identical_hawks_at_optimum_stay_put():
    fn = get_function("sphere", 3)
    X = np.zeros((5, 3))
    ev = Evaluator(fn)
    pop = HawkPopulation.from_positions(X, ev(X))
    rng = np.random.default_rng(0)
    for t in range(20):
        hho_phase_update(pop, fn.lower, fn.upper, t, 20, rng, ev)
        ieea_update(pop, fn.lower, fn.upper, t, 20, rng, ev)
        qobl_update(pop, fn.lower, fn.upper, rng, ev)
        assert pop.rabbit_fitness == 0.0
        np.testing.assert_array_equal(pop.rabbit_position, 0.0)


@pytest.mark.parametrize("acceptance", ["rabbit", "greedy"])
def test_ieea_and_qobl_never_worsen_rabbit(acceptance):
    fn = get_function("rastrigin", 5)
    pop, ev = _pop(fn, 8, 1)
    rng = np.random.default_rng(2)
    best = pop.rabbit_fitness
    for t in range(30):
        before = pop.fitness.copy()
        ieea_update(pop, fn.lower, fn.upper, t, 30, rng, ev, acceptance)
        qobl_update(pop, fn.lower, fn.upper, rng, ev, acceptance)
        assert pop.rabbit_fitness <= best
        best = pop.rabbit_fitness
        assert fn.batch(pop.rabbit_position[None])[0] == pop.rabbit_fitness
        if acceptance == "greedy":
            assert np.all(pop.fitness <= before)
        else:
            np.testing.assert_array_equal(pop.fitness, before)


# --- full runs --------------------------------------------------------------

@pytest.mark.parametrize("alg", ALGORITHMS)
def test_run_invariants(alg):
    fn = get_function("ackley", 6)
    seen, n_evals = [], [0]

    def cb(it, hawks, X, f):
        assert np.all(X >= fn.lower) and np.all(X <= fn.upper)
        seen.append(f.min())
        n_evals[0] += len(f)

    rec = run(fn, OptimizerConfig(10, 40, 3, alg), cb)
    assert rec.best_trace.shape == (40,)
    assert np.all(np.diff(rec.best_trace) <= 0)
    assert rec.final_fitness == rec.best_trace[-1] == min(seen)
    assert rec.evaluations == n_evals[0]
    assert fn.batch(rec.final_position[None])[0] == rec.final_fitness
    again = run(fn, OptimizerConfig(10, 40, 3, alg))
    assert np.array_equal(again.best_trace, rec.best_trace)
    assert np.array_equal(again.final_position, rec.final_position)


def test_hho_plus_evaluation_budget():
    fn = get_function("sphere", 5)
    N, T = 10, 25
    counts = {}

    def cb(it, hawks, X, f):
        counts[it] = counts.get(it, 0) + len(f)

    rec = run(fn, OptimizerConfig(N, T, 0, "hho_plus"), cb)
    assert counts[0] == N
    # one HHO move (plus at most two dive trials) and one IEEA and one QOBL pass per hawk
    assert all(3 * N <= counts[t] <= 4 * N for t in range(1, T + 1))
    assert rec.evaluations == sum(counts.values())


def test_hho_plus_sphere_dim10_smoke():
    for seed in range(5):
        assert run(get_function("sphere", 10), OptimizerConfig(seed=seed)).final_fitness < 1e-10


def test_random_search_improves_on_initial():
    fn = get_function("sphere", 2)
    rec = run(fn, OptimizerConfig(5, 20, 0, "random_search"))
    assert rec.best_trace[-1] < rec.best_trace[0] or rec.best_trace[0] < 1.0


def test_noisy_objective_is_seeded():
    fn = get_function("quartic_noise", 5)
    a = run(fn, OptimizerConfig(6, 10, 4, "hho_plus"))
    b = run(fn, OptimizerConfig(6, 10, 4, "hho_plus"))
    assert a.final_fitness == b.final_fitness


def test_non_finite_fitness_aborts_with_position():
    from hawkfenn.benchfns import ObjectiveFunction

    def bad(X, rng=None):
        return np.where(X[:, 0] > 0, np.nan, 1.0)

    fn = ObjectiveFunction("bad", 2, np.full(2, -1.0), np.full(2, 1.0), bad)
    with pytest.raises(NonFiniteError, match="position"):
        run(fn, OptimizerConfig(10, 5, 0, "hho"))


def test_config_validation():
    with pytest.raises(ContractViolation):
        OptimizerConfig(population_size=1)
    with pytest.raises(ContractViolation):
        OptimizerConfig(max_iterations=0)
    with pytest.raises(ContractViolation):
        OptimizerConfig(algorithm="pso")
    with pytest.raises(ContractViolation):
        OptimizerConfig(acceptance="always")
    assert with_seed(OptimizerConfig(), 9).seed == 9


def test_scalability_sweep():
    cfg = OptimizerConfig(8, 15, 2)
    single = run(get_function("sphere", 10), cfg)
    (swept,) = scalability_sweep("sphere", [10], cfg)
    assert np.array_equal(single.best_trace, swept.best_trace)
    recs = scalability_sweep("sphere", [10, 50], cfg)
    assert [r.dim for r in recs] == [10, 50]
    assert all(r.best_trace.size == 15 for r in recs)
    with pytest.raises(ContractViolation):
        scalability_sweep("sphere", [], cfg)


def test_scalability_sphere_difficulty_grows_with_dim():
    lo = [run(get_function("sphere", 10), OptimizerConfig(10, 50, s)).final_fitness for s in range(10)]
    hi = [run(get_function("sphere", 100), OptimizerConfig(10, 50, s)).final_fitness for s in range(10)]
    assert np.median(lo) <= np.median(hi)


def test_trace_csv_and_summary():
    rec = run(get_function("sphere", 3), OptimizerConfig(4, 3, 1, "hho"))
    lines = rec.trace_csv().splitlines()
    assert lines[0] == "iter,best_fitness"
    assert len(lines) == 4
    assert float(lines[-1].split(",")[1]) == rec.final_fitness
    assert rec.stem == run_stem("hho", "sphere", 3, 1) == "hho__sphere__d3__s1"
    assert rec.summary()["evaluations"] == rec.evaluations
    assert math.isfinite(rec.summary()["wall_time"])

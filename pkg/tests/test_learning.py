import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzylos.aggregation import Walk, choquet_batch
from fuzzylos.decomposition import decompose, gsamp
from fuzzylos.learning import (
    Dataset,
    DatasetSpec,
    FitOptions,
    NumericalError,
    ObservabilityRecord,
    design_matrix,
    fit_measure,
    generate_dataset,
    interval_of_uncertainty,
    load_dataset,
    load_observability,
    project_monotone,
    save_dataset,
    save_report,
    track_observability,
    walk_unobserved_fraction,
)
from fuzzylos.measure import (
    FuzzyMeasure,
    max_measure,
    random_monotone_measure,
    reference_measure,
    subset_index,
    validate_measure,
)

SINGLE_ROW = Dataset(np.array([[0.5, 0.1, 0.9]]), np.array([0.0]))


class TestObservability:
    def test_single_row(self):
        obs = track_observability(SINGLE_ROW)
        expected = {0, subset_index([2], 3), subset_index([0, 2], 3), 7}
        assert set(np.flatnonzero(obs.seen)) == expected

    def test_empty(self):
        obs = track_observability(Dataset(np.empty((0, 3)), np.empty(0)))
        assert np.flatnonzero(obs.seen).tolist() == [0]

    def test_all_sorts_cover_lattice(self):
        X = np.array([np.argsort(p) for p in itertools.permutations(range(3))], dtype=float)
        obs = track_observability(Dataset(X, np.zeros(6)))
        assert obs.seen.all()

    def test_unobserved_fraction(self):
        obs = track_observability(SINGLE_ROW)
        assert walk_unobserved_fraction(Walk((2, 0, 1)), obs) == 0.0
        assert walk_unobserved_fraction(Walk((0, 1, 2)), obs) == pytest.approx(2 / 3)

    def test_unobserved_extremes(self):
        assert walk_unobserved_fraction(Walk((1, 0, 2)), ObservabilityRecord.full(3)) == 0.0
        assert walk_unobserved_fraction(Walk((1, 0, 2)), ObservabilityRecord.empty(3)) == 1.0

    def test_record_round_trip(self, tmp_path):
        fit = fit_measure(generate_dataset(DatasetSpec(reference_measure(), m=30, seed=1)), FitOptions(max_iterations=50))
        save_report(fit, tmp_path / "r.json")
        assert np.array_equal(load_observability(tmp_path / "r.json").seen, fit.observability.seen)


class TestIntervals:
    def test_locked_in_place(self):
        seen = np.zeros(16, dtype=bool)
        seen[[0, 1, 2, 4, 8]] = True
        iv = interval_of_uncertainty(max_measure(4), ObservabilityRecord(4, seen))
        assert iv.unseen() and all(b == (1.0, 1.0) for b in iv.unseen().values())

    def test_no_data(self):
        g = random_monotone_measure(4, 0)
        iv = interval_of_uncertainty(g, ObservabilityRecord.empty(4))
        assert all(iv[a] == (0.0, 1.0) for a in range(1, 15))

    def test_sandwich(self):
        g = FuzzyMeasure(3, [0, 0.2, 0.3, 0.5, 0.4, 0.6, 0.7, 1.0])
        seen = np.zeros(8, dtype=bool)
        seen[[0, 3, 7]] = True
        iv = interval_of_uncertainty(g, ObservabilityRecord(3, seen))
        assert iv[1] == (0.0, 0.5) and iv[2] == (0.0, 0.5)
        assert iv[4] == (0.0, 1.0) and iv[5] == (0.0, 1.0)

    @settings(max_examples=30)
    @given(st.integers(0, 2**31))
    def test_contains_true_value(self, seed):
        rng = np.random.default_rng(seed)
        g = random_monotone_measure(4, seed % 997)
        iv = interval_of_uncertainty(g, ObservabilityRecord(4, rng.random(16) < 0.4))
        assert np.all(iv.lower <= g.values) and np.all(g.values <= iv.upper)


class TestGenerate:
    def test_deterministic(self):
        spec = DatasetSpec(reference_measure(), m=40, sigma=0.1, seed=5)
        a, b = generate_dataset(spec), generate_dataset(spec)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_quota_enumerates_walks(self):
        data = generate_dataset(DatasetSpec(random_monotone_measure(3, 1), seed=0, coverage="quota"))
        assert len(data) == 6
        ranks = [Walk(tuple(np.argsort(-h, kind="stable"))).rank for h in data.X]
        assert ranks == list(range(6))

    def test_subset(self):
        data = generate_dataset(DatasetSpec(reference_measure(), m=9, seed=0, coverage="subset", walks=[3, 7]))
        ranks = {Walk(tuple(np.argsort(-h, kind="stable"))).rank for h in data.X}
        assert ranks == {3, 7}
        with pytest.raises(ValueError):
            generate_dataset(DatasetSpec(reference_measure(), seed=0, coverage="subset", walks=[]))

    def test_noise_free_labels(self):
        g = reference_measure()
        data = generate_dataset(DatasetSpec(g, m=25, seed=2))
        assert np.array_equal(data.y, choquet_batch(g, data.X))

    def test_file_round_trip(self, tmp_path):
        data = generate_dataset(DatasetSpec(reference_measure(), m=12, sigma=0.05, seed=9))
        save_dataset(data, tmp_path / "d.csv")
        assert (tmp_path / "d.csv").read_text().splitlines()[0] == "h1,h2,h3,h4,h5,y"
        back = load_dataset(tmp_path / "d.csv")
        assert np.array_equal(back.X, data.X) and np.array_equal(back.y, data.y)

    def test_bad_rows(self):
        with pytest.raises(ValueError):
            Dataset(np.ones((2, 3)), np.ones(3))


def test_design_matrix_reproduces_choquet(rng):
    g = random_monotone_measure(5, 4)
    X = rng.uniform(size=(100, 5))
    assert np.allclose(design_matrix(X) @ g.values, choquet_batch(g, X), atol=1e-14, rtol=0)


@settings(max_examples=40)
@given(st.integers(2, 5), st.integers(0, 2**31))
def test_projection_yields_valid_measure(n, seed):
    rng = np.random.default_rng(seed)
    v = project_monotone(rng.normal(0.5, 0.7, size=1 << n), n)
    assert validate_measure(FuzzyMeasure(n, v, constrained=False)) == []


class TestFit:
    def test_noise_free_recovery(self):
        g = reference_measure()
        data = generate_dataset(DatasetSpec(g, seed=0, coverage="quota"))
        fit = fit_measure(data)
        assert fit.sse / len(data) < 1e-6
        assert np.abs(fit.predict(data.X) - data.y).max() < 1e-3
        ops = decompose(fit.measure).operators
        assert ops.k == 4

    def test_sse_non_increasing(self):
        data = generate_dataset(DatasetSpec(random_monotone_measure(4, 3), m=80, sigma=0.05, seed=1))
        fit = fit_measure(data, FitOptions(max_iterations=500))
        assert np.all(np.diff(fit.history) <= 0)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**31))
    def test_constrained_fit_is_valid(self, seed):
        rng = np.random.default_rng(seed)
        data = Dataset(rng.uniform(size=(30, 4)), rng.uniform(-0.5, 1.5, size=30))
        fit = fit_measure(data, FitOptions(max_iterations=200))
        assert validate_measure(fit.measure) == []

    def test_single_sort_observes_one_walk(self):
        data = generate_dataset(DatasetSpec(reference_measure(), m=20, seed=0, coverage="subset", walks=[17]))
        fit = fit_measure(data, FitOptions(max_iterations=200))
        assert gsamp(fit.measure, fit.observability).ranks.tolist() == [17]

    def test_relaxed_linear_model_with_bias(self, rng):
        a, b = np.array([0.7, -0.4, 1.3]), 0.25
        X = -np.sort(-rng.uniform(size=(60, 3)), axis=1)
        data = Dataset(X, X @ a + b)
        fit = fit_measure(data, FitOptions(constrained=False, bias=True, max_iterations=100_000))
        w = np.diff(fit.measure.values[[0, 1, 3, 7]])
        assert np.allclose(w, a, atol=1e-3) and abs(fit.bias - b) < 1e-3

    def test_unseen_variables_stay_at_start(self):
        data = generate_dataset(DatasetSpec(reference_measure(), m=5, seed=0, coverage="subset", walks=[0]))
        fit = fit_measure(data, FitOptions(constrained=False))
        unseen = ~fit.observability.seen
        assert np.all(fit.measure.values[unseen] == 0.0)

    def test_l1_penalty_shrinks(self):
        data = generate_dataset(DatasetSpec(random_monotone_measure(4, 6), m=60, sigma=0.05, seed=2))
        plain = fit_measure(data, FitOptions(max_iterations=2000))
        shrunk = fit_measure(data, FitOptions(reg_p=1, reg_lambda=5.0, max_iterations=2000))
        assert shrunk.measure.values[1:-1].sum() < plain.measure.values[1:-1].sum()

    def test_options_validation(self):
        with pytest.raises(ValueError):
            FitOptions(bias=True)
        with pytest.raises(ValueError):
            FitOptions(reg_p=3)
        with pytest.raises(ValueError):
            FitOptions(reg_lambda=-1)

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            fit_measure(Dataset(np.empty((0, 3)), np.empty(0)))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reported(self):
        data = generate_dataset(DatasetSpec(reference_measure(), m=10, seed=0))
        with pytest.raises(NumericalError):
            fit_measure(data, FitOptions(constrained=False, step_size=1e308))


def slsqp_fit(X, y, n, start):
    """Reference constrained least squares by a general-purpose solver."""
    from scipy.optimize import minimize

    A = design_matrix(X).toarray()
    cons = [{"type": "eq", "fun": lambda g: np.array([g[0], g[-1] - 1.0])}]
    pairs = [(m ^ (1 << k), m) for m in range(1 << n) for k in range(n) if m >> k & 1]
    lo, hi = np.array(pairs).T
    cons.append({"type": "ineq", "fun": lambda g: g[hi] - g[lo]})
    res = minimize(lambda g: np.sum((A @ g - y) ** 2), start, jac=lambda g: 2 * A.T @ (A @ g - y),
                   constraints=cons, method="SLSQP", options={"ftol": 1e-15, "maxiter": 2000})
    return float(np.sum((A @ res.x - y) ** 2))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fit_reaches_least_squares_optimum(seed):
    data = generate_dataset(DatasetSpec(reference_measure(), seed=seed, sigma=0.05, coverage="quota"))
    fit = fit_measure(data)
    ref = slsqp_fit(data.X, data.y, 5, fit.measure.values)
    assert fit.sse <= ref * (1 + 1e-7) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_exact_projection_is_euclidean(seed):
    from scipy.optimize import minimize

    from fuzzylos.learning import project_lattice

    n = 3
    v = np.random.default_rng(seed).normal(0.5, 0.5, size=8)
    got = project_lattice(v, n)
    assert validate_measure(FuzzyMeasure(n, got, constrained=False)) == []
    pairs = [(m ^ (1 << k), m) for m in range(8) for k in range(n) if m >> k & 1]
    lo, hi = np.array(pairs).T
    ref = minimize(lambda g: np.sum((g - v) ** 2), np.full(8, 0.5), method="SLSQP",
                   constraints=[{"type": "eq", "fun": lambda g: np.array([g[0], g[-1] - 1])},
                                {"type": "ineq", "fun": lambda g: g[hi] - g[lo]}],
                   options={"ftol": 1e-14})
    assert np.sum((got - v) ** 2) <= np.sum((ref.x - v) ** 2) + 1e-8
    assert np.allclose(got, ref.x, atol=1e-5)
    assert np.array_equal(project_lattice(got, n), got)

import numpy as np
import pytest
import hypothesis as hyp
import hypothesis.strategies as hyp_st

from lattice.corpus import ghz
from lattice.decomposition import DenseProjector, basis_projectors, make_decomposition
from lattice.errors import DecompositionError, ObservableError
from lattice.observables import Observable
from lattice.state import StateVector
from sampling.collapse import SamplingPlan, collapse_report, sample_branches


@pytest.fixture
def ghz4_split():
    return make_decomposition(ghz(4), basis_projectors(4, [0]))


def test_ghz4_collapse(ghz4_split):
    observables = [Observable.from_label("Z1", 4), Observable.from_label("X2", 4),
                   Observable.from_label("XXXX", 4)]
    report = collapse_report(ghz4_split, observables, n_samples=10000, seed=11)
    z1, x2, string = report.observables
    assert z1.off_diagonal_residual == pytest.approx(0.0, abs=1e-12)
    assert x2.off_diagonal_residual == pytest.approx(0.0, abs=1e-12)
    assert string.off_diagonal_residual == pytest.approx(1.0, abs=1e-12)
    assert string.pauli_weight == 4
    for entry in report.observables:
        assert abs(entry.sampled_mean - entry.branch_mean) <= 4 * entry.sample_std_error + 1e-12
    assert z1.branch_values == pytest.approx([1.0, -1.0])
    assert sum(report.frequencies) == pytest.approx(1.0)


def test_cost_table_flags_cheap_observables(ghz4_split):
    report = collapse_report(ghz4_split, [Observable.from_label("Z1", 4), Observable.from_label("XXXX", 4)],
                             n_samples=100)
    rows = report.cost_table(interference_cost=2)
    assert [row["below_interference_cost"] for row in rows] == [True, False]
    assert "below_interference_cost" not in report.cost_table()[0]


def test_draws_do_not_depend_on_workers(ghz4_split):
    plan = SamplingPlan(ghz4_split, n_samples=10000, seed=2 ** 63 + 5)
    serial = sample_branches(plan, workers=1)
    threaded = sample_branches(plan, workers=4)
    assert serial.shape == (10000,)
    assert np.array_equal(serial, threaded)


def test_seed_changes_draws(ghz4_split):
    first = sample_branches(SamplingPlan(ghz4_split, 500, seed=1))
    second = sample_branches(SamplingPlan(ghz4_split, 500, seed=2))
    assert not np.array_equal(first, second)


@hyp.given(seed=hyp_st.integers(0, 2 ** 32 - 1))
@hyp.settings(max_examples=20, deadline=None)
def test_frequencies_match_weights(seed):
    rng = np.random.default_rng(seed)
    state = StateVector.from_amplitudes(rng.normal(size=8) + 1j * rng.normal(size=8))
    decomposition = make_decomposition(state, basis_projectors(3, [0, 1]))
    n_samples = 20000
    report = collapse_report(decomposition, [], n_samples=n_samples, seed=seed)
    weights = np.array(report.weights)
    frequencies = np.array(report.frequencies)
    tolerance = 5 * np.sqrt(weights * (1 - weights) / n_samples) + 1e-9
    assert np.all(np.abs(frequencies - weights) <= tolerance)


def test_plan_validation(ghz4_split):
    with pytest.raises(DecompositionError):
        SamplingPlan(ghz4_split, n_samples=0)
    with pytest.raises(DecompositionError):
        SamplingPlan(ghz4_split, n_samples=10, seed=-1)
    with pytest.raises(DecompositionError):
        SamplingPlan(ghz4_split, n_samples=10, seed=2 ** 64)


def test_observable_size_must_match(ghz4_split):
    with pytest.raises(ObservableError):
        collapse_report(ghz4_split, [Observable.from_label("Z0", 2)], n_samples=10)


def test_dropped_mass_is_reported_apart_from_the_residual():
    state = StateVector.from_amplitudes(np.array([1.0, 0.0, 0.0, 5e-9]))
    decomposition = make_decomposition(state, [DenseProjector(np.diag([1.0, 1.0, 1.0, 0.0]), "head"),
                                               DenseProjector(np.diag([0.0, 0.0, 0.0, 1.0]), "tail")])
    report = collapse_report(decomposition, [Observable.from_label("X0 X1", 2)], n_samples=50)
    entry = report.observables[0]
    assert abs(entry.full_expectation - entry.branch_mean - entry.off_diagonal_residual) <= 1e-12
    assert entry.off_diagonal_residual == 0.0
    assert entry.dropped_term == pytest.approx(1e-8, rel=1e-6)
    assert entry.to_dict()["dropped_term"] == entry.dropped_term

import numpy as np
import pytest

from branching.candidates import computational_family
from dynamics.growth import GrowthPoint, GrowthSeries, complexity_growth_probe
from dynamics.hamiltonian import (
    HamiltonianSpec,
    exact_evolve,
    inverse_trotter_arrays,
    steps_for,
    trotter_arrays,
    trotter_evolve,
)
from dynamics.tree import (
    BranchTree,
    TmSplitter,
    TreeLevel,
    assemble_tree,
    recoherence_tree,
    stable_window,
    track_branches,
    verify_tree,
)
from lattice.circuit import Circuit, apply_circuit
from lattice.corpus import apparatus_initial, bloch_product, random_circuit_state
from lattice.decomposition import Decomposition, basis_projectors, make_decomposition, pauli_projectors
from lattice.errors import DecompositionError, LatticeError
from lattice.observables import Observable, expectation
from lattice.state import StateVector, fidelity, same_ray
from oracle.results import EXACT, LOWER_BOUND_CUTOFF, ComplexityResult
from oracle.service import OracleConfig


def identity(vectors):
    return vectors


@pytest.fixture
def apparatus_splitter():
    family = computational_family(5, sites=[0], subset_sizes=[1])
    return TmSplitter(family, epsilon=0.1, oracle=OracleConfig(budget=3), threshold=1)


@pytest.fixture
def apparatus_hamiltonian():
    return HamiltonianSpec.apparatus(5, kappa=1.0, J=0.0, g=1.0, dt=0.05)


def test_trotter_tracks_exact_evolution():
    h = HamiltonianSpec(3, J=1.0, g=0.7, dt=0.01)
    state = random_circuit_state(3, depth=10, seed=4)
    trotter = trotter_evolve(state, h, 100)
    exact = exact_evolve(state, h, 1.0)
    assert fidelity(trotter, exact) == pytest.approx(1.0, abs=1e-6)
    assert np.linalg.norm(trotter.amplitudes) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("order", [1, 2])
def test_inverse_trotter_undoes_evolution(order):
    h = HamiltonianSpec(3, J=0.8, g=0.6, kappa=0.5, system_site=1, dt=0.05, order=order)
    vectors = np.stack([random_circuit_state(3, depth=8, seed=s).amplitudes for s in range(3)])
    evolved = trotter_arrays(vectors, h, 17)
    assert np.allclose(inverse_trotter_arrays(evolved, h, 17), vectors, atol=1e-12)


def test_zero_steps_is_identity():
    h = HamiltonianSpec(2, J=1.0, dt=5.0)
    vectors = np.eye(4, dtype=complex)
    assert np.array_equal(trotter_arrays(vectors, h, 0), vectors)


def test_coarse_step_warns():
    h = HamiltonianSpec(2, J=1.0, dt=0.6)
    with pytest.warns(RuntimeWarning):
        trotter_arrays(np.eye(4, dtype=complex), h, 1)


def test_system_site_is_conserved(apparatus_hamiltonian):
    state = StateVector.basis("10000")
    z_system = Observable.from_label("Z0", 5)
    evolved = trotter_evolve(state, apparatus_hamiltonian, 30)
    assert expectation(evolved, z_system) == pytest.approx(-1.0, abs=1e-12)


def test_spec_validation():
    with pytest.raises(LatticeError):
        HamiltonianSpec(2, dt=0.0)
    with pytest.raises(LatticeError):
        HamiltonianSpec(2, order=3)
    with pytest.raises(LatticeError):
        HamiltonianSpec(2, system_site=4)
    with pytest.raises(LatticeError):
        HamiltonianSpec(2, kappa=1.0)
    with pytest.raises(LatticeError):
        trotter_evolve(StateVector.zero(3), HamiltonianSpec(2), 1)


def test_steps_for():
    h = HamiltonianSpec(2, dt=0.05)
    assert steps_for(h, 1.1) == 22
    assert steps_for(h, 0.0) == 0
    with pytest.raises(LatticeError):
        steps_for(h, 0.125)


def test_apparatus_terms():
    h = HamiltonianSpec.apparatus(3, kappa=2.0, g=0.5)
    assert h.zz_terms() == {(0, 1): -2.0, (0, 2): -2.0}
    assert h.x_terms() == [(1, -0.5), (2, -0.5)]
    assert np.allclose(h.dense(), h.dense().conj().T)


def test_refinement_is_a_tree(plus2):
    coarse = make_decomposition(plus2, basis_projectors(2, [0]))
    levels = [TreeLevel(0.0, Decomposition.trivial(plus2)), TreeLevel(1.0, coarse), TreeLevel(2.0, coarse)]
    tree = assemble_tree(levels, [identity, identity])
    assert tree.branch_counts() == [1, 2, 2]
    assert tree.edges[0].parents == [0, 0]
    verification = verify_tree(tree, theta=0.99)
    assert verification.is_tree
    assert verification.max_weight_defect == pytest.approx(0.0, abs=1e-12)


def test_rotated_split_breaks_the_tree(plus2):
    earlier = make_decomposition(plus2, basis_projectors(2, [0]))
    later = make_decomposition(plus2, pauli_projectors(Observable.from_label("X0", 2)))
    tree = assemble_tree([TreeLevel(0.0, earlier), TreeLevel(1.0, later)], [identity])
    strict = verify_tree(tree, theta=0.99)
    assert not strict.is_tree
    assert {v["kind"] for v in strict.violations} == {"missing"}
    loose = verify_tree(tree, theta=0.4)
    assert {v["kind"] for v in loose.violations} == {"ambiguous"}


def test_assemble_needs_one_propagator_per_gap(ghz2):
    levels = [TreeLevel(0.0, Decomposition.trivial(ghz2)), TreeLevel(1.0, Decomposition.trivial(ghz2))]
    with pytest.raises(DecompositionError):
        assemble_tree(levels, [])


def test_stable_window(ghz2):
    trivial = Decomposition.trivial(ghz2)
    split = make_decomposition(ghz2, basis_projectors(2, [0]))
    decompositions = [trivial, split, split, trivial, split]
    tree = BranchTree([TreeLevel(float(t), d) for t, d in enumerate(decompositions)], [])
    assert stable_window(tree) == [0, 1, 2]
    assert verify_tree(tree, window=[0]).note == "fewer than two levels"


def test_sample_times_must_increase(apparatus_hamiltonian, apparatus_splitter):
    with pytest.raises(DecompositionError):
        track_branches(apparatus_initial(5), apparatus_hamiltonian, [0.4, 0.1], apparatus_splitter)
    with pytest.raises(DecompositionError):
        track_branches(apparatus_initial(5), apparatus_hamiltonian, [], apparatus_splitter)


@pytest.mark.slow
def test_apparatus_records_the_system(apparatus_hamiltonian, apparatus_splitter):
    times = [0.0, 0.4, 1.1, 1.4, 1.8]
    tree = track_branches(apparatus_initial(5), apparatus_hamiltonian, times, apparatus_splitter)
    assert tree.branch_counts() == [1, 1, 2, 2, 1]
    window = stable_window(tree)
    assert window == [0, 1, 2, 3]
    assert verify_tree(tree, theta=0.99, window=window).is_tree
    assert tree.levels[2].info["good_split"]


def test_recoherence_merges_branches(apparatus_hamiltonian, apparatus_splitter):
    tree = recoherence_tree(apparatus_initial(5), apparatus_hamiltonian, 1.1,
                            apparatus_splitter.family, apparatus_splitter)
    assert tree.branch_counts() == [1, 2, 1]
    assert tree.levels[1].info == {"forced": True}
    strict = verify_tree(tree, theta=0.99)
    assert not strict.is_tree
    assert [(v["level"], v["kind"]) for v in strict.violations] == [(2, "missing")]
    loose = verify_tree(tree, theta=0.4)
    assert [(v["level"], v["kind"]) for v in loose.violations] == [(2, "ambiguous")]


def test_random_circuit_growth():
    series = complexity_growth_probe(StateVector.zero(2), "random_circuit", horizon=4, seed=1,
                                     oracle=OracleConfig(budget=6))
    assert [p.time for p in series.points] == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert series.points[0].lower_bound == 0
    for point in series.points:
        assert point.exact.status == EXACT
        assert point.lower_bound <= point.time
        assert point.upper_bound == point.lower_bound
    assert len(series.circuit) == 4


def test_hamiltonian_growth_samples_by_step():
    h = HamiltonianSpec(2, J=1.0, g=1.0, dt=0.1)
    series = complexity_growth_probe(StateVector.zero(2), "hamiltonian", horizon=4, stride=2, hamiltonian=h,
                                     oracle=OracleConfig(budget=2))
    assert [p.time for p in series.points] == pytest.approx([0.0, 0.2, 0.4])
    assert series.points[0].lower_bound == 0
    assert series.circuit is None


def test_growth_probe_arguments():
    with pytest.raises(LatticeError):
        complexity_growth_probe(StateVector.zero(2), "hamiltonian", horizon=2)
    with pytest.raises(LatticeError):
        complexity_growth_probe(StateVector.zero(2), "annealing", horizon=2)
    with pytest.raises(LatticeError):
        complexity_growth_probe(StateVector.zero(2), "random_circuit", horizon=2, stride=0)
    with pytest.raises(LatticeError):
        complexity_growth_probe(StateVector.zero(2), "random_circuit", horizon=2, walk="greedy")


def test_growth_violations_are_reported():
    values = [0, 2, 1, 3]
    points = [GrowthPoint(float(k), ComplexityResult(v, LOWER_BOUND_CUTOFF)) for k, v in
              enumerate(values)]
    series = GrowthSeries("hamiltonian", points)
    assert series.violations == [2]
    assert not series.monotone
    assert [row["lower_bound"] for row in series.rows()] == values


def test_reduced_walk_never_lowers_complexity():
    initial = bloch_product([1.3, 1.7], [0.37, 1.23])
    series = complexity_growth_probe(initial, "random_circuit", horizon=4, seed=3,
                                     oracle=OracleConfig(budget=6), walk="reduced")
    assert series.monotone
    assert len(series.circuit) == 4
    assert series.points[0].lower_bound == 0
    assert series.points[1].lower_bound == 1
    for point in series.points:
        assert point.exact.status == EXACT
        assert point.lower_bound <= point.time
    states = [apply_circuit(initial, Circuit(series.circuit.gates[:k], series.circuit.gate_set))
              for k in range(5)]
    assert not any(same_ray(a, b) for a, b in zip(states, states[1:]))


def test_reduced_walk_is_seeded():
    initial = bloch_product([1.3, 1.7], [0.37, 1.23])
    runs = [complexity_growth_probe(initial, "random_circuit", horizon=3, seed=8,
                                    oracle=OracleConfig(budget=5), walk="reduced") for _ in range(2)]
    assert runs[0].circuit == runs[1].circuit
    assert [p.lower_bound for p in runs[0].points] == [p.lower_bound for p in runs[1].points]

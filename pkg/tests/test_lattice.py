from math import sqrt

import numpy as np
import pytest
import hypothesis as hyp
import hypothesis.strategies as hyp_st

from lattice.circuit import Circuit, apply_circuit, random_circuit
from lattice.corpus import apparatus_initial, bloch_product, corpus_state, ghz, ghz_pairs, plus_product
from lattice.decomposition import (
    BasisProjector,
    Decomposition,
    DenseProjector,
    basis_projectors,
    make_decomposition,
    pauli_projectors,
    refine,
)
from lattice.errors import DecompositionError, GateSetError, LatticeError, ObservableError
from lattice.gates import GateSet, is_unitary
from lattice.observables import Observable, decomposition_expectation, expectation
from lattice.state import LatticeSpec, StateVector, apply_matrix, fidelity, inner_product, same_ray


def test_ghz_amplitudes():
    state = ghz(3)
    assert state.n_sites == 3
    assert state.amplitudes[0] == pytest.approx(1 / sqrt(2))
    assert state.amplitudes[7] == pytest.approx(1 / sqrt(2))
    assert state.norm == pytest.approx(1.0)


def test_from_amplitudes_normalizes_and_rejects_zero():
    state = StateVector.from_amplitudes([3, 0, 0, 4])
    assert state.amplitudes[3] == pytest.approx(0.8)
    with pytest.raises(LatticeError):
        StateVector.from_amplitudes([0, 0])
    with pytest.raises(LatticeError):
        StateVector.from_amplitudes([1, 0, 0])


def test_lattice_limits():
    with pytest.raises(LatticeError):
        LatticeSpec(0)
    with pytest.raises(LatticeError):
        LatticeSpec(40)


def test_site_zero_is_most_significant():
    flipped = apply_matrix(StateVector.zero(2).amplitudes, GateSet.default().matrix("X"), (0,), 2)
    assert np.allclose(flipped, [0, 0, 1, 0])


def test_cnot_orientation(gate_set):
    state = apply_circuit(StateVector.basis("10"), Circuit((("CNOT", (0, 1)),), gate_set))
    assert same_ray(state, StateVector.basis("11"))
    untouched = apply_circuit(StateVector.basis("01"), Circuit((("CNOT", (0, 1)),), gate_set))
    assert same_ray(untouched, StateVector.basis("01"))


def test_apply_matrix_batches():
    vectors = np.eye(4, dtype=complex)
    out = apply_matrix(vectors, GateSet.default().matrix("X"), (1,), 2)
    assert np.allclose(out, vectors[[1, 0, 3, 2]])


def test_default_gate_set_moves(gate_set):
    moves = gate_set.moves(3)
    assert len(moves) == 7 * 3 + 4
    assert gate_set.pairs(3) == [(0, 1), (1, 0), (1, 2), (2, 1)]
    assert GateSet.two_local().pairs(3) == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    assert gate_set.uniform_cost


def test_gate_set_rejects_bad_input():
    with pytest.raises(GateSetError):
        GateSet({"A": np.array([[1, 1], [0, 1]])}, {})
    with pytest.raises(GateSetError):
        GateSet.named("all_to_all")
    with pytest.raises(GateSetError):
        GateSet.named("nearest_neighbor", {"T": 2})


def test_custom_costs_break_uniformity():
    gate_set = GateSet.named("nearest_neighbor", {"CNOT": 3})
    assert gate_set.cost("CNOT") == 3
    assert not gate_set.uniform_cost


def test_placement_follows_locality(gate_set):
    with pytest.raises(LatticeError):
        apply_circuit(StateVector.zero(3), Circuit((("CNOT", (0, 2)),), gate_set))
    state = apply_circuit(StateVector.zero(3), Circuit((("X", 0), ("CNOT", (0, 2))), GateSet.two_local()))
    assert same_ray(state, StateVector.basis("101"))


def test_circuit_inverse_and_codec(gate_set):
    circuit = Circuit((("H", 0), ("T", 1), ("CNOT", (0, 1)), ("S", 0)), gate_set)
    unitary = circuit.then(circuit.inverse()).unitary(2)
    assert np.allclose(unitary, np.eye(4))
    assert Circuit.from_list(circuit.to_list(), gate_set) == circuit
    assert circuit.cost == 4
    assert str(circuit) == "[H@0, T@1, CNOT@0,1, S@0]"


@hyp.given(seed=hyp_st.integers(0, 2 ** 32 - 1), length=hyp_st.integers(0, 12))
@hyp.settings(max_examples=30, deadline=None)
def test_random_circuits_are_unitary(seed, length):
    circuit = random_circuit(3, length, np.random.default_rng(seed))
    assert len(circuit) == length
    assert is_unitary(circuit.unitary(3), 1e-10)
    state = apply_circuit(plus_product(3), circuit)
    assert state.norm == pytest.approx(1.0, abs=1e-12)


def test_inner_products():
    a, b = StateVector.basis("0"), StateVector.from_amplitudes([1, 1j])
    assert inner_product(a, b) == pytest.approx(1 / sqrt(2))
    assert fidelity(a, b) == pytest.approx(0.5)
    assert same_ray(b, StateVector.from_amplitudes([1j, -1]))


def test_state_record_codec():
    state = ghz(2)
    restored = StateVector.from_dict(state.to_dict())
    assert same_ray(state, restored)
    with pytest.raises(LatticeError):
        StateVector.from_dict({"n_sites": 2, "amplitudes": [[1, 0]]})


def test_corpus_states():
    assert corpus_state("ghz", n_sites=2).label == "GHZ_2"
    assert ghz_pairs(2).n_sites == 4
    apparatus = apparatus_initial(3)
    assert apparatus.amplitudes[0] == pytest.approx(1 / sqrt(2))
    assert apparatus.amplitudes[4] == pytest.approx(1 / sqrt(2))
    with pytest.raises(LatticeError):
        corpus_state("nonesuch")
    with pytest.raises(LatticeError):
        corpus_state("ghz", sites=2)


def test_pauli_observables_on_ghz():
    state = ghz(2)
    assert expectation(state, Observable.from_label("Z0 Z1", 2)) == pytest.approx(1.0)
    assert expectation(state, Observable.from_label("XX", 2)) == pytest.approx(1.0)
    assert expectation(state, Observable.from_label("X0", 2)) == pytest.approx(0.0)
    assert Observable.from_label("X0 Z1", 2).weight == 2


def test_observable_validation():
    with pytest.raises(ObservableError):
        Observable.dense(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ObservableError):
        Observable.from_label("Q0", 2)
    with pytest.raises(ObservableError):
        Observable.from_label("XZX", 2)
    assert Observable.dense(np.diag([1.0, -1.0])).weight is None


def test_computational_split_of_ghz():
    state = ghz(2)
    decomposition = make_decomposition(state, basis_projectors(2, [0]))
    assert len(decomposition) == 2
    assert list(decomposition.labels) == ["Z[0]=0", "Z[0]=1"]
    assert np.allclose(decomposition.weights, [0.5, 0.5])
    assert same_ray(decomposition.branch(1), StateVector.basis("11"))


def test_partial_projectors_are_rejected():
    with pytest.raises(DecompositionError):
        make_decomposition(ghz(2), [BasisProjector(2, (0,), (0,))])


def test_zero_components_are_dropped():
    decomposition = make_decomposition(ghz(2), basis_projectors(2, [0, 1]))
    assert len(decomposition) == 2
    assert decomposition.dropped_norm == 0.0


def test_refine_splits_one_component():
    state = plus_product(2)
    coarse = make_decomposition(state, basis_projectors(2, [0]))
    fine = refine(coarse, 0, basis_projectors(2, [1]))
    assert len(fine) == 3
    assert np.allclose(fine.weights, [0.25, 0.25, 0.5])


def test_pauli_projector_split():
    decomposition = make_decomposition(plus_product(2), pauli_projectors(Observable.from_label("Z0", 2)))
    assert np.allclose(decomposition.weights, [0.5, 0.5])


def test_trivial_decomposition():
    decomposition = Decomposition.trivial(ghz(3))
    assert decomposition.is_trivial
    assert decomposition.weights[0] == pytest.approx(1.0)


def test_ghz4_residuals():
    decomposition = make_decomposition(ghz(4), basis_projectors(4, [0]))
    single = decomposition_expectation(decomposition, Observable.from_label("Z1", 4))
    assert single.full - single.branch_mean == pytest.approx(0.0, abs=1e-12)
    string = decomposition_expectation(decomposition, Observable.from_label("XXXX", 4))
    assert string.full - string.branch_mean == pytest.approx(1.0, abs=1e-12)
    assert string.off_diagonal == pytest.approx(1.0, abs=1e-12)


@hyp.given(seed=hyp_st.integers(0, 2 ** 32 - 1), sites=hyp_st.lists(hyp_st.integers(0, 2), min_size=1,
                                                                       max_size=3, unique=True))
@hyp.settings(max_examples=30, deadline=None)
def test_decompositions_reconstruct_parent(seed, sites):
    rng = np.random.default_rng(seed)
    state = StateVector.from_amplitudes(rng.normal(size=8) + 1j * rng.normal(size=8))
    decomposition = make_decomposition(state, basis_projectors(3, sorted(sites)))
    assert np.allclose(decomposition.component_array().sum(axis=0), state.amplitudes, atol=1e-10)
    assert decomposition.weights.sum() == pytest.approx(1.0, abs=1e-10)
    breakdown = decomposition_expectation(decomposition, Observable.from_label("X0 Y1", 3))
    assert breakdown.full == pytest.approx(breakdown.branch_mean + breakdown.off_diagonal, abs=1e-10)


def test_bloch_product():
    state = bloch_product([np.pi / 2, 0.0], [np.pi / 2, 0.0])
    assert np.allclose(state.amplitudes, [1 / sqrt(2), 0, 1j / sqrt(2), 0])
    assert corpus_state("bloch_product", thetas=[np.pi], phis=[0.0]).amplitudes[1] == pytest.approx(1.0)
    with pytest.raises(LatticeError):
        bloch_product([1.0, 2.0], [0.5])


def test_dropped_components_keep_the_identity():
    state = StateVector.from_amplitudes(np.array([1.0, 0.0, 0.0, 5e-9]))
    projectors = [DenseProjector(np.diag([1.0, 1.0, 1.0, 0.0]), "head"),
                  DenseProjector(np.diag([0.0, 0.0, 0.0, 1.0]), "tail")]
    decomposition = make_decomposition(state, projectors)
    assert decomposition.labels == ("head",)
    assert decomposition.dropped_norm == pytest.approx(5e-9, rel=1e-6)
    observable = Observable.from_label("X0 X1", 2)
    breakdown = decomposition_expectation(decomposition, observable)
    assert abs(breakdown.full - breakdown.branch_mean - breakdown.off_diagonal) <= 1e-12
    assert breakdown.dropped_term == pytest.approx(1e-8, rel=1e-6)
    assert breakdown.parent_full == pytest.approx(expectation(state, observable), abs=1e-15)

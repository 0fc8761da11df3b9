"""Observables: Pauli strings or dense Hermitian matrices."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from lattice.errors import ObservableError
from lattice.state import StateVector, apply_matrix

HERMITIAN_TOLERANCE = 1e-12
REAL_TOLERANCE = 1e-10

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_TERM = re.compile(r"^([IXYZ])(\d+)$")


@dataclass(frozen=True, eq=False)
class Observable:
    n_sites: int
    paulis: Optional[Dict[int, str]] = None
    matrix: Optional[np.ndarray] = None
    label: str = field(default="")

    def __post_init__(self):
        if (self.paulis is None) == (self.matrix is None):
            raise ObservableError("an observable is either a Pauli string or a dense matrix")
        if self.paulis is not None:
            paulis = {}
            for site, letter in self.paulis.items():
                site = int(site)
                if letter not in PAULI_MATRICES:
                    raise ObservableError(f"unknown Pauli letter {letter!r}")
                if not 0 <= site < self.n_sites:
                    raise ObservableError(f"Pauli on site {site} outside {self.n_sites} sites")
                if letter != "I":
                    paulis[site] = letter
            object.__setattr__(self, "paulis", dict(sorted(paulis.items())))
            if not self.label:
                object.__setattr__(self, "label", self.pauli_label())
        else:
            matrix = np.array(self.matrix, dtype=complex)
            dim = 2 ** self.n_sites
            if matrix.shape != (dim, dim):
                raise ObservableError(f"dense observable must be {dim}x{dim}, got {matrix.shape}")
            if not np.allclose(matrix, matrix.conj().T, atol=HERMITIAN_TOLERANCE, rtol=0):
                raise ObservableError("dense observable is not Hermitian")
            matrix.flags.writeable = False
            object.__setattr__(self, "matrix", matrix)
            if not self.label:
                object.__setattr__(self, "label", "dense")

    @property
    def hermitian(self) -> bool:
        return True

    @classmethod
    def pauli(cls, paulis: Dict[int, str], n_sites: int, label: str = "") -> "Observable":
        return cls(n_sites, paulis=dict(paulis), label=label)

    @classmethod
    def from_label(cls, text: str, n_sites: int) -> "Observable":
        """Parse ``"X0 X1"`` style labels; a bare string like ``"XZ"`` is read site by site."""
        text = text.strip()
        if re.fullmatch(r"[IXYZ]+", text):
            if len(text) != n_sites:
                raise ObservableError(f"Pauli word {text!r} does not cover {n_sites} sites")
            return cls.pauli(dict(enumerate(text)), n_sites)
        paulis = {}
        for term in text.split():
            match = _TERM.match(term)
            if not match:
                raise ObservableError(f"cannot parse Pauli term {term!r}")
            site = int(match.group(2))
            if site in paulis:
                raise ObservableError(f"site {site} appears twice in {text!r}")
            paulis[site] = match.group(1)
        return cls.pauli(paulis, n_sites)

    @classmethod
    def dense(cls, matrix: np.ndarray, label: str = "") -> "Observable":
        matrix = np.asarray(matrix, dtype=complex)
        n_sites = int(round(np.log2(matrix.shape[0])))
        if 2 ** n_sites != matrix.shape[0]:
            raise ObservableError(f"dense observable size {matrix.shape[0]} is not a power of two")
        return cls(n_sites, matrix=matrix, label=label)

    def pauli_label(self) -> str:
        if not self.paulis:
            return "I"
        return " ".join(f"{letter}{site}" for site, letter in self.paulis.items())

    @property
    def weight(self) -> Optional[int]:
        """Number of sites a Pauli string acts on non-trivially; None for dense input."""
        return None if self.paulis is None else len(self.paulis)

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=complex)
        if vectors.shape[-1] != 2 ** self.n_sites:
            raise ObservableError(
                f"observable on {self.n_sites} sites applied to dimension {vectors.shape[-1]}"
            )
        if self.matrix is not None:
            return vectors @ self.matrix.T
        out = vectors
        for site, letter in self.paulis.items():
            out = apply_matrix(out, PAULI_MATRICES[letter], (site,), self.n_sites)
        return out

    def to_matrix(self) -> np.ndarray:
        if self.matrix is not None:
            return np.array(self.matrix)
        return self.apply(np.eye(2 ** self.n_sites, dtype=complex)).T

    def to_dict(self) -> dict:
        if self.paulis is not None:
            return {"pauli": self.pauli_label(), "n_sites": self.n_sites}
        return {"dense": [[[float(x.real), float(x.imag)] for x in row] for row in self.matrix],
                "n_sites": self.n_sites, "label": self.label}


def matrix_element(bra: np.ndarray, obs: Observable, ket: np.ndarray) -> complex:
    return complex(np.vdot(bra, obs.apply(ket)))


def state_expectation(state: StateVector, obs: Observable) -> float:
    value = matrix_element(state.amplitudes, obs, state.amplitudes)
    if abs(value.imag) > REAL_TOLERANCE:
        raise ObservableError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


@dataclass(frozen=True)
class BranchExpectation:
    """Per-branch view of an observable on a decomposition.

    ``full`` is taken on the kept components, so
    ``full`` = sum_i weight_i * branch_values_i + off_diagonal exactly.
    Components dropped under the norm floor contribute ``dropped_term``.
    """
    observable: str
    weights: List[float]
    branch_values: List[float]
    full: float
    off_diagonal: float
    dropped_term: float = 0.0

    @property
    def branch_mean(self) -> float:
        return float(sum(w * v for w, v in zip(self.weights, self.branch_values)))

    @property
    def parent_full(self) -> float:
        """<psi|O|psi> on the undecomposed parent."""
        return self.full + self.dropped_term


def expectation(target, obs: Observable) -> Union[float, BranchExpectation]:
    """<psi|O|psi> for a state, or the per-branch breakdown for a decomposition."""
    from lattice.decomposition import Decomposition

    if not isinstance(obs, Observable):
        raise ObservableError(f"expected an Observable, got {type(obs).__name__}")
    if isinstance(target, StateVector):
        if target.lattice.dimension != 2 ** obs.n_sites:
            raise ObservableError("observable and state dimensions differ")
        return state_expectation(target, obs)
    if isinstance(target, Decomposition):
        return decomposition_expectation(target, obs)
    raise ObservableError(f"cannot take an expectation of {type(target).__name__}")


def decomposition_expectation(decomposition, obs: Observable) -> BranchExpectation:
    components = decomposition.component_array()
    if components.shape[-1] != 2 ** obs.n_sites:
        raise ObservableError("observable and decomposition dimensions differ")
    images = obs.apply(components)
    gram = components.conj() @ images.T
    diagonal = np.real(np.diag(gram))
    off_diagonal = float(np.real(gram.sum() - np.trace(gram)))
    weights = [float(w) for w in decomposition.weights]
    branch_values = [float(d / w) for d, w in zip(diagonal, weights)]
    full = float(np.real(gram.sum()))
    parent = decomposition.parent.amplitudes
    dropped_term = float(np.real(np.vdot(parent, obs.apply(parent)))) - full
    return BranchExpectation(obs.label, weights, branch_values, full, off_diagonal, dropped_term)

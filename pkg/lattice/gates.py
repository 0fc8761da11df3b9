"""Elementary gate sets.

A gate set names its single-site and two-site unitaries and their integer
costs. Two-site gates act on an ordered pair (first site = first tensor
factor); ``locality`` decides which pairs are legal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Dict, List, Tuple

import numpy as np

from lattice.errors import GateSetError

UNITARY_TOLERANCE = 1e-12

_SQRT2_INV = 1 / sqrt(2)
_T_PHASE = np.exp(1j * np.pi / 4)

SINGLE_SITE_MATRICES: Dict[str, np.ndarray] = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    "T": np.array([[1, 0], [0, _T_PHASE]], dtype=complex),
    "Tdg": np.array([[1, 0], [0, np.conj(_T_PHASE)]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

TWO_SITE_MATRICES: Dict[str, np.ndarray] = {
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}

DEFAULT_INVERSES = {"H": "H", "T": "Tdg", "Tdg": "T", "S": "Sdg", "Sdg": "S", "X": "X", "Z": "Z", "CNOT": "CNOT"}

LOCALITIES = ("nearest_neighbor", "two_local")


def is_unitary(matrix: np.ndarray, tolerance: float = UNITARY_TOLERANCE) -> bool:
    matrix = np.asarray(matrix)
    return np.allclose(matrix.conj().T @ matrix, np.eye(matrix.shape[0]), atol=tolerance, rtol=0)


@dataclass(frozen=True)
class Move:
    """One placement of a gate: gate name, sites, and the matrix to apply."""
    index: int
    name: str
    sites: Tuple[int, ...]
    cost: int

    def encode(self) -> Tuple[int, Tuple[int, ...]]:
        return (self.index, self.sites)


@dataclass(frozen=True, eq=False)
class GateSet:
    single_site_gates: Dict[str, np.ndarray]
    two_site_gates: Dict[str, np.ndarray]
    costs: Dict[str, int] = field(default_factory=dict)
    inverses: Dict[str, str] = field(default_factory=dict)
    locality: str = "nearest_neighbor"
    name: str = "custom"

    def __post_init__(self):
        if self.locality not in LOCALITIES:
            raise GateSetError(f"unknown locality {self.locality!r}; expected one of {LOCALITIES}")
        overlap = set(self.single_site_gates) & set(self.two_site_gates)
        if overlap:
            raise GateSetError(f"gate names used twice: {sorted(overlap)}")
        for gate_name, matrix in self.single_site_gates.items():
            self._check_matrix(gate_name, matrix, 2)
        for gate_name, matrix in self.two_site_gates.items():
            self._check_matrix(gate_name, matrix, 4)
        costs = {gate_name: 1 for gate_name in self.gate_names}
        costs.update(self.costs)
        for gate_name, cost in costs.items():
            if gate_name not in self.gate_names:
                raise GateSetError(f"cost given for unknown gate {gate_name!r}")
            if int(cost) != cost or cost < 1:
                raise GateSetError(f"gate cost must be a positive integer, got {gate_name}={cost!r}")
        object.__setattr__(self, "costs", {k: int(v) for k, v in costs.items()})
        inverses = dict(self.inverses) or self._derive_inverses()
        for gate_name in self.gate_names:
            inverse = inverses.get(gate_name)
            if inverse is None or inverse not in self.gate_names:
                raise GateSetError(f"gate set is not closed under inverse: {gate_name!r} has no inverse")
            product = self.matrix(inverse) @ self.matrix(gate_name)
            phase = product[0, 0]
            if abs(abs(phase) - 1) > 1e-9 or not np.allclose(product, phase * np.eye(product.shape[0]), atol=1e-9):
                raise GateSetError(f"{inverse!r} is not the inverse of {gate_name!r}")
            if self.costs[inverse] != self.costs[gate_name]:
                raise GateSetError(f"{gate_name!r} and its inverse {inverse!r} have different costs")
        object.__setattr__(self, "inverses", inverses)

    @staticmethod
    def _check_matrix(gate_name: str, matrix: np.ndarray, dim: int):
        matrix = np.asarray(matrix)
        if matrix.shape != (dim, dim):
            raise GateSetError(f"gate {gate_name!r} must be {dim}x{dim}, got {matrix.shape}")
        if not is_unitary(matrix):
            raise GateSetError(f"gate {gate_name!r} is not unitary to {UNITARY_TOLERANCE}")

    def _derive_inverses(self) -> Dict[str, str]:
        inverses = {}
        for gate_name in self.gate_names:
            target = self.matrix(gate_name).conj().T
            for candidate in self.gate_names:
                matrix = self.matrix(candidate)
                if matrix.shape != target.shape:
                    continue
                ratio = matrix[np.unravel_index(np.argmax(np.abs(target)), target.shape)]
                ratio /= target[np.unravel_index(np.argmax(np.abs(target)), target.shape)]
                if np.allclose(matrix, ratio * target, atol=1e-9):
                    inverses[gate_name] = candidate
                    break
        return inverses

    @classmethod
    def default(cls) -> "GateSet":
        """{H, T, T^-1, S, S^-1, X, Z} plus CNOT on adjacent pairs in both orientations."""
        return cls(dict(SINGLE_SITE_MATRICES), dict(TWO_SITE_MATRICES),
                   inverses=dict(DEFAULT_INVERSES), name="nearest_neighbor")

    @classmethod
    def two_local(cls) -> "GateSet":
        """Default gates, with CNOT allowed between any two sites."""
        return cls(dict(SINGLE_SITE_MATRICES), dict(TWO_SITE_MATRICES),
                   inverses=dict(DEFAULT_INVERSES), locality="two_local", name="two_local")

    @classmethod
    def named(cls, name: str, costs: Dict[str, int] | None = None) -> "GateSet":
        if name == "nearest_neighbor":
            base = cls.default()
        elif name == "two_local":
            base = cls.two_local()
        else:
            raise GateSetError(f"unknown gate set {name!r}")
        if not costs:
            return base
        return cls(base.single_site_gates, base.two_site_gates, costs=dict(costs),
                   inverses=base.inverses, locality=base.locality, name=base.name)

    @property
    def gate_names(self) -> List[str]:
        return list(self.single_site_gates) + list(self.two_site_gates)

    def matrix(self, gate_name: str) -> np.ndarray:
        if gate_name in self.single_site_gates:
            return self.single_site_gates[gate_name]
        if gate_name in self.two_site_gates:
            return self.two_site_gates[gate_name]
        raise GateSetError(f"gate {gate_name!r} is not in gate set {self.name!r}")

    def arity(self, gate_name: str) -> int:
        return 1 if self.matrix(gate_name).shape[0] == 2 else 2

    def cost(self, gate_name: str) -> int:
        self.matrix(gate_name)
        return self.costs[gate_name]

    @property
    def uniform_cost(self) -> bool:
        return len(set(self.costs.values())) == 1

    def pairs(self, n_sites: int) -> List[Tuple[int, int]]:
        """Ordered site pairs a two-site gate may act on."""
        if self.locality == "nearest_neighbor":
            forward = [(k, k + 1) for k in range(n_sites - 1)]
            return sorted(forward + [(b, a) for a, b in forward])
        return [(a, b) for a in range(n_sites) for b in range(n_sites) if a != b]

    def check_placement(self, gate_name: str, sites: Tuple[int, ...], n_sites: int):
        arity = self.arity(gate_name)
        if len(sites) != arity:
            raise GateSetError(f"gate {gate_name!r} acts on {arity} site(s), got {sites}")
        for site in sites:
            if not 0 <= site < n_sites:
                raise GateSetError(f"site {site} out of range for {n_sites} sites")
        if arity == 2 and tuple(sites) not in self.pairs(n_sites):
            raise GateSetError(f"pair {tuple(sites)} is not allowed under {self.locality} locality")

    def moves(self, n_sites: int, allowed_sites: Tuple[int, ...] | None = None) -> List[Move]:
        """All gate placements on the lattice, in the canonical (lexicographic) order."""
        moves = []
        for index, gate_name in enumerate(self.gate_names):
            if gate_name in self.single_site_gates:
                placements = [(k,) for k in range(n_sites)]
            else:
                placements = self.pairs(n_sites)
            for sites in placements:
                if allowed_sites is not None and not set(sites) <= set(allowed_sites):
                    continue
                moves.append(Move(index, gate_name, tuple(sites), self.costs[gate_name]))
        return moves

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "locality": self.locality,
            "single_site_gates": {
                k: [[[float(x.real), float(x.imag)] for x in row] for row in v]
                for k, v in self.single_site_gates.items()
            },
            "two_site_gates": {
                k: [[[float(x.real), float(x.imag)] for x in row] for row in v]
                for k, v in self.two_site_gates.items()
            },
            "costs": dict(self.costs),
            "inverses": dict(self.inverses),
        }

"""Circuits over a gate set and their action on states."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from lattice.errors import GateSetError, LatticeError
from lattice.gates import GateSet
from lattice.state import StateVector, apply_matrix

GateApplication = Tuple[str, Tuple[int, ...]]


@dataclass(frozen=True, eq=False)
class Circuit:
    gates: Tuple[GateApplication, ...] = ()
    gate_set: GateSet = field(default_factory=GateSet.default)

    def __post_init__(self):
        normalized = []
        for entry in self.gates:
            try:
                gate_name, sites = entry
            except (TypeError, ValueError) as e:
                raise GateSetError(f"malformed gate entry {entry!r}") from e
            if isinstance(sites, (int, np.integer)):
                sites = (int(sites),)
            sites = tuple(int(s) for s in sites)
            self.gate_set.matrix(gate_name)
            if len(sites) != self.gate_set.arity(gate_name):
                raise GateSetError(f"gate {gate_name!r} acts on {self.gate_set.arity(gate_name)} site(s), got {sites}")
            normalized.append((gate_name, sites))
        object.__setattr__(self, "gates", tuple(normalized))

    def __len__(self) -> int:
        return len(self.gates)

    def __eq__(self, other) -> bool:
        return isinstance(other, Circuit) and self.gates == other.gates and self.gate_set.name == other.gate_set.name

    def __hash__(self) -> int:
        return hash(self.gates)

    @property
    def cost(self) -> int:
        return sum(self.gate_set.cost(gate_name) for gate_name, _ in self.gates)

    def validate_for(self, n_sites: int):
        for gate_name, sites in self.gates:
            try:
                self.gate_set.check_placement(gate_name, sites, n_sites)
            except GateSetError as e:
                raise LatticeError(str(e)) from e

    def inverse(self) -> "Circuit":
        return Circuit(
            tuple((self.gate_set.inverses[g], sites) for g, sites in reversed(self.gates)),
            self.gate_set,
        )

    def then(self, other: "Circuit") -> "Circuit":
        return Circuit(self.gates + other.gates, self.gate_set)

    def without(self, position: int) -> "Circuit":
        return Circuit(self.gates[:position] + self.gates[position + 1:], self.gate_set)

    def encode(self) -> Tuple:
        """Lexicographic sort key: gate-set declaration order, then sites."""
        order = {g: i for i, g in enumerate(self.gate_set.gate_names)}
        return tuple((order[g], sites) for g, sites in self.gates)

    def apply_to(self, vectors: np.ndarray, n_sites: int) -> np.ndarray:
        out = np.asarray(vectors, dtype=complex)
        for gate_name, sites in self.gates:
            out = apply_matrix(out, self.gate_set.matrix(gate_name), sites, n_sites)
        return out

    def unitary(self, n_sites: int) -> np.ndarray:
        dim = 2 ** n_sites
        # columns are images of basis vectors
        return self.apply_to(np.eye(dim, dtype=complex), n_sites).T

    def to_list(self) -> List[dict]:
        return [{"gate": g, "sites": list(sites)} for g, sites in self.gates]

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    @classmethod
    def from_list(cls, payload: Sequence[dict], gate_set: GateSet | None = None) -> "Circuit":
        gate_set = gate_set or GateSet.default()
        try:
            gates = tuple((entry["gate"], tuple(entry["sites"])) for entry in payload)
        except (KeyError, TypeError) as e:
            raise GateSetError(f"malformed circuit record: {e}") from e
        return cls(gates, gate_set)

    def __str__(self) -> str:
        if not self.gates:
            return "[]"
        return "[" + ", ".join(f"{g}@{','.join(map(str, s))}" for g, s in self.gates) + "]"


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    """U|psi> for the circuit's unitary U; the input state is left untouched."""
    circuit.validate_for(state.n_sites)
    amplitudes = circuit.apply_to(state.amplitudes, state.n_sites)
    return StateVector(amplitudes, state.lattice, normalized=state.normalized, label=state.label)


def random_circuit(n_sites: int, length: int, rng: np.random.Generator,
                   gate_set: GateSet | None = None, avoid_inverse_repeat: bool = True) -> Circuit:
    """Uniformly random placements; optionally never undo the previous gate directly."""
    gate_set = gate_set or GateSet.default()
    moves = gate_set.moves(n_sites)
    gates: List[GateApplication] = []
    while len(gates) < length:
        move = moves[int(rng.integers(len(moves)))]
        if avoid_inverse_repeat and gates:
            last_name, last_sites = gates[-1]
            if last_sites == move.sites and gate_set.inverses[last_name] == move.name:
                continue
        gates.append((move.name, move.sites))
    return Circuit(tuple(gates), gate_set)

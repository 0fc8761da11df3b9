"""Query predicates over the action of a circuit on a few probe states.

A predicate sees only the images ``U|probe_k>`` (its *frame*), so two
circuits with the same frame are interchangeable. Every margin below is
invariant under a common global phase on the frame.
"""
from __future__ import annotations

from typing import Dict, List

import numpy as np

from lattice.errors import OracleError
from lattice.state import StateVector, inner_product, require_normalized, require_same_lattice

MARGIN_SLACK = 1e-12
ORTHOGONALITY_LIMIT = 1e-8


def _amplitude_record(state: StateVector) -> List[List[float]]:
    return [[round(float(a.real), 12), round(float(a.imag), 12)] for a in state.amplitudes]


class Predicate:
    kind: str = "abstract"
    endpoint_local: bool = False

    def __init__(self, probes: List[StateVector]):
        if not probes:
            raise OracleError("a predicate needs at least one probe state")
        for probe in probes[1:]:
            require_same_lattice(probes[0], probe)
        self.probes = probes
        self.n_sites = probes[0].n_sites
        self.probe_frame = np.stack([p.amplitudes for p in probes])

    def margins(self, frames: np.ndarray) -> np.ndarray:
        """Signed distance to the threshold for a batch of frames shaped (B, m, d)."""
        raise NotImplementedError

    def satisfied(self, frames: np.ndarray) -> np.ndarray:
        return self.margins(frames) >= -MARGIN_SLACK

    def margin_of(self, frame: np.ndarray) -> float:
        return float(self.margins(frame[None])[0])

    def parameters(self) -> Dict:
        return {}

    def describe(self) -> Dict:
        return {
            "kind": self.kind,
            "parameters": self.parameters(),
            "states": [_amplitude_record(p) for p in self.probes],
        }


class StateMapPredicate(Predicate):
    """|<target|U|source>| >= 1 - delta."""
    kind = "state_map"
    endpoint_local = True

    def __init__(self, source: StateVector, target: StateVector, delta: float):
        require_same_lattice(source, target)
        require_normalized(source, target)
        if not 0 < delta < 1:
            raise OracleError(f"delta must lie in (0, 1), got {delta}")
        super().__init__([source])
        self.source, self.target, self.delta = source, target, float(delta)

    def margins(self, frames):
        overlaps = np.abs(frames[:, 0, :] @ self.target.amplitudes.conj())
        return overlaps - (1.0 - self.delta)

    def parameters(self):
        return {"delta": self.delta, "target": _amplitude_record(self.target)}


class _PairPredicate(Predicate):
    def __init__(self, psi_i: StateVector, psi_j: StateVector, epsilon: float, epsilon_max: float = 1.0):
        require_same_lattice(psi_i, psi_j)
        require_normalized(psi_i, psi_j)
        if not 0 < epsilon < epsilon_max:
            raise OracleError(f"epsilon must lie in (0, {epsilon_max}), got {epsilon}")
        overlap = abs(inner_product(psi_i, psi_j))
        if overlap > ORTHOGONALITY_LIMIT:
            raise OracleError(f"branch states are not orthogonal: |<i|j>| = {overlap:.3e}")
        super().__init__([psi_i, psi_j])
        self.psi_i, self.psi_j, self.epsilon = psi_i, psi_j, float(epsilon)
        self._bra_i = psi_i.amplitudes.conj()
        self._bra_j = psi_j.amplitudes.conj()

    def parameters(self):
        return {"epsilon": self.epsilon}


class DistinguishPredicate(_PairPredicate):
    """|<i|U|i> - <j|U|j>| / 2 >= 1 - epsilon."""
    kind = "tm_distinguish"

    def margins(self, frames):
        diag_i = frames[:, 0, :] @ self._bra_i
        diag_j = frames[:, 1, :] @ self._bra_j
        return np.abs(diag_i - diag_j) / 2 - (1.0 - self.epsilon)


class InterferePredicate(_PairPredicate):
    """(|<i|U|j>| + |<j|U|i>|) / 2 >= epsilon."""
    kind = "tm_interfere"

    def margins(self, frames):
        cross_ij = frames[:, 1, :] @ self._bra_i
        cross_ji = frames[:, 0, :] @ self._bra_j
        return (np.abs(cross_ij) + np.abs(cross_ji)) / 2 - self.epsilon


class ConstantPredicate(Predicate):
    """Always (or never) satisfied; used to exercise the search contract."""
    kind = "constant"

    def __init__(self, n_sites: int, value: bool):
        super().__init__([StateVector.zero(n_sites)])
        self.value = bool(value)

    def margins(self, frames):
        return np.full(frames.shape[0], 1.0 if self.value else -1.0)

    def parameters(self):
        return {"value": self.value}


PREDICATE_KINDS = {
    "state_map": StateMapPredicate,
    "tm_distinguish": DistinguishPredicate,
    "tm_interfere": InterferePredicate,
}


def build_predicate(kind: str, first: StateVector, second: StateVector, tolerance: float) -> Predicate:
    try:
        factory = PREDICATE_KINDS[kind]
    except KeyError:
        raise OracleError(f"unknown predicate {kind!r}; expected one of {sorted(PREDICATE_KINDS)}") from None
    return factory(first, second, tolerance)

"""Finite families of candidate splits searched by both branch criteria."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from lattice.decomposition import (
    Decomposition,
    DenseProjector,
    Projector,
    basis_projectors,
    make_decomposition,
    pauli_projectors,
)
from lattice.errors import DecompositionError
from lattice.observables import Observable
from lattice.state import StateVector

logger = logging.getLogger(__name__)

FAMILY_KINDS = ("computational", "pauli", "projectors")


@dataclass(frozen=True)
class Candidate:
    label: str
    projectors: Tuple[Projector, ...]

    def decompose(self, state: StateVector) -> Decomposition:
        return make_decomposition(state, self.projectors, description=self.label)


@dataclass(frozen=True)
class CandidateFamily:
    kind: str
    candidates: Tuple[Candidate, ...]
    coverage: str = ""

    def __post_init__(self):
        if not self.candidates:
            raise DecompositionError(f"candidate family {self.kind!r} is empty")

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def decompositions(self, state: StateVector) -> List[Tuple[Candidate, Decomposition, List[str]]]:
        """Distinct decompositions of ``state``, each with the labels of candidates producing it.

        Candidates that collapse to a single component are skipped; order
        follows the family.
        """
        unique: Dict[Tuple, Tuple[Candidate, Decomposition, List[str]]] = {}
        for candidate in self.candidates:
            decomposition = candidate.decompose(state)
            if decomposition.is_trivial:
                continue
            signature = decomposition.signature()
            if signature in unique:
                unique[signature][2].append(candidate.label)
            else:
                unique[signature] = (candidate, decomposition, [candidate.label])
        return list(unique.values())

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "coverage": self.coverage, "size": len(self.candidates),
                "candidates": [c.label for c in self.candidates]}


def computational_family(n_sites: int, sites: Optional[Sequence[int]] = None,
                         subset_sizes: Optional[Iterable[int]] = None) -> CandidateFamily:
    """Computational-basis outcomes on every subset of ``sites`` with an allowed size.

    Defaults: all sites, subsets of size 1 plus the full set.
    """
    sites = tuple(range(n_sites)) if sites is None else tuple(sites)
    sizes = sorted(set(subset_sizes) if subset_sizes is not None else {1, len(sites)})
    candidates = []
    for size in sizes:
        if not 1 <= size <= len(sites):
            raise DecompositionError(f"subset size {size} outside 1..{len(sites)}")
        for subset in itertools.combinations(sites, size):
            candidates.append(Candidate(f"Z{list(subset)}", tuple(basis_projectors(n_sites, subset))))
    coverage = f"computational basis on subsets of {list(sites)} of sizes {sizes}"
    return CandidateFamily("computational", tuple(candidates), coverage)


def pauli_family(n_sites: int, max_weight: int = 2) -> CandidateFamily:
    """+/-1 eigenspace splits of Pauli strings on contiguous windows of at most ``max_weight`` sites.

    Only windows of adjacent sites are enumerated, so a string such as X0 Z2
    on a three-site lattice is not a candidate even at ``max_weight=2``.
    """
    candidates = []
    for weight in range(1, min(max_weight, n_sites) + 1):
        for start in range(n_sites - weight + 1):
            window = range(start, start + weight)
            for letters in itertools.product("XYZ", repeat=weight):
                observable = Observable.pauli(dict(zip(window, letters)), n_sites)
                candidates.append(Candidate(observable.pauli_label(), tuple(pauli_projectors(observable))))
    coverage = f"Pauli strings on contiguous windows of 1..{min(max_weight, n_sites)} sites"
    return CandidateFamily("pauli", tuple(candidates), coverage)


def _projector_group(n_sites: int, spec: Dict[str, Any]) -> Candidate:
    kind = spec.get("kind")
    if kind == "basis":
        sites = tuple(spec["sites"])
        return Candidate(spec.get("label", f"Z{list(sites)}"), tuple(basis_projectors(n_sites, sites)))
    if kind == "pauli":
        observable = Observable.from_label(spec["observable"], n_sites)
        return Candidate(spec.get("label", observable.pauli_label()), tuple(pauli_projectors(observable)))
    if kind == "dense":
        projectors = []
        for k, rows in enumerate(spec["matrices"]):
            matrix = np.array([[complex(re, im) for re, im in row] for row in rows])
            projectors.append(DenseProjector(matrix, label=f"P{k}"))
        return Candidate(spec.get("label", "dense"), tuple(projectors))
    raise DecompositionError(f"unknown projector group kind {kind!r}; expected basis, pauli or dense")


def projector_family(n_sites: int, groups: Sequence[Dict[str, Any]]) -> CandidateFamily:
    """User-declared projector groups; each group must resolve the identity on the parent."""
    return CandidateFamily("projectors", tuple(_projector_group(n_sites, g) for g in groups), "declared groups")


def build_family(kind: str, n_sites: int, **params) -> CandidateFamily:
    if kind == "computational":
        return computational_family(n_sites, params.get("sites"), params.get("subset_sizes"))
    if kind == "pauli":
        return pauli_family(n_sites, params.get("max_weight", 2))
    if kind == "projectors":
        return projector_family(n_sites, params.get("groups", []))
    raise DecompositionError(f"unknown candidate family {kind!r}; expected one of {FAMILY_KINDS}")

"""Orthogonal decompositions psi = sum_i psi_i and the projectors that produce them."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from config.settings import settings
from lattice.errors import DecompositionError
from lattice.observables import Observable
from lattice.state import StateVector

RECONSTRUCTION_TOLERANCE = 1e-10
ORTHOGONALITY_TOLERANCE = 1e-10


class Projector:
    """Base for projector specs; subclasses implement ``apply`` on amplitude arrays."""

    label: str = "P"

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class IdentityProjector(Projector):
    label: str = "1"

    def apply(self, vectors):
        return np.array(vectors, dtype=complex)


@dataclass(frozen=True)
class BasisProjector(Projector):
    """Projects sites onto a computational-basis outcome (bits[k] on sites[k])."""
    n_sites: int
    sites: Tuple[int, ...]
    bits: Tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        if len(self.sites) != len(self.bits):
            raise DecompositionError("sites and bits must have the same length")
        if not self.label:
            text = "".join(str(b) for b in self.bits)
            object.__setattr__(self, "label", f"Z[{','.join(map(str, self.sites))}]={text}")

    def mask(self) -> np.ndarray:
        indices = np.arange(2 ** self.n_sites)
        keep = np.ones(indices.shape, dtype=bool)
        for site, bit in zip(self.sites, self.bits):
            keep &= ((indices >> (self.n_sites - 1 - site)) & 1) == bit
        return keep

    def apply(self, vectors):
        return np.asarray(vectors, dtype=complex) * self.mask()


@dataclass(frozen=True)
class PauliProjector(Projector):
    """(1 + sign * P) / 2 for a Pauli string P."""
    observable: Observable
    sign: int
    label: str = ""

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise DecompositionError("sign must be +1 or -1")
        if self.observable.paulis is None:
            raise DecompositionError("PauliProjector needs a Pauli-string observable")
        if not self.label:
            object.__setattr__(self, "label", f"{self.observable.pauli_label()}={'+' if self.sign > 0 else '-'}1")

    def apply(self, vectors):
        vectors = np.asarray(vectors, dtype=complex)
        return 0.5 * (vectors + self.sign * self.observable.apply(vectors))


@dataclass(frozen=True, eq=False)
class DenseProjector(Projector):
    matrix: np.ndarray
    label: str = "dense"

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if not np.allclose(matrix @ matrix, matrix, atol=1e-10) or not np.allclose(matrix, matrix.conj().T, atol=1e-10):
            raise DecompositionError(f"{self.label}: matrix is not an orthogonal projector")
        object.__setattr__(self, "matrix", matrix)

    def apply(self, vectors):
        return np.asarray(vectors, dtype=complex) @ self.matrix.T


def basis_projectors(n_sites: int, sites: Sequence[int]) -> List[BasisProjector]:
    """The complete family of computational outcomes on ``sites``."""
    sites = tuple(sites)
    return [BasisProjector(n_sites, sites, bits) for bits in itertools.product((0, 1), repeat=len(sites))]


def pauli_projectors(observable: Observable) -> List[PauliProjector]:
    return [PauliProjector(observable, 1), PauliProjector(observable, -1)]


@dataclass(frozen=True, eq=False)
class Decomposition:
    parent: StateVector
    components: Tuple[np.ndarray, ...]
    labels: Tuple[str, ...] = ()
    norm_floor: float = field(default_factory=lambda: settings.NORM_FLOOR)
    dropped_norm: float = 0.0
    description: str = ""

    def __post_init__(self):
        components = []
        for component in self.components:
            array = np.array(component, dtype=complex).reshape(-1)
            if array.shape != self.parent.amplitudes.shape:
                raise DecompositionError("component dimension differs from parent")
            array.flags.writeable = False
            components.append(array)
        if not components:
            raise DecompositionError("a decomposition needs at least one component")
        object.__setattr__(self, "components", tuple(components))
        labels = tuple(self.labels) or tuple(f"b{i}" for i in range(len(components)))
        if len(labels) != len(components):
            raise DecompositionError("one label per component is required")
        object.__setattr__(self, "labels", labels)
        self._check_invariants()

    def _check_invariants(self):
        stacked = self.component_array()
        norms = np.linalg.norm(stacked, axis=1)
        if np.any(norms < self.norm_floor):
            raise DecompositionError(f"component norm below floor {self.norm_floor}: {norms.min():.3e}")
        residual = np.linalg.norm(self.parent.amplitudes - stacked.sum(axis=0))
        if residual > RECONSTRUCTION_TOLERANCE + self.dropped_norm:
            raise DecompositionError(f"reconstruction residual {residual:.3e} above tolerance")
        gram = stacked.conj() @ stacked.T
        off = np.abs(gram - np.diag(np.diag(gram)))
        if off.size and off.max() > ORTHOGONALITY_TOLERANCE:
            i, j = np.unravel_index(np.argmax(off), off.shape)
            raise DecompositionError(f"components {i} and {j} overlap by {off[i, j]:.3e}")

    @classmethod
    def trivial(cls, parent: StateVector) -> "Decomposition":
        return cls(parent, (parent.amplitudes,), ("psi",), description="trivial")

    def __len__(self) -> int:
        return len(self.components)

    @property
    def n_sites(self) -> int:
        return self.parent.n_sites

    @property
    def is_trivial(self) -> bool:
        return len(self.components) == 1

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(np.vdot(c, c).real) for c in self.components])

    def component_array(self) -> np.ndarray:
        return np.stack(self.components)

    def branch(self, index: int, label: str = "") -> StateVector:
        """Normalized view of component ``index``."""
        component = self.components[index]
        return StateVector(component / np.linalg.norm(component), self.parent.lattice,
                           label=label or self.labels[index])

    def branches(self) -> List[StateVector]:
        return [self.branch(i) for i in range(len(self.components))]

    def signature(self) -> Tuple:
        """Order-independent fingerprint used to spot identical decompositions."""
        rows = []
        for component in self.components:
            pivot = int(np.argmax(np.abs(component) > 1e-6))
            phase = component[pivot] / abs(component[pivot])
            fixed = np.round(component * np.conj(phase), 8) + 0.0
            rows.append(tuple(np.round(fixed.real, 8)) + tuple(np.round(fixed.imag, 8)))
        return tuple(sorted(rows))

    def to_dict(self, include_amplitudes: bool = True) -> dict:
        record = {
            "description": self.description,
            "labels": list(self.labels),
            "weights": [float(w) for w in self.weights],
            "dropped_norm": float(self.dropped_norm),
        }
        if include_amplitudes:
            record["components"] = [[[float(a.real), float(a.imag)] for a in c] for c in self.components]
        return record


def make_decomposition(parent: StateVector, projectors: Sequence[Projector],
                       norm_floor: float | None = None, description: str = "") -> Decomposition:
    """components_i = P_i |psi>, zero-norm components dropped."""
    if not projectors:
        raise DecompositionError("at least one projector is required")
    norm_floor = settings.NORM_FLOOR if norm_floor is None else norm_floor
    images = []
    for projector in projectors:
        image = projector.apply(parent.amplitudes)
        if np.linalg.norm(projector.apply(image) - image) > RECONSTRUCTION_TOLERANCE:
            raise DecompositionError(f"projector {projector.label} is not idempotent on the parent")
        images.append(image)
    stacked = np.stack(images)
    gram = stacked.conj() @ stacked.T
    off = np.abs(gram - np.diag(np.diag(gram)))
    if off.size and off.max() > ORTHOGONALITY_TOLERANCE:
        raise DecompositionError("projectors not orthogonal on the parent state")
    residual = np.linalg.norm(parent.amplitudes - stacked.sum(axis=0))
    if residual > RECONSTRUCTION_TOLERANCE:
        raise DecompositionError(f"projectors do not resolve the parent: residual {residual:.3e}")
    kept, labels, dropped = [], [], 0.0
    for projector, image in zip(projectors, images):
        norm = float(np.linalg.norm(image))
        if norm < norm_floor:
            dropped += norm
            continue
        kept.append(image)
        labels.append(projector.label)
    if not kept:
        raise DecompositionError("every component fell below the norm floor")
    return Decomposition(parent, tuple(kept), tuple(labels), norm_floor=norm_floor,
                         dropped_norm=dropped, description=description)


def refine(decomposition: Decomposition, index: int, projectors: Sequence[Projector],
           description: str = "") -> Decomposition:
    """Split component ``index`` further with ``projectors``; other components are kept."""
    component = decomposition.components[index]
    pieces, labels, dropped = [], [], decomposition.dropped_norm
    for projector in projectors:
        image = projector.apply(component)
        norm = float(np.linalg.norm(image))
        if norm < decomposition.norm_floor:
            dropped += norm
            continue
        pieces.append(image)
        labels.append(f"{decomposition.labels[index]}&{projector.label}")
    residual = np.linalg.norm(component - sum(pieces)) if pieces else np.linalg.norm(component)
    if residual > RECONSTRUCTION_TOLERANCE + dropped:
        raise DecompositionError(f"refinement does not resolve component {index}: residual {residual:.3e}")
    components = list(decomposition.components[:index]) + pieces + list(decomposition.components[index + 1:])
    all_labels = list(decomposition.labels[:index]) + labels + list(decomposition.labels[index + 1:])
    return Decomposition(decomposition.parent, tuple(components), tuple(all_labels),
                         norm_floor=decomposition.norm_floor, dropped_norm=dropped,
                         description=description or decomposition.description)

"""Pure states on an open 1D qubit chain.

Site 0 is the most significant bit of the computational-basis index, so a
state's amplitude array reshapes to ``(2,) * n_sites`` with axis k = site k.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from config.settings import settings
from lattice.errors import LatticeError

NORM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LatticeSpec:
    n_sites: int
    geometry: str = "open_chain"

    def __post_init__(self):
        if not isinstance(self.n_sites, (int, np.integer)) or self.n_sites < 1:
            raise LatticeError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        if self.n_sites > settings.MAX_SITES:
            raise LatticeError(
                f"n_sites={self.n_sites} exceeds the configured maximum {settings.MAX_SITES}"
            )
        if self.geometry != "open_chain":
            raise LatticeError(f"unsupported geometry {self.geometry!r}")

    @property
    def dimension(self) -> int:
        return 2 ** self.n_sites

    def adjacent_pairs(self) -> list[tuple[int, int]]:
        return [(k, k + 1) for k in range(self.n_sites - 1)]

    def check_site(self, site: int):
        if not 0 <= site < self.n_sites:
            raise LatticeError(f"site {site} out of range for {self.n_sites} sites")


def apply_matrix(vectors: np.ndarray, matrix: np.ndarray, sites: Sequence[int], n_sites: int) -> np.ndarray:
    """Apply a k-site matrix to the last axis of ``vectors`` (any leading batch shape)."""
    vectors = np.asarray(vectors)
    batch = vectors.shape[:-1]
    k = len(sites)
    tensor = vectors.reshape(batch + (2,) * n_sites)
    gate = np.asarray(matrix).reshape((2,) * (2 * k))
    axes = [len(batch) + s for s in sites]
    out = np.tensordot(tensor, gate, axes=(axes, list(range(k, 2 * k))))
    out = np.moveaxis(out, list(range(out.ndim - k, out.ndim)), axes)
    return out.reshape(batch + (2 ** n_sites,))


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    lattice: LatticeSpec
    normalized: bool = True
    label: str = field(default="", compare=False)

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.shape[0] != self.lattice.dimension:
            raise LatticeError(
                f"expected {self.lattice.dimension} amplitudes, got {amplitudes.shape[0]}"
            )
        if not np.all(np.isfinite(amplitudes)):
            raise LatticeError("amplitudes must be finite")
        if self.normalized and abs(np.linalg.norm(amplitudes) - 1.0) > NORM_TOLERANCE:
            raise LatticeError(f"state flagged normalized has norm {np.linalg.norm(amplitudes):.15f}")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_amplitudes(cls, amplitudes: Iterable[complex], label: str = "", normalize: bool = True) -> "StateVector":
        amplitudes = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes,
                                dtype=complex).reshape(-1)
        n_sites = int(round(np.log2(amplitudes.shape[0])))
        if 2 ** n_sites != amplitudes.shape[0]:
            raise LatticeError(f"amplitude count {amplitudes.shape[0]} is not a power of two")
        if normalize:
            norm = np.linalg.norm(amplitudes)
            if norm == 0:
                raise LatticeError("cannot normalize the zero vector")
            amplitudes = amplitudes / norm
        return cls(amplitudes, LatticeSpec(n_sites), normalized=normalize, label=label)

    @classmethod
    def basis(cls, bits: str, label: str = "") -> "StateVector":
        """Computational basis state from a bit string, e.g. ``"0110"``."""
        if not bits or set(bits) - {"0", "1"}:
            raise LatticeError(f"invalid bit string {bits!r}")
        lattice = LatticeSpec(len(bits))
        amplitudes = np.zeros(lattice.dimension, dtype=complex)
        amplitudes[int(bits, 2)] = 1.0
        return cls(amplitudes, lattice, label=label or f"|{bits}>")

    @classmethod
    def zero(cls, n_sites: int) -> "StateVector":
        return cls.basis("0" * n_sites, label=f"|0^{n_sites}>")

    @classmethod
    def product(cls, site_states: Sequence[Sequence[complex]], label: str = "") -> "StateVector":
        amplitudes = np.array([1.0], dtype=complex)
        for local in site_states:
            amplitudes = np.kron(amplitudes, np.asarray(local, dtype=complex))
        return cls.from_amplitudes(amplitudes, label=label)

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized_copy(self, label: str = "") -> "StateVector":
        norm = self.norm
        if norm == 0:
            raise LatticeError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / norm, self.lattice, normalized=True, label=label or self.label)

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(
            np.kron(self.amplitudes, other.amplitudes),
            LatticeSpec(self.n_sites + other.n_sites),
            normalized=self.normalized and other.normalized,
            label=f"{self.label}{other.label}",
        )

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StateVector":
        try:
            n_sites = int(payload["n_sites"])
            amplitudes = [complex(re, im) for re, im in payload["amplitudes"]]
        except (KeyError, TypeError, ValueError) as e:
            raise LatticeError(f"malformed state record: {e}") from e
        if len(amplitudes) != 2 ** n_sites:
            raise LatticeError(f"state record declares {n_sites} sites but has {len(amplitudes)} amplitudes")
        return cls.from_amplitudes(amplitudes, label=payload.get("label", ""))


def require_same_lattice(a: StateVector, b: StateVector):
    if a.lattice.dimension != b.lattice.dimension:
        raise LatticeError(f"dimension mismatch: {a.lattice.dimension} vs {b.lattice.dimension}")


def require_normalized(*states: StateVector):
    for state in states:
        if abs(state.norm - 1.0) > 1e-10:
            raise LatticeError(f"state {state.label or '<unnamed>'} is not normalized (norm {state.norm:.12f})")


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, antilinear in the first argument."""
    require_same_lattice(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(inner_product(a, b)) ** 2


def same_ray(a: StateVector, b: StateVector, tolerance: float = 1e-10) -> bool:
    """States are equal iff they agree up to global phase."""
    return abs(inner_product(a, b)) >= 1.0 - tolerance

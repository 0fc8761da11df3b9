"""Transverse-field Ising chain, optionally with an apparatus coupling, and its time evolution.

H = -J sum Z_k Z_{k+1} - g sum X_k - kappa sum_{e != s} Z_s Z_e.
With a system site s the transverse field skips s, so Z_s is conserved and
the chain acts as an environment recording it.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from lattice.errors import LatticeError
from lattice.observables import PAULI_MATRICES
from lattice.state import StateVector, apply_matrix

logger = logging.getLogger(__name__)

STEP_GUARD = 0.5


@dataclass(frozen=True)
class HamiltonianSpec:
    n_sites: int
    J: float = 1.0
    g: float = 0.0
    kappa: float = 0.0
    system_site: Optional[int] = None
    dt: float = 0.05
    order: int = 2

    def __post_init__(self):
        if self.n_sites < 1:
            raise LatticeError("a Hamiltonian needs at least one site")
        if self.dt <= 0:
            raise LatticeError(f"dt must be positive, got {self.dt}")
        if self.order not in (1, 2):
            raise LatticeError(f"Trotter order must be 1 or 2, got {self.order}")
        if self.system_site is not None and not 0 <= self.system_site < self.n_sites:
            raise LatticeError(f"system site {self.system_site} outside {self.n_sites} sites")
        if self.kappa and self.system_site is None:
            raise LatticeError("an apparatus coupling needs a system site")

    @classmethod
    def apparatus(cls, n_sites: int, kappa: float = 1.0, J: float = 0.0, g: float = 0.0,
                  system_site: int = 0, dt: float = 0.05, order: int = 2) -> "HamiltonianSpec":
        return cls(n_sites, J=J, g=g, kappa=kappa, system_site=system_site, dt=dt, order=order)

    def zz_terms(self) -> Dict[Tuple[int, int], float]:
        terms: Dict[Tuple[int, int], float] = {}
        for k in range(self.n_sites - 1):
            if self.J:
                terms[(k, k + 1)] = terms.get((k, k + 1), 0.0) - self.J
        if self.system_site is not None and self.kappa:
            for e in range(self.n_sites):
                if e == self.system_site:
                    continue
                pair = tuple(sorted((self.system_site, e)))
                terms[pair] = terms.get(pair, 0.0) - self.kappa
        return terms

    def x_terms(self) -> List[Tuple[int, float]]:
        if not self.g:
            return []
        return [(k, -self.g) for k in range(self.n_sites) if k != self.system_site]

    @property
    def max_coupling(self) -> float:
        return max(abs(self.J), abs(self.g), abs(self.kappa))

    def diagonal(self) -> np.ndarray:
        """ZZ energies on the computational basis."""
        indices = np.arange(2 ** self.n_sites)
        spins = 1 - 2 * ((indices[:, None] >> (self.n_sites - 1 - np.arange(self.n_sites))) & 1)
        energies = np.zeros(indices.shape[0])
        for (a, b), coefficient in self.zz_terms().items():
            energies += coefficient * spins[:, a] * spins[:, b]
        return energies

    def dense(self) -> np.ndarray:
        dim = 2 ** self.n_sites
        matrix = np.diag(self.diagonal()).astype(complex)
        eye = np.eye(dim, dtype=complex)
        for site, coefficient in self.x_terms():
            matrix += coefficient * apply_matrix(eye, PAULI_MATRICES["X"], (site,), self.n_sites).T
        return matrix

    def to_dict(self) -> dict:
        return {"n_sites": self.n_sites, "J": self.J, "g": self.g, "kappa": self.kappa,
                "system_site": self.system_site, "dt": self.dt, "order": self.order}


def _x_rotation(coefficient: float, tau: float) -> np.ndarray:
    """exp(-i tau coefficient X)."""
    angle = coefficient * tau
    return np.array([[np.cos(angle), -1j * np.sin(angle)], [-1j * np.sin(angle), np.cos(angle)]])


def _check_step(h: HamiltonianSpec):
    if h.dt * h.max_coupling > STEP_GUARD:
        message = f"Trotter step dt*max|coupling| = {h.dt * h.max_coupling:.3f} exceeds {STEP_GUARD}"
        warnings.warn(message, RuntimeWarning, stacklevel=3)
        logger.warning(message)


def trotter_arrays(vectors: np.ndarray, h: HamiltonianSpec, steps: int) -> np.ndarray:
    """Evolve the last axis of ``vectors`` (any batch shape) by ``steps`` Trotter steps."""
    if steps < 0:
        raise LatticeError(f"steps must be nonnegative, got {steps}")
    out = np.array(vectors, dtype=complex)
    if steps == 0:
        return out
    _check_step(h)
    phase = np.exp(-1j * h.dt * h.diagonal())
    tau = h.dt / 2 if h.order == 2 else h.dt
    rotations = [(site, _x_rotation(c, tau)) for site, c in h.x_terms()]
    for _ in range(steps):
        if h.order == 2:
            for site, rotation in rotations:
                out = apply_matrix(out, rotation, (site,), h.n_sites)
        out = out * phase
        for site, rotation in rotations:
            out = apply_matrix(out, rotation, (site,), h.n_sites)
    return out


def trotter_evolve(state: StateVector, h: HamiltonianSpec, steps: int) -> StateVector:
    if state.n_sites != h.n_sites:
        raise LatticeError(f"state on {state.n_sites} sites, Hamiltonian on {h.n_sites}")
    amplitudes = trotter_arrays(state.amplitudes, h, steps)
    return StateVector(amplitudes, state.lattice, normalized=state.normalized, label=state.label)


def steps_for(h: HamiltonianSpec, duration: float) -> int:
    steps = int(round(duration / h.dt))
    if abs(steps * h.dt - duration) > 1e-9 * max(1.0, duration):
        raise LatticeError(f"duration {duration} is not a multiple of dt = {h.dt}")
    return steps


def exact_evolve(state: StateVector, h: HamiltonianSpec, time: float) -> StateVector:
    """Dense matrix-exponential reference evolution."""
    propagator = expm(-1j * time * h.dense())
    return StateVector(propagator @ state.amplitudes, state.lattice, normalized=state.normalized,
                       label=state.label)


def reversed_spec(h: HamiltonianSpec) -> HamiltonianSpec:
    return HamiltonianSpec(h.n_sites, -h.J, -h.g, -h.kappa, h.system_site, h.dt, h.order)


def inverse_trotter_arrays(vectors: np.ndarray, h: HamiltonianSpec, steps: int) -> np.ndarray:
    """Exact inverse of ``trotter_arrays(vectors, h, steps)``."""
    if h.order == 2:
        # symmetric steps invert by negating time
        return trotter_arrays(vectors, reversed_spec(h), steps)
    out = np.array(vectors, dtype=complex)
    phase = np.exp(1j * h.dt * h.diagonal())
    rotations = [(site, _x_rotation(-c, h.dt)) for site, c in h.x_terms()]
    for _ in range(steps):
        for site, rotation in rotations:
            out = apply_matrix(out, rotation, (site,), h.n_sites)
        out = out * phase
    return out

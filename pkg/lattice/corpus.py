"""Named test states: GHZ, product, random-circuit, apparatus and GHZ-pair states."""
from __future__ import annotations

from math import sqrt
from typing import Callable, Dict, Sequence

import numpy as np

from lattice.circuit import apply_circuit, random_circuit
from lattice.errors import LatticeError
from lattice.gates import GateSet
from lattice.state import StateVector

PLUS = (1 / sqrt(2), 1 / sqrt(2))
MINUS = (1 / sqrt(2), -1 / sqrt(2))
ZERO = (1.0, 0.0)
ONE = (0.0, 1.0)


def ghz(n_sites: int) -> StateVector:
    amplitudes = np.zeros(2 ** n_sites, dtype=complex)
    amplitudes[0] = amplitudes[-1] = 1 / sqrt(2)
    return StateVector.from_amplitudes(amplitudes, label=f"GHZ_{n_sites}")


def plus_product(n_sites: int) -> StateVector:
    return StateVector.product([PLUS] * n_sites, label=f"|+>^{n_sites}")


def basis(bits: str) -> StateVector:
    return StateVector.basis(bits)


def bloch_product(thetas: Sequence[float], phis: Sequence[float]) -> StateVector:
    """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1> on each site."""
    if len(thetas) != len(phis) or not thetas:
        raise LatticeError("bloch_product needs one (theta, phi) pair per site")
    locals_ = [(np.cos(t / 2), np.exp(1j * p) * np.sin(t / 2)) for t, p in zip(thetas, phis)]
    return StateVector.product(locals_, label=f"bloch_{len(thetas)}")


def random_circuit_state(n_sites: int, depth: int = 20, seed: int = 0,
                         gate_set: GateSet | None = None) -> StateVector:
    rng = np.random.default_rng(seed)
    circuit = random_circuit(n_sites, depth, rng, gate_set)
    state = apply_circuit(StateVector.zero(n_sites), circuit)
    return StateVector(state.amplitudes, state.lattice, label=f"rc_{n_sites}_d{depth}_s{seed}")


def apparatus_initial(n_sites: int, system_site: int = 0) -> StateVector:
    """|+> on the system site, |0> on every environment site."""
    if not 0 <= system_site < n_sites:
        raise LatticeError(f"system site {system_site} outside {n_sites} sites")
    locals_ = [PLUS if k == system_site else ZERO for k in range(n_sites)]
    return StateVector.product(locals_, label=f"apparatus_{n_sites}")


def ghz_pairs(n_pairs: int) -> StateVector:
    """GHZ_2 on sites (0,1), (2,3), ... ."""
    state = ghz(2)
    for _ in range(n_pairs - 1):
        state = state.tensor(ghz(2))
    return StateVector(state.amplitudes, state.lattice, label=f"GHZ_2^{n_pairs}")


CORPUS: Dict[str, Callable[..., StateVector]] = {
    "ghz": ghz,
    "plus_product": plus_product,
    "basis": basis,
    "bloch_product": bloch_product,
    "random_circuit": random_circuit_state,
    "apparatus": apparatus_initial,
    "ghz_pairs": ghz_pairs,
}


def corpus_state(name: str, **params) -> StateVector:
    try:
        factory = CORPUS[name]
    except KeyError:
        raise LatticeError(f"unknown corpus state {name!r}; known: {sorted(CORPUS)}") from None
    try:
        return factory(**params)
    except TypeError as e:
        raise LatticeError(f"bad parameters for corpus state {name!r}: {e}") from e

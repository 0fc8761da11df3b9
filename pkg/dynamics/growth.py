"""State complexity C(psi(t), psi(0)) along a trajectory."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.settings import settings
from dynamics.hamiltonian import HamiltonianSpec, trotter_arrays
from lattice.circuit import Circuit, apply_circuit, random_circuit
from lattice.errors import LatticeError
from lattice.state import StateVector, same_ray
from oracle.results import EXACT, UPPER_BOUND, ComplexityResult
from oracle.service import OracleConfig, state_complexity

logger = logging.getLogger(__name__)

EVOLUTIONS = ("hamiltonian", "random_circuit")
WALKS = ("uniform", "reduced")


@dataclass(frozen=True)
class GrowthPoint:
    time: float
    exact: ComplexityResult
    upper: Optional[ComplexityResult] = None

    @property
    def lower_bound(self) -> int:
        """Certified lower bound: the exact value or the exhausted-search cutoff."""
        return self.exact.value

    @property
    def upper_bound(self) -> Optional[int]:
        if self.exact.status == EXACT:
            return self.exact.value
        return self.upper.value if self.upper is not None else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "time": self.time,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "exact": self.exact.to_dict(),
            "upper": self.upper.to_dict() if self.upper is not None else None,
        }


@dataclass(frozen=True)
class GrowthSeries:
    evolution: str
    points: List[GrowthPoint]
    circuit: Optional[Circuit] = None

    @property
    def violations(self) -> List[int]:
        """Indices where the certified lower bound dropped below its predecessor."""
        return [k for k in range(1, len(self.points))
                if self.points[k].lower_bound < self.points[k - 1].lower_bound]

    @property
    def monotone(self) -> bool:
        return not self.violations

    def rows(self) -> List[Dict[str, Any]]:
        return [{"time": p.time, "lower_bound": p.lower_bound, "upper_bound": p.upper_bound,
                 "status": p.exact.status} for p in self.points]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "evolution": self.evolution,
            "points": [p.to_dict() for p in self.points],
            "violations": self.violations,
            "circuit": self.circuit.to_list() if self.circuit is not None else None,
        }


def reduced_walk(initial: StateVector, horizon: int, rng: np.random.Generator,
                 oracle: OracleConfig) -> Tuple[Circuit, List[ComplexityResult]]:
    """Random gates that move the state and never lower its certified complexity.

    Each step tries the moves in a random order and keeps the first one whose
    result is a new ray more complex than the current state, else the first
    one that is as complex. When every move lowers the complexity the most
    complex candidate is kept.
    """
    gate_set = oracle.gate_set
    moves = gate_set.moves(initial.n_sites)
    gates: List[tuple] = []
    state = initial
    results = [state_complexity(initial, initial, config=oracle)]
    while len(gates) < horizon:
        current = results[-1].value
        chosen = level = fallback = None
        for index in rng.permutation(len(moves)):
            move = moves[int(index)]
            candidate = apply_circuit(state, Circuit(((move.name, move.sites),), gate_set))
            if same_ray(candidate, state):
                continue
            result = state_complexity(initial, candidate, config=oracle)
            if result.value > current:
                chosen = (move, candidate, result)
                break
            if result.value == current and level is None:
                level = (move, candidate, result)
            if fallback is None or result.value > fallback[2].value:
                fallback = (move, candidate, result)
        chosen = chosen or level
        if chosen is None:
            if fallback is None:
                raise LatticeError("no gate moves the state")
            logger.info("reduced walk: every move lowers the complexity at step %d", len(gates) + 1)
            chosen = fallback
        move, state, result = chosen
        gates.append((move.name, move.sites))
        results.append(result)
    return Circuit(tuple(gates), gate_set), results


def complexity_growth_probe(initial: StateVector, evolution: str, horizon: int, stride: int = 1,
                            hamiltonian: Optional[HamiltonianSpec] = None, seed: int = 0,
                            oracle: Optional[OracleConfig] = None, heuristic: bool = False,
                            workers: Optional[int] = None, walk: str = "uniform") -> GrowthSeries:
    """Complexity every ``stride`` steps up to ``horizon``.

    A step is one random gate or one Trotter step. Random-circuit prefixes
    are their own witnesses, so every point there also has an upper bound.
    ``walk="reduced"`` draws the random gates with :func:`reduced_walk`.
    """
    if evolution not in EVOLUTIONS:
        raise LatticeError(f"unknown evolution {evolution!r}; expected one of {EVOLUTIONS}")
    if walk not in WALKS:
        raise LatticeError(f"unknown walk {walk!r}; expected one of {WALKS}")
    if horizon < 0 or stride < 1:
        raise LatticeError("horizon must be nonnegative and stride positive")
    oracle = oracle or OracleConfig()
    sample_steps = list(range(0, horizon + 1, stride))

    circuit = None
    samples: List[tuple] = []
    if evolution == "random_circuit":
        rng = np.random.default_rng(seed)
        known: List[Optional[ComplexityResult]] = [None] * (horizon + 1)
        if walk == "reduced":
            circuit, walked = reduced_walk(initial, horizon, rng, oracle)
            known = list(walked)
        else:
            circuit = random_circuit(initial.n_sites, horizon, rng, oracle.gate_set)
        for k in sample_steps:
            prefix = Circuit(circuit.gates[:k], circuit.gate_set)
            samples.append((float(k), apply_circuit(initial, prefix), prefix, known[k]))
    else:
        if hamiltonian is None:
            raise LatticeError("hamiltonian evolution needs a HamiltonianSpec")
        amplitudes, previous = initial.amplitudes, 0
        for k in sample_steps:
            amplitudes = trotter_arrays(amplitudes, hamiltonian, k - previous)
            previous = k
            state = StateVector(amplitudes / np.linalg.norm(amplitudes), initial.lattice)
            samples.append((k * hamiltonian.dt, state, None, None))

    heuristic_oracle = oracle.with_mode("heuristic") if heuristic else None

    def probe(sample) -> GrowthPoint:
        time, state, prefix, known = sample
        exact = known if known is not None else state_complexity(initial, state, config=oracle)
        upper = None
        if exact.status != EXACT:
            if prefix is not None:
                upper = ComplexityResult(prefix.cost, UPPER_BOUND, prefix, cutoff=prefix.cost,
                                         note="applied circuit prefix")
            if heuristic_oracle is not None:
                bound = state_complexity(initial, state, config=heuristic_oracle)
                if bound.status == UPPER_BOUND and (upper is None or bound.value < upper.value):
                    upper = bound
        return GrowthPoint(time, exact, upper)

    workers = workers or settings.WORKERS
    if workers > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(probe, samples))
    else:
        points = [probe(s) for s in samples]
    series = GrowthSeries(evolution, points, circuit)
    if series.violations:
        logger.info("growth probe lower bound decreased at %s", series.violations)
    return series

"""Brickwork upper bounds for predicates too large to search exhaustively.

Each layer count L is tried in turn. First a continuous relaxation: every
brickwork block is a general two-site unitary exp(i sum theta_k P_k),
optimized with L-BFGS-B from several starts. When the relaxation reaches
the predicate, the blocks are rounded to short gate words on their pair and
improved by coordinate descent, so the reported value is the gate cost of
an actual witness circuit.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from config.settings import settings
from lattice.circuit import Circuit
from lattice.errors import OracleError
from lattice.gates import GateSet
from lattice.observables import PAULI_MATRICES
from lattice.state import apply_matrix
from oracle.predicates import MARGIN_SLACK, Predicate
from oracle.results import HEURISTIC_LAYERS, LOWER_BOUND_CUTOFF, UPPER_BOUND, ComplexityResult
from oracle.search import frame_keys

logger = logging.getLogger(__name__)

Pair = Tuple[int, ...]

_ONE_SITE_GENERATORS = np.stack([PAULI_MATRICES[p] for p in "XYZ"])
_TWO_SITE_GENERATORS = np.stack([
    np.kron(PAULI_MATRICES[a], PAULI_MATRICES[b])
    for a, b in itertools.product("IXYZ", repeat=2) if (a, b) != ("I", "I")
])


def brickwork_layer(n_sites: int, layer: int) -> List[Pair]:
    """Even layers pair (0,1), (2,3), ...; odd layers pair (1,2), (3,4), ...."""
    if n_sites == 1:
        return [(0,)]
    even = [(k, k + 1) for k in range(0, n_sites - 1, 2)]
    odd = [(k, k + 1) for k in range(1, n_sites - 1, 2)]
    return odd if layer % 2 == 1 and odd else even


def brickwork_blocks(n_sites: int, layers: int) -> List[Pair]:
    return [pair for layer in range(layers) for pair in brickwork_layer(n_sites, layer)]


def _generators(pair: Pair) -> np.ndarray:
    return _ONE_SITE_GENERATORS if len(pair) == 1 else _TWO_SITE_GENERATORS


def block_unitary(theta: np.ndarray, pair: Pair) -> np.ndarray:
    generator = np.tensordot(theta, _generators(pair), axes=1)
    return expm(1j * generator)


@dataclass(frozen=True)
class _Word:
    gates: Tuple[Tuple[str, Tuple[int, ...]], ...]
    cost: int


def block_catalogue(gate_set: GateSet, n_sites: int, pair: Pair, depth: int) -> Tuple[List[_Word], np.ndarray]:
    """Gate words of length <= depth on ``pair``, one per unitary up to phase, cheapest first."""
    moves = gate_set.moves(n_sites, allowed_sites=pair)
    local_dim = 2 ** len(pair)
    words: List[_Word] = []
    unitaries: List[np.ndarray] = []
    seen = set()
    candidates = []
    for length in range(depth + 1):
        for combo in itertools.product(moves, repeat=length):
            candidates.append((sum(m.cost for m in combo), length, combo))
    candidates.sort(key=lambda c: (c[0], c[1]))
    for cost, _, combo in candidates:
        matrix = np.eye(local_dim, dtype=complex)
        for move in combo:
            local_sites = tuple(pair.index(s) for s in move.sites)
            matrix = apply_matrix(matrix, gate_set.matrix(move.name), local_sites, len(pair))
        unitary = matrix.T
        key = frame_keys(unitary[None])[0]
        if key in seen:
            continue
        seen.add(key)
        words.append(_Word(tuple((m.name, m.sites) for m in combo), cost))
        unitaries.append(unitary)
    return words, np.stack(unitaries)


def _apply_blocks(frame: np.ndarray, unitaries: Sequence[np.ndarray], pairs: Sequence[Pair],
                  n_sites: int) -> np.ndarray:
    for unitary, pair in zip(unitaries, pairs):
        frame = apply_matrix(frame, unitary, pair, n_sites)
    return frame


def _apply_many(frame: np.ndarray, unitaries: np.ndarray, pair: Pair, n_sites: int) -> np.ndarray:
    """Apply each of K block unitaries to one frame; returns (K, m, d)."""
    m = frame.shape[0]
    k = len(pair)
    tensor = frame.reshape((m,) + (2,) * n_sites)
    axes = [1 + s for s in pair]
    moved = np.moveaxis(tensor, axes, list(range(-k, 0)))
    rest_shape = moved.shape[:-k]
    flat = moved.reshape(rest_shape + (2 ** k,))
    images = np.einsum("kab,...b->k...a", unitaries, flat)
    images = images.reshape((unitaries.shape[0],) + rest_shape + (2,) * k)
    images = np.moveaxis(images, list(range(-k, 0)), [2 + s for s in pair])
    return images.reshape(unitaries.shape[0], m, 2 ** n_sites)


class _LayerSearch:
    def __init__(self, predicate: Predicate, gate_set: GateSet, block_depth: int, rng: np.random.Generator,
                 restarts: int):
        self.predicate = predicate
        self.gate_set = gate_set
        self.n_sites = predicate.n_sites
        self.block_depth = block_depth
        self.rng = rng
        self.restarts = max(1, restarts)
        self.evaluations = 0
        self._catalogues: Dict[Pair, Tuple[List[_Word], np.ndarray]] = {}

    def catalogue(self, pair: Pair):
        if pair not in self._catalogues:
            self._catalogues[pair] = block_catalogue(self.gate_set, self.n_sites, pair, self.block_depth)
        return self._catalogues[pair]

    def relax(self, pairs: List[Pair]) -> Optional[List[np.ndarray]]:
        """Best continuous blocks found, or None when no start reached the predicate."""
        sizes = [len(_generators(p)) for p in pairs]
        offsets = np.cumsum([0] + sizes)
        frame0 = self.predicate.probe_frame

        def unpack(x):
            return [block_unitary(x[offsets[i]:offsets[i + 1]], pair) for i, pair in enumerate(pairs)]

        def objective(x):
            self.evaluations += 1
            frame = _apply_blocks(frame0, unpack(x), pairs, self.n_sites)
            return -self.predicate.margin_of(frame)

        for start in range(self.restarts):
            x0 = self.rng.normal(scale=1.0, size=int(offsets[-1]))
            result = minimize(objective, x0, method="L-BFGS-B", options={"maxiter": 200})
            if -result.fun >= -MARGIN_SLACK:
                logger.debug("relaxation with %d blocks succeeded on start %d", len(pairs), start)
                return unpack(result.x)
        return None

    def _margins(self, choice: List[int], pairs: List[Pair], position: int) -> np.ndarray:
        """Margins of every catalogue word at ``position`` with the other blocks fixed."""
        before = [self.catalogue(p)[1][c] for p, c in zip(pairs[:position], choice[:position])]
        frame = _apply_blocks(self.predicate.probe_frame, before, pairs[:position], self.n_sites)
        words, unitaries = self.catalogue(pairs[position])
        frames = _apply_many(frame, unitaries, pairs[position], self.n_sites)
        for pair, c in zip(pairs[position + 1:], choice[position + 1:]):
            frames = apply_matrix(frames, self.catalogue(pair)[1][c], pair, self.n_sites)
        self.evaluations += len(words)
        return self.predicate.margins(frames)

    def descend(self, choice: List[int], pairs: List[Pair], max_sweeps: int = 20) -> Tuple[List[int], float]:
        choice = list(choice)
        margin = -np.inf
        for _ in range(max_sweeps):
            changed = False
            for position in range(len(pairs)):
                margins = self._margins(choice, pairs, position)
                words = self.catalogue(pairs[position])[0]
                satisfied = margins >= -MARGIN_SLACK
                if satisfied.any():
                    # catalogue is cheapest first
                    best = int(np.argmax(satisfied))
                else:
                    best = int(np.argmax(margins))
                if best != choice[position] and (
                    margins[best] > margins[choice[position]] + 1e-12
                    or (satisfied[best] and words[best].cost < words[choice[position]].cost)
                ):
                    choice[position] = best
                    changed = True
                margin = float(margins[choice[position]])
            if not changed:
                break
        return choice, margin

    def round_blocks(self, relaxed: List[np.ndarray], pairs: List[Pair]) -> List[int]:
        choice = []
        for unitary, pair in zip(relaxed, pairs):
            _, unitaries = self.catalogue(pair)
            overlap = np.abs(np.einsum("kab,ab->k", unitaries.conj(), unitary))
            choice.append(int(np.argmax(overlap)))
        return choice

    def witness(self, choice: List[int], pairs: List[Pair]) -> Circuit:
        gates = []
        for pair, c in zip(pairs, choice):
            gates.extend(self.catalogue(pair)[0][c].gates)
        return Circuit(tuple(gates), self.gate_set)

    def prune(self, circuit: Circuit) -> Circuit:
        """Drop single gates while the predicate still holds."""
        position = 0
        while position < len(circuit):
            shorter = circuit.without(position)
            frame = shorter.apply_to(self.predicate.probe_frame, self.n_sites)
            self.evaluations += 1
            if self.predicate.margin_of(frame) >= -MARGIN_SLACK:
                circuit = shorter
            else:
                position += 1
        return circuit

    def discrete(self, pairs: List[Pair], relaxed: List[np.ndarray]) -> Optional[Circuit]:
        starts = [self.round_blocks(relaxed, pairs)]
        for _ in range(self.restarts - 1):
            starts.append([int(self.rng.integers(len(self.catalogue(p)[0]))) for p in pairs])
        best: Optional[Circuit] = None
        for start in starts:
            choice, margin = self.descend(start, pairs)
            if margin < -MARGIN_SLACK:
                continue
            circuit = self.prune(self.witness(choice, pairs))
            if best is None or (circuit.cost, circuit.encode()) < (best.cost, best.encode()):
                best = circuit
        return best


def heuristic_layer_complexity(predicate: Predicate, gate_set: Optional[GateSet] = None,
                               budget: Optional[int] = None, max_layers: Optional[int] = None,
                               seed: int = 0, restarts: Optional[int] = None,
                               block_depth: Optional[int] = None) -> ComplexityResult:
    """Upper bound from the first brickwork depth whose rounded blocks satisfy the predicate.

    Never certified; failure within ``max_layers`` is reported as a
    lower_bound_cutoff at budget + 1 that carries no guarantee.
    """
    gate_set = gate_set or GateSet.default()
    budget = settings.HEURISTIC_BUDGET if budget is None else budget
    if budget < 0:
        raise OracleError(f"budget must be nonnegative, got {budget}")
    max_layers = 2 * predicate.n_sites if max_layers is None else max_layers
    restarts = settings.HEURISTIC_RESTARTS if restarts is None else restarts
    block_depth = settings.BLOCK_DEPTH if block_depth is None else block_depth

    if predicate.margin_of(predicate.probe_frame) >= -MARGIN_SLACK:
        return ComplexityResult(0, UPPER_BOUND, Circuit((), gate_set), cutoff=budget, mode=HEURISTIC_LAYERS,
                                blocks=0, relaxed_blocks=0)

    search = _LayerSearch(predicate, gate_set, block_depth, np.random.default_rng(seed), restarts)
    relaxed_blocks = None
    for layers in range(1, max_layers + 1):
        pairs = brickwork_blocks(predicate.n_sites, layers)
        relaxed = search.relax(pairs)
        if relaxed is None:
            logger.debug("relaxation failed at %d layers", layers)
            continue
        if relaxed_blocks is None:
            relaxed_blocks = len(pairs)
        witness = search.discrete(pairs, relaxed)
        if witness is None or witness.cost > budget:
            logger.debug("rounding failed at %d layers", layers)
            continue
        logger.info("heuristic %s: cost %d with %d blocks (%d evaluations)",
                    predicate.kind, witness.cost, len(pairs), search.evaluations)
        return ComplexityResult(witness.cost, UPPER_BOUND, witness, cutoff=budget, mode=HEURISTIC_LAYERS,
                                explored=search.evaluations, blocks=len(pairs), relaxed_blocks=relaxed_blocks)
    return ComplexityResult(budget + 1, LOWER_BOUND_CUTOFF, cutoff=budget, mode=HEURISTIC_LAYERS,
                            explored=search.evaluations, relaxed_blocks=relaxed_blocks,
                            note=f"no witness within {max_layers} brickwork layers")

"""Exhaustive circuit search by nondecreasing cost.

Circuits are enumerated through their *frames* (images of the predicate's
probe states). Frames are deduplicated on a 1e-6 grid after removing a
common global phase, and nodes at equal cost are expanded parent-major,
move-minor, so the first satisfying circuit found at the minimal cost is
the lexicographically smallest one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.settings import settings
from lattice.circuit import Circuit
from lattice.errors import OracleError, SearchLimitExceeded
from lattice.gates import GateSet, Move
from lattice.state import apply_matrix
from oracle.predicates import Predicate, StateMapPredicate
from oracle.results import EXACT, EXACT_BFS, LOWER_BOUND_CUTOFF, ComplexityResult

logger = logging.getLogger(__name__)

HASH_GRID = 1e6
PIVOT_FLOOR = 1e-3
CHUNK = 1024


def frame_keys(frames: np.ndarray) -> List[bytes]:
    """Phase-fixed, grid-rounded fingerprints of a batch of frames (B, m, d)."""
    flat = frames.reshape(frames.shape[0], -1)
    pivot = np.argmax(np.abs(flat) > PIVOT_FLOOR, axis=1)
    reference = flat[np.arange(flat.shape[0]), pivot]
    phase = reference / np.abs(reference)
    fixed = flat * phase.conj()[:, None]
    grid = np.rint(np.concatenate([fixed.real, fixed.imag], axis=1) * HASH_GRID).astype(np.int64)
    return [row.tobytes() for row in grid]


@dataclass
class _Bucket:
    chunks: List[np.ndarray] = field(default_factory=list)
    node_ids: List[int] = field(default_factory=list)
    keys: List[bytes] = field(default_factory=list)


class FrameSearch:
    """Uniform-cost enumeration of frames reachable from a start frame.

    ``backward=True`` applies inverse gates, which is what the target side of
    a meet-in-the-middle search needs; recorded moves still name the gate.
    """

    def __init__(self, start_frame: np.ndarray, gate_set: GateSet, n_sites: int,
                 max_states: int, backward: bool = False):
        self.gate_set = gate_set
        self.n_sites = n_sites
        self.max_states = max_states
        self.moves: List[Move] = gate_set.moves(n_sites)
        self.matrices = []
        for move in self.moves:
            matrix = gate_set.matrix(move.name)
            self.matrices.append(matrix.conj().T if backward else matrix)
        self.node_parent: List[int] = [-1]
        self.node_move: List[int] = [-1]
        start = np.asarray(start_frame, dtype=complex)[None]
        start_key = frame_keys(start)[0]
        self.best: Dict[bytes, int] = {start_key: 0}
        self.buckets: Dict[int, _Bucket] = {0: _Bucket([start], [0], [start_key])}

    @property
    def stored(self) -> int:
        return len(self.node_parent)

    def next_cost(self) -> Optional[int]:
        return min(self.buckets) if self.buckets else None

    def pop(self, cost: int) -> Tuple[np.ndarray, List[int]]:
        """Remove bucket ``cost``; return its live frames (B, m, d) and node ids in order."""
        bucket = self.buckets.pop(cost, None)
        if bucket is None or not bucket.node_ids:
            return np.empty((0,) + self._frame_shape()), []
        frames = np.concatenate(bucket.chunks)
        live = [i for i, key in enumerate(bucket.keys) if self.best.get(key) == cost]
        if len(live) != len(bucket.keys):
            frames = frames[live]
        return frames, [bucket.node_ids[i] for i in live]

    def _frame_shape(self) -> Tuple[int, ...]:
        for bucket in self.buckets.values():
            if bucket.chunks:
                return bucket.chunks[0].shape[1:]
        return (1, 2 ** self.n_sites)

    def expand(self, cost: int, frames: np.ndarray, node_ids: List[int], budget: int,
               predicate: Optional[Predicate] = None) -> Optional[Tuple[int, int]]:
        """Push every child of the given nodes with cost <= budget.

        With ``predicate`` (uniform gate costs only) children are tested as
        they are generated; the first satisfying (parent, move) in parent-major
        order is returned as ``(node_id, move_index)`` and nothing is stored.
        """
        live_moves = [i for i, move in enumerate(self.moves) if cost + move.cost <= budget]
        if not live_moves or not node_ids:
            return None
        for start in range(0, len(node_ids), CHUNK):
            block = frames[start:start + CHUNK]
            children = np.stack([
                apply_matrix(block, self.matrices[i], self.moves[i].sites, self.n_sites) for i in live_moves
            ])
            if predicate is not None:
                hits = np.stack([predicate.satisfied(children[k]) for k in range(len(live_moves))])
                if hits.any():
                    parents, move_slots = np.nonzero(hits.T)
                    return node_ids[start + int(parents[0])], live_moves[int(move_slots[0])]
            keys = [frame_keys(children[k]) for k in range(len(live_moves))]
            accepted: Dict[int, Tuple[List[int], List[int], List[bytes], List[int]]] = {}
            for b in range(block.shape[0]):
                parent_id = node_ids[start + b]
                for k, move_index in enumerate(live_moves):
                    key = keys[k][b]
                    child_cost = cost + self.moves[move_index].cost
                    known = self.best.get(key)
                    if known is not None and known <= child_cost:
                        continue
                    self.best[key] = child_cost
                    node_id = len(self.node_parent)
                    self.node_parent.append(parent_id)
                    self.node_move.append(move_index)
                    slot = accepted.setdefault(child_cost, ([], [], [], []))
                    slot[0].append(k)
                    slot[1].append(b)
                    slot[2].append(key)
                    slot[3].append(node_id)
            for child_cost, (move_slots, parents, child_keys, child_ids) in accepted.items():
                bucket = self.buckets.setdefault(child_cost, _Bucket())
                bucket.chunks.append(children[np.array(move_slots), np.array(parents)])
                bucket.keys.extend(child_keys)
                bucket.node_ids.extend(child_ids)
            if self.stored > self.max_states:
                raise SearchLimitExceeded(
                    f"search stored {self.stored} frames (limit {self.max_states})",
                    exhausted_cost=cost, explored=self.stored,
                )
        return None

    def path(self, node_id: int, extra_move: Optional[int] = None) -> List[Move]:
        moves = [] if extra_move is None else [self.moves[extra_move]]
        while node_id > 0:
            moves.append(self.moves[self.node_move[node_id]])
            node_id = self.node_parent[node_id]
        moves.reverse()
        return moves


def _circuit(moves: List[Move], gate_set: GateSet) -> Circuit:
    return Circuit(tuple((m.name, m.sites) for m in moves), gate_set)


def _cutoff(budget: int, explored: int, note: str = "", value: Optional[int] = None) -> ComplexityResult:
    return ComplexityResult(value=budget + 1 if value is None else value, status=LOWER_BOUND_CUTOFF,
                            cutoff=budget, mode=EXACT_BFS, explored=explored, note=note)


def bfs_synthesize(predicate: Predicate, gate_set: GateSet, budget: int,
                   max_states: Optional[int] = None) -> ComplexityResult:
    """Minimal-cost circuit satisfying ``predicate``, certified by exhaustion."""
    if budget < 0:
        raise OracleError(f"budget must be nonnegative, got {budget}")
    max_states = settings.MAX_SEARCH_STATES if max_states is None else max_states
    search = FrameSearch(predicate.probe_frame, gate_set, predicate.n_sites, max_states)
    early = predicate if gate_set.uniform_cost else None
    try:
        while True:
            cost = search.next_cost()
            if cost is None or cost > budget:
                return _cutoff(budget, search.stored)
            frames, node_ids = search.pop(cost)
            if not node_ids:
                continue
            hits = predicate.satisfied(frames)
            if hits.any():
                first = int(np.argmax(hits))
                witness = _circuit(search.path(node_ids[first]), gate_set)
                logger.debug("bfs %s solved at cost %d after %d frames", predicate.kind, cost, search.stored)
                return ComplexityResult(cost, EXACT, witness, cutoff=budget, explored=search.stored)
            logger.debug("bfs %s exhausted cost %d (%d frames)", predicate.kind, cost, search.stored)
            found = search.expand(cost, frames, node_ids, budget, predicate=early)
            if found is not None:
                node_id, move_index = found
                witness = _circuit(search.path(node_id, move_index), gate_set)
                return ComplexityResult(witness.cost, EXACT, witness, cutoff=budget, explored=search.stored)
    except SearchLimitExceeded as e:
        logger.warning("bfs %s hit the frame limit: %s", predicate.kind, e)
        return _cutoff(budget, e.explored, note="frontier memory limit exceeded", value=e.exhausted_cost + 1)


def _best_join(forward: np.ndarray, backward: np.ndarray, threshold: float) -> Optional[Tuple[int, int]]:
    """First (forward row, backward row) pair with |<b|f>| >= threshold, forward-major."""
    for start in range(0, forward.shape[0], CHUNK):
        overlaps = np.abs(forward[start:start + CHUNK].conj() @ backward.T)
        hits = overlaps >= threshold
        if hits.any():
            rows, cols = np.nonzero(hits)
            return start + int(rows[0]), int(cols[0])
    return None


def meet_in_the_middle(predicate: StateMapPredicate, gate_set: GateSet, budget: int,
                       max_states: Optional[int] = None) -> ComplexityResult:
    """State-map search from both ends, joined on overlap. Needs uniform gate costs."""
    if budget < 0:
        raise OracleError(f"budget must be nonnegative, got {budget}")
    if not gate_set.uniform_cost:
        raise OracleError("meet-in-the-middle needs uniform gate costs")
    max_states = settings.MAX_SEARCH_STATES if max_states is None else max_states
    unit = next(iter(gate_set.costs.values()))
    depth_budget = budget // unit
    threshold = 1.0 - predicate.delta - 1e-12
    n_sites = predicate.n_sites
    forward = FrameSearch(predicate.probe_frame, gate_set, n_sites, max_states)
    backward = FrameSearch(predicate.target.amplitudes[None], gate_set, n_sites, max_states, backward=True)
    # per side: list of (vectors (N, d), node ids) by depth
    levels = {"f": [], "b": []}
    pending = {"f": forward.pop(0), "b": backward.pop(0)}
    for side in ("f", "b"):
        frames, ids = pending[side]
        levels[side].append((frames[:, 0, :], ids, frames))

    def explored() -> int:
        return forward.stored + backward.stored

    try:
        for depth in range(depth_budget + 1):
            if depth == 0:
                new_side = "f"
            else:
                new_side = "f" if depth % 2 == 1 else "b"
                search = forward if new_side == "f" else backward
                last_vectors, last_ids, last_frames = levels[new_side][-1]
                level_cost = (len(levels[new_side]) - 1) * unit
                search.expand(level_cost, last_frames, last_ids, budget=level_cost + unit)
                frames, ids = search.pop(level_cost + unit)
                levels[new_side].append((frames[:, 0, :], ids, frames))
            new_vectors, new_ids, _ = levels[new_side][-1]
            other = "b" if new_side == "f" else "f"
            candidates = []
            for other_vectors, other_ids, _ in levels[other]:
                if not new_ids or not other_ids:
                    continue
                if new_side == "f":
                    hit = _best_join(new_vectors, other_vectors, threshold)
                    if hit is not None:
                        candidates.append((new_ids[hit[0]], other_ids[hit[1]]))
                else:
                    hit = _best_join(other_vectors, new_vectors, threshold)
                    if hit is not None:
                        candidates.append((other_ids[hit[0]], new_ids[hit[1]]))
            if candidates:
                forward_id, backward_id = min(candidates)
                moves = forward.path(forward_id) + list(reversed(backward.path(backward_id)))
                witness = _circuit(moves, gate_set)
                return ComplexityResult(witness.cost, EXACT, witness, cutoff=budget, explored=explored(),
                                        note="meet-in-the-middle")
            logger.debug("mitm exhausted depth %d (%d frames)", depth, explored())
    except SearchLimitExceeded as e:
        logger.warning("meet-in-the-middle hit the frame limit: %s", e)
        return _cutoff(budget, explored(), note="frontier memory limit exceeded", value=depth * unit)
    return _cutoff(budget, explored(), note="meet-in-the-middle")

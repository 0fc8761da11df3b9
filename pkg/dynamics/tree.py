"""Branch tracking across sample times and tree verification.

Each level re-splits the evolved state from scratch. Consecutive levels are
linked by O_jk = |<psi_k(t2)| U(t2, t1) psi_j_hat(t1)>|^2, and later branch k
descends from j when O_jk carries at least theta of column k's mass.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from branching.candidates import CandidateFamily
from branching.tm import search_tm_split
from branching.weingarten import QConfig, minimize_q
from config.settings import settings
from dynamics.hamiltonian import HamiltonianSpec, inverse_trotter_arrays, steps_for, trotter_arrays
from lattice.decomposition import Decomposition, make_decomposition
from lattice.errors import BranchLabError, DecompositionError
from lattice.state import StateVector
from oracle.service import OracleConfig

logger = logging.getLogger(__name__)

Propagator = Callable[[np.ndarray], np.ndarray]

ROW_SLACK = 1e-8
MASS_FLOOR = 1e-12


class Splitter:
    name = "abstract"

    def split(self, state: StateVector) -> Tuple[Decomposition, Dict[str, Any]]:
        raise NotImplementedError


@dataclass
class TmSplitter(Splitter):
    family: CandidateFamily
    epsilon: Optional[float] = None
    oracle: OracleConfig = field(default_factory=OracleConfig)
    threshold: Optional[int] = None
    workers: Optional[int] = None
    name = "tm"

    def split(self, state):
        result = search_tm_split(state, self.family, self.epsilon, self.oracle, self.threshold, self.workers)
        info = {"good_split": result.good_split}
        if result.report is not None:
            info.update(branchiness=result.report.branchiness, certified=result.report.certified)
        if result.good_split:
            return result.decomposition, info
        return Decomposition.trivial(state), info


@dataclass
class WeingartenSplitter(Splitter):
    family: CandidateFamily
    q_config: QConfig = field(default_factory=QConfig)
    workers: Optional[int] = None
    name = "weingarten"

    def split(self, state):
        result = minimize_q(state, self.q_config, self.family, self.workers)
        return result.best.decomposition, {"q": result.best.q_value, "q_gap": result.q_gap}


@dataclass
class FixedSplitter(Splitter):
    """Applies the family's first candidate with no criterion."""
    family: CandidateFamily
    name = "fixed"

    def split(self, state):
        candidate = self.family.candidates[0]
        return make_decomposition(state, candidate.projectors, description=candidate.label), {}


@dataclass(frozen=True)
class TreeLevel:
    time: float
    decomposition: Decomposition
    info: Dict[str, Any] = field(default_factory=dict)

    @property
    def weights(self) -> np.ndarray:
        return self.decomposition.weights


@dataclass(frozen=True)
class TreeEdge:
    overlap: np.ndarray
    parents: List[Optional[int]]


@dataclass(frozen=True)
class BranchTree:
    levels: List[TreeLevel]
    edges: List[TreeEdge]
    skipped: List[Dict[str, Any]] = field(default_factory=list)

    def branch_counts(self) -> List[int]:
        return [len(level.decomposition) for level in self.levels]

    def to_dict(self) -> Dict[str, Any]:
        nodes = []
        for index, level in enumerate(self.levels):
            for k, (label, weight) in enumerate(zip(level.decomposition.labels, level.weights)):
                nodes.append({"level": index, "time": level.time, "branch": k, "label": label,
                              "weight": float(weight)})
        edges = []
        for index, edge in enumerate(self.edges):
            edges.append({
                "from_level": index,
                "to_level": index + 1,
                "overlap": [[float(x) for x in row] for row in edge.overlap],
                "parents": edge.parents,
            })
        return {"nodes": nodes, "edges": edges, "skipped": self.skipped,
                "levels": [{"time": l.time, "info": l.info} for l in self.levels]}

    def weight_rows(self) -> List[Dict[str, Any]]:
        return [
            {"time": level.time, "branch": k, "label": label, "weight": float(weight)}
            for level in self.levels
            for k, (label, weight) in enumerate(zip(level.decomposition.labels, level.weights))
        ]


def overlap_matrix(earlier: Decomposition, later: Decomposition, propagate: Propagator) -> np.ndarray:
    forward = propagate(np.stack([b.amplitudes for b in earlier.branches()]))
    return np.abs(later.component_array().conj() @ forward.T).T ** 2


def assign_parents(overlap: np.ndarray) -> List[Optional[int]]:
    parents = []
    for k in range(overlap.shape[1]):
        column = overlap[:, k]
        parents.append(int(np.argmax(column)) if column.sum() > MASS_FLOOR else None)
    return parents


def assemble_tree(levels: Sequence[TreeLevel], propagators: Sequence[Propagator],
                  skipped: Optional[List[Dict[str, Any]]] = None) -> BranchTree:
    """Link consecutive levels; ``propagators[i]`` evolves level i's time to level i + 1's."""
    if len(propagators) != max(len(levels) - 1, 0):
        raise DecompositionError("one propagator per pair of consecutive levels is required")
    edges = []
    for earlier, later, propagate in zip(levels, levels[1:], propagators):
        overlap = overlap_matrix(earlier.decomposition, later.decomposition, propagate)
        edges.append(TreeEdge(overlap, assign_parents(overlap)))
    return BranchTree(list(levels), edges, skipped or [])


def hamiltonian_propagator(h: HamiltonianSpec, duration: float) -> Propagator:
    steps = steps_for(h, duration)
    return lambda vectors: trotter_arrays(vectors, h, steps)


def track_branches(initial: StateVector, h: HamiltonianSpec, sample_times: Sequence[float],
                   splitter: Splitter, workers: Optional[int] = None) -> BranchTree:
    times = [float(t) for t in sample_times]
    if not times:
        raise DecompositionError("track_branches needs at least one sample time")
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise DecompositionError("sample times must be nonnegative and increasing")

    states, previous, state = [], 0.0, initial
    for t in times:
        amplitudes = trotter_arrays(state.amplitudes, h, steps_for(h, t - previous))
        state = StateVector(amplitudes / np.linalg.norm(amplitudes), state.lattice, label=f"{initial.label}@t={t:g}")
        states.append(state)
        previous = t

    def run(state: StateVector):
        try:
            decomposition, info = splitter.split(state)
            return decomposition, info, None
        except BranchLabError as e:
            logger.warning("splitter %s failed on %s: %s", splitter.name, state.label, e)
            return None, {}, str(e)

    workers = workers or settings.WORKERS
    if workers > 1 and len(states) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, states))
    else:
        outcomes = [run(s) for s in states]

    levels, skipped = [], []
    for t, (decomposition, info, error) in zip(times, outcomes):
        if decomposition is None:
            skipped.append({"time": t, "error": error})
            continue
        levels.append(TreeLevel(t, decomposition, info))
    propagators = [hamiltonian_propagator(h, b.time - a.time) for a, b in zip(levels, levels[1:])]
    tree = assemble_tree(levels, propagators, skipped)
    logger.info("tracked %d levels with %s splitter; branch counts %s", len(levels), splitter.name,
                tree.branch_counts())
    return tree


@dataclass(frozen=True)
class TreeVerification:
    is_tree: bool
    violations: List[Dict[str, Any]]
    theta: float
    levels_checked: List[int]
    max_weight_defect: float
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"is_tree": self.is_tree, "violations": self.violations, "theta": self.theta,
                "levels_checked": self.levels_checked, "max_weight_defect": self.max_weight_defect,
                "note": self.note}


def stable_window(tree: BranchTree) -> List[int]:
    """Level indices up to (not including) the first drop in branch count."""
    counts = tree.branch_counts()
    window = list(range(min(1, len(counts))))
    for index in range(1, len(counts)):
        if counts[index] < counts[index - 1]:
            break
        window.append(index)
    return window


def verify_tree(tree: BranchTree, theta: Optional[float] = None,
                window: Optional[Sequence[int]] = None) -> TreeVerification:
    """Every later branch needs exactly one parent carrying theta of its column mass."""
    theta = settings.TREE_THETA if theta is None else theta
    indices = list(range(len(tree.levels))) if window is None else sorted(window)
    if len(indices) < 2:
        return TreeVerification(True, [], theta, indices, 0.0, note="fewer than two levels")
    violations: List[Dict[str, Any]] = []
    defect = 0.0
    for later in indices[1:]:
        if later - 1 not in indices:
            continue
        edge = tree.edges[later - 1]
        overlap = edge.overlap
        for j, row_sum in enumerate(overlap.sum(axis=1)):
            if row_sum > 1 + ROW_SLACK:
                violations.append({"level": later, "branch": j, "kind": "row_mass", "mass": float(row_sum)})
        children: Dict[int, float] = {}
        weights = tree.levels[later].weights
        for k in range(overlap.shape[1]):
            column = overlap[:, k]
            mass = float(column.sum())
            holders = [int(j) for j in np.nonzero(column >= theta * mass)[0]] if mass > MASS_FLOOR else []
            if len(holders) == 1:
                children[holders[0]] = children.get(holders[0], 0.0) + float(weights[k])
                continue
            violations.append({
                "level": later,
                "time": tree.levels[later].time,
                "branch": k,
                "kind": "missing" if not holders else "ambiguous",
                "column": [float(x) for x in column],
            })
        parent_weights = tree.levels[later - 1].weights
        for j, child_weight in children.items():
            defect = max(defect, abs(float(parent_weights[j]) - child_weight))
    return TreeVerification(not violations, violations, theta, indices, defect)


def recoherence_tree(initial: StateVector, h: HamiltonianSpec, duration: float, family: CandidateFamily,
                     resplitter: Splitter) -> BranchTree:
    """Evolve, force a split, evolve back, split again: the last step merges branches.

    The forced split uses the family's first candidate; the final split is
    whatever ``resplitter`` picks for the restored initial state.
    """
    forward = hamiltonian_propagator(h, duration)
    steps = steps_for(h, duration)
    backward: Propagator = lambda vectors: inverse_trotter_arrays(vectors, h, steps)
    evolved_amplitudes = forward(initial.amplitudes)
    evolved = StateVector(evolved_amplitudes / np.linalg.norm(evolved_amplitudes), initial.lattice,
                          label=f"{initial.label}@t={duration:g}")
    restored_amplitudes = backward(evolved.amplitudes)
    restored = StateVector(restored_amplitudes / np.linalg.norm(restored_amplitudes), initial.lattice,
                           label=f"{initial.label} restored")
    root, _ = resplitter.split(initial)
    forced, _ = FixedSplitter(family).split(evolved)
    final, info = resplitter.split(restored)
    levels = [TreeLevel(0.0, root), TreeLevel(duration, forced, {"forced": True}),
              TreeLevel(2 * duration, final, info)]
    return assemble_tree(levels, [forward, backward])



"""Q-functional branch selection.

q = sum_i w_i (C(psi_i, vacuum)^2 - b ln w_i), with w_i the squared norm of
component i and C measured on the normalized component. The decomposition
with the smallest q over a finite candidate family (plus greedy
refinement of accepted splits) defines the branches.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from branching.candidates import CandidateFamily
from config.settings import settings
from lattice.decomposition import Decomposition, refine
from lattice.errors import DecompositionError, OracleError
from lattice.state import StateVector, require_normalized
from oracle.results import EXACT, ComplexityResult
from oracle.search import frame_keys
from oracle.service import OracleConfig, state_complexity

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-10
TIE_GAP = 1e-6


@dataclass
class QConfig:
    b: float = 1.0
    vacuum: Optional[StateVector] = None
    oracle: OracleConfig = field(default_factory=OracleConfig)
    memo: Dict[bytes, ComplexityResult] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.b < 0:
            raise OracleError(f"b must be nonnegative, got {self.b}")
        if self.vacuum is not None:
            require_normalized(self.vacuum)

    def vacuum_for(self, n_sites: int) -> StateVector:
        return self.vacuum if self.vacuum is not None else StateVector.zero(n_sites)

    def with_b(self, b: float) -> "QConfig":
        return QConfig(b, self.vacuum, self.oracle, self.memo)

    def complexity(self, branch: StateVector) -> ComplexityResult:
        """C(branch, vacuum), memoized on the branch ray."""
        vacuum = self.vacuum_for(branch.n_sites)
        key = frame_keys(np.stack([branch.amplitudes, vacuum.amplitudes])[None])[0]
        if key not in self.memo:
            self.memo[key] = state_complexity(vacuum, branch, config=self.oracle)
        return self.memo[key]

    def describe(self) -> Dict[str, Any]:
        return {"b": self.b, "vacuum": self.vacuum.label if self.vacuum is not None else "|0...0>",
                "oracle": self.oracle.describe()}


@dataclass(frozen=True)
class QReport:
    decomposition: Decomposition
    complexities: List[ComplexityResult]
    weights: List[float]
    b: float
    q_value: float

    @property
    def branch_count(self) -> int:
        return len(self.decomposition)

    @property
    def certified(self) -> bool:
        return all(c.status == EXACT for c in self.complexities)

    @property
    def expected_sq_complexity(self) -> float:
        return float(sum(w * c.value ** 2 for w, c in zip(self.weights, self.complexities)))

    @property
    def expected_complexity(self) -> float:
        return float(sum(w * c.value for w, c in zip(self.weights, self.complexities)))

    @property
    def entropy(self) -> float:
        """Shannon entropy of the squared norms (0 ln 0 = 0)."""
        return float(-sum(w * math.log(w) for w in self.weights if w > 0))

    def q_at(self, b: float) -> float:
        return self.expected_sq_complexity + b * self.entropy

    def recompute(self) -> float:
        return float(sum(w * (c.value ** 2 - self.b * math.log(w)) for w, c in zip(self.weights, self.complexities)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "decomposition": self.decomposition.to_dict(include_amplitudes=False),
            "complexities": [c.to_dict() for c in self.complexities],
            "weights": self.weights,
            "b": self.b,
            "q_value": self.q_value,
            "entropy": self.entropy,
            "expected_sq_complexity": self.expected_sq_complexity,
            "branch_count": self.branch_count,
            "certified": self.certified,
        }


def q_functional(decomposition: Decomposition, cfg: QConfig) -> QReport:
    require_normalized(decomposition.parent)
    weights = [float(w) for w in decomposition.weights]
    if abs(sum(weights) - 1.0) > WEIGHT_TOLERANCE + 2 * decomposition.dropped_norm:
        raise DecompositionError(f"branch weights sum to {sum(weights):.12f}, not 1")
    complexities = [cfg.complexity(branch) for branch in decomposition.branches()]
    q_value = float(sum(w * (c.value ** 2 - cfg.b * math.log(w)) for w, c in zip(weights, complexities)))
    return QReport(decomposition, complexities, weights, cfg.b, q_value)


def _refine_greedily(report: QReport, cfg: QConfig, family: CandidateFamily) -> QReport:
    """Re-split single components with family projectors while q keeps dropping."""
    improved = True
    while improved:
        improved = False
        best = report
        for index in range(len(report.decomposition)):
            for candidate in family:
                try:
                    refined = refine(report.decomposition, index, candidate.projectors)
                except DecompositionError:
                    continue
                if len(refined) == len(report.decomposition):
                    continue
                trial = q_functional(refined, cfg)
                if trial.q_value < best.q_value - 1e-12:
                    best = trial
        if best is not report:
            report = best
            improved = True
    return report


def _q_key(report: QReport):
    return (round(report.q_value, 12), report.branch_count)


@dataclass(frozen=True)
class QMinimization:
    best: QReport
    trivial: QReport
    candidates: List[QReport]
    q_gap: Optional[float]

    @property
    def near_degenerate(self) -> bool:
        return self.q_gap is not None and self.q_gap < TIE_GAP

    def to_dict(self) -> Dict[str, Any]:
        return {
            "best": self.best.to_dict(),
            "trivial_q": self.trivial.q_value,
            "q_gap": self.q_gap,
            "near_degenerate": self.near_degenerate,
            "candidates": [c.to_dict() for c in self.candidates],
        }


def minimize_q(state: StateVector, cfg: QConfig, family: CandidateFamily,
               workers: Optional[int] = None) -> QMinimization:
    """Smallest q among the trivial split and the family (each greedily refined); ties go to fewer branches."""
    if len(family) == 0:
        raise DecompositionError("empty candidate family")
    trivial = q_functional(Decomposition.trivial(state), cfg)
    entries = family.decompositions(state)

    def evaluate(entry) -> QReport:
        _, decomposition, _ = entry
        return _refine_greedily(q_functional(decomposition, cfg), cfg, family)

    workers = workers or settings.WORKERS
    if workers > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(evaluate, entries))
    else:
        reports = [evaluate(e) for e in entries]

    distinct: Dict[Tuple, QReport] = {trivial.decomposition.signature(): trivial}
    for report in reports:
        distinct.setdefault(report.decomposition.signature(), report)
    ranked = sorted(distinct.values(), key=_q_key)
    best = ranked[0]
    q_gap = ranked[1].q_value - best.q_value if len(ranked) > 1 else None
    if best.q_value > trivial.q_value + 1e-12:
        raise DecompositionError("minimizer exceeds the trivial decomposition")
    logger.info("minimize_q b=%.4f: %d branches, q=%.6f (gap %s)", cfg.b, best.branch_count, best.q_value,
                "n/a" if q_gap is None else f"{q_gap:.3e}")
    return QMinimization(best, trivial, ranked, q_gap)


def is_coarse_graining(fine: Decomposition, coarse: Decomposition, tolerance: float = 1e-8) -> bool:
    """Every fine component lies inside exactly one coarse component."""
    coarse_array = coarse.component_array()
    for component in fine.components:
        norm_sq = float(np.vdot(component, component).real)
        overlaps = np.abs(coarse_array.conj() @ component)
        inside = np.abs(overlaps - norm_sq) <= tolerance
        outside = overlaps <= tolerance
        if inside.sum() != 1 or not np.all(inside | outside):
            return False
    return True


@dataclass(frozen=True)
class BSweep:
    rows: List[Dict[str, Any]]
    minimizations: List[QMinimization]
    crossovers: List[Dict[str, Any]]
    nested: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"rows": self.rows, "crossovers": self.crossovers, "nested": self.nested}


def b_sweep(state: StateVector, cfg: QConfig, b_values: Sequence[float], family: CandidateFamily,
            workers: Optional[int] = None) -> BSweep:
    """One minimize_q per b, with exact crossover points between consecutive minimizers."""
    if not b_values:
        raise OracleError("b_sweep needs at least one b value")
    if list(b_values) != sorted(b_values):
        raise OracleError("b values must be sorted")
    results = [minimize_q(state, cfg.with_b(b), family, workers) for b in b_values]
    rows, crossovers, nested = [], [], True
    for k, (b, result) in enumerate(zip(b_values, results)):
        rows.append({
            "b": float(b),
            "labels": list(result.best.decomposition.labels),
            "q": result.best.q_value,
            "branch_count": result.best.branch_count,
            "q_gap": result.q_gap,
            "tie": result.near_degenerate,
        })
        if k == 0:
            continue
        previous = results[k - 1].best
        current = result.best
        if previous.decomposition.signature() == current.decomposition.signature():
            continue
        if not is_coarse_graining(previous.decomposition, current.decomposition):
            nested = False
        entropy_drop = previous.entropy - current.entropy
        b_star = None
        if abs(entropy_drop) > 1e-15:
            b_star = (current.expected_sq_complexity - previous.expected_sq_complexity) / entropy_drop
        crossovers.append({
            "between": [float(b_values[k - 1]), float(b)],
            "b_star": b_star,
            "from_branches": previous.branch_count,
            "to_branches": current.branch_count,
        })
    return BSweep(rows, results, crossovers, nested)

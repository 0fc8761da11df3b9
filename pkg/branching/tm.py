"""Distinguish/interfere branch criterion.

For orthogonal branches i, j the distinguishing complexity is the cheapest U
with |<i|U|i> - <j|U|j>| / 2 >= 1 - eps, the interference complexity the
cheapest U with (|<i|U|j>| + |<j|U|i>|) / 2 >= eps. A decomposition's
branchiness is min C_I - max C_D over all pairs.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from branching.candidates import CandidateFamily
from config.settings import settings
from lattice.decomposition import Decomposition
from lattice.errors import DecompositionError, OracleError
from lattice.state import StateVector
from oracle.predicates import DistinguishPredicate, InterferePredicate
from oracle.results import ComplexityResult
from oracle.service import OracleConfig, run_predicate

logger = logging.getLogger(__name__)

EPSILON_MAX = 0.5


def _epsilon(epsilon: Optional[float]) -> float:
    epsilon = settings.DEFAULT_EPSILON if epsilon is None else float(epsilon)
    if not 0 < epsilon < EPSILON_MAX:
        raise OracleError(f"epsilon must lie in (0, {EPSILON_MAX}), got {epsilon}")
    return epsilon


def _config(config: Optional[OracleConfig], mode: Optional[str], budget: Optional[int]) -> OracleConfig:
    config = config or OracleConfig()
    if mode is None and budget is None:
        return config
    return config.with_mode(mode or config.mode, config.budget if budget is None else budget)


def distinguishing_complexity(psi_i: StateVector, psi_j: StateVector, epsilon: Optional[float] = None,
                              mode: Optional[str] = None, budget: Optional[int] = None,
                              config: Optional[OracleConfig] = None) -> ComplexityResult:
    predicate = DistinguishPredicate(psi_i, psi_j, _epsilon(epsilon), epsilon_max=EPSILON_MAX)
    return run_predicate(predicate, _config(config, mode, budget))


def interference_complexity(psi_i: StateVector, psi_j: StateVector, epsilon: Optional[float] = None,
                            mode: Optional[str] = None, budget: Optional[int] = None,
                            config: Optional[OracleConfig] = None) -> ComplexityResult:
    predicate = InterferePredicate(psi_i, psi_j, _epsilon(epsilon), epsilon_max=EPSILON_MAX)
    return run_predicate(predicate, _config(config, mode, budget))


@dataclass(frozen=True)
class TmPairReport:
    i: int
    j: int
    c_d: ComplexityResult
    c_i: ComplexityResult
    epsilon: float

    def __post_init__(self):
        if self.i == self.j:
            raise DecompositionError("a pair report needs two distinct branches")

    @property
    def pair_branchiness(self) -> int:
        return self.c_i.value - self.c_d.value

    @property
    def certified(self) -> bool:
        # needs an upper bound on C_D and a lower bound on C_I
        return self.c_d.bounds_from_above and self.c_i.bounds_from_below

    def to_dict(self) -> Dict[str, Any]:
        return {
            "i": self.i,
            "j": self.j,
            "epsilon": self.epsilon,
            "c_d": self.c_d.to_dict(),
            "c_i": self.c_i.to_dict(),
            "pair_branchiness": self.pair_branchiness,
            "certified": self.certified,
        }


@dataclass(frozen=True)
class TmReport:
    decomposition: Decomposition
    pairs: List[TmPairReport]
    epsilon: float
    oracle: Dict[str, Any] = field(default_factory=dict)

    @property
    def c_i_min(self) -> int:
        return min(p.c_i.value for p in self.pairs)

    @property
    def c_d_max(self) -> int:
        return max(p.c_d.value for p in self.pairs)

    @property
    def branchiness(self) -> int:
        return self.c_i_min - self.c_d_max

    @property
    def certified(self) -> bool:
        return all(p.certified for p in self.pairs)

    def consistent(self) -> bool:
        """Aggregates never exceed what any single pair allows."""
        return all(self.branchiness <= p.pair_branchiness for p in self.pairs)

    def meets(self, threshold: int) -> bool:
        return self.certified and self.branchiness >= threshold

    def to_dict(self) -> Dict[str, Any]:
        return {
            "decomposition": self.decomposition.to_dict(include_amplitudes=False),
            "epsilon": self.epsilon,
            "pairs": [p.to_dict() for p in self.pairs],
            "c_i_min": self.c_i_min,
            "c_d_max": self.c_d_max,
            "branchiness": self.branchiness,
            "certified": self.certified,
            "oracle": self.oracle,
        }


def evaluate_decomposition(decomposition: Decomposition, epsilon: Optional[float] = None,
                           config: Optional[OracleConfig] = None, workers: Optional[int] = None) -> TmReport:
    """Pair reports for every i < j, computed on normalized branches."""
    if len(decomposition) < 2:
        raise DecompositionError("the branch criterion needs at least two components")
    epsilon = _epsilon(epsilon)
    config = config or OracleConfig()
    branches = decomposition.branches()
    index_pairs = list(itertools.combinations(range(len(branches)), 2))

    def pair_report(pair) -> TmPairReport:
        i, j = pair
        c_d = distinguishing_complexity(branches[i], branches[j], epsilon, config=config)
        c_i = interference_complexity(branches[i], branches[j], epsilon, config=config)
        return TmPairReport(i, j, c_d, c_i, epsilon)

    workers = workers or settings.WORKERS
    if workers > 1 and len(index_pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(pair_report, index_pairs))
    else:
        pairs = [pair_report(p) for p in index_pairs]
    report = TmReport(decomposition, pairs, epsilon, config.describe())
    logger.info("tm %s: C_D=%d C_I=%d branchiness=%d certified=%s", decomposition.description or "split",
                report.c_d_max, report.c_i_min, report.branchiness, report.certified)
    return report


@dataclass(frozen=True)
class TmCandidate:
    labels: List[str]
    report: TmReport

    def rank_key(self):
        # certified first, then higher branchiness, fewer components, smallest label
        return (not self.report.certified, -self.report.branchiness, len(self.report.decomposition),
                min(self.labels))

    def to_dict(self) -> Dict[str, Any]:
        return {"labels": self.labels, **self.report.to_dict()}


@dataclass(frozen=True)
class TmSplitResult:
    state: StateVector
    decomposition: Decomposition
    report: Optional[TmReport]
    candidates: List[TmCandidate]
    threshold: int

    @property
    def good_split(self) -> bool:
        return self.report is not None and self.report.meets(self.threshold)

    @property
    def above_threshold(self) -> List[TmCandidate]:
        """Every certified candidate at or above the threshold; more than one means non-uniqueness."""
        return [c for c in self.candidates if c.report.meets(self.threshold)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "state": self.state.label,
            "threshold": self.threshold,
            "good_split": self.good_split,
            "verdict": "good split" if self.good_split else "no good split",
            "best": self.report.to_dict() if self.report is not None else None,
            "best_labels": self.candidates[0].labels if self.candidates else [],
            "above_threshold": [c.labels for c in self.above_threshold],
            "candidates": [c.to_dict() for c in self.candidates],
        }


def search_tm_split(state: StateVector, family: CandidateFamily, epsilon: Optional[float] = None,
                    config: Optional[OracleConfig] = None, threshold: Optional[int] = None,
                    workers: Optional[int] = None) -> TmSplitResult:
    """Best candidate by certified branchiness; every candidate is reported."""
    threshold = settings.BRANCHINESS_THRESHOLD if threshold is None else threshold
    candidates = [
        TmCandidate(labels, evaluate_decomposition(decomposition, epsilon, config, workers))
        for _, decomposition, labels in family.decompositions(state)
    ]
    candidates.sort(key=TmCandidate.rank_key)
    if not candidates:
        logger.info("no candidate in the %s family splits %s", family.kind, state.label or "the state")
        return TmSplitResult(state, Decomposition.trivial(state), None, [], threshold)
    best = candidates[0]
    return TmSplitResult(state, best.report.decomposition, best.report, candidates, threshold)


def epsilon_sweep(decomposition: Decomposition, epsilons: Sequence[float],
                  config: Optional[OracleConfig] = None, workers: Optional[int] = None) -> List[Dict[str, Any]]:
    """(epsilon, C_D, C_I, branchiness) rows for one fixed decomposition."""
    rows = []
    for epsilon in sorted(epsilons):
        report = evaluate_decomposition(decomposition, epsilon, config, workers)
        rows.append({
            "epsilon": report.epsilon,
            "c_d_max": report.c_d_max,
            "c_i_min": report.c_i_min,
            "branchiness": report.branchiness,
            "certified": report.certified,
        })
    return rows

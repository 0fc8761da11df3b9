"""Born-weighted branch sampling and effective-collapse reports."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from config.settings import settings
from lattice.decomposition import Decomposition
from lattice.errors import DecompositionError, ObservableError
from lattice.observables import Observable, decomposition_expectation

logger = logging.getLogger(__name__)

SAMPLE_CHUNK = 4096
WEIGHT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SamplingPlan:
    decomposition: Decomposition
    n_samples: int
    seed: int = 0
    observables: List[Observable] = field(default_factory=list)

    def __post_init__(self):
        if self.n_samples < 1:
            raise DecompositionError(f"n_samples must be positive, got {self.n_samples}")
        if not 0 <= self.seed < 2 ** 64:
            raise DecompositionError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        total = float(self.decomposition.weights.sum())
        if abs(total - 1.0) > WEIGHT_TOLERANCE + 2 * self.decomposition.dropped_norm:
            raise DecompositionError(f"branch weights sum to {total:.12f}, not a probability vector")

    @property
    def probabilities(self) -> np.ndarray:
        weights = self.decomposition.weights
        return weights / weights.sum()


def _chunk_draws(seed: int, chunk: int, size: int) -> np.ndarray:
    """Uniforms for chunk ``chunk``; keyed by (seed, chunk) so any worker can produce them."""
    generator = np.random.Generator(np.random.Philox(key=seed, counter=chunk << 64))
    return generator.random(size)


def sample_branches(plan: SamplingPlan, workers: Optional[int] = None) -> np.ndarray:
    """i.i.d. branch indices with P(i) = weight_i; identical for any worker count."""
    cdf = np.cumsum(plan.probabilities)
    cdf[-1] = 1.0
    chunks = [(c, min(SAMPLE_CHUNK, plan.n_samples - c * SAMPLE_CHUNK))
              for c in range(math.ceil(plan.n_samples / SAMPLE_CHUNK))]

    def draw(spec) -> np.ndarray:
        chunk, size = spec
        indices = np.searchsorted(cdf, _chunk_draws(plan.seed, chunk, size), side="right")
        return np.minimum(indices, len(cdf) - 1)

    workers = workers or settings.WORKERS
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, chunks))
    else:
        parts = [draw(c) for c in chunks]
    return np.concatenate(parts)


@dataclass(frozen=True)
class ObservableCollapse:
    observable: str
    pauli_weight: Optional[int]
    full_expectation: float
    branch_mean: float
    sampled_mean: float
    sample_std_error: float
    off_diagonal_residual: float
    branch_values: List[float]
    dropped_term: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "observable": self.observable,
            "pauli_weight": self.pauli_weight,
            "full_expectation": self.full_expectation,
            "branch_mean": self.branch_mean,
            "sampled_mean": self.sampled_mean,
            "sample_std_error": self.sample_std_error,
            "off_diagonal_residual": self.off_diagonal_residual,
            "branch_values": self.branch_values,
            "dropped_term": self.dropped_term,
        }


@dataclass(frozen=True)
class CollapseReport:
    n_samples: int
    seed: int
    weights: List[float]
    frequencies: List[float]
    observables: List[ObservableCollapse]

    def cost_table(self, interference_cost: Optional[int] = None) -> List[Dict[str, Any]]:
        """Residual next to each observable's Pauli weight; flags weights under the interference cost."""
        rows = []
        for entry in self.observables:
            row = {"observable": entry.observable, "pauli_weight": entry.pauli_weight,
                   "residual": entry.off_diagonal_residual}
            if interference_cost is not None and entry.pauli_weight is not None:
                row["below_interference_cost"] = entry.pauli_weight < interference_cost
            rows.append(row)
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "weights": self.weights,
            "frequencies": self.frequencies,
            "observables": [o.to_dict() for o in self.observables],
        }


def collapse_report(decomposition: Decomposition, observables: List[Observable], n_samples: int,
                    seed: int = 0, workers: Optional[int] = None) -> CollapseReport:
    """Exact branch means and residuals, plus a sampled estimate of each branch mean."""
    plan = SamplingPlan(decomposition, n_samples, seed, list(observables))
    draws = sample_branches(plan, workers)
    counts = np.bincount(draws, minlength=len(decomposition))
    entries = []
    for observable in plan.observables:
        if observable.n_sites != decomposition.n_sites:
            raise ObservableError(
                f"observable {observable.label} on {observable.n_sites} sites, decomposition on {decomposition.n_sites}"
            )
        breakdown = decomposition_expectation(decomposition, observable)
        samples = np.asarray(breakdown.branch_values)[draws]
        spread = float(samples.std(ddof=1)) if n_samples > 1 else 0.0
        entries.append(ObservableCollapse(
            observable=observable.label,
            pauli_weight=observable.weight,
            full_expectation=breakdown.full,
            branch_mean=breakdown.branch_mean,
            sampled_mean=float(samples.mean()),
            sample_std_error=spread / math.sqrt(n_samples),
            off_diagonal_residual=breakdown.off_diagonal,
            branch_values=list(breakdown.branch_values),
            dropped_term=breakdown.dropped_term,
        ))
    logger.info("collapse report: %d observables, %d samples", len(entries), n_samples)
    return CollapseReport(n_samples, seed, [float(p) for p in plan.probabilities],
                          [float(c) / n_samples for c in counts], entries)

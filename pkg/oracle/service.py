"""Front door of the complexity oracle: routes queries, verifies witnesses, caches."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from config.settings import settings
from lattice.errors import OracleError
from lattice.gates import GateSet
from lattice.state import StateVector
from oracle.heuristic import heuristic_layer_complexity
from oracle.predicates import Predicate, StateMapPredicate
from oracle.results import EXACT_BFS, ComplexityQuery, ComplexityResult, normalize_mode
from oracle.search import bfs_synthesize, meet_in_the_middle
from utils.state_manager import ComplexityCache

logger = logging.getLogger(__name__)


@dataclass
class OracleConfig:
    """Everything besides the predicate that decides a complexity answer."""
    mode: str = EXACT_BFS
    budget: Optional[int] = None
    gate_set: GateSet = field(default_factory=GateSet.default)
    delta: float = field(default_factory=lambda: settings.DEFAULT_DELTA)
    seed: int = 0
    max_search_states: Optional[int] = None
    max_layers: Optional[int] = None
    restarts: Optional[int] = None
    block_depth: Optional[int] = None
    meet_in_the_middle: bool = True
    cache: Optional[ComplexityCache] = None

    def __post_init__(self):
        self.mode = normalize_mode(self.mode)
        if self.budget is not None and self.budget < 0:
            raise OracleError(f"budget must be nonnegative, got {self.budget}")

    @property
    def resolved_budget(self) -> int:
        if self.budget is not None:
            return self.budget
        return settings.EXACT_BUDGET if self.mode == EXACT_BFS else settings.HEURISTIC_BUDGET

    def options(self) -> Dict[str, Any]:
        if self.mode == EXACT_BFS:
            options = {"max_search_states": self.max_search_states or settings.MAX_SEARCH_STATES,
                       "meet_in_the_middle": self.meet_in_the_middle}
        else:
            options = {"max_layers": self.max_layers,
                       "restarts": self.restarts or settings.HEURISTIC_RESTARTS,
                       "block_depth": self.block_depth or settings.BLOCK_DEPTH}
        return {k: v for k, v in options.items() if v is not None}

    def query(self, predicate: Predicate) -> ComplexityQuery:
        return ComplexityQuery(predicate, self.gate_set, self.mode, self.resolved_budget, self.seed, self.options())

    def with_mode(self, mode: str, budget: Optional[int] = None) -> "OracleConfig":
        return OracleConfig(mode, budget, self.gate_set, self.delta, self.seed, self.max_search_states,
                            self.max_layers, self.restarts, self.block_depth, self.meet_in_the_middle, self.cache)

    def describe(self) -> Dict[str, Any]:
        return {"mode": self.mode, "budget": self.resolved_budget, "gate_set": self.gate_set.name,
                "delta": self.delta, "seed": self.seed, "options": self.options()}


def _search(query: ComplexityQuery) -> ComplexityResult:
    predicate, options = query.predicate, query.options
    if query.search_mode == EXACT_BFS:
        use_mitm = (
            options.get("meet_in_the_middle", True)
            and isinstance(predicate, StateMapPredicate)
            and query.gate_set.uniform_cost
        )
        if use_mitm:
            return meet_in_the_middle(predicate, query.gate_set, query.budget, options.get("max_search_states"))
        return bfs_synthesize(predicate, query.gate_set, query.budget, options.get("max_search_states"))
    return heuristic_layer_complexity(
        predicate, query.gate_set, query.budget, max_layers=options.get("max_layers"), seed=query.seed,
        restarts=options.get("restarts"), block_depth=options.get("block_depth"),
    )


def query_complexity(query: ComplexityQuery, cache: Optional[ComplexityCache] = None) -> ComplexityResult:
    """Minimal cost over circuits satisfying the query predicate, with certification status."""
    if query.budget is None:
        query.budget = settings.EXACT_BUDGET if query.search_mode == EXACT_BFS else settings.HEURISTIC_BUDGET
    if cache is not None:
        cached = cache.get_result(query)
        if cached is not None:
            logger.debug("cache hit for %s", query.predicate.kind)
            return cached
    result = _search(query)
    if result.witness is not None and not result.verify(query.predicate):
        raise OracleError(f"{query.predicate.kind} witness {result.witness} fails re-verification")
    logger.info("%s %s: %s value=%d explored=%d", query.search_mode, query.predicate.kind,
                result.status, result.value, result.explored)
    if cache is not None:
        cache.save_result(query, result)
    return result


def run_predicate(predicate: Predicate, config: OracleConfig) -> ComplexityResult:
    return query_complexity(config.query(predicate), config.cache)


def state_complexity(source: StateVector, target: StateVector, delta: Optional[float] = None,
                     mode: Optional[str] = None, budget: Optional[int] = None,
                     config: Optional[OracleConfig] = None) -> ComplexityResult:
    """C(source -> target): cheapest U with |<target|U|source>| >= 1 - delta."""
    config = config or OracleConfig()
    config = config.with_mode(mode or config.mode, config.budget if budget is None else budget)
    predicate = StateMapPredicate(source, target, config.delta if delta is None else delta)
    return run_predicate(predicate, config)

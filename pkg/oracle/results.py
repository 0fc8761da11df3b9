from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from lattice.circuit import Circuit
from lattice.errors import OracleError
from lattice.gates import GateSet
from oracle.predicates import Predicate

EXACT = "exact"
UPPER_BOUND = "upper_bound"
LOWER_BOUND_CUTOFF = "lower_bound_cutoff"
STATUSES = (EXACT, UPPER_BOUND, LOWER_BOUND_CUTOFF)

EXACT_BFS = "exact_bfs"
HEURISTIC_LAYERS = "heuristic_layers"
SEARCH_MODES = (EXACT_BFS, HEURISTIC_LAYERS)

_MODE_ALIASES = {"exact": EXACT_BFS, "heuristic": HEURISTIC_LAYERS, EXACT_BFS: EXACT_BFS,
                 HEURISTIC_LAYERS: HEURISTIC_LAYERS}


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise OracleError(f"unknown search mode {mode!r}; expected exact or heuristic") from None


@dataclass(frozen=True)
class ComplexityResult:
    value: int
    status: str
    witness: Optional[Circuit] = None
    cutoff: int = 0
    mode: str = EXACT_BFS
    explored: int = 0
    blocks: Optional[int] = None
    relaxed_blocks: Optional[int] = None
    note: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise OracleError(f"unknown status {self.status!r}")
        if self.value < 0:
            raise OracleError("complexity values are nonnegative")
        if self.status in (EXACT, UPPER_BOUND) and self.witness is None:
            raise OracleError(f"{self.status} results require a witness circuit")

    @property
    def heuristic(self) -> bool:
        return self.mode == HEURISTIC_LAYERS

    @property
    def certified(self) -> bool:
        """Exact values and exhausted-search lower bounds are certified; heuristic output never is."""
        return not self.heuristic and self.status in (EXACT, LOWER_BOUND_CUTOFF)

    @property
    def bounds_from_above(self) -> bool:
        return self.status in (EXACT, UPPER_BOUND)

    @property
    def bounds_from_below(self) -> bool:
        return self.certified

    def verify(self, predicate: Predicate) -> bool:
        """Re-simulate the witness against the predicate."""
        if self.witness is None:
            return False
        frame = self.witness.apply_to(predicate.probe_frame, predicate.n_sites)
        return bool(predicate.satisfied(frame[None])[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "status": self.status,
            "certified": self.certified,
            "witness": self.witness.to_list() if self.witness is not None else None,
            "cutoff": self.cutoff,
            "mode": self.mode,
            "explored": self.explored,
            "blocks": self.blocks,
            "relaxed_blocks": self.relaxed_blocks,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any], gate_set: GateSet) -> "ComplexityResult":
        witness = payload.get("witness")
        return cls(
            value=int(payload["value"]),
            status=payload["status"],
            witness=Circuit.from_list(witness, gate_set) if witness is not None else None,
            cutoff=int(payload.get("cutoff", 0)),
            mode=payload.get("mode", EXACT_BFS),
            explored=int(payload.get("explored", 0)),
            blocks=payload.get("blocks"),
            relaxed_blocks=payload.get("relaxed_blocks"),
            note=payload.get("note", ""),
        )


@dataclass
class ComplexityQuery:
    predicate: Predicate
    gate_set: GateSet = field(default_factory=GateSet.default)
    search_mode: str = EXACT_BFS
    budget: Optional[int] = None
    seed: int = 0
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.search_mode = normalize_mode(self.search_mode)
        if self.budget is not None and self.budget < 0:
            raise OracleError(f"budget must be nonnegative, got {self.budget}")

    def cache_key(self) -> str:
        """sha256 over the canonical JSON form of everything that determines the answer."""
        payload = {
            "predicate": self.predicate.describe(),
            "gate_set": self.gate_set.to_dict(),
            "mode": self.search_mode,
            "budget": self.budget,
            "seed": self.seed,
            "options": self.options,
        }
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

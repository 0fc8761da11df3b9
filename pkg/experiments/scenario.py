"""Scenario files: strict JSON schema plus the semantic checks behind `validate`."""
from __future__ import annotations

import json
import logging
import os
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from branching.tm import EPSILON_MAX
from config.settings import settings
from lattice.errors import ScenarioError

logger = logging.getLogger(__name__)

EXACT_SITE_WARNING = 6
SEED_LIMIT = 2 ** 64

ERROR = "error"
WARNING = "warning"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GateEntry(StrictModel):
    gate: str
    sites: List[int]


class StateSpec(StrictModel):
    '''Exactly one of corpus, circuit or amplitude_file'''
    corpus: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    circuit: Optional[List[GateEntry]] = None
    amplitude_file: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        given = [name for name in ("corpus", "circuit", "amplitude_file") if getattr(self, name) is not None]
        if len(given) != 1:
            raise ValueError(f"state needs exactly one of corpus, circuit, amplitude_file; got {given or 'none'}")
        return self


class OracleSpec(StrictModel):
    mode: Literal["exact", "heuristic", "exact_bfs", "heuristic_layers"] = "exact"
    budget: Optional[int] = Field(default=None, ge=0)
    delta: Optional[float] = Field(default=None, gt=0, lt=1)
    max_search_states: Optional[int] = Field(default=None, ge=1)
    max_layers: Optional[int] = Field(default=None, ge=1)
    restarts: Optional[int] = Field(default=None, ge=1)
    block_depth: Optional[int] = Field(default=None, ge=1)
    meet_in_the_middle: bool = True


class FamilySpec(StrictModel):
    kind: Literal["computational", "pauli", "projectors"] = "computational"
    sites: Optional[List[int]] = None
    subset_sizes: Optional[List[int]] = None
    max_weight: int = Field(default=2, ge=1)
    groups: List[Dict[str, Any]] = Field(default_factory=list)

    def params(self) -> Dict[str, Any]:
        if self.kind == "computational":
            return {"sites": self.sites, "subset_sizes": self.subset_sizes}
        if self.kind == "pauli":
            return {"max_weight": self.max_weight}
        return {"groups": self.groups}


def _check_epsilon(value: float) -> float:
    if not 0 < value < EPSILON_MAX:
        raise ValueError(f"epsilon must lie in (0, {EPSILON_MAX}), got {value}")
    return value


class TmSpec(StrictModel):
    epsilon: float = Field(default_factory=lambda: settings.DEFAULT_EPSILON)
    epsilon_sweep: List[float] = Field(default_factory=list)
    threshold: Optional[int] = None

    @field_validator("epsilon")
    @classmethod
    def _epsilon_range(cls, value):
        return _check_epsilon(value)

    @field_validator("epsilon_sweep")
    @classmethod
    def _sweep_range(cls, values):
        for value in values:
            _check_epsilon(value)
        return values


class WeingartenSpec(StrictModel):
    b: float = Field(default=1.0, ge=0)
    b_values: List[float] = Field(default_factory=list)

    @field_validator("b_values")
    @classmethod
    def _sorted_nonnegative(cls, values):
        if any(v < 0 for v in values):
            raise ValueError("b values must be nonnegative")
        if values != sorted(values):
            raise ValueError("b values must be sorted ascending")
        return values


class SplitterSpec(StrictModel):
    family: FamilySpec = Field(default_factory=FamilySpec)
    tm: TmSpec = Field(default_factory=TmSpec)
    weingarten: WeingartenSpec = Field(default_factory=WeingartenSpec)


class DynamicsSpec(StrictModel):
    J: float = 1.0
    g: float = 0.0
    kappa: float = 0.0
    system_site: Optional[int] = None
    dt: float = Field(default=0.05, gt=0)
    order: Literal[1, 2] = 2
    sample_times: List[float] = Field(default_factory=list)
    splitter: Literal["tm", "weingarten"] = "tm"
    theta: Optional[float] = Field(default=None, gt=0, le=1)
    recoherence_duration: Optional[float] = Field(default=None, gt=0)

    @field_validator("sample_times")
    @classmethod
    def _increasing(cls, values):
        if any(b <= a for a, b in zip(values, values[1:])) or any(v < 0 for v in values):
            raise ValueError("sample times must be nonnegative and strictly increasing")
        return values


class GrowthSpec(StrictModel):
    evolution: Literal["hamiltonian", "random_circuit"] = "random_circuit"
    horizon: int = Field(default=8, ge=0)
    stride: int = Field(default=1, ge=1)
    seeds: List[int] = Field(default_factory=list)
    walk: Literal["uniform", "reduced"] = "uniform"
    heuristic_upper_bound: bool = False


class SamplingSpec(StrictModel):
    n_samples: int = Field(default=10_000, ge=1)
    observables: List[str] = Field(default_factory=list)
    split: Literal["tm", "weingarten", "first_candidate"] = "first_candidate"


class OutputSpec(StrictModel):
    directory: str = "results"
    prefix: Optional[str] = None


class Scenario(StrictModel):
    name: str
    n_sites: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    gate_set: Literal["nearest_neighbor", "two_local"] = "nearest_neighbor"
    gate_costs: Dict[str, int] = Field(default_factory=dict)
    state: StateSpec
    oracle: OracleSpec = Field(default_factory=OracleSpec)
    splitter: SplitterSpec = Field(default_factory=SplitterSpec)
    dynamics: Optional[DynamicsSpec] = None
    growth: Optional[GrowthSpec] = None
    sampling: Optional[SamplingSpec] = None
    outputs: OutputSpec = Field(default_factory=OutputSpec)

    # directory of the scenario file, for relative amplitude files
    base_dir: str = Field(default=".", exclude=True)

    @field_validator("gate_costs")
    @classmethod
    def _positive_costs(cls, costs):
        for gate, cost in costs.items():
            if cost < 1:
                raise ValueError(f"cost of {gate} must be a positive integer, got {cost}")
        return costs

    @property
    def exact(self) -> bool:
        return self.oracle.mode in ("exact", "exact_bfs")

    def resolve_path(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def resolved(self) -> Dict[str, Any]:
        '''Fully resolved configuration, embedded in every report'''
        return self.model_dump(mode="json")


def _field_name(location) -> str:
    return ".".join(str(part) for part in location) or "<root>"


def _schema_diagnostics(error: ValidationError) -> List[Dict[str, str]]:
    return [
        {"severity": ERROR, "field": _field_name(item["loc"]), "message": item["msg"]}
        for item in error.errors()
    ]


def semantic_diagnostics(scenario: Scenario) -> List[Dict[str, str]]:
    '''Checks that need settings or the filesystem'''
    issues: List[Dict[str, str]] = []

    if scenario.n_sites > settings.MAX_SITES:
        issues.append({"severity": ERROR, "field": "n_sites",
                       "message": f"n_sites = {scenario.n_sites} exceeds BRANCHLAB_MAX_SITES = {settings.MAX_SITES}"})

    if scenario.exact and scenario.n_sites > EXACT_SITE_WARNING:
        issues.append({"severity": WARNING, "field": "oracle.mode",
                       "message": f"exact search on {scenario.n_sites} sites is unlikely to finish within budget; "
                                  f"use heuristic mode above {EXACT_SITE_WARNING} sites"})

    if scenario.state.amplitude_file is not None:
        path = scenario.resolve_path(scenario.state.amplitude_file)
        if not os.path.isfile(path):
            issues.append({"severity": ERROR, "field": "state.amplitude_file",
                           "message": f"file not found: {path}"})

    if scenario.state.circuit is not None:
        for index, entry in enumerate(scenario.state.circuit):
            if any(not 0 <= site < scenario.n_sites for site in entry.sites):
                issues.append({"severity": ERROR, "field": f"state.circuit.{index}.sites",
                               "message": f"sites {entry.sites} outside {scenario.n_sites} sites"})

    family = scenario.splitter.family
    for site in family.sites or []:
        if not 0 <= site < scenario.n_sites:
            issues.append({"severity": ERROR, "field": "splitter.family.sites",
                           "message": f"site {site} outside {scenario.n_sites} sites"})

    dynamics = scenario.dynamics
    if dynamics is not None:
        if dynamics.system_site is not None and not 0 <= dynamics.system_site < scenario.n_sites:
            issues.append({"severity": ERROR, "field": "dynamics.system_site",
                           "message": f"system site {dynamics.system_site} outside {scenario.n_sites} sites"})
        if dynamics.kappa and dynamics.system_site is None:
            issues.append({"severity": ERROR, "field": "dynamics.kappa",
                           "message": "an apparatus coupling needs dynamics.system_site"})
        times = list(dynamics.sample_times)
        if dynamics.recoherence_duration is not None:
            times.append(dynamics.recoherence_duration)
        for t in times:
            steps = round(t / dynamics.dt)
            if abs(steps * dynamics.dt - t) > 1e-9 * max(1.0, t):
                issues.append({"severity": ERROR, "field": "dynamics.sample_times",
                               "message": f"time {t} is not a multiple of dt = {dynamics.dt}"})
        coupling = max(abs(dynamics.J), abs(dynamics.g), abs(dynamics.kappa))
        if dynamics.dt * coupling > 0.5:
            issues.append({"severity": WARNING, "field": "dynamics.dt",
                           "message": f"dt*max|coupling| = {dynamics.dt * coupling:.3f} exceeds 0.5"})

    return issues


def parse_scenario(payload: Dict[str, Any], base_dir: str = ".") -> Scenario:
    try:
        return Scenario.model_validate({**payload, "base_dir": base_dir})
    except ValidationError as e:
        raise ScenarioError(f"scenario failed schema validation ({e.error_count()} errors)",
                            _schema_diagnostics(e)) from e


def read_scenario_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ScenarioError(f"scenario file {path} must hold a JSON object")
    return payload


def validate(path: str) -> List[Dict[str, str]]:
    """Every diagnostic for the scenario at ``path``; nothing is executed.

    Raises ScenarioError only when the file cannot be read or parsed.
    """
    payload = read_scenario_file(path)
    try:
        scenario = parse_scenario(payload, os.path.dirname(os.path.abspath(path)))
    except ScenarioError as e:
        return e.diagnostics
    return semantic_diagnostics(scenario)


def has_errors(diagnostics: List[Dict[str, str]]) -> bool:
    return any(d["severity"] == ERROR for d in diagnostics)


def load_scenario(path: str, overrides: Optional[Dict[str, Any]] = None) -> Scenario:
    """Parse, apply CLI overrides, and reject any error-level diagnostic."""
    payload = read_scenario_file(path)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        target = payload
        *parents, leaf = dotted.split(".")
        for key in parents:
            target = target.setdefault(key, {})
        target[leaf] = value
    scenario = parse_scenario(payload, os.path.dirname(os.path.abspath(path)))
    diagnostics = semantic_diagnostics(scenario)
    for item in diagnostics:
        if item["severity"] == WARNING:
            logger.warning("%s: %s", item["field"], item["message"])
    if has_errors(diagnostics):
        raise ScenarioError(f"scenario {scenario.name} failed validation", diagnostics)
    return scenario

"""Runs one scenario through one subcommand and writes its artifacts."""
from __future__ import annotations

import logging
import os
import statistics
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from branching.candidates import CandidateFamily, build_family
from branching.tm import epsilon_sweep, search_tm_split
from branching.weingarten import QConfig, b_sweep, is_coarse_graining, minimize_q
from config.settings import settings
from dynamics.growth import complexity_growth_probe
from dynamics.hamiltonian import HamiltonianSpec
from dynamics.tree import (
    FixedSplitter,
    Splitter,
    TmSplitter,
    WeingartenSplitter,
    recoherence_tree,
    stable_window,
    track_branches,
    verify_tree,
)
from experiments.outputs import write_csv, write_json, write_metadata
from experiments.scenario import Scenario, load_scenario, read_scenario_file
from lattice.circuit import Circuit, apply_circuit
from lattice.corpus import corpus_state
from lattice.decomposition import Decomposition
from lattice.errors import BranchLabError, ScenarioError
from lattice.gates import GateSet
from lattice.observables import Observable
from lattice.state import StateVector
from oracle.service import OracleConfig, state_complexity
from sampling.collapse import collapse_report
from utils.state_manager import ComplexityCache

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("complexity", "tm", "weingarten", "evolve", "sample", "compare")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

Series = Dict[str, List[Dict[str, Any]]]


@dataclass
class RunOutcome:
    exit_code: int
    report: Optional[Dict[str, Any]] = None
    artifacts: List[str] = field(default_factory=list)
    error: str = ""
    diagnostics: List[Dict[str, str]] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.exit_code == EXIT_OK


def _relation(first: Decomposition, second: Decomposition) -> str:
    if first.signature() == second.signature():
        return "identical"
    if is_coarse_graining(first, second):
        return "first_finer"
    if is_coarse_graining(second, first):
        return "second_finer"
    return "unrelated"


class ExperimentOrchestrator:
    """Builds module inputs from a scenario and dispatches one subcommand."""

    def __init__(self, out_dir: Optional[str] = None, workers: Optional[int] = None,
                 cache: Optional[ComplexityCache] = None, stderr=None):
        self.out_dir = out_dir
        self.workers = workers or settings.WORKERS
        self.cache = cache
        self.stderr = stderr or sys.stderr
        self.handlers: Dict[str, Callable[[Scenario], Tuple[Dict[str, Any], Series]]] = {
            "complexity": self.run_complexity,
            "tm": self.run_tm,
            "weingarten": self.run_weingarten,
            "evolve": self.run_evolve,
            "sample": self.run_sample,
            "compare": self.run_compare,
        }

    # -- builders -------------------------------------------------------

    def gate_set(self, scenario: Scenario) -> GateSet:
        return GateSet.named(scenario.gate_set, scenario.gate_costs or None)

    def oracle(self, scenario: Scenario) -> OracleConfig:
        spec = scenario.oracle
        return OracleConfig(
            mode=spec.mode,
            budget=spec.budget,
            gate_set=self.gate_set(scenario),
            delta=settings.DEFAULT_DELTA if spec.delta is None else spec.delta,
            seed=scenario.seed,
            max_search_states=spec.max_search_states,
            max_layers=spec.max_layers,
            restarts=spec.restarts,
            block_depth=spec.block_depth,
            meet_in_the_middle=spec.meet_in_the_middle,
            cache=self.cache,
        )

    def family(self, scenario: Scenario) -> CandidateFamily:
        spec = scenario.splitter.family
        return build_family(spec.kind, scenario.n_sites, **spec.params())

    def state(self, scenario: Scenario) -> StateVector:
        spec = scenario.state
        if spec.corpus is not None:
            state = corpus_state(spec.corpus, **spec.params)
        elif spec.circuit is not None:
            circuit = Circuit.from_list([entry.model_dump() for entry in spec.circuit], self.gate_set(scenario))
            prepared = apply_circuit(StateVector.zero(scenario.n_sites), circuit)
            state = StateVector(prepared.amplitudes, prepared.lattice, label=f"{scenario.name} (prepared)")
        else:
            state = StateVector.from_dict(read_scenario_file(scenario.resolve_path(spec.amplitude_file)))
        if state.n_sites != scenario.n_sites:
            raise ScenarioError(f"state has {state.n_sites} sites, scenario declares {scenario.n_sites}",
                                [{"severity": "error", "field": "state",
                                  "message": f"state has {state.n_sites} sites, n_sites = {scenario.n_sites}"}])
        return state

    def hamiltonian(self, scenario: Scenario) -> HamiltonianSpec:
        spec = scenario.dynamics
        if spec is None:
            raise ScenarioError("this subcommand needs a dynamics section",
                                [{"severity": "error", "field": "dynamics", "message": "missing"}])
        return HamiltonianSpec(scenario.n_sites, J=spec.J, g=spec.g, kappa=spec.kappa,
                               system_site=spec.system_site, dt=spec.dt, order=spec.order)

    def q_config(self, scenario: Scenario, oracle: OracleConfig) -> QConfig:
        return QConfig(scenario.splitter.weingarten.b, oracle=oracle)

    def splitter(self, scenario: Scenario, kind: str, oracle: OracleConfig) -> Splitter:
        family = self.family(scenario)
        if kind == "tm":
            tm = scenario.splitter.tm
            return TmSplitter(family, tm.epsilon, oracle, tm.threshold, self.workers)
        if kind == "weingarten":
            return WeingartenSplitter(family, self.q_config(scenario, oracle), self.workers)
        return FixedSplitter(family)

    # -- subcommands ----------------------------------------------------

    def run_complexity(self, scenario: Scenario) -> Tuple[Dict[str, Any], Series]:
        state = self.state(scenario)
        oracle = self.oracle(scenario)
        vacuum = StateVector.zero(scenario.n_sites)
        result: Dict[str, Any] = {"state": state.label,
                                  "vacuum_complexity": state_complexity(vacuum, state, config=oracle).to_dict()}
        series: Series = {}
        growth = scenario.growth
        if growth is not None:
            hamiltonian = self.hamiltonian(scenario) if growth.evolution == "hamiltonian" else None
            runs, rows = [], []
            for seed in growth.seeds or [scenario.seed]:
                probe = complexity_growth_probe(state, growth.evolution, growth.horizon, growth.stride,
                                                hamiltonian, seed, oracle, growth.heuristic_upper_bound,
                                                self.workers, growth.walk)
                runs.append({"seed": seed, **probe.to_dict()})
                rows.extend({"seed": seed, **row} for row in probe.rows())
            finals = [run["points"][-1]["lower_bound"] for run in runs]
            result["growth"] = {
                "evolution": growth.evolution,
                "runs": runs,
                "monotone_runs": sum(1 for run in runs if not run["violations"]),
                "median_final_lower_bound": statistics.median(finals),
            }
            series["growth"] = rows
        return result, series

    def run_tm(self, scenario: Scenario) -> Tuple[Dict[str, Any], Series]:
        state = self.state(scenario)
        oracle = self.oracle(scenario)
        tm = scenario.splitter.tm
        split = search_tm_split(state, self.family(scenario), tm.epsilon, oracle, tm.threshold, self.workers)
        result = split.to_dict()
        result["branchiness"] = split.report.branchiness if split.report is not None else None
        series: Series = {"candidates": [
            {"labels": c.labels, "c_d_max": c.report.c_d_max, "c_i_min": c.report.c_i_min,
             "branchiness": c.report.branchiness, "certified": c.report.certified}
            for c in split.candidates
        ]}
        if tm.epsilon_sweep and split.report is not None:
            rows = epsilon_sweep(split.decomposition, tm.epsilon_sweep, oracle, self.workers)
            result["epsilon_sweep"] = rows
            series["epsilon_sweep"] = rows
        return result, series

    def run_weingarten(self, scenario: Scenario) -> Tuple[Dict[str, Any], Series]:
        state = self.state(scenario)
        oracle = self.oracle(scenario)
        family = self.family(scenario)
        cfg = self.q_config(scenario, oracle)
        result: Dict[str, Any] = {"state": state.label, "q_config": cfg.describe(),
                                  "minimization": minimize_q(state, cfg, family, self.workers).to_dict()}
        series: Series = {}
        b_values = scenario.splitter.weingarten.b_values
        if b_values:
            sweep = b_sweep(state, cfg, b_values, family, self.workers)
            result["b_sweep"] = sweep.to_dict()
            series["b_sweep"] = sweep.rows
        return result, series

    def run_evolve(self, scenario: Scenario) -> Tuple[Dict[str, Any], Series]:
        state = self.state(scenario)
        oracle = self.oracle(scenario)
        h = self.hamiltonian(scenario)
        dynamics = scenario.dynamics
        theta = settings.TREE_THETA if dynamics.theta is None else dynamics.theta
        splitter = self.splitter(scenario, dynamics.splitter, oracle)
        result: Dict[str, Any] = {"state": state.label, "hamiltonian": h.to_dict(), "splitter": splitter.name,
                                  "theta": theta}
        series: Series = {}
        if not dynamics.sample_times and dynamics.recoherence_duration is None:
            raise ScenarioError("evolve needs dynamics.sample_times or dynamics.recoherence_duration",
                                [{"severity": "error", "field": "dynamics.sample_times",
                                  "message": "empty, and no recoherence_duration given"}])
        if dynamics.sample_times:
            tree = track_branches(state, h, dynamics.sample_times, splitter, self.workers)
            window = stable_window(tree)
            result["tree"] = tree.to_dict()
            result["branch_counts"] = tree.branch_counts()
            result["stable_window"] = [tree.levels[i].time for i in window]
            result["verification"] = verify_tree(tree, theta, window).to_dict()
            result["full_verification"] = verify_tree(tree, theta).to_dict()
            series["branch_weights"] = tree.weight_rows()
        if dynamics.recoherence_duration is not None:
            tree = recoherence_tree(state, h, dynamics.recoherence_duration, self.family(scenario), splitter)
            result["recoherence"] = {
                "tree": tree.to_dict(),
                "branch_counts": tree.branch_counts(),
                "verification": verify_tree(tree, theta).to_dict(),
            }
            series["recoherence_weights"] = tree.weight_rows()
        return result, series

    def _sampling_decomposition(self, scenario: Scenario, state: StateVector,
                                oracle: OracleConfig) -> Tuple[Decomposition, Optional[int]]:
        mode = scenario.sampling.split
        family = self.family(scenario)
        if mode == "tm":
            tm = scenario.splitter.tm
            split = search_tm_split(state, family, tm.epsilon, oracle, tm.threshold, self.workers)
            return split.decomposition, split.report.c_i_min if split.report is not None else None
        if mode == "weingarten":
            return minimize_q(state, self.q_config(scenario, oracle), family, self.workers).best.decomposition, None
        entries = family.decompositions(state)
        if not entries:
            return Decomposition.trivial(state), None
        return entries[0][1], None

    def run_sample(self, scenario: Scenario) -> Tuple[Dict[str, Any], Series]:
        spec = scenario.sampling
        if spec is None:
            raise ScenarioError("sample needs a sampling section",
                                [{"severity": "error", "field": "sampling", "message": "missing"}])
        state = self.state(scenario)
        oracle = self.oracle(scenario)
        decomposition, interference_cost = self._sampling_decomposition(scenario, state, oracle)
        labels = spec.observables or (
            [f"{p}{k}" for k in range(scenario.n_sites) for p in "XYZ"] + ["X" * scenario.n_sites]
        )
        observables = [Observable.from_label(label, scenario.n_sites) for label in labels]
        report = collapse_report(decomposition, observables, spec.n_samples, scenario.seed, self.workers)
        table = report.cost_table(interference_cost)
        result = {
            "state": state.label,
            "decomposition": decomposition.to_dict(include_amplitudes=False),
            "interference_cost": interference_cost,
            "collapse": report.to_dict(),
            "cost_table": table,
        }
        return result, {"observables": [o.to_dict() for o in report.observables], "cost_table": table}

    def run_compare(self, scenario: Scenario) -> Tuple[Dict[str, Any], Series]:
        state = self.state(scenario)
        oracle = self.oracle(scenario)
        family = self.family(scenario)
        tm = scenario.splitter.tm
        split = search_tm_split(state, family, tm.epsilon, oracle, tm.threshold, self.workers)
        tm_decomposition = split.decomposition if split.good_split else Decomposition.trivial(state)
        q = minimize_q(state, self.q_config(scenario, oracle), family, self.workers)
        w_decomposition = q.best.decomposition
        relation = _relation(tm_decomposition, w_decomposition)
        result = {
            "state": state.label,
            "tm": split.to_dict(),
            "weingarten": q.to_dict(),
            "tm_branch_count": len(tm_decomposition),
            "weingarten_branch_count": len(w_decomposition),
            "tm_labels": list(tm_decomposition.labels),
            "weingarten_labels": list(w_decomposition.labels),
            "relation": relation,
            "agreement": relation == "identical",
        }
        row = {"state": state.label, "tm_branch_count": len(tm_decomposition),
               "weingarten_branch_count": len(w_decomposition), "relation": relation,
               "agreement": relation == "identical"}
        return result, {"comparison": [row]}

    # -- entry point ----------------------------------------------------

    def _report_error(self, message: str, diagnostics: List[Dict[str, str]]):
        print(f"error: {message}", file=self.stderr)
        for item in diagnostics:
            print(f"  {item['severity']}: {item['field']}: {item['message']}", file=self.stderr)

    def run(self, subcommand: str, scenario_path: str, overrides: Optional[Dict[str, Any]] = None) -> RunOutcome:
        '''Exit 0 on success, 1 on validation failure, 2 on runtime failure'''
        if subcommand not in self.handlers:
            message = f"unknown subcommand {subcommand!r}; expected one of {SUBCOMMANDS}"
            self._report_error(message, [])
            return RunOutcome(EXIT_VALIDATION, error=message)

        try:
            scenario = load_scenario(scenario_path, overrides)
        except ScenarioError as e:
            self._report_error(str(e), e.diagnostics)
            return RunOutcome(EXIT_VALIDATION, error=str(e), diagnostics=e.diagnostics)

        logger.info("running %s on scenario %s (seed %d, workers %d)", subcommand, scenario.name,
                    scenario.seed, self.workers)
        try:
            result, series = self.handlers[subcommand](scenario)
        except ScenarioError as e:
            self._report_error(str(e), e.diagnostics)
            return RunOutcome(EXIT_VALIDATION, error=str(e), diagnostics=e.diagnostics)
        except BranchLabError as e:
            logger.exception("%s failed on %s", subcommand, scenario.name)
            self._report_error(f"{type(e).__name__}: {e}", [])
            return RunOutcome(EXIT_RUNTIME, error=str(e))
        except Exception as e:
            logger.exception("unexpected failure in %s", subcommand)
            self._report_error(f"{type(e).__name__}: {e}", [])
            return RunOutcome(EXIT_RUNTIME, error=str(e))

        report = {
            "scenario": scenario.name,
            "subcommand": subcommand,
            "config": scenario.resolved(),
            "gate_set": self.gate_set(scenario).to_dict(),
            "settings": {"oracle": settings.get_oracle_config(), "branch": settings.get_branch_config()},
            "result": result,
        }
        if subcommand != "complexity":
            report["candidate_family"] = self.family(scenario).describe()
        try:
            artifacts = self._write(scenario, subcommand, report, series)
        except OSError as e:
            self._report_error(f"cannot write outputs: {e}", [])
            return RunOutcome(EXIT_RUNTIME, report=report, error=str(e))
        return RunOutcome(EXIT_OK, report=report, artifacts=artifacts)

    def _write(self, scenario: Scenario, subcommand: str, report: Dict[str, Any], series: Series) -> List[str]:
        directory = self.out_dir or scenario.outputs.directory
        stem = f"{scenario.outputs.prefix or scenario.name}.{subcommand}"
        artifacts = [write_json(os.path.join(directory, f"{stem}.json"), report)]
        for name, rows in sorted(series.items()):
            if rows:
                artifacts.append(write_csv(os.path.join(directory, f"{stem}.{name}.csv"), rows))
        extra = {"workers": self.workers}
        if self.cache is not None and self.cache.enabled:
            extra["cache"] = {"path": self.cache.db_path, "hits": self.cache.hits, "misses": self.cache.misses}
        artifacts.append(write_metadata(directory, stem, subcommand, artifacts, extra))
        logger.info("wrote %d artifacts to %s", len(artifacts), directory)
        return artifacts

"""The exploration loop: random initial sampling, then retrain, pick an engine,
propose, gate, evaluate and update the frontier until the budget is spent."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bandit import ENGINES, ArmState, fresh_arms, record_outcome, select_method
from .dataset import Dataset
from .design_space import DesignPoint, KnobSpec, encode_many, knob_file_text, parse_knob_file, random_point
from .evaluator import EvaluationRecord
from .pareto import (PAPER_WEIGHTS, ParetoFrontier, ResourceWeights, build_frontier, frontier_hypervolume,
                     update_frontier, weighted_resource)
from .probability import GateParams, accept
from .proposal import EvolutionParams, Proposal, propose_evolutionary, propose_mutational, propose_random
from .surrogate import ForestParams, SurrogateBundle, retrain_bundle

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
STREAMS = ("sampling", "bandit", "random", "evolutionary", "mutational", "gate")

Evaluate = Callable[[DesignPoint], EvaluationRecord]


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


class RunAborted(RuntimeError):
    def __init__(self, message: str, checkpoint_path: Path | None = None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


@dataclass(frozen=True)
class ExplorerConfig:
    n_init: int = 20
    max_points: int = 170
    time_budget_s: float | None = None
    weights: ResourceWeights = PAPER_WEIGHTS
    delta_evolutionary: float = 1.0
    delta_mutational: float = 1.0
    delta_random: float = 1.5
    evolution: EvolutionParams = EvolutionParams()
    n_mutants: int = 30
    bandit_window: int | None = 50
    forest: ForestParams = ForestParams()
    seed: int = 0
    max_proposal_retries: int = 20
    engines: tuple[str, ...] = ENGINES
    hv_ref: tuple[float, float] | None = None  # None: derive from the explored data

    def __post_init__(self):
        if self.n_init < 1:
            raise ConfigError("n_init must be >= 1")
        if self.max_points < self.n_init:
            raise ConfigError(f"max_points ({self.max_points}) must be >= n_init ({self.n_init})")
        if self.time_budget_s is not None and not self.time_budget_s > 0:
            raise ConfigError("time_budget_s must be positive")
        if self.n_mutants < 1 or self.max_proposal_retries < 0:
            raise ConfigError("n_mutants must be >= 1 and max_proposal_retries >= 0")
        for name in ("delta_evolutionary", "delta_mutational", "delta_random"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.engines or len(set(self.engines)) != len(self.engines) or set(self.engines) - set(ENGINES):
            raise ConfigError(f"engines must be distinct names from {ENGINES}, got {self.engines}")
        try:
            ResourceWeights(*self.weights).check()
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None

    def gate(self, engine: str) -> GateParams:
        delta = {"random": self.delta_random, "evolutionary": self.delta_evolutionary,
                 "mutational": self.delta_mutational}[engine]
        return GateParams(delta, self.weights)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["weights"] = dict(self.weights._asdict())
        d["engines"] = list(self.engines)
        d["hv_ref"] = list(self.hv_ref) if self.hv_ref else None
        return d

    @classmethod
    def from_json(cls, d: dict) -> ExplorerConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kw = dict(d)
        try:
            if "weights" in kw:
                w = kw["weights"]
                kw["weights"] = ResourceWeights(**w) if isinstance(w, dict) else ResourceWeights(*w)
            if "evolution" in kw:
                kw["evolution"] = EvolutionParams(**kw["evolution"])
            if "forest" in kw:
                kw["forest"] = ForestParams(**kw["forest"])
            if "engines" in kw:
                kw["engines"] = tuple(kw["engines"])
            if kw.get("hv_ref") is not None:
                kw["hv_ref"] = tuple(float(x) for x in kw["hv_ref"])
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


@dataclass
class RunState:
    config: ExplorerConfig
    specs: list[KnobSpec]
    dataset: Dataset = field(default_factory=Dataset)
    frontier: ParetoFrontier = field(default_factory=ParetoFrontier)
    arms: list[ArmState] = field(default_factory=list)
    rngs: dict[str, np.random.Generator] = field(default_factory=dict)
    evaluator_calls: int = 0
    iteration: int = 0
    history: list[dict] = field(default_factory=list)
    stop_reason: str | None = None
    _bundle: SurrogateBundle | None = field(default=None, repr=False)

    @property
    def no_frontier(self) -> bool:
        return not self.frontier

    @property
    def budget_left(self) -> int:
        return self.config.max_points - self.evaluator_calls

    @property
    def iteration_cap(self) -> int:
        return 10 * self.config.max_points

    def bundle(self) -> SurrogateBundle:
        # retraining is deterministic, so a model fit on the same rows is reused
        if self._bundle is None or self._bundle.n_rows != len(self.dataset):
            X = encode_many([p for p, _ in self.dataset], self.specs)
            seed = int(np.random.SeedSequence([self.config.seed, self.config.forest.seed]).generate_state(1)[0])
            self._bundle = retrain_bundle(X, [r for _, r in self.dataset], self.config.forest.with_seed(seed))
        return self._bundle

    def objectives(self, record: EvaluationRecord):
        return (record.latency, weighted_resource(record.ratios, self.config.weights))


def new_state(config: ExplorerConfig, specs: Sequence[KnobSpec]) -> RunState:
    return RunState(config, list(specs), arms=fresh_arms(config.engines, config.bandit_window),
                    rngs={name: _stream(config.seed, name) for name in STREAMS})


def _arms_json(arms: Sequence[ArmState]) -> list[dict]:
    return [a.to_json() for a in arms]


def _evaluate(state: RunState, point: DesignPoint, evaluator: Evaluate) -> tuple[EvaluationRecord, bool]:
    record = evaluator(point)
    state.evaluator_calls += 1
    state.dataset.append(point, record)
    pushed = False
    if record.ok:
        state.frontier, pushed = update_frontier(state.frontier, state.objectives(record), record.point_id)
    return record, pushed


def initial_sampling(config: ExplorerConfig, specs: Sequence[KnobSpec], evaluator: Evaluate) -> RunState:
    state = new_state(config, specs)
    rng = state.rngs["sampling"]
    for _ in range(config.n_init):
        p = random_point(state.specs, rng)
        tries = 0
        while p.id in state.dataset and tries < config.max_proposal_retries:
            p = random_point(state.specs, rng)
            tries += 1
        dup = p.id in state.dataset
        record, pushed = _evaluate(state, p, evaluator)
        state.history.append({
            "iteration": state.iteration, "phase": "init", "method": None, "point_id": p.id,
            "point": p.to_json()["assignments"], "gate": None, "accepted": True, "duplicate": dup,
            "evaluated": True, "record": record.to_json(), "pushed": pushed, "success": None, "arms": _arms_json(state.arms),
            "evaluator_calls": state.evaluator_calls, "frontier_size": len(state.frontier)})
        state.iteration += 1
    if state.no_frontier:
        logger.warning("no successful evaluation during initial sampling; gate passes everything until one succeeds")
    return state


def _propose(state: RunState, method: str) -> tuple[Proposal, bool]:
    cfg = state.config
    rng = state.rngs[method]
    gate = cfg.gate(method)
    bundle = state.bundle()
    fallback = method != "random" and state.no_frontier
    if method == "random" or fallback:
        prop = propose_random(state.specs, bundle, state.frontier, gate, rng, state.dataset, cfg.max_proposal_retries)
        return dataclasses.replace(prop, engine=method), fallback
    if method == "evolutionary":
        return propose_evolutionary(state.dataset, state.frontier, bundle, state.specs, cfg.evolution, gate, rng), False
    return propose_mutational(state.frontier, state.dataset, bundle, state.specs, cfg.n_mutants,
                              cfg.evolution.mutation_rate, gate, rng), False


def explore_step(state: RunState, evaluator: Evaluate) -> RunState:
    if state.budget_left <= 0:
        raise ValueError("evaluation budget exhausted")
    arm_by_name = {a.method: a for a in state.arms}
    method = select_method(state.arms, state.rngs["bandit"])
    prop, fallback = _propose(state, method)
    accepted = accept(prop.gate.p_eval, state.rngs["gate"])
    record, pushed, evaluated = None, False, False
    if accepted and not prop.duplicate:
        record, pushed = _evaluate(state, prop.point, evaluator)
        evaluated = True
    success = evaluated and record.ok and pushed
    record_outcome(arm_by_name[method], success)
    state.history.append({
        "iteration": state.iteration, "phase": "explore", "method": method, "fallback_random": fallback,
        "n_candidates": prop.n_candidates, "point_id": prop.point.id, "point": prop.point.to_json()["assignments"],
        "gate": prop.gate.to_json(), "accepted": accepted, "duplicate": prop.duplicate, "evaluated": evaluated,
        "record": record.to_json() if record else None, "pushed": pushed, "success": success,
        "arms": _arms_json(state.arms), "evaluator_calls": state.evaluator_calls,
        "frontier_size": len(state.frontier)})
    state.iteration += 1
    return state


def _should_stop(state: RunState, started: float) -> str | None:
    if state.budget_left <= 0:
        return "budget"
    if state.iteration >= state.iteration_cap:
        return "iteration_cap"
    if state.config.time_budget_s is not None and time.monotonic() - started >= state.config.time_budget_s:
        return "time_budget"
    return None


def run(config: ExplorerConfig, specs: Sequence[KnobSpec], evaluator: Evaluate, *, state: RunState | None = None,
        checkpoint_path: str | Path | None = None, stop_at_iteration: int | None = None) -> RunState:
    """Run to completion, or continue ``state`` if given.

    ``stop_at_iteration`` pauses early without setting a stop reason, which is
    how a run is split for checkpointing. Any exception from the loop is
    re-raised as RunAborted after the state is checkpointed.
    """
    started = time.monotonic()
    try:
        if state is None:
            state = initial_sampling(config, specs, evaluator)
        while True:
            if stop_at_iteration is not None and state.iteration >= stop_at_iteration:
                return state
            reason = _should_stop(state, started)
            if reason:
                state.stop_reason = reason
                return state
            explore_step(state, evaluator)
    except Exception as e:
        path = None
        if state is not None and checkpoint_path is not None:
            path = Path(checkpoint_path)
            checkpoint(state, path)
        raise RunAborted(f"run aborted: {e!r}", path) from e


# checkpointing

def checkpoint(state: RunState, path: str | Path) -> None:
    data = {
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_json(),
        "knobs": knob_file_text(state.specs),
        "dataset": [{"point": p.to_json(), "record": r.to_json()} for p, r in state.dataset],
        "arms": [{"method": a.method, "window": a.window, "outcomes": list(a.outcomes),
                  "attempts": a.attempts, "successes": a.successes} for a in state.arms],
        "rngs": {k: g.bit_generator.state for k, g in state.rngs.items()},
        "evaluator_calls": state.evaluator_calls,
        "iteration": state.iteration,
        "history": state.history,
        "stop_reason": state.stop_reason,
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data), encoding="utf-8")
    tmp.replace(path)


def resume(path: str | Path) -> RunState:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt or unreadable checkpoint {path}: {e}") from None
    if not isinstance(data, dict) or "version" not in data:
        raise CheckpointError(f"corrupt checkpoint {path}: missing version")
    if data["version"] != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {data['version']} is not supported (expected {CHECKPOINT_VERSION})")
    try:
        config = ExplorerConfig.from_json(data["config"])
        specs = parse_knob_file(data["knobs"])
        items = [(DesignPoint.from_json(d["point"]), EvaluationRecord.from_json(d["record"])) for d in data["dataset"]]
        state = RunState(config, specs, dataset=Dataset(items),
                         arms=[ArmState(a["method"], a["window"], a["outcomes"], a["attempts"], a["successes"])
                               for a in data["arms"]],
                         evaluator_calls=data["evaluator_calls"], iteration=data["iteration"],
                         history=data["history"], stop_reason=data["stop_reason"])
        for name in STREAMS:
            g = np.random.default_rng()
            g.bit_generator.state = data["rngs"][name]
            state.rngs[name] = g
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e!r}") from None
    state.frontier = build_frontier((state.objectives(r), r.point_id) for _, r in state.dataset if r.ok)
    return state


# reporting

def default_reference(state: RunState) -> tuple[float, float]:
    objs = [state.objectives(r) for _, r in state.dataset if r.ok]
    if not objs:
        return (1.0, 1.0)
    return (1.1 * max(o[0] for o in objs), 1.1 * max(o[1] for o in objs))


def summary(state: RunState) -> dict:
    ref = state.config.hv_ref or default_reference(state)
    counts = {s: 0 for s in ("ok", "error", "timeout")}
    for _, r in state.dataset:
        counts[r.status] += 1
    return {
        "evaluator_calls": state.evaluator_calls,
        "iterations": state.iteration,
        "stop_reason": state.stop_reason,
        "status_counts": counts,
        "arms": [{**a.to_json(), "success_rate": a.successes / a.attempts if a.attempts else None}
                 for a in state.arms],
        "frontier_size": len(state.frontier),
        "hypervolume": frontier_hypervolume(state.frontier, ref),
        "hv_reference": list(ref),
        "seed": state.config.seed,
    }


def write_report(state: RunState, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "pareto.csv").write_text(state.frontier.to_csv(), encoding="utf-8")
    with open(out / "history.jsonl", "w", encoding="utf-8") as fh:
        for h in state.history:
            fh.write(json.dumps(h, sort_keys=True) + "\n")
    (out / "summary.json").write_text(json.dumps(summary(state), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out

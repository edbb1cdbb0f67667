"""Proposal engines: random, evolutionary and mutational.

All three share the surrogate bundle and the gate; each returns the single
candidate it would like evaluated next together with its gate result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .design_space import FACTOR_CONFIGS, DesignPoint, KnobSpec, _units, group_configs, random_point
from .pareto import BELOW_MIN, ParetoFrontier, ResourceWeights, project_resource, weighted_resource
from .probability import GateParams, GateResult, score_points
from .surrogate import SurrogateBundle


@dataclass(frozen=True)
class EvolutionParams:
    n_families: int = 5
    n_offspring: int = 10
    mutation_rate: float = 0.1
    population_threshold: float = 1.2

    def __post_init__(self):
        if self.n_families < 1 or self.n_offspring < 1:
            raise ValueError("n_families and n_offspring must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.population_threshold < 1.0:
            raise ValueError("population_threshold must be >= 1")


@dataclass(frozen=True)
class Proposal:
    point: DesignPoint
    gate: GateResult
    engine: str
    duplicate: bool = False
    n_candidates: int = 1


def select_population(dataset: Dataset, frontier: ParetoFrontier, weights: ResourceWeights,
                      threshold: float) -> list[DesignPoint]:
    """Evaluated points within ``threshold`` times the frontier resource at their own latency."""
    out = []
    for p, r in dataset.ok_items():
        proj = project_resource(frontier, r.latency)
        if proj is BELOW_MIN or weighted_resource(r.ratios, weights) <= threshold * proj:
            out.append(p)
    return out


def crossover(father: DesignPoint, mother: DesignPoint, specs: Sequence[KnobSpec],
              rng: np.random.Generator) -> DesignPoint:
    fd, md = father.as_dict(), mother.as_dict()
    child = {}
    for unit in _units(specs):
        if len(unit) == 1 and unit[0].array_group is None:
            k = unit[0].id
            child[k] = fd[k] if rng.random() < 0.5 else md[k]
            continue
        # one parent fixes the partitioning type; members take the other parent's value only if it matches
        typ = fd if rng.random() < 0.5 else md
        cfg = typ[unit[0].id].config
        for m in unit:
            src = fd if rng.random() < 0.5 else md
            child[m.id] = src[m.id] if src[m.id].config == cfg else typ[m.id]
    return DesignPoint.from_dict(child)


def _retype(spec: KnobSpec, old, config: str, rng: np.random.Generator):
    if config not in FACTOR_CONFIGS:
        return spec.options(config)[0]
    if old.config in FACTOR_CONFIGS:
        return type(old)(config, old.factor)
    opts = spec.options(config)
    return opts[rng.integers(len(opts))]


def mutate(point: DesignPoint, specs: Sequence[KnobSpec], rate: float, rng: np.random.Generator) -> DesignPoint:
    """Each knob changes with probability ``rate`` to a uniformly chosen different option.

    In an array group the first member to mutate may change the shared
    partitioning type, which is then applied to every member; later members
    only move within that type.
    """
    d = point.as_dict()
    for unit in _units(specs):
        if len(unit) == 1 and unit[0].array_group is None:
            s = unit[0]
            if rng.random() < rate:
                opts = [o for o in s.options() if o != d[s.id]]
                if opts:
                    d[s.id] = opts[rng.integers(len(opts))]
            continue
        common = group_configs(unit)
        retyped = False
        for m in unit:
            if not rng.random() < rate:
                continue
            cur = d[m.id]
            if not retyped:
                opts = [o for c in common for o in m.options(c) if o != cur]
            else:
                opts = [o for o in m.options(cur.config) if o != cur]
            if not opts:
                continue
            new = opts[rng.integers(len(opts))]
            d[m.id] = new
            if new.config != cur.config:
                for other in unit:
                    if other.id != m.id:
                        d[other.id] = _retype(other, d[other.id], new.config, rng)
            retyped = True
    return DesignPoint.from_dict(d)


def _pick(candidates: list[DesignPoint], gates: list[GateResult], evaluated: Dataset, engine: str) -> Proposal:
    best = None
    for i, (p, g) in enumerate(zip(candidates, gates)):
        if p.id in evaluated:
            continue
        if best is None or g.p_eval > gates[best].p_eval:
            best = i
    if best is None:
        best = max(range(len(candidates)), key=lambda i: (gates[i].p_eval, -i))
        return Proposal(candidates[best], gates[best], engine, duplicate=True, n_candidates=len(candidates))
    return Proposal(candidates[best], gates[best], engine, n_candidates=len(candidates))


def propose_random(specs: Sequence[KnobSpec], bundle: SurrogateBundle, frontier: ParetoFrontier,
                   gate: GateParams, rng: np.random.Generator, evaluated: Dataset | None = None,
                   max_retries: int = 20) -> Proposal:
    evaluated = evaluated if evaluated is not None else Dataset()
    p = random_point(specs, rng)
    tries = 0
    while p.id in evaluated and tries < max_retries:
        p = random_point(specs, rng)
        tries += 1
    g = score_points(bundle, frontier, [p], specs, gate)[0]
    return Proposal(p, g, "random", duplicate=p.id in evaluated, n_candidates=tries + 1)


def _neighbors(frontier: ParetoFrontier, latency: float) -> list[str]:
    ranked = sorted(range(len(frontier.entries)), key=lambda i: (abs(frontier.entries[i].latency - latency), i))
    return [frontier.entries[i].point_id for i in ranked[:2]]


def propose_evolutionary(dataset: Dataset, frontier: ParetoFrontier, bundle: SurrogateBundle,
                         specs: Sequence[KnobSpec], params: EvolutionParams, gate: GateParams,
                         rng: np.random.Generator) -> Proposal:
    if not frontier:
        raise ValueError("evolutionary proposals need a non-empty frontier")
    population = select_population(dataset, frontier, gate.weights, params.population_threshold)
    if not population:
        population = [dataset.point(pid) for pid in frontier.ids]
    candidates = []
    for _ in range(params.n_families):
        father = population[rng.integers(len(population))]
        near = _neighbors(frontier, dataset.record(father.id).latency)
        mother = dataset.point(near[rng.integers(len(near))])
        for _ in range(params.n_offspring):
            child = crossover(father, mother, specs, rng)
            candidates.append(child)
            candidates.append(mutate(child, specs, params.mutation_rate, rng))
    gates = score_points(bundle, frontier, candidates, specs, gate)
    return _pick(candidates, gates, dataset, "evolutionary")


def propose_mutational(frontier: ParetoFrontier, dataset: Dataset, bundle: SurrogateBundle,
                       specs: Sequence[KnobSpec], n_mutants: int, mutation_rate: float, gate: GateParams,
                       rng: np.random.Generator) -> Proposal:
    if not frontier:
        raise ValueError("mutational proposals need a non-empty frontier")
    parent = dataset.point(frontier.ids[rng.integers(len(frontier))])
    candidates = [mutate(parent, specs, mutation_rate, rng) for _ in range(n_mutants)]
    gates = score_points(bundle, frontier, candidates, specs, gate)
    return _pick(candidates, gates, dataset, "mutational")

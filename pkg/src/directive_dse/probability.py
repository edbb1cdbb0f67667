"""Soft-boundary gate: how likely a proposed point is to be sent to the evaluator.

The gate multiplies three factors: a budget term that decays as predicted
resource ratios exceed 1, a Pareto term that decays as the predicted weighted
resource exceeds the frontier at the predicted latency (scaled by a slack
``delta``), and the complement of the predicted timeout/error probability.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .design_space import DesignPoint, KnobSpec, encode_many
from .pareto import BELOW_MIN, PAPER_WEIGHTS, ParetoFrontier, ResourceWeights, project_resource, weighted_resource
from .surrogate import SurrogateBundle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GateParams:
    delta: float = 1.0
    weights: ResourceWeights = PAPER_WEIGHTS

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class GateResult:
    p_budget: float
    p_pareto: float
    p_timeout: float
    p_eval: float
    r_pred: float
    latency_pred: float | None = None
    passthrough: bool = False  # no regressors yet; every point is accepted

    def to_json(self) -> dict:
        return {"p_budget": self.p_budget, "p_pareto": self.p_pareto, "p_timeout": self.p_timeout,
                "p_eval": self.p_eval, "r_pred": self.r_pred, "latency_pred": self.latency_pred,
                "passthrough": self.passthrough}


PASSTHROUGH = GateResult(1.0, 1.0, 0.0, 1.0, 0.0, None, True)


def p_budget(r: Sequence[float]) -> float:
    over = sum(max(0.0, x - 1.0) for x in r)
    return 1.0 - min(1.0, over)


def p_pareto(r_pred: float, r_pareto, delta: float) -> float:
    if r_pareto is BELOW_MIN:
        return 1.0
    if r_pareto <= 0:
        logger.warning("frontier resource %r at projected latency; treating as left of frontier", r_pareto)
        return 1.0
    return 1.0 - min(1.0, max(0.0, (r_pred - delta * r_pareto) / r_pareto))


def p_eval(p_b: float, p_p: float, p_timeout: float) -> float:
    return p_b * p_p * (1.0 - p_timeout)


def score_points(bundle: SurrogateBundle, frontier: ParetoFrontier, points: Sequence[DesignPoint],
                 specs: Sequence[KnobSpec], gate: GateParams) -> list[GateResult]:
    """Gate every point with one batched prediction per model."""
    if not points:
        return []
    if not bundle.has_regressors or not frontier:
        return [PASSTHROUGH] * len(points)
    pred = bundle.predict(encode_many(points, specs))
    out = []
    for lat, ratios, pt in zip(pred.latency, pred.ratios, pred.p_timeout):
        r_pred = weighted_resource(ratios, gate.weights)
        pb = p_budget(ratios)
        pp = p_pareto(r_pred, project_resource(frontier, lat), gate.delta)
        pt = float(pt)
        out.append(GateResult(pb, pp, pt, p_eval(pb, pp, pt), float(r_pred), float(lat)))
    return out


def get_prob_eval(bundle: SurrogateBundle, frontier: ParetoFrontier, point: DesignPoint,
                  specs: Sequence[KnobSpec], gate: GateParams) -> GateResult:
    return score_points(bundle, frontier, [point], specs, gate)[0]


def accept(p: float, rng: np.random.Generator) -> bool:
    """One Bernoulli draw; always consumes exactly one uniform from the stream."""
    return bool(rng.random() < p)

"""Thompson sampling over the proposal engines."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ENGINES = ("random", "evolutionary", "mutational")


@dataclass
class ArmState:
    """Beta posterior from a sliding window of outcomes; ``window=None`` keeps everything."""

    method: str
    window: int | None = 50
    outcomes: deque = field(default_factory=deque)
    attempts: int = 0
    successes: int = 0

    def __post_init__(self):
        if self.window is not None and self.window < 1:
            raise ValueError("window must be positive or None")
        self.outcomes = deque(self.outcomes, maxlen=self.window)

    @property
    def alpha(self) -> int:
        return 1 + sum(self.outcomes)

    @property
    def beta_param(self) -> int:
        return 1 + len(self.outcomes) - sum(self.outcomes)

    def to_json(self) -> dict:
        return {"method": self.method, "alpha": self.alpha, "beta": self.beta_param,
                "attempts": self.attempts, "successes": self.successes}


def record_outcome(arm: ArmState, success: bool) -> ArmState:
    arm.outcomes.append(bool(success))
    arm.attempts += 1
    arm.successes += int(bool(success))
    return arm


def beta_sample(alpha: float, beta_param: float, rng: np.random.Generator) -> float:
    x = rng.standard_gamma(alpha)
    y = rng.standard_gamma(beta_param)
    return x / (x + y)


def select_method(arms: Sequence[ArmState], rng: np.random.Generator) -> str:
    """Draw one sample per arm and return the arm with the largest; ties go to the earlier arm."""
    if not arms:
        raise ValueError("no arms to select from")
    best, best_val = None, -1.0
    for arm in arms:
        v = beta_sample(arm.alpha, arm.beta_param, rng)
        if v > best_val:
            best, best_val = arm.method, v
    return best


def fresh_arms(methods: Sequence[str] = ENGINES, window: int | None = 50) -> list[ArmState]:
    return [ArmState(m, window) for m in methods]

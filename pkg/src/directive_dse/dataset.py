"""Append-only store of evaluated points."""

from __future__ import annotations

from typing import Iterator, Sequence

from .design_space import DesignPoint
from .evaluator import EvaluationRecord
from .pareto import Objectives, ResourceWeights, weighted_resource


class Dataset:
    def __init__(self, items: Sequence[tuple[DesignPoint, EvaluationRecord]] = ()):
        self.items: list[tuple[DesignPoint, EvaluationRecord]] = []
        self._by_id: dict[str, int] = {}
        for p, r in items:
            self.append(p, r)

    def append(self, point: DesignPoint, record: EvaluationRecord) -> None:
        self._by_id.setdefault(record.point_id, len(self.items))
        self.items.append((point, record))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[DesignPoint, EvaluationRecord]]:
        return iter(self.items)

    def __contains__(self, point_id: str) -> bool:
        return point_id in self._by_id

    def point(self, point_id: str) -> DesignPoint:
        return self.items[self._by_id[point_id]][0]

    def record(self, point_id: str) -> EvaluationRecord:
        return self.items[self._by_id[point_id]][1]

    def ok_items(self) -> list[tuple[DesignPoint, EvaluationRecord]]:
        return [(p, r) for p, r in self.items if r.ok]

    def objectives(self, record: EvaluationRecord, weights: ResourceWeights) -> Objectives:
        return Objectives(record.latency, weighted_resource(record.ratios, weights))

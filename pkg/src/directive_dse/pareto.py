"""Two-objective Pareto frontier over (latency, weighted resource)."""

from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence


class ResourceRatios(NamedTuple):
    """Consumed fraction of each resource type; above 1 means over budget."""

    lut: float = 0.0
    ff: float = 0.0
    dsp: float = 0.0
    bram: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lut, self.ff, self.dsp, self.bram)


class ResourceWeights(NamedTuple):
    lut: float = 0.1
    ff: float = 0.1
    dsp: float = 0.4
    bram: float = 0.4

    def check(self) -> ResourceWeights:
        if min(self) < 0 or sum(self) <= 0:
            raise ValueError(f"resource weights must be non-negative with positive sum, got {tuple(self)}")
        return self


PAPER_WEIGHTS = ResourceWeights(0.1, 0.1, 0.4, 0.4)


class Objectives(NamedTuple):
    latency: float  # microseconds
    resource: float  # weighted resource usage


class FrontierEntry(NamedTuple):
    latency: float
    resource: float
    point_id: str

    @property
    def objectives(self) -> Objectives:
        return Objectives(self.latency, self.resource)


class _BelowMin:
    """Marker returned when a latency lies left of the whole frontier."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BELOW_MIN"


BELOW_MIN = _BelowMin()


def weighted_resource(r: Sequence[float], w: Sequence[float] = PAPER_WEIGHTS) -> float:
    return w[0] * r[0] + w[1] * r[1] + w[2] * r[2] + w[3] * r[3]


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Strictly better in both latency and resource."""
    return a[0] < b[0] and a[1] < b[1]


def covers(a: Sequence[float], b: Sequence[float]) -> bool:
    """``a`` is at least as good as ``b`` in both objectives; ``b`` adds nothing to a frontier holding ``a``."""
    return a[0] <= b[0] and a[1] <= b[1]


@dataclass(frozen=True)
class ParetoFrontier:
    entries: tuple[FrontierEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.point_id for e in self.entries]

    def objectives(self) -> list[Objectives]:
        return [e.objectives for e in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["latency_us", "weighted_resource", "point_id"])
        for e in self.entries:
            w.writerow([repr(e.latency), repr(e.resource), e.point_id])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> ParetoFrontier:
        f = cls()
        for row in csv.DictReader(io.StringIO(text)):
            f, _ = update_frontier(f, Objectives(float(row["latency_us"]), float(row["weighted_resource"])),
                                   row.get("point_id", ""))
        return f


def update_frontier(f: ParetoFrontier, obj: Sequence[float], point_id: str = "") -> tuple[ParetoFrontier, bool]:
    """Insert ``obj`` if no entry covers it; drop every entry it covers.

    Entries equal in one objective keep the one better in the other, so
    resources strictly decrease as latency increases.
    """
    lat, res = float(obj[0]), float(obj[1])
    entries = f.entries
    lats = [e.latency for e in entries]
    i = bisect.bisect_right(lats, lat)
    # the entry with the largest latency <= lat has the smallest resource among those
    if i > 0 and entries[i - 1].resource <= res:
        return f, False
    j = i
    while j < len(entries) and entries[j].resource >= res:
        j += 1
    k = i
    # entries left of i with equal latency are covered by the newcomer only if lat equal and res lower
    while k > 0 and entries[k - 1].latency == lat:
        k -= 1
    new = entries[:k] + (FrontierEntry(lat, res, point_id),) + entries[j:]
    return ParetoFrontier(new), True


def build_frontier(items: Iterable[tuple[Sequence[float], str]]) -> ParetoFrontier:
    f = ParetoFrontier()
    for obj, pid in items:
        f, _ = update_frontier(f, obj, pid)
    return f


def nondominated(points: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    """Brute-force non-covered subset, duplicates collapsed; sorted by latency."""
    uniq = sorted(set((float(p[0]), float(p[1])) for p in points))
    return [p for p in uniq if not any(q != p and covers(q, p) for q in uniq)]


def project_resource(f: ParetoFrontier, latency: float):
    """Frontier resource at ``latency`` by linear interpolation; BELOW_MIN left of the frontier."""
    if not f.entries:
        raise ValueError("cannot project onto an empty frontier")
    entries = f.entries
    if latency < entries[0].latency:
        return BELOW_MIN
    if latency >= entries[-1].latency:
        return entries[-1].resource
    lats = [e.latency for e in entries]
    i = bisect.bisect_right(lats, latency)
    a, b = entries[i - 1], entries[i]
    if latency == a.latency:
        return a.resource
    t = (latency - a.latency) / (b.latency - a.latency)
    return a.resource + t * (b.resource - a.resource)


def hypervolume(points: Iterable[Sequence[float]], ref: Sequence[float]) -> float:
    """Area dominated by ``points`` and bounded by ``ref``; points not strictly inside ref are ignored."""
    inside = [(float(p[0]), float(p[1])) for p in points if p[0] < ref[0] and p[1] < ref[1]]
    if not inside:
        return 0.0
    inside.sort()
    area, best_res = 0.0, ref[1]
    # sweep latency ascending: each point extends a strip up to the next point's latency
    front = []
    for lat, res in inside:
        if res < best_res:
            front.append((lat, res))
            best_res = res
    for k, (lat, res) in enumerate(front):
        nxt = front[k + 1][0] if k + 1 < len(front) else ref[0]
        area += (nxt - lat) * (ref[1] - res)
    return area


def frontier_hypervolume(f: ParetoFrontier, ref: Sequence[float]) -> float:
    return hypervolume([(e.latency, e.resource) for e in f.entries], ref)


def elbow_point(f: ParetoFrontier) -> FrontierEntry:
    """Entry farthest from the chord joining the two ends, on axes scaled to the frontier's span."""
    if not f.entries:
        raise ValueError("empty frontier has no elbow")
    e = f.entries
    if len(e) < 3:
        return e[0]
    lspan = (e[-1].latency - e[0].latency) or 1.0
    rspan = (e[0].resource - e[-1].resource) or 1.0
    # normalised, the chord runs from (0, 1) to (1, 0); distance is proportional to |x + y - 1|
    dist = [abs((x.latency - e[0].latency) / lspan + (x.resource - e[-1].resource) / rspan - 1.0) for x in e]
    return e[max(range(len(e)), key=lambda i: (dist[i], -i))]

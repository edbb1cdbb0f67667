"""Tunable knobs, design points, their encoding, validation and sampling."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

LOOP_CONFIGS = ("none", "pipeline", "unroll")
ARRAY_CONFIGS = ("none", "complete", "cyclic", "block")
FACTOR_CONFIGS = frozenset({"unroll", "cyclic", "block"})

SPACE_SIZE_CAP = 2**63 - 1
KNOB_HEADER = ["id", "kind", "group", "configs", "factors"]


class KnobFileError(ValueError):
    pass


class InvalidPointError(ValueError):
    pass


@dataclass(frozen=True)
class KnobSpec:
    id: str
    kind: str
    allowed_configs: tuple[str, ...]
    allowed_factors: tuple[int, ...] = ()
    array_group: str | None = None

    def __post_init__(self):
        if self.kind not in ("loop", "array"):
            raise KnobFileError(f"knob {self.id!r}: unknown kind {self.kind!r}")
        legal = LOOP_CONFIGS if self.kind == "loop" else ARRAY_CONFIGS
        if not self.allowed_configs:
            raise KnobFileError(f"knob {self.id!r}: no configs")
        for c in self.allowed_configs:
            if c not in legal:
                raise KnobFileError(f"knob {self.id!r}: unknown {self.kind} config {c!r}")
        if len(set(self.allowed_configs)) != len(self.allowed_configs):
            raise KnobFileError(f"knob {self.id!r}: repeated config")
        if self.has_factor_configs and not self.allowed_factors:
            raise KnobFileError(f"knob {self.id!r}: factor-bearing config without factors")
        if any(f < 1 for f in self.allowed_factors):
            raise KnobFileError(f"knob {self.id!r}: factors must be positive")
        if any(b <= a for a, b in zip(self.allowed_factors, self.allowed_factors[1:])):
            raise KnobFileError(f"knob {self.id!r}: factors must be strictly increasing")
        if self.array_group is not None and self.kind != "array":
            raise KnobFileError(f"knob {self.id!r}: only arrays can join a group")

    @property
    def has_factor_configs(self) -> bool:
        return any(c in FACTOR_CONFIGS for c in self.allowed_configs)

    @property
    def n_features(self) -> int:
        return len(self.allowed_configs) + 1

    def options(self, config: str | None = None) -> list[Assignment]:
        """All legal assignments, optionally restricted to one config."""
        out = []
        for c in self.allowed_configs:
            if config is not None and c != config:
                continue
            if c in FACTOR_CONFIGS:
                out.extend(Assignment(c, f) for f in self.allowed_factors)
            else:
                out.append(Assignment(c, 1))
        return out

    def is_legal(self, a: Assignment) -> bool:
        if a.config not in self.allowed_configs:
            return False
        if a.config in FACTOR_CONFIGS:
            return a.factor in self.allowed_factors
        return a.factor == 1


class Assignment(NamedTuple):
    config: str
    factor: int = 1


@dataclass(frozen=True)
class DesignPoint:
    """One assignment per knob, stored sorted by knob id so equal points hash equally."""

    assignments: tuple[tuple[str, Assignment], ...]

    @classmethod
    def from_dict(cls, d: Mapping[str, tuple[str, int] | Assignment]) -> DesignPoint:
        return cls(tuple(sorted((k, Assignment(str(v[0]), int(v[1]))) for k, v in d.items())))

    def __getitem__(self, knob_id: str) -> Assignment:
        for k, a in self.assignments:
            if k == knob_id:
                return a
        raise KeyError(knob_id)

    def as_dict(self) -> dict[str, Assignment]:
        return dict(self.assignments)

    def replace(self, **changes: Assignment) -> DesignPoint:
        d = self.as_dict()
        d.update(changes)
        return DesignPoint.from_dict(d)

    def to_json(self) -> dict:
        return {"assignments": {k: {"config": a.config, "factor": a.factor} for k, a in self.assignments}}

    @classmethod
    def from_json(cls, obj: Mapping) -> DesignPoint:
        body = obj.get("assignments", obj)
        return cls.from_dict({k: (v["config"], v["factor"]) for k, v in body.items()})

    @cached_property
    def id(self) -> str:
        return point_id(self)

    def __str__(self) -> str:
        parts = []
        for k, a in self.assignments:
            parts.append(f"{k}={a.config}" + (f"x{a.factor}" if a.config in FACTOR_CONFIGS else ""))
        return ",".join(parts)


def point_id(point: DesignPoint) -> str:
    blob = json.dumps(point.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(blob.encode()).hexdigest()[:12]


def parse_knob_file(text: str) -> list[KnobSpec]:
    """Parse the knob CSV (``id,kind,group,configs,factors``; lists are ``|``-separated)."""
    text = text.lstrip("\ufeff")
    rows = [r for r in csv.reader(io.StringIO(text.replace("\r\n", "\n"))) if any(c.strip() for c in r)]
    if not rows:
        raise KnobFileError("empty knob file")
    header = [c.strip().lower() for c in rows[0]]
    if header != KNOB_HEADER:
        raise KnobFileError(f"bad header {rows[0]!r}, expected {','.join(KNOB_HEADER)}")
    specs: list[KnobSpec] = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(KNOB_HEADER):
            raise KnobFileError(f"line {lineno}: expected {len(KNOB_HEADER)} fields, got {len(row)}")
        kid, kind, group, configs, factors = (c.strip() for c in row)
        if not kid:
            raise KnobFileError(f"line {lineno}: empty id")
        if kid in seen:
            raise KnobFileError(f"line {lineno}: duplicate knob id {kid!r}")
        seen.add(kid)
        try:
            fs = tuple(int(f) for f in factors.split("|") if f.strip())
        except ValueError as exc:
            raise KnobFileError(f"line {lineno}: non-integer factor in {factors!r}") from exc
        cs = tuple(c.strip() for c in configs.split("|") if c.strip())
        specs.append(KnobSpec(kid, kind, cs, fs, group or None))
    _check_groups(specs)
    return specs


def knob_file_text(specs: Sequence[KnobSpec]) -> str:
    lines = [",".join(KNOB_HEADER)]
    for s in specs:
        lines.append(",".join([s.id, s.kind, s.array_group or "", "|".join(s.allowed_configs),
                               "|".join(map(str, s.allowed_factors))]))
    return "\n".join(lines) + "\n"


def _check_groups(specs: Sequence[KnobSpec]) -> None:
    for gid, members in groups(specs).items():
        if not group_configs(members):
            raise KnobFileError(f"array group {gid!r} has no partitioning config common to all members")


def groups(specs: Sequence[KnobSpec]) -> dict[str, list[KnobSpec]]:
    out: dict[str, list[KnobSpec]] = {}
    for s in specs:
        if s.array_group is not None:
            out.setdefault(s.array_group, []).append(s)
    return out


def group_configs(members: Sequence[KnobSpec]) -> list[str]:
    """Configs legal for every member, in the first member's order."""
    return [c for c in members[0].allowed_configs if all(c in m.allowed_configs for m in members[1:])]


def _units(specs: Sequence[KnobSpec]) -> list[list[KnobSpec]]:
    """Independent sampling units: single knobs, or whole array groups (first-member position)."""
    units, placed = [], set()
    grp = groups(specs)
    for s in specs:
        if s.array_group is None:
            units.append([s])
        elif s.array_group not in placed:
            placed.add(s.array_group)
            units.append(grp[s.array_group])
    return units


def _unit_options(unit: Sequence[KnobSpec]) -> Iterator[tuple[Assignment, ...]]:
    if len(unit) == 1 and unit[0].array_group is None:
        for a in unit[0].options():
            yield (a,)
        return
    for c in group_configs(unit):
        yield from itertools.product(*(m.options(c) for m in unit))


def space_size(specs: Sequence[KnobSpec]) -> int:
    total = 1
    for unit in _units(specs):
        if len(unit) == 1 and unit[0].array_group is None:
            n = len(unit[0].options())
        else:
            n = sum(int(np.prod([len(m.options(c)) for m in unit], dtype=object)) for c in group_configs(unit))
        total = min(total * n, SPACE_SIZE_CAP)
    return total


def enumerate_points(specs: Sequence[KnobSpec]) -> Iterator[DesignPoint]:
    units = _units(specs)
    for combo in itertools.product(*(list(_unit_options(u)) for u in units)):
        d = {}
        for unit, assigned in zip(units, combo):
            for s, a in zip(unit, assigned):
                d[s.id] = a
        yield DesignPoint.from_dict(d)


def random_point(specs: Sequence[KnobSpec], rng: np.random.Generator) -> DesignPoint:
    d = {}
    for unit in _units(specs):
        if len(unit) == 1 and unit[0].array_group is None:
            opts = unit[0].options()
            d[unit[0].id] = opts[rng.integers(len(opts))]
        else:
            cs = group_configs(unit)
            c = cs[rng.integers(len(cs))]
            for m in unit:
                opts = m.options(c)
                d[m.id] = opts[rng.integers(len(opts))]
    return DesignPoint.from_dict(d)


def validate(point: DesignPoint, specs: Sequence[KnobSpec]) -> list[str]:
    """Every violated point invariant as a message naming the knob; empty means valid."""
    problems = []
    assigned = point.as_dict()
    known = {s.id for s in specs}
    for k in assigned:
        if k not in known:
            problems.append(f"{k}: not a knob of this space")
    for s in specs:
        a = assigned.get(s.id)
        if a is None:
            problems.append(f"{s.id}: missing assignment")
        elif a.config not in s.allowed_configs:
            problems.append(f"{s.id}: config {a.config!r} not allowed")
        elif not s.is_legal(a):
            if a.config in FACTOR_CONFIGS:
                problems.append(f"{s.id}: factor {a.factor} not in {list(s.allowed_factors)}")
            else:
                problems.append(f"{s.id}: config {a.config!r} must carry factor 1, got {a.factor}")
    for gid, members in groups(specs).items():
        cfgs = {assigned[m.id].config for m in members if m.id in assigned}
        if len(cfgs) > 1:
            problems.append(f"group {gid}: members {[m.id for m in members]} mix partitioning types {sorted(cfgs)}")
    return problems


def feature_length(specs: Sequence[KnobSpec]) -> int:
    return sum(s.n_features for s in specs)


def encode(point: DesignPoint, specs: Sequence[KnobSpec]) -> np.ndarray:
    problems = validate(point, specs)
    if problems:
        raise InvalidPointError("; ".join(problems))
    return encode_unchecked(point, specs)


def encode_unchecked(point: DesignPoint, specs: Sequence[KnobSpec]) -> np.ndarray:
    out = np.zeros(feature_length(specs))
    pos = 0
    assigned = dict(point.assignments)
    for s in specs:
        a = assigned[s.id]
        out[pos + s.allowed_configs.index(a.config)] = 1.0
        out[pos + len(s.allowed_configs)] = a.factor
        pos += s.n_features
    return out


def encode_many(points: Sequence[DesignPoint], specs: Sequence[KnobSpec]) -> np.ndarray:
    if not points:
        return np.zeros((0, feature_length(specs)))
    return np.stack([encode_unchecked(p, specs) for p in points])


def decode(vec: Sequence[float], specs: Sequence[KnobSpec]) -> DesignPoint:
    d, pos = {}, 0
    for s in specs:
        block = np.asarray(vec[pos:pos + len(s.allowed_configs)])
        d[s.id] = Assignment(s.allowed_configs[int(np.argmax(block))], int(vec[pos + len(s.allowed_configs)]))
        pos += s.n_features
    return DesignPoint.from_dict(d)

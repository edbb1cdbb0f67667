"""Black-box evaluation of design points.

Two kinds of evaluator share one record format: an external command driven
through a JSON point file and a JSON result on stdout, and deterministic
synthetic fixtures whose whole space can be brute-forced.
"""

from __future__ import annotations

import json
import math
import os
import shlex
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Sequence

from .design_space import DesignPoint, KnobSpec, enumerate_points, parse_knob_file, point_id, space_size, validate
from .pareto import ResourceRatios

BRUTE_FORCE_LIMIT = 10**5
DEFAULT_CAPACITY = {"lut": 53200, "ff": 106400, "dsp": 220, "bram": 280}
STATUSES = ("ok", "error", "timeout")


class EvaluatorConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationRecord:
    point_id: str
    status: str
    latency: float | None = None  # microseconds
    ratios: ResourceRatios | None = None
    wall_time: float = 0.0
    message: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == "ok":
            if self.latency is None or not self.latency > 0 or not math.isfinite(self.latency):
                raise ValueError(f"ok record needs a positive finite latency, got {self.latency!r}")
            if self.ratios is None or not all(math.isfinite(r) and r >= 0 for r in self.ratios):
                raise ValueError(f"ok record needs finite non-negative ratios, got {self.ratios!r}")
        elif self.latency is not None or self.ratios is not None:
            raise ValueError(f"{self.status} record must not carry objectives")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        return {"point_id": self.point_id, "status": self.status, "latency_us": self.latency,
                "ratios": dict(self.ratios._asdict()) if self.ratios else None,
                "wall_time": self.wall_time, "message": self.message}

    @classmethod
    def from_json(cls, d: dict) -> EvaluationRecord:
        ratios = ResourceRatios(**d["ratios"]) if d.get("ratios") else None
        return cls(d["point_id"], d["status"], d.get("latency_us"), ratios, d.get("wall_time", 0.0),
                   d.get("message", ""))


@dataclass(frozen=True)
class EvaluatorSpec:
    kind: str  # "subprocess" | "synthetic"
    command_template: str = ""
    timeout_s: float = 3600.0
    fixture_id: str = ""
    available: dict = field(default_factory=lambda: dict(DEFAULT_CAPACITY))

    def __post_init__(self):
        if self.kind not in ("subprocess", "synthetic"):
            raise EvaluatorConfigError(f"unknown evaluator kind {self.kind!r}")
        if not self.timeout_s > 0:
            raise EvaluatorConfigError("timeout_s must be positive")
        if self.kind == "subprocess" and "{point_file}" not in self.command_template:
            raise EvaluatorConfigError("command template must contain {point_file}")
        if self.kind == "synthetic" and self.fixture_id not in FIXTURES:
            raise EvaluatorConfigError(f"unknown fixture {self.fixture_id!r}; known: {sorted(FIXTURES)}")
        if set(self.available) != set(DEFAULT_CAPACITY) or min(self.available.values()) <= 0:
            raise EvaluatorConfigError(f"capacities must be positive for {sorted(DEFAULT_CAPACITY)}")

    @classmethod
    def parse(cls, text: str, timeout_s: float = 3600.0, available: dict | None = None) -> EvaluatorSpec:
        """``subprocess:TEMPLATE`` or ``synthetic:FIXTURE``."""
        kind, sep, rest = text.partition(":")
        if not sep:
            raise EvaluatorConfigError(f"evaluator must be subprocess:TEMPLATE or synthetic:FIXTURE, got {text!r}")
        avail = dict(available or DEFAULT_CAPACITY)
        if kind == "subprocess":
            return cls("subprocess", command_template=rest, timeout_s=timeout_s, available=avail)
        if kind == "synthetic":
            return cls("synthetic", fixture_id=rest, timeout_s=timeout_s, available=avail)
        raise EvaluatorConfigError(f"unknown evaluator kind {kind!r}")

    def describe(self) -> str:
        return f"subprocess:{self.command_template}" if self.kind == "subprocess" else f"synthetic:{self.fixture_id}"


def ratios_from_counts(counts: dict, available: dict) -> ResourceRatios:
    return ResourceRatios(*(counts[k] / available[k] for k in ("lut", "ff", "dsp", "bram")))


# ------------------------------------------------------------------ subprocess

def _run_command(argv: list[str], timeout_s: float) -> tuple[str, int | None]:
    """Run with a watchdog; on timeout kill the whole process group. Returns (stdout, returncode|None)."""
    proc = subprocess.Popen(argv, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, stdin=subprocess.DEVNULL,
                            start_new_session=True, text=True)
    try:
        out, _ = proc.communicate(timeout=timeout_s)
        return out, proc.returncode
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        proc.communicate()
        return "", None


def _parse_result(stdout: str) -> dict:
    text = stdout.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("no output")
    return json.loads(lines[-1])


def evaluate_subprocess(spec: EvaluatorSpec, point: DesignPoint) -> EvaluationRecord:
    pid = point_id(point)
    fd, path = tempfile.mkstemp(prefix="point_", suffix=".json")
    t0 = time.monotonic()
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(point.to_json(), fh)
        argv = [tok.replace("{point_file}", path) for tok in shlex.split(spec.command_template)]
        try:
            stdout, rc = _run_command(argv, spec.timeout_s)
        except OSError as exc:
            return EvaluationRecord(pid, "error", wall_time=time.monotonic() - t0, message=f"launch failed: {exc}")
        wall = time.monotonic() - t0
        if rc is None:
            return EvaluationRecord(pid, "timeout", wall_time=wall, message=f"killed after {spec.timeout_s}s")
        try:
            res = _parse_result(stdout)
            if res.get("status") != "ok":
                return EvaluationRecord(pid, "error", wall_time=wall, message=str(res.get("status")))
            counts = {k: float(res[k]) for k in ("lut", "ff", "dsp", "bram")}
            return EvaluationRecord(pid, "ok", float(res["latency_us"]), ratios_from_counts(counts, spec.available),
                                    wall_time=wall)
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            return EvaluationRecord(pid, "error", wall_time=wall, message=f"bad result (exit {rc}): {exc}")
    finally:
        try:
            os.unlink(path)
        except FileNotFoundError:
            pass


# ------------------------------------------------------------------- fixtures

def _loop(point, knob):
    a = point[knob]
    return a.config, a.factor


def _ports_s1(config, factor):
    return {"none": 1, "cyclic": factor, "block": 1, "complete": 64}[config]


def _bram(config, factor):
    return {"none": 1, "cyclic": factor, "block": factor, "complete": 0}[config]


def fixture_s1(point: DesignPoint) -> dict:
    """Two nested 64-trip loops over one array; returns status plus raw counts."""
    c1, f1 = _loop(point, "L1")
    c2, f2 = _loop(point, "L2")
    ca, fa = _loop(point, "A1")
    u2 = f2 if c2 == "unroll" else 1
    e2 = min(u2, _ports_s1(ca, fa))
    if c2 == "pipeline":
        inner = 74
    elif c2 == "unroll":
        inner = 2 * math.ceil(64 / e2)
    else:
        inner = 192
    if c1 == "unroll":
        repl = f1 * e2
        cycles = math.ceil(64 / f1) * inner
    elif c1 == "pipeline":
        if e2 != 64:
            return {"status": "error"}
        repl = 64
        cycles = 74 + inner
    else:
        repl = e2
        cycles = 64 * inner
    if repl > 256:
        return {"status": "timeout"}
    return {"status": "ok", "latency_us": cycles * 0.01, "dsp": 2 * repl,
            "ff": 500 + 80 * repl + (1152 if ca == "complete" else 0), "lut": 800 + 120 * repl,
            "bram": _bram(ca, fa)}


def fixture_s2(point: DesignPoint) -> dict:
    """Three nested loops (16, 16, 32 trips); the inner one reads two grouped arrays."""
    c1, f1 = _loop(point, "L1")
    c2, f2 = _loop(point, "L2")
    c3, f3 = _loop(point, "L3")
    arrays = [_loop(point, "A1"), _loop(point, "A2")]

    def ports(config, factor):
        return {"none": 1, "cyclic": factor, "block": 1, "complete": 32}[config]

    u3 = min(f3, 32) if c3 == "unroll" else 1
    e3 = min([u3] + [ports(c, f) for c, f in arrays])
    if c3 == "pipeline":
        inner, r3 = 40, 1
    elif c3 == "unroll":
        inner, r3 = 3 * math.ceil(32 / e3), e3
    else:
        inner, r3 = 128, 1
    if c2 == "pipeline":
        if e3 != 32:
            return {"status": "error"}
        mid, r2 = 22, 32
    elif c2 == "unroll":
        u2 = min(f2, 16)
        mid, r2 = math.ceil(16 / u2) * inner, u2 * r3
    else:
        mid, r2 = 16 * inner, r3
    if c1 == "pipeline":
        # pipelining the outer loop forces full unrolling of everything below it
        return {"status": "timeout" if c2 == "pipeline" else "error"}
    if c1 == "unroll":
        u1 = min(f1, 16)
        cycles, repl = math.ceil(16 / u1) * mid, u1 * r2
    else:
        cycles, repl = 16 * mid, r2
    if repl > 512:
        return {"status": "timeout"}
    n_complete = sum(c == "complete" for c, _ in arrays)
    bram = sum({"none": 2, "cyclic": max(f, 2), "block": max(f, 2), "complete": 0}[c] for c, f in arrays)
    return {"status": "ok", "latency_us": cycles * 0.01, "dsp": 3 * repl,
            "ff": 600 + 90 * repl + 1024 * n_complete, "lut": 1000 + 150 * repl, "bram": bram}


FIXTURES: dict[str, Callable[[DesignPoint], dict]] = {"S1": fixture_s1, "S2": fixture_s2}


def fixture_knob_text(fixture_id: str) -> str:
    return resources.files("directive_dse").joinpath(f"data/{fixture_id.lower()}.csv").read_text()


def fixture_specs(fixture_id: str) -> list[KnobSpec]:
    return parse_knob_file(fixture_knob_text(fixture_id))


def evaluate_synthetic(spec: EvaluatorSpec, point: DesignPoint) -> EvaluationRecord:
    res = FIXTURES[spec.fixture_id](point)
    pid = point_id(point)
    if res["status"] != "ok":
        return EvaluationRecord(pid, res["status"])
    return EvaluationRecord(pid, "ok", res["latency_us"], ratios_from_counts(res, spec.available))


def evaluate(spec: EvaluatorSpec, point: DesignPoint, knob_specs: Sequence[KnobSpec]) -> EvaluationRecord:
    problems = validate(point, knob_specs)
    if problems:
        raise ValueError("invalid design point: " + "; ".join(problems))
    if spec.kind == "synthetic":
        return evaluate_synthetic(spec, point)
    return evaluate_subprocess(spec, point)


class Evaluator:
    """Callable wrapper binding a spec to a knob space; counts calls."""

    def __init__(self, spec: EvaluatorSpec, knob_specs: Sequence[KnobSpec]):
        self.spec = spec
        self.knob_specs = list(knob_specs)
        self.calls = 0
        if spec.kind == "synthetic":
            expected = {s.id for s in fixture_specs(spec.fixture_id)}
            got = {s.id for s in knob_specs}
            if got != expected:
                raise EvaluatorConfigError(f"fixture {spec.fixture_id} expects knobs {sorted(expected)}, got {sorted(got)}")

    def __call__(self, point: DesignPoint) -> EvaluationRecord:
        self.calls += 1
        return evaluate(self.spec, point, self.knob_specs)


def brute_force(spec: EvaluatorSpec | str, knob_specs: Sequence[KnobSpec]) -> list[tuple[DesignPoint, EvaluationRecord]]:
    if isinstance(spec, str):
        spec = EvaluatorSpec("synthetic", fixture_id=spec)
    if spec.kind != "synthetic":
        raise EvaluatorConfigError("brute force needs a synthetic evaluator")
    n = space_size(knob_specs)
    if n > BRUTE_FORCE_LIMIT:
        raise EvaluatorConfigError(f"design space has {n} points, brute force is limited to {BRUTE_FORCE_LIMIT}")
    return [(p, evaluate_synthetic(spec, p)) for p in enumerate_points(knob_specs)]

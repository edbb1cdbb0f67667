"""Command line: ``run``, ``oracle`` and ``report``.

Exit codes: 0 success, 2 configuration error, 3 aborted run (checkpoint written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .design_space import KnobFileError, parse_knob_file, space_size
from .evaluator import BRUTE_FORCE_LIMIT, Evaluator, EvaluatorConfigError, EvaluatorSpec, brute_force
from .explorer import (CheckpointError, ConfigError, ExplorerConfig, RunAborted, resume, run, summary,
                       write_report)
from .pareto import (PAPER_WEIGHTS, ParetoFrontier, build_frontier, elbow_point, frontier_hypervolume,
                     weighted_resource)

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="directive-dse", description="Explore HLS directive design spaces.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an exploration")
    r.add_argument("--knobs", required=True, help="knob CSV file")
    r.add_argument("--evaluator", required=True, help="subprocess:TEMPLATE or synthetic:FIXTURE")
    r.add_argument("--out", default="dse_run", help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--max-points", type=int)
    r.add_argument("--init", type=int)
    r.add_argument("--time-budget-s", type=float)
    r.add_argument("--timeout-s", type=float, default=3600.0, help="per-evaluation timeout (subprocess)")
    r.add_argument("--config", help="JSON file overriding explorer settings")
    r.add_argument("--resume", help="checkpoint to continue from")

    o = sub.add_parser("oracle", help="evaluate every point of a synthetic fixture")
    o.add_argument("--knobs", required=True)
    o.add_argument("--evaluator", required=True, help="synthetic:FIXTURE")
    o.add_argument("--out", required=True)

    rp = sub.add_parser("report", help="summarise and compare runs")
    rp.add_argument("--run", required=True, nargs="+", action="extend", help="run output directories")
    rp.add_argument("--oracle", help="oracle_pareto.csv to compare against")
    rp.add_argument("--ref", help="hypervolume reference point as LATENCY,RESOURCE")
    rp.add_argument("--out", default=".", help="directory for comparison.csv")
    return p


def _read_specs(path: str):
    try:
        return parse_knob_file(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise UsageError(f"--knobs: cannot read {path}: {e.strerror}") from None
    except KnobFileError as e:
        raise UsageError(f"--knobs: {e}") from None


def _evaluator_spec(text: str, timeout_s: float = 3600.0) -> EvaluatorSpec:
    try:
        return EvaluatorSpec.parse(text, timeout_s=timeout_s)
    except EvaluatorConfigError as e:
        raise UsageError(f"--evaluator: {e}") from None


def _config(args) -> ExplorerConfig:
    fields = {}
    if args.config:
        try:
            fields = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"--config: {e}") from None
        if not isinstance(fields, dict):
            raise UsageError("--config: expected a JSON object")
    for flag, key in (("seed", "seed"), ("max_points", "max_points"), ("init", "n_init"),
                      ("time_budget_s", "time_budget_s")):
        if getattr(args, flag) is not None:
            fields[key] = getattr(args, flag)
    try:
        return ExplorerConfig.from_json(fields)
    except ConfigError as e:
        raise UsageError(f"--config: {e}") from None


def cmd_run(args) -> int:
    specs = _read_specs(args.knobs)
    spec = _evaluator_spec(args.evaluator, args.timeout_s)
    try:
        evaluator = Evaluator(spec, specs)
    except EvaluatorConfigError as e:
        raise UsageError(f"--evaluator: {e}") from None
    out = Path(args.out)
    state = None
    if args.resume:
        try:
            state = resume(args.resume)
        except CheckpointError as e:
            raise UsageError(f"--resume: {e}") from None
        if state.specs != specs:
            raise UsageError("--resume: checkpoint was made with a different --knobs file")
        if args.config:
            raise UsageError("--resume: --config cannot be combined with a checkpoint")
        for flag, key in (("seed", "seed"), ("max_points", "max_points"), ("init", "n_init"),
                          ("time_budget_s", "time_budget_s")):
            value = getattr(args, flag)
            if value is not None and value != getattr(state.config, key):
                raise UsageError(f"--{flag.replace('_', '-')}: conflicts with the checkpoint value "
                                 f"{getattr(state.config, key)!r}")
        config = state.config
    else:
        config = _config(args)
    out.mkdir(parents=True, exist_ok=True)
    try:
        state = run(config, specs, evaluator, state=state, checkpoint_path=out / "checkpoint.json")
    except RunAborted as e:
        print(f"error: {e}; checkpoint written to {e.checkpoint_path}", file=sys.stderr)
        return EXIT_ABORTED
    write_report(state, out)
    s = summary(state)
    print(f"{s['evaluator_calls']} evaluations, {s['frontier_size']} frontier points, "
          f"hypervolume {s['hypervolume']:.6g}; results in {out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    specs = _read_specs(args.knobs)
    spec = _evaluator_spec(args.evaluator)
    if spec.kind != "synthetic":
        raise UsageError("--evaluator: the oracle needs a synthetic fixture")
    n = space_size(specs)
    if n > BRUTE_FORCE_LIMIT:
        raise UsageError(f"--knobs: design space has {n} points, more than the brute-force limit {BRUTE_FORCE_LIMIT}")
    try:
        Evaluator(spec, specs)
        results = brute_force(spec, specs)
    except EvaluatorConfigError as e:
        raise UsageError(f"--evaluator: {e}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "oracle_all.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point_id", "status", "latency_us", "weighted_resource", "lut", "ff", "dsp", "bram", "point"])
        for p, r in results:
            if r.ok:
                w.writerow([r.point_id, r.status, repr(r.latency), repr(weighted_resource(r.ratios, PAPER_WEIGHTS)),
                            *(repr(x) for x in r.ratios), str(p)])
            else:
                w.writerow([r.point_id, r.status, "", "", "", "", "", "", str(p)])
    front = build_frontier(((r.latency, weighted_resource(r.ratios, PAPER_WEIGHTS)), r.point_id)
                           for _, r in results if r.ok)
    (out / "oracle_pareto.csv").write_text(front.to_csv(), encoding="utf-8")
    n_ok = sum(r.ok for _, r in results)
    print(f"{len(results)} points, {n_ok} ok, {len(front)} on the true frontier; results in {out}")
    return EXIT_OK


def _parse_ref(text: str) -> tuple[float, float]:
    try:
        lat, res = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--ref: expected LATENCY,RESOURCE, got {text!r}") from None
    return lat, res


def _load_run(path: str) -> tuple[ParetoFrontier, dict]:
    d = Path(path)
    try:
        front = ParetoFrontier.from_csv((d / "pareto.csv").read_text(encoding="utf-8"))
        summ = json.loads((d / "summary.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        raise UsageError(f"--run: {path} is not a run directory: {e}") from None
    return front, summ


def cmd_report(args) -> int:
    runs = [(r, *_load_run(r)) for r in args.run]
    if args.ref:
        ref = _parse_ref(args.ref)
    else:
        ref = tuple(runs[0][2]["hv_reference"])
    oracle = None
    if args.oracle:
        try:
            oracle = ParetoFrontier.from_csv(Path(args.oracle).read_text(encoding="utf-8"))
        except (OSError, KeyError, ValueError) as e:
            raise UsageError(f"--oracle: {e}") from None
    oracle_hv = frontier_hypervolume(oracle, ref) if oracle else None

    header = ["run", "points", "min_latency_us", "min_latency_resource", "elbow_latency_us", "elbow_resource",
              "hypervolume"] + (["hv_ratio"] if oracle else [])
    rows = []
    for name, front, _ in runs:
        hv = frontier_hypervolume(front, ref)
        if front:
            lo, el = front.entries[0], elbow_point(front)
            row = [name, len(front), f"{lo.latency:.6g}", f"{lo.resource:.6g}", f"{el.latency:.6g}",
                   f"{el.resource:.6g}", f"{hv:.6g}"]
        else:
            row = [name, 0, "-", "-", "-", "-", f"{hv:.6g}"]
        if oracle:
            row.append(f"{hv / oracle_hv:.4f}" if oracle_hv else "-")
        rows.append(row)
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    print(f"reference point: latency {ref[0]:.6g}, resource {ref[1]:.6g}")
    for row in [header] + rows:
        print("  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip())

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "latency_us", "weighted_resource", "point_id"])
        sources = [(name, front) for name, front, _ in runs] + ([("oracle", oracle)] if oracle else [])
        for name, front in sources:
            for e in front:
                w.writerow([name, repr(e.latency), repr(e.resource), e.point_id])
    return EXIT_OK


COMMANDS = {"run": cmd_run, "oracle": cmd_oracle, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

import json
import sys
import textwrap
import time

import pytest

from directive_dse.design_space import DesignPoint, KnobSpec, enumerate_points
from directive_dse.evaluator import (
    EvaluationRecord, Evaluator, EvaluatorConfigError, EvaluatorSpec, brute_force, evaluate,
    fixture_specs)
from directive_dse.pareto import ResourceRatios, build_frontier, covers, weighted_resource

from conftest import oracle
from oracles import s1_by_hand


def s1(l1, l2, a1):
    return DesignPoint.from_dict({"L1": l1, "L2": l2, "A1": a1})


SYN = EvaluatorSpec("synthetic", fixture_id="S1")


def test_s1_all_none():
    r = evaluate(SYN, s1(("none", 1), ("none", 1), ("none", 1)), fixture_specs("S1"))
    assert r.status == "ok" and r.latency == pytest.approx(122.88)
    assert r.ratios == pytest.approx(ResourceRatios(920 / 53200, 580 / 106400, 2 / 220, 1 / 280))


def test_s1_pipeline_complete():
    r = evaluate(SYN, s1(("pipeline", 1), ("unroll", 64), ("complete", 1)), fixture_specs("S1"))
    assert r.latency == pytest.approx(0.76)
    assert r.ratios == pytest.approx(ResourceRatios(8480 / 53200, 6772 / 106400, 128 / 220, 0.0))


def test_s1_island_error():
    r = evaluate(SYN, s1(("pipeline", 1), ("unroll", 8), ("cyclic", 8)), fixture_specs("S1"))
    assert r.status == "error" and r.latency is None and r.ratios is None


def test_s1_matches_hand_written_formulas():
    _, results = oracle("S1")
    assert len(results) == 896
    for p, r in results:
        status, vals = s1_by_hand(tuple(p["L1"]), tuple(p["L2"]), tuple(p["A1"]))
        assert r.status == status
        if vals:
            lat, lut, ff, dsp, bram = vals
            assert r.latency == pytest.approx(lat, abs=1e-12)
            assert r.ratios == pytest.approx(ResourceRatios(lut / 53200, ff / 106400, dsp / 220, bram / 280))


def test_s1_pipeline_island():
    for p, r in oracle("S1")[1]:
        if r.ok and p["L1"].config == "pipeline":
            assert p["A1"] in (("complete", 1), ("cyclic", 64))


def test_s1_true_front_minimum():
    # the formulas put the fastest ok design at 32 cycles with R = 256, beyond DSP capacity,
    # and a 74-cycle design with the same footprint as the 76-cycle pipeline/complete point
    objs = {p: (r.latency, weighted_resource(r.ratios)) for p, r in oracle("S1")[1] if r.ok}
    front = build_frontier((o, p.id) for p, o in objs.items())
    assert front.entries[0].latency == pytest.approx(0.32)
    fast = objs[s1(("unroll", 64), ("pipeline", 1), ("complete", 1))]
    slow = objs[s1(("pipeline", 1), ("unroll", 64), ("complete", 1))]
    assert fast[0] == pytest.approx(0.74) and fast[1] == pytest.approx(slow[1])
    assert covers(fast, slow) and fast[0] < slow[0]


def test_failure_records_carry_no_objectives():
    for _, r in oracle("S1")[1]:
        if not r.ok:
            assert r.latency is None and r.ratios is None


def test_s2_space():
    specs, results = oracle("S2")
    assert len(results) == sum(1 for _ in enumerate_points(specs))
    assert {r.status for _, r in results} == {"ok", "error", "timeout"}


def test_synthetic_is_pure():
    specs = fixture_specs("S2")
    p = next(iter(enumerate_points(specs)))
    spec = EvaluatorSpec("synthetic", fixture_id="S2")
    assert evaluate(spec, p, specs) == evaluate(spec, p, specs)


def test_record_invariants():
    with pytest.raises(ValueError):
        EvaluationRecord("x", "ok")
    with pytest.raises(ValueError):
        EvaluationRecord("x", "timeout", 1.0)
    with pytest.raises(ValueError):
        EvaluationRecord("x", "ok", 0.0, ResourceRatios())
    with pytest.raises(ValueError):
        EvaluationRecord("x", "maybe")
    r = EvaluationRecord("x", "ok", 2.0, ResourceRatios(0.1, 0.2, 0.3, 0.4), 0.5, "hi")
    assert EvaluationRecord.from_json(json.loads(json.dumps(r.to_json()))) == r


def test_spec_parsing():
    assert EvaluatorSpec.parse("synthetic:S1").fixture_id == "S1"
    assert EvaluatorSpec.parse("subprocess:run {point_file}").kind == "subprocess"
    for bad in ("S1", "magic:x", "synthetic:S9", "subprocess:no-placeholder"):
        with pytest.raises(EvaluatorConfigError):
            EvaluatorSpec.parse(bad)
    with pytest.raises(EvaluatorConfigError):
        EvaluatorSpec("synthetic", fixture_id="S1", timeout_s=0)


def test_evaluator_checks_knobs():
    with pytest.raises(EvaluatorConfigError):
        Evaluator(SYN, fixture_specs("S2"))
    ev = Evaluator(SYN, fixture_specs("S1"))
    ev(s1(("none", 1), ("none", 1), ("none", 1)))
    assert ev.calls == 1


def test_evaluate_rejects_invalid_point():
    with pytest.raises(ValueError):
        evaluate(SYN, s1(("unroll", 3), ("none", 1), ("none", 1)), fixture_specs("S1"))


def test_brute_force_limit():
    specs = [KnobSpec(f"l{i}", "loop", ("none", "pipeline", "unroll"), (2, 4, 8, 16, 32, 64)) for i in range(7)]
    with pytest.raises(EvaluatorConfigError, match="limited"):
        brute_force(SYN, specs)
    with pytest.raises(EvaluatorConfigError):
        brute_force(EvaluatorSpec.parse("subprocess:x {point_file}"), specs)


# external command protocol

SPECS1 = [KnobSpec("l", "loop", ("none", "unroll"), (2, 4))]
POINT = DesignPoint.from_dict({"l": ("unroll", 4)})


def stub(tmp_path, body):
    path = tmp_path / "stub.py"
    path.write_text(textwrap.dedent(body))
    return f"{sys.executable} {path} {{point_file}}"


def run_stub(tmp_path, body, timeout_s=10.0):
    spec = EvaluatorSpec("subprocess", command_template=stub(tmp_path, body), timeout_s=timeout_s)
    return evaluate(spec, POINT, SPECS1)


def test_subprocess_ok(tmp_path):
    r = run_stub(tmp_path, """
        print('{"status":"ok","latency_us":5.0,"lut":100,"ff":200,"dsp":2,"bram":1}')
    """)
    assert r.status == "ok" and r.latency == 5.0
    assert r.ratios == pytest.approx(ResourceRatios(100 / 53200, 200 / 106400, 2 / 220, 1 / 280))


def test_subprocess_reads_point_file(tmp_path):
    r = run_stub(tmp_path, """
        import json, sys
        a = json.load(open(sys.argv[1]))["assignments"]["l"]
        print("log line")
        print(json.dumps({"status": "ok", "latency_us": float(a["factor"]), "lut": 0, "ff": 0, "dsp": 0,
                          "bram": 0}))
        sys.exit(3)
    """)
    assert r.status == "ok" and r.latency == 4.0


def test_subprocess_timeout(tmp_path):
    t0 = time.monotonic()
    r = run_stub(tmp_path, "import time; time.sleep(2.0)\n", timeout_s=1.0)
    assert r.status == "timeout" and r.latency is None
    assert 0.9 <= r.wall_time <= 2.0
    assert time.monotonic() - t0 < 2.0


@pytest.mark.parametrize("body", ["print('not json')\n", "import sys; sys.exit(1)\n",
                                  "print('{\"status\": \"error\"}')\n",
                                  "print('{\"status\": \"ok\", \"latency_us\": 1.0}')\n"])
def test_subprocess_errors(tmp_path, body):
    assert run_stub(tmp_path, body).status == "error"


def test_subprocess_missing_binary():
    spec = EvaluatorSpec("subprocess", command_template="/nonexistent/tool {point_file}")
    assert evaluate(spec, POINT, SPECS1).status == "error"

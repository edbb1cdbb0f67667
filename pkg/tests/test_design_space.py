from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from directive_dse.design_space import (
    Assignment, DesignPoint, InvalidPointError, KnobFileError, KnobSpec, decode, encode, encode_many,
    enumerate_points, knob_file_text, parse_knob_file, random_point, space_size, validate)
from directive_dse.evaluator import fixture_specs

HEADER = "id,kind,group,configs,factors\n"


def test_parse_loop_row():
    (spec,) = parse_knob_file(HEADER + "l2,loop,,none|pipeline|unroll,2|4|8\n")
    assert spec == KnobSpec("l2", "loop", ("none", "pipeline", "unroll"), (2, 4, 8), None)


def test_parse_array_row_with_group():
    (spec,) = parse_knob_file(HEADER + "a1,array,g0,none|cyclic|block|complete,2|4\n")
    assert spec.kind == "array" and spec.array_group == "g0"
    assert spec.allowed_configs == ("none", "cyclic", "block", "complete")


def test_duplicate_id_rejected():
    with pytest.raises(KnobFileError, match="duplicate"):
        parse_knob_file(HEADER + "l1,loop,,none,\nl1,loop,,pipeline,\n")


@pytest.mark.parametrize("body, msg", [
    ("l1,gate,,none,\n", "kind"),
    ("l1,loop,,none|complete,\n", "config"),
    ("l1,loop,,unroll,\n", "without factors"),
    ("l1,loop,,unroll,2|x\n", "non-integer"),
    ("l1,loop,,unroll,4|2\n", "increasing"),
    ("l1,loop,g0,none,\n", "group"),
])
def test_bad_rows(body, msg):
    with pytest.raises(KnobFileError, match=msg):
        parse_knob_file(HEADER + body)


def test_header_required():
    with pytest.raises(KnobFileError, match="header"):
        parse_knob_file("l1,loop,,none,\n")


def test_bom_and_crlf_accepted():
    text = "﻿" + (HEADER + "l1,loop,,none|unroll,2|4\n").replace("\n", "\r\n")
    assert parse_knob_file(text)[0].allowed_factors == (2, 4)


def test_group_without_common_config_rejected():
    with pytest.raises(KnobFileError, match="common"):
        parse_knob_file(HEADER + "a1,array,g,cyclic,2\na2,array,g,block,2\n")


def test_knob_file_round_trip(s2_specs):
    assert parse_knob_file(knob_file_text(s2_specs)) == s2_specs


def test_option_counts():
    loop = KnobSpec("l", "loop", ("none", "pipeline", "unroll"), (2, 4, 8, 16, 32, 64))
    arr = KnobSpec("a", "array", ("none", "complete", "cyclic", "block"), (2, 4, 8, 16, 32, 64))
    assert space_size([loop]) == 8
    assert space_size([arr]) == 14


def test_s1_size(s1_specs):
    assert space_size(s1_specs) == 896 == sum(1 for _ in enumerate_points(s1_specs))


def test_grouped_size_matches_enumeration(s2_specs):
    assert space_size(s2_specs) == sum(1 for _ in enumerate_points(s2_specs))


def test_single_option_knob_always_sampled(rng):
    specs = [KnobSpec("only", "loop", ("pipeline",))]
    assert {random_point(specs, rng)["only"] for _ in range(50)} == {Assignment("pipeline", 1)}


def test_group_members_share_config(s2_specs, rng):
    for _ in range(10_000):
        p = random_point(s2_specs, rng)
        assert p["A1"].config == p["A2"].config


def test_loop_options_uniform(rng):
    specs = [KnobSpec("l", "loop", ("none", "pipeline", "unroll"), (2, 4, 8, 16, 32, 64))]
    n = 10_000
    counts = Counter(random_point(specs, rng)["l"] for _ in range(n))
    assert len(counts) == 8
    for c in counts.values():
        assert abs(c / n - 1 / 8) <= 0.02


def test_encode_layout():
    specs = [KnobSpec("l", "loop", ("none", "pipeline", "unroll"), (2, 4, 8))]
    assert encode(DesignPoint.from_dict({"l": ("none", 1)}), specs).tolist() == [1, 0, 0, 1]
    assert encode(DesignPoint.from_dict({"l": ("unroll", 8)}), specs).tolist() == [0, 0, 1, 8]


def test_encode_injective_on_s1(s1_specs):
    X = encode_many(list(enumerate_points(s1_specs)), s1_specs)
    assert len({tuple(row) for row in X}) == 896


def test_encode_rejects_invalid(s1_specs):
    bad = DesignPoint.from_dict({"L1": ("unroll", 3), "L2": ("none", 1), "A1": ("none", 1)})
    with pytest.raises(InvalidPointError):
        encode(bad, s1_specs)


def test_validate_messages(s2_specs):
    good = DesignPoint.from_dict({"L1": ("none", 1), "L2": ("none", 1), "L3": ("unroll", 4),
                                  "A1": ("cyclic", 2), "A2": ("cyclic", 8)})
    assert validate(good, s2_specs) == []
    bad_factor = good.replace(L3=Assignment("unroll", 3))
    assert any(m.startswith("L3") for m in validate(bad_factor, s2_specs))
    mixed = good.replace(A2=Assignment("block", 2))
    assert any("group" in m for m in validate(mixed, s2_specs))
    missing = DesignPoint.from_dict({"L1": ("none", 1)})
    assert len(validate(missing, s2_specs)) == 4


def test_point_id_is_canonical():
    a = DesignPoint.from_dict({"x": ("none", 1), "y": ("unroll", 2)})
    b = DesignPoint.from_dict({"y": ("unroll", 2), "x": ("none", 1)})
    assert a == b and a.id == b.id and len(a.id) == 12
    assert DesignPoint.from_json(a.to_json()) == a


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), fixture=st.sampled_from(["S1", "S2"]))
def test_random_points_valid_and_decodable(seed, fixture):
    specs = fixture_specs(fixture)
    p = random_point(specs, np.random.default_rng(seed))
    assert validate(p, specs) == []
    assert decode(encode(p, specs), specs) == p

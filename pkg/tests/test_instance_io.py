from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entropic_dual.services.core import LpInstance, OtInstance, SdpInstance, SolverConfig
from entropic_dual.services.generators import generate_lp, generate_ot, generate_sdp
from entropic_dual.services.instance_io import (
    ParseError,
    format_report,
    parse_instance,
    read_instance,
    read_report_values,
    serialize_instance,
    write_instance,
)
from entropic_dual.services.optimizer import solve_lp


def test_parse_minimal_lp():
    inst = parse_instance("LP\n2 1\n0 0\n1 1\n1\n")
    assert isinstance(inst, LpInstance)
    assert inst.cost == pytest.approx([0.0, 0.0])
    assert inst.con_matrix == pytest.approx(np.array([[1.0, 1.0]]))
    assert inst.rhs == pytest.approx([1.0])


def test_parse_ignores_comments_and_blank_lines():
    text = "# header comment\nOT\n\n2 2  # sizes\n4 1\n2 3\n0.5 0.5\n0.6 0.4\n"
    inst = parse_instance(text)
    assert isinstance(inst, OtInstance)
    assert inst.cost == pytest.approx(np.array([[4.0, 1.0], [2.0, 3.0]]))
    assert inst.target == pytest.approx([0.6, 0.4])


def test_bundled_instances_load(data_dir):
    kinds = {path.name: type(read_instance(path)) for path in sorted(data_dir.iterdir())}
    assert kinds["toy_ot.ot"] is OtInstance
    assert kinds["toy_ot.lp"] is LpInstance
    assert kinds["trace_sdp.sdp"] is SdpInstance


def test_read_accepts_byte_order_mark(tmp_path):
    path = tmp_path / "bom.lp"
    path.write_bytes("\ufeffLP\n2 1\n0 0\n1 1\n1\n".encode("utf-8"))
    assert isinstance(read_instance(path), LpInstance)


@pytest.mark.parametrize(
    ("text", "line", "column"),
    [
        ("LP\n2 1\n0 0\n1 x\n1\n", 4, 3),
        ("QP\n2 1\n", 1, 1),
        ("LP\n2 0\n", 2, 3),
        ("LP\n2 1\n0 0\n1 1\n", 5, 1),
        ("LP\n2 1\n0 0\n1 1\n1\n7\n", 6, 1),
        ("LP\n2 1\n0 0 0\n1 1\n1\n", 3, 5),
        ("LP\n2 1\n0 inf\n1 1\n1\n", 3, 3),
    ],
)
def test_parse_errors_locate_the_problem(text, line, column):
    with pytest.raises(ParseError) as info:
        parse_instance(text)
    assert (info.value.line, info.value.column) == (line, column)
    assert str(info.value).startswith(f"line {line}, column {column}:")


def test_parse_rejects_asymmetric_block():
    text = "SDP\n2 1\n0 1\n0 0\n1 0\n0 1\n1\n"
    with pytest.raises(ParseError, match="not symmetric") as info:
        parse_instance(text)
    assert info.value.line == 3


def test_parse_rejects_invalid_marginals():
    with pytest.raises(ParseError, match="sum to 1") as info:
        parse_instance("OT\n1 2\n1 2\n1\n0.5 0.6\n")
    assert info.value.line == 2


def test_parse_rejects_rank_deficient_lp():
    with pytest.raises(ParseError, match="full row rank"):
        parse_instance("LP\n2 2\n0 0\n1 1\n2 2\n1 2\n")


instances = st.one_of(
    st.builds(lambda s: generate_lp(s, 6, 3)[0], st.integers(0, 2**32)),
    st.builds(lambda s: generate_sdp(s, 3, 4, with_trace_row=True)[0], st.integers(0, 2**32)),
    st.builds(lambda s: generate_ot(s, 3, 4), st.integers(0, 2**32)),
)


@settings(max_examples=100, deadline=None)
@given(instances)
def test_serialization_is_exact(inst):
    again = parse_instance(serialize_instance(inst))
    assert type(again) is type(inst)
    assert serialize_instance(again) == serialize_instance(inst)


def test_write_then_read(tmp_path, toy_ot):
    path = tmp_path / "toy.ot"
    write_instance(path, toy_ot)
    again = read_instance(path)
    assert np.array_equal(again.cost, toy_ot.cost)
    assert np.array_equal(again.source, toy_ot.source)


def test_report_scalars_are_machine_readable(simplex_lp):
    report = solve_lp(simplex_lp, SolverConfig(epsilon=1.0))
    text = format_report(report)
    values = read_report_values(text)
    assert values["kind"] == "lp"
    assert values["converged"] == "true"
    assert float(values["dual_value"]) == report.dual_value
    assert float(values["dual_value"]) == pytest.approx(-math.log(2.0))
    assert int(values["iterations"]) == report.iterations
    assert "# primal_point" in text


def test_text_report_has_no_blocks(simplex_lp):
    report = solve_lp(simplex_lp, SolverConfig(epsilon=1.0))
    text = format_report(report, fmt="text")
    assert text.startswith("LP solve at eps=1: converged")
    assert "# " not in text


def test_unknown_report_format(simplex_lp):
    report = solve_lp(simplex_lp, SolverConfig(epsilon=1.0))
    with pytest.raises(ValueError):
        format_report(report, fmt="yaml")

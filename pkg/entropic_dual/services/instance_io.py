from __future__ import annotations

import logging
import math
from collections import deque
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from entropic_dual.services.core import (
    InstanceError,
    LpInstance,
    OtInstance,
    SdpInstance,
    SolveReport,
    SymMatrix,
)

LOGGER = logging.getLogger(__name__)

Instance = LpInstance | SdpInstance | OtInstance
REPORT_FORMATS = ("keyvalue", "text")


class ParseError(InstanceError):
    def __init__(self, line: int, column: int, message: str) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class _Reader:
    def __init__(self, text: str) -> None:
        self._lines: deque[tuple[int, list[tuple[int, str]]]] = deque()
        self._last_line = 0
        for lineno, raw in enumerate(text.splitlines(), start=1):
            self._last_line = lineno
            content = raw.split("#", 1)[0]
            tokens = []
            col = 0
            for chunk in content.split():
                col = content.index(chunk, col)
                tokens.append((col + 1, chunk))
                col += len(chunk)
            if tokens:
                self._lines.append((lineno, tokens))

    def next_line(self, what: str) -> tuple[int, list[tuple[int, str]]]:
        if not self._lines:
            raise ParseError(self._last_line + 1, 1, f"unexpected end of input, expected {what}")
        return self._lines.popleft()

    def numbers(self, count: int, what: str) -> tuple[int, np.ndarray]:
        lineno, tokens = self.next_line(what)
        if len(tokens) != count:
            col = tokens[count][0] if len(tokens) > count else tokens[-1][0] + len(tokens[-1][1])
            raise ParseError(lineno, col, f"expected {count} entries for {what}, got {len(tokens)}")
        values = np.empty(count)
        for i, (col, token) in enumerate(tokens):
            try:
                value = float(token)
            except ValueError:
                raise ParseError(lineno, col, f"invalid number {token!r} in {what}") from None
            if not math.isfinite(value):
                raise ParseError(lineno, col, f"non-finite value {token!r} in {what}")
            values[i] = value
        return lineno, values

    def sizes(self, what: str) -> tuple[int, int, int]:
        lineno, tokens = self.next_line(what)
        if len(tokens) != 2:
            raise ParseError(lineno, tokens[0][0], f"expected two sizes for {what}, got {len(tokens)} entries")
        sizes = []
        for col, token in tokens:
            try:
                size = int(token)
            except ValueError:
                raise ParseError(lineno, col, f"invalid size {token!r}") from None
            if size < 1:
                raise ParseError(lineno, col, f"size must be positive, got {size}")
            sizes.append(size)
        return lineno, sizes[0], sizes[1]

    def matrix(self, rows: int, cols: int, what: str) -> tuple[int, np.ndarray]:
        first = 0
        values = np.empty((rows, cols))
        for i in range(rows):
            lineno, values[i] = self.numbers(cols, f"{what} row {i + 1}")
            first = first or lineno
        return first, values

    def expect_end(self) -> None:
        if self._lines:
            lineno, tokens = self._lines[0]
            raise ParseError(lineno, tokens[0][0], "unexpected trailing content")


def _symmetric_block(values: np.ndarray, lineno: int, what: str) -> SymMatrix:
    try:
        return SymMatrix.from_array(values, strict=True)
    except InstanceError as exc:
        raise ParseError(lineno, 1, f"{what}: {exc}") from None


def parse_instance(text: str) -> Instance:
    reader = _Reader(text)
    header_line, tokens = reader.next_line("instance header")
    if len(tokens) != 1 or tokens[0][1] not in ("LP", "SDP", "OT"):
        raise ParseError(header_line, tokens[0][0], f"expected header LP, SDP or OT, got {tokens[0][1]!r}")
    kind = tokens[0][1]

    if kind == "LP":
        inst = _parse_lp(reader)
    elif kind == "SDP":
        inst = _parse_sdp(reader)
    else:
        inst = _parse_ot(reader)
    reader.expect_end()
    return inst


@contextmanager
def _instance_checks(lineno: int) -> Iterator[None]:
    try:
        yield
    except ParseError:
        raise
    except InstanceError as exc:
        raise ParseError(lineno, 1, str(exc)) from None


def _parse_lp(reader: _Reader) -> LpInstance:
    size_line, d, m = reader.sizes("'d m'")
    _, cost = reader.numbers(d, "cost vector")
    _, matrix = reader.matrix(m, d, "constraint matrix")
    _, rhs = reader.numbers(m, "rhs")
    with _instance_checks(size_line):
        return LpInstance(cost=cost, con_matrix=matrix, rhs=rhs)


def _parse_sdp(reader: _Reader) -> SdpInstance:
    size_line, n, m = reader.sizes("'n m'")
    line, raw = reader.matrix(n, n, "cost matrix")
    cost = _symmetric_block(raw, line, "cost matrix")
    blocks = []
    for k in range(m):
        line, raw = reader.matrix(n, n, f"constraint matrix {k + 1}")
        blocks.append(_symmetric_block(raw, line, f"constraint matrix {k + 1}"))
    _, rhs = reader.numbers(m, "rhs")
    with _instance_checks(size_line):
        return SdpInstance(cost=cost, con_matrices=tuple(blocks), rhs=rhs)


def _parse_ot(reader: _Reader) -> OtInstance:
    size_line, n1, n2 = reader.sizes("'n1 n2'")
    _, cost = reader.matrix(n1, n2, "cost matrix")
    _, source = reader.numbers(n1, "source marginal")
    _, target = reader.numbers(n2, "target marginal")
    with _instance_checks(size_line):
        return OtInstance(cost=cost, source=source, target=target)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _row(values: Iterable[float]) -> str:
    return " ".join(_fmt(v) for v in values)


def serialize_instance(inst: Instance) -> str:
    lines: list[str] = []
    if isinstance(inst, LpInstance):
        lines += ["LP", f"{inst.num_vars} {inst.num_cons}", _row(inst.cost)]
        lines += [_row(row) for row in inst.con_matrix]
        lines.append(_row(inst.rhs))
    elif isinstance(inst, SdpInstance):
        lines += ["SDP", f"{inst.dim} {inst.num_cons}"]
        lines += [_row(row) for row in inst.cost.entries]
        for block in inst.con_matrices:
            lines += [_row(row) for row in block.entries]
        lines.append(_row(inst.rhs))
    elif isinstance(inst, OtInstance):
        lines += ["OT", f"{inst.rows} {inst.cols}"]
        lines += [_row(row) for row in inst.cost]
        lines += [_row(inst.source), _row(inst.target)]
    else:
        raise TypeError(f"cannot serialize {type(inst).__name__}")
    return "\n".join(lines) + "\n"


def read_instance(path: str | Path) -> Instance:
    # Accept UTF-8 with or without BOM.
    text = Path(path).read_text(encoding="utf-8-sig")
    return parse_instance(text)


def write_instance(path: str | Path, inst: Instance) -> None:
    target = Path(path)
    target.write_text(serialize_instance(inst), encoding="utf-8")
    LOGGER.info("Wrote instance to %s", target)


def _scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return _fmt(value)
    return str(value)


def _render(
    title: str,
    scalars: Sequence[tuple[str, object]],
    blocks: Sequence[tuple[str, Sequence[str]]],
    fmt: str,
) -> str:
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {fmt!r}")
    if fmt == "text":
        width = max(len(key) for key, _ in scalars)
        lines = [title]
        for key, value in scalars:
            shown = f"{value:.10g}" if isinstance(value, (float, np.floating)) else _scalar(value)
            lines.append(f"  {key.ljust(width)}  {shown}")
        return "\n".join(lines) + "\n"
    lines = [f"{key} = {_scalar(value)}" for key, value in scalars]
    for name, body in blocks:
        lines.append(f"# {name}")
        lines.extend(body)
    return "\n".join(lines) + "\n"


def _point_lines(report: SolveReport) -> list[str]:
    point = report.primal_array()
    if point.ndim == 1:
        return [_row(point)]
    return [_row(row) for row in point]


def format_report(report: SolveReport, fmt: str = "keyvalue") -> str:
    title = f"{report.kind.upper()} solve at eps={report.epsilon:g}: " + (
        f"converged after {report.iterations} iterations" if report.converged else f"not converged ({report.message})"
    )
    scalars = [
        ("kind", report.kind),
        ("epsilon", report.epsilon),
        ("dual_value", report.dual_value),
        ("primal_value", report.primal_value),
        ("duality_gap", report.duality_gap),
        ("grad_inf_norm", report.grad_inf_norm),
        ("iterations", report.iterations),
        ("converged", report.converged),
        ("message", report.message),
    ]
    blocks = [
        ("dual_opt", [_row(report.dual_opt)]),
        ("primal_point", _point_lines(report)),
        ("trace", [f"{t.iteration} {_fmt(t.dual_value)} {_fmt(t.grad_inf_norm)}" for t in report.trace]),
    ]
    return _render(title, scalars, blocks, fmt)


def linear_objective(inst: LpInstance | SdpInstance, report: SolveReport) -> float:
    if isinstance(inst, SdpInstance):
        return float(np.sum(inst.cost.entries * report.primal_array()))
    return float(inst.cost @ report.primal_array())


def format_continuation(inst: LpInstance | SdpInstance, reports: Sequence[SolveReport], fmt: str = "keyvalue") -> str:
    final = reports[-1]
    converged = sum(1 for r in reports if r.converged)
    scalars = [
        ("kind", final.kind),
        ("steps", len(reports)),
        ("converged_steps", converged),
        ("final_epsilon", final.epsilon),
        ("final_dual_value", final.dual_value),
        ("final_primal_value", final.primal_value),
        ("final_linear_objective", linear_objective(inst, final)),
        ("total_iterations", sum(r.iterations for r in reports)),
        ("converged", converged == len(reports)),
    ]
    steps = [
        " ".join(
            [
                _fmt(r.epsilon),
                _fmt(r.dual_value),
                _fmt(r.primal_value),
                _fmt(linear_objective(inst, r)),
                _fmt(r.grad_inf_norm),
                str(r.iterations),
                _scalar(r.converged),
            ]
        )
        for r in reports
    ]
    blocks = [
        ("steps: epsilon dual_value primal_value linear_objective grad_inf_norm iterations converged", steps),
        ("final dual_opt", [_row(final.dual_opt)]),
        ("final primal_point", _point_lines(final)),
    ]
    title = f"Continuation over {len(reports)} steps down to eps={final.epsilon:g}"
    return _render(title, scalars, blocks, fmt)


def format_sinkhorn(result, epsilon: float, fmt: str = "keyvalue") -> str:
    scalars = [
        ("kind", "sinkhorn"),
        ("epsilon", epsilon),
        ("value", result.value),
        ("marginal_error", result.marginal_error),
        ("iterations", result.iterations),
        ("converged", result.converged),
    ]
    blocks = [("plan", [_row(row) for row in result.plan])]
    return _render(f"Sinkhorn at eps={epsilon:g}", scalars, blocks, fmt)


def format_comparison(comparison, fmt: str = "keyvalue") -> str:
    scalars = [
        ("kind", "compare-ot"),
        ("epsilon", comparison.epsilon),
        ("sinkhorn_value", comparison.sinkhorn_value),
        ("dual_value", comparison.dual_value),
        ("value_gap", comparison.value_gap),
        ("plan_l1", comparison.plan_l1),
        ("sinkhorn_iterations", comparison.sinkhorn.iterations),
        ("dual_iterations", comparison.dual.iterations),
        ("sinkhorn_seconds", comparison.sinkhorn_seconds),
        ("dual_seconds", comparison.dual_seconds),
        ("sinkhorn_converged", comparison.sinkhorn.converged),
        ("dual_converged", comparison.dual.converged),
    ]
    blocks = [
        ("sinkhorn plan", [_row(row) for row in comparison.sinkhorn.plan]),
        ("dual plan", [_row(row) for row in comparison.dual_plan]),
    ]
    return _render(f"Sinkhorn vs dual solver at eps={comparison.epsilon:g}", scalars, blocks, fmt)


def format_oracle(solution, regularized: tuple[float, float, np.ndarray] | None = None, fmt: str = "keyvalue") -> str:
    scalars: list[tuple[str, object]] = [
        ("kind", "oracle"),
        ("tau", solution.value),
        ("optimal_vertices", len(solution.vertices)),
    ]
    blocks = [("optimal vertices", [_row(v) for v in solution.vertices])]
    if regularized is not None:
        epsilon, value, point = regularized
        scalars += [("epsilon", epsilon), ("tau_epsilon", value)]
        blocks.append(("regularized minimizer", [_row(point)]))
    return _render("Vertex enumeration oracle", scalars, blocks, fmt)


def read_report_values(text: str) -> dict[str, str]:
    """Scalar "key = value" fields of a keyvalue report, up to the first block."""
    values: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            break
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed report line {raw!r}")
        values[key.strip()] = value.strip()
    return values

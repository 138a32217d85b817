from __future__ import annotations

import argparse
import logging
from pathlib import Path

from entropic_dual.handlers.common import (
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    RunContext,
    emit,
    exit_code,
    load_instance,
    record_report,
    solver_config,
    timed,
)
from entropic_dual.services.core import LpInstance, OtInstance, SdpInstance
from entropic_dual.services.instance_io import format_continuation, format_report
from entropic_dual.services.optimizer import Schedule, solve_continuation, solve_lp, solve_sdp
from entropic_dual.services.ot import marginal_residuals, ot_to_lp

LOGGER = logging.getLogger(__name__)


async def cmd_solve_lp(args: argparse.Namespace, ctx: RunContext) -> int:
    inst = load_instance(args.instance, LpInstance)
    report, seconds = await timed(solve_lp, inst, solver_config(args))
    await record_report(ctx, "solve-lp", args.instance, report, seconds)
    emit(args, format_report(report, args.format))
    return exit_code(report.converged)


async def cmd_solve_sdp(args: argparse.Namespace, ctx: RunContext) -> int:
    inst = load_instance(args.instance, SdpInstance)
    report, seconds = await timed(solve_sdp, inst, solver_config(args))
    await record_report(ctx, "solve-sdp", args.instance, report, seconds)
    emit(args, format_report(report, args.format))
    return exit_code(report.converged)


async def cmd_solve_ot(args: argparse.Namespace, ctx: RunContext) -> int:
    ot = load_instance(args.instance, OtInstance)
    lp, shape = ot_to_lp(ot)
    report, seconds = await timed(solve_lp, lp, solver_config(args))
    row_err, col_err = marginal_residuals(shape.to_plan(report.primal_array()), ot)
    LOGGER.info("Plan marginal residuals: rows=%.3e columns=%.3e", row_err, col_err)
    await record_report(ctx, "solve-ot", args.instance, report, seconds)
    emit(args, format_report(report, args.format))
    return exit_code(report.converged)


async def cmd_continuation(args: argparse.Namespace, ctx: RunContext) -> int:
    inst = load_instance(args.instance)
    if isinstance(inst, OtInstance):
        inst, _ = ot_to_lp(inst)
    schedule = args.schedule if args.schedule is not None else Schedule()
    reports, seconds = await timed(solve_continuation, inst, schedule, solver_config(args))
    for report in reports:
        await record_report(ctx, "continuation", args.instance, report, None)
    LOGGER.info("Continuation finished %d steps in %.3f s", len(reports), seconds)
    emit(args, format_continuation(inst, reports, args.format))
    return EXIT_OK if all(r.converged for r in reports) else EXIT_NOT_CONVERGED


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    commands = (
        ("solve-lp", cmd_solve_lp, "maximize the regularized LP dual"),
        ("solve-sdp", cmd_solve_sdp, "maximize the regularized SDP dual"),
        ("solve-ot", cmd_solve_ot, "solve a transport instance through its LP form"),
        ("continuation", cmd_continuation, "solve along a decreasing epsilon schedule with warm starts"),
    )
    for name, handler, help_text in commands:
        parser = subparsers.add_parser(name, parents=[parent], help=help_text)
        parser.add_argument("instance", type=Path, help="instance file")
        parser.set_defaults(handler=handler)

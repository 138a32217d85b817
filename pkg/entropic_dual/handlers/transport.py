from __future__ import annotations

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from entropic_dual.handlers.common import (
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    RunContext,
    emit,
    exit_code,
    load_instance,
    positive_float,
    positive_int,
    record_report,
    solver_config,
    timed,
)
from entropic_dual.services.core import OtInstance
from entropic_dual.services.instance_io import format_comparison, format_sinkhorn
from entropic_dual.services.ot import compare_ot, sinkhorn

LOGGER = logging.getLogger(__name__)


async def cmd_sinkhorn(args: argparse.Namespace, ctx: RunContext) -> int:
    ot = load_instance(args.instance, OtInstance)
    result, seconds = await timed(sinkhorn, ot, args.epsilon, args.tol, args.sinkhorn_max_iter)
    if ctx.storage is not None:
        await ctx.storage.record_run(
            command="sinkhorn",
            kind="ot",
            epsilon=args.epsilon,
            dual_value=None,
            primal_value=result.value,
            grad_inf_norm=result.marginal_error,
            iterations=result.iterations,
            converged=result.converged,
            instance=str(args.instance),
            wall_seconds=seconds,
        )
    emit(args, format_sinkhorn(result, args.epsilon, args.format))
    return exit_code(result.converged)


async def cmd_compare_ot(args: argparse.Namespace, ctx: RunContext) -> int:
    ot = load_instance(args.instance, OtInstance)
    comparison, seconds = await timed(compare_ot, ot, args.epsilon, solver_config(args), args.tol)
    await record_report(ctx, "compare-ot", args.instance, replace(comparison.dual, kind="ot"), seconds)
    emit(args, format_comparison(comparison, args.format))
    both = comparison.sinkhorn.converged and comparison.dual.converged
    return EXIT_OK if both else EXIT_NOT_CONVERGED


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    for name, handler, help_text in (
        ("sinkhorn", cmd_sinkhorn, "run Sinkhorn matrix scaling on a transport instance"),
        ("compare-ot", cmd_compare_ot, "compare Sinkhorn with the dual solver"),
    ):
        parser = subparsers.add_parser(name, parents=[parent], help=help_text)
        parser.add_argument("instance", type=Path, help="OT instance file")
        parser.add_argument("--tol", type=positive_float, default=1e-9, help="Sinkhorn marginal tolerance (L1)")
        parser.add_argument("--sinkhorn-max-iter", type=positive_int, default=20000, help="Sinkhorn iteration limit")
        parser.set_defaults(handler=handler)

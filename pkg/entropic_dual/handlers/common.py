from __future__ import annotations

import argparse
import asyncio
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Awaitable, Callable, TYPE_CHECKING

from entropic_dual.services.core import InstanceError, LpInstance, OtInstance, SdpInstance, SolveReport, SolverConfig
from entropic_dual.services.instance_io import REPORT_FORMATS, read_instance
from entropic_dual.services.optimizer import Schedule
from entropic_dual.services.storage import Storage

if TYPE_CHECKING:
    from entropic_dual.main import Settings

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


@dataclass(slots=True)
class RunContext:
    settings: Settings
    storage: Storage | None = None


Handler = Callable[[argparse.Namespace, RunContext], Awaitable[int]]


def positive_float(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {raw!r}") from None
    if not math.isfinite(value) or value <= 0.0:
        raise argparse.ArgumentTypeError(f"must be a positive number, got {raw!r}")
    return value


def positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {raw!r}")
    return value


def schedule_arg(raw: str) -> Schedule:
    try:
        return Schedule.parse(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def shared_flags(settings: Settings) -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--epsilon", type=positive_float, default=settings.epsilon, help="regularization weight")
    parent.add_argument("--grad-tol", type=positive_float, default=None, help="stop when the gradient sup-norm drops below this")
    parent.add_argument("--max-iter", type=positive_int, default=settings.max_iter, help="quasi-Newton iteration limit")
    parent.add_argument("--schedule", type=schedule_arg, default=None, help="continuation schedule 'start,ratio,steps'")
    parent.add_argument("--seed", type=int, default=1, help="generator seed")
    parent.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")
    parent.add_argument("--format", choices=REPORT_FORMATS, default=settings.report_format, help="report format")
    parent.add_argument("--db", default=None, help="SQLite run history file (overrides DB_PATH)")
    return parent


def solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(epsilon=args.epsilon, grad_tol=args.grad_tol, max_iter=args.max_iter)


def load_instance(path: Path, *kinds: type) -> LpInstance | SdpInstance | OtInstance:
    inst = read_instance(path)
    if kinds and not isinstance(inst, kinds):
        expected = " or ".join(_kind_name(k) for k in kinds)
        raise InstanceError(f"{path}: expected an {expected} instance, got {_kind_name(type(inst))}")
    return inst


def _kind_name(kind: type) -> str:
    return {LpInstance: "LP", SdpInstance: "SDP", OtInstance: "OT"}.get(kind, kind.__name__)


async def timed(func: Callable[..., Any], *args: Any) -> tuple[Any, float]:
    started = time.perf_counter()
    result = await asyncio.to_thread(func, *args)
    return result, time.perf_counter() - started


def emit(args: argparse.Namespace, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text, encoding="utf-8")
    LOGGER.info("Wrote report to %s", args.out)


async def record_report(
    ctx: RunContext,
    command: str,
    instance: Path | None,
    report: SolveReport,
    wall_seconds: float | None,
) -> None:
    if ctx.storage is None:
        return
    await ctx.storage.record_run(
        command=command,
        kind=report.kind,
        epsilon=report.epsilon,
        dual_value=report.dual_value,
        primal_value=report.primal_value,
        grad_inf_norm=report.grad_inf_norm,
        iterations=report.iterations,
        converged=report.converged,
        instance=str(instance) if instance is not None else None,
        wall_seconds=wall_seconds,
    )


def exit_code(converged: bool) -> int:
    return EXIT_OK if converged else EXIT_NOT_CONVERGED

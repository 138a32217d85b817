from __future__ import annotations

import argparse
import asyncio
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

from entropic_dual.handlers import (
    register_generate,
    register_history,
    register_oracle,
    register_solve,
    register_transport,
)
from entropic_dual.handlers.common import EXIT_ERROR, RunContext, shared_flags
from entropic_dual.services.core import ConfigError, InstanceError
from entropic_dual.services.instance_io import REPORT_FORMATS
from entropic_dual.services.optimizer import NonFiniteStartError
from entropic_dual.services.oracle import OracleError
from entropic_dual.services.ot import SinkhornUnderflowError
from entropic_dual.services.storage import Storage

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Settings:
    db_path: str | None = None
    epsilon: float = 0.01
    max_iter: int = 500
    report_format: str = "keyvalue"
    log_level: str = "INFO"


def load_settings() -> Settings:
    load_dotenv()

    db_path_raw = os.getenv("DB_PATH", "").strip()
    db_path = db_path_raw if db_path_raw else None
    epsilon_raw = os.getenv("SOLVER_EPSILON", "0.01").strip()
    max_iter_raw = os.getenv("SOLVER_MAX_ITER", "500").strip()
    report_format = os.getenv("REPORT_FORMAT", "keyvalue").strip() or "keyvalue"
    log_level = os.getenv("LOG_LEVEL", "INFO").strip().upper() or "INFO"

    try:
        epsilon = float(epsilon_raw)
    except ValueError:
        raise RuntimeError(f"SOLVER_EPSILON must be a number, got {epsilon_raw!r}") from None
    if not epsilon > 0.0:
        raise RuntimeError(f"SOLVER_EPSILON must be positive, got {epsilon_raw!r}")
    try:
        max_iter = int(max_iter_raw)
    except ValueError:
        raise RuntimeError(f"SOLVER_MAX_ITER must be an integer, got {max_iter_raw!r}") from None
    if max_iter < 1:
        raise RuntimeError(f"SOLVER_MAX_ITER must be positive, got {max_iter_raw!r}")
    if report_format not in REPORT_FORMATS:
        raise RuntimeError(f"REPORT_FORMAT must be one of {', '.join(REPORT_FORMATS)}, got {report_format!r}")
    if not isinstance(logging.getLevelName(log_level), int):
        raise RuntimeError(f"LOG_LEVEL is not a logging level: {log_level!r}")

    return Settings(
        db_path=db_path,
        epsilon=epsilon,
        max_iter=max_iter,
        report_format=report_format,
        log_level=log_level,
    )


class UsageError(Exception):
    def __init__(self, message: str, usage: str) -> None:
        super().__init__(message)
        self.usage = usage


class CliParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message, self.format_usage())


def build_parser(settings: Settings) -> CliParser:
    parser = CliParser(
        prog="entropic-dual",
        description="Entropy-regularized dual solvers for LP, SDP and optimal transport.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    parent = shared_flags(settings)
    register_solve(subparsers, parent)
    register_transport(subparsers, parent)
    register_generate(subparsers, parent)
    register_oracle(subparsers, parent)
    register_history(subparsers, parent)
    return parser


async def _dispatch(args: argparse.Namespace, settings: Settings) -> int:
    db_path = args.db or settings.db_path
    storage: Storage | None = None
    if db_path:
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)
        storage = Storage(db_path)
        await storage.init()
        LOGGER.debug("Run history: SQLite (%s)", db_path)
    else:
        LOGGER.debug("Run history: disabled (DB_PATH is empty)")
    return await args.handler(args, RunContext(settings=settings, storage=storage))


def run_cli(argv: list[str], settings: Settings | None = None) -> int:
    settings = settings if settings is not None else load_settings()
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc.usage}error: {exc}\n")
        return EXIT_ERROR
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        return asyncio.run(_dispatch(args, settings))
    except (
        InstanceError,
        ConfigError,
        NonFiniteStartError,
        OracleError,
        SinkhornUnderflowError,
        OSError,
    ) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR
    except Exception:
        LOGGER.exception("Unexpected failure in %s", args.command)
        return EXIT_ERROR


def main() -> None:
    settings = load_settings()
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    sys.exit(run_cli(sys.argv[1:], settings))


if __name__ == "__main__":
    main()

from __future__ import annotations

import argparse
import sys

from entropic_dual.handlers.common import EXIT_ERROR, EXIT_OK, RunContext, positive_int


def _fmt_value(value) -> str:
    return "-" if value is None else f"{value:.10g}"


async def cmd_history(args: argparse.Namespace, ctx: RunContext) -> int:
    if ctx.storage is None:
        sys.stderr.write("error: run history is disabled; set DB_PATH or pass --db\n")
        return EXIT_ERROR

    stats = await ctx.storage.get_run_stats()
    runs = await ctx.storage.get_recent_runs(args.limit)
    mean_iterations = stats["mean_iterations"]
    lines = [
        f"runs = {stats['runs']}",
        f"converged_runs = {stats['converged_runs']}",
        f"mean_iterations = {_fmt_value(mean_iterations)}",
        f"last_run_at = {stats['last_run_at'] or '-'}",
    ]
    for run in runs:
        lines.append(
            " ".join(
                [
                    f"#{run['id']}",
                    str(run["created_at"]),
                    str(run["command"]),
                    str(run["kind"]),
                    f"eps={run['epsilon']:g}",
                    f"dual={_fmt_value(run['dual_value'])}",
                    f"primal={_fmt_value(run['primal_value'])}",
                    f"iter={run['iterations']}",
                    "converged" if run["converged"] else "not-converged",
                    str(run["instance"] or "-"),
                ]
            )
        )
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("history", parents=[parent], help="show the recorded solver runs")
    parser.add_argument("--limit", type=positive_int, default=15, help="number of recent runs to list")
    parser.set_defaults(handler=cmd_history)

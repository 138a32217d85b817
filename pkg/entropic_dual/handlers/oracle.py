from __future__ import annotations

import argparse
import asyncio
from pathlib import Path

from entropic_dual.handlers.common import EXIT_OK, RunContext, emit, load_instance
from entropic_dual.services.core import LpInstance, OtInstance
from entropic_dual.services.instance_io import format_oracle
from entropic_dual.services.oracle import lp_vertex_solve, primal_bruteforce
from entropic_dual.services.ot import ot_to_lp


async def cmd_oracle(args: argparse.Namespace, ctx: RunContext) -> int:
    inst = load_instance(args.instance, LpInstance, OtInstance)
    if isinstance(inst, OtInstance):
        inst, _ = ot_to_lp(inst)
    solution = await asyncio.to_thread(lp_vertex_solve, inst)
    regularized = None
    if args.regularized:
        value, point = await asyncio.to_thread(primal_bruteforce, inst, args.epsilon)
        regularized = (args.epsilon, value, point)
    emit(args, format_oracle(solution, regularized, args.format))
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("oracle", parents=[parent], help="exact small-LP optimum by vertex enumeration")
    parser.add_argument("instance", type=Path, help="LP or OT instance file")
    parser.add_argument(
        "--regularized",
        action="store_true",
        help="also minimize the regularized primal directly at --epsilon",
    )
    parser.set_defaults(handler=cmd_oracle)

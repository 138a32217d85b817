from __future__ import annotations

import argparse
import logging
import sys

from entropic_dual.handlers.common import EXIT_OK, RunContext, positive_int
from entropic_dual.services.generators import generate_lp, generate_ot, generate_sdp
from entropic_dual.services.instance_io import serialize_instance, write_instance

LOGGER = logging.getLogger(__name__)


async def cmd_generate(args: argparse.Namespace, ctx: RunContext) -> int:
    if args.kind == "lp":
        inst, _ = generate_lp(args.seed, args.d, args.m, with_compactness_row=args.compact)
    elif args.kind == "sdp":
        inst, _ = generate_sdp(args.seed, args.n, args.m, with_trace_row=args.compact)
    else:
        inst = generate_ot(args.seed, args.n1, args.n2)
    LOGGER.info("Generated %s instance with seed %d", args.kind.upper(), args.seed)

    if args.out is None:
        sys.stdout.write(serialize_instance(inst))
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        write_instance(args.out, inst)
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("generate", parents=[parent], help="write a random feasible instance")
    parser.add_argument("--kind", choices=("lp", "sdp", "ot"), default="lp")
    parser.add_argument("--d", type=positive_int, default=10, help="LP variables")
    parser.add_argument("--m", type=positive_int, default=3, help="LP/SDP constraints")
    parser.add_argument("--n", type=positive_int, default=4, help="SDP matrix size")
    parser.add_argument("--n1", type=positive_int, default=3, help="OT source size")
    parser.add_argument("--n2", type=positive_int, default=3, help="OT target size")
    parser.add_argument(
        "--compact",
        action="store_true",
        help="all-ones first LP row or identity first SDP constraint (bounded feasible set)",
    )
    parser.set_defaults(handler=cmd_generate)

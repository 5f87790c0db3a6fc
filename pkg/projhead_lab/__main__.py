import argparse
import asyncio
import sys
from rich.console import Console
from . import __version__
from .commands import COMMANDS
from .env import Env
from .utils.logger import ConsoleLogger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="projhead-lab",
        description="Contrastive learning with projection heads: training regimes, diagnostics, evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS.get_all_commands():
        command.add_arguments(sub.add_parser(command.name, help=command.description))
    return parser


async def main_loop(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    name = args.pop("command")
    console = ConsoleLogger(Console())
    env = Env.from_home()
    r = await COMMANDS.execute(env, name, args)
    if r.exit_code == 0:
        console.info(name, r.message)
    else:
        console.error(name, r.message)
    return r.exit_code


def main(argv=None):
    sys.exit(asyncio.run(main_loop(argv)))


if __name__ == "__main__":
    main()

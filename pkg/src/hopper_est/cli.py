"""hopper-est command-line entry point."""

import argparse
import asyncio
import json
import logging
import os
import sys
from collections.abc import Awaitable, Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

from .models import ControlSource, FilterKind
from .services.config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    load_run_config,
    parse_run_config,
)
from .utils.results import exception_response

logger = logging.getLogger(__name__)

LOG_LEVEL = os.environ.get("HOPPER_EST_LOG_LEVEL", "INFO").upper()

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_ERROR = 3

CommandFunc = Callable[[RunConfig], Awaitable[dict[str, Any]]]


@dataclass(frozen=True, slots=True)
class Command:
    name: str
    func: CommandFunc
    help: str
    arguments: tuple[tuple[str, dict[str, Any]], ...] = field(default_factory=tuple)


class CommandRegistry:
    """Named subcommands; registering a name twice is an error."""

    def __init__(self) -> None:
        self._commands: dict[str, Command] = {}

    def command(
        self,
        name: str,
        help: str,
        arguments: Sequence[tuple[str, dict[str, Any]]] = (),
    ) -> Callable[[CommandFunc], CommandFunc]:
        def register(func: CommandFunc) -> CommandFunc:
            if name in self._commands:
                raise ValueError(f"Command '{name}' is already registered")
            self._commands[name] = Command(name, func, help, tuple(arguments))
            return func

        return register

    def __getitem__(self, name: str) -> Command:
        return self._commands[name]

    def __iter__(self):
        return iter(self._commands.values())

    def names(self) -> list[str]:
        return list(self._commands)


# app must be defined before importing commands (commands import app back)
app = CommandRegistry()

from . import commands  # noqa: E402,F401


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hopper-est",
        description="IMU-only vertical state estimation for hopping robots",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for cmd in app:
        p = sub.add_parser(cmd.name, help=cmd.help, description=cmd.help)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, help="Master seed")
        p.add_argument("--out-dir", help="Directory for output artifacts")
        p.add_argument("--filter", choices=[k.value for k in FilterKind], help="Filter kind")
        p.add_argument(
            "--control-source",
            choices=[s.value for s in ControlSource],
            help="Height controller input: true state (gt) or estimate (se)",
        )
        p.add_argument("--threads", type=int, help="Worker processes")
        for flag, kwargs in cmd.arguments:
            p.add_argument(flag, **kwargs)
    return parser


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else parse_run_config({})
    return apply_overrides(
        cfg,
        seed=args.seed,
        out_dir=args.out_dir,
        filter_kind=args.filter,
        control_source=args.control_source,
        threads=args.threads,
        agility_inputs=getattr(args, "inputs", None),
    )


def exit_code(result: dict[str, Any]) -> int:
    if not result.get("error"):
        return EXIT_OK
    return EXIT_CONFIG_ERROR if result.get("code") == "config_error" else EXIT_ERROR


def run_command(name: str, cfg: RunConfig) -> dict[str, Any]:
    """Run one registered command and return its summary or error payload."""
    return asyncio.run(app[name].func(cfg))


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point for the ``hopper-est`` console script."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = _load(args)
    except ConfigError as e:
        logger.error("%s", e)
        result = exception_response(e)
    else:
        result = run_command(args.command, cfg)

    json.dump(result, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")
    return exit_code(result)


if __name__ == "__main__":
    sys.exit(main())


__all__: list[str] = ["CommandRegistry", "app", "build_parser", "exit_code", "main", "run_command"]

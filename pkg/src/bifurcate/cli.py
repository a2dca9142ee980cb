"""``bifurcate`` command-line entry point."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .config import ConfigError, load_config
from .report import EXIT_ERROR, SUBCOMMANDS

PROG = "bifurcate"


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1; status 2 is reserved for rule violations."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error [cli]: {message}\n")


def _pair(text: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Bifurcation diagrams of gradient families near Lagrangian singularities.")
    p.add_argument("command", choices=list(SUBCOMMANDS), help="pipeline stage to run")
    p.add_argument("--config", required=True, type=Path, help="run configuration (key = value lines)")
    p.add_argument("--x", type=_pair, help="parameter point x1,x2 for critpts and portrait")
    p.add_argument("--r", type=float, help="circle radius for scan")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--diagram", type=Path, help="diagram.json for validate (default: <out>/diagram.json)")
    return p


def provenance(exc: BaseException) -> str:
    """Module of the package where the exception was raised."""
    tb = exc.__traceback__
    mod = None
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("bifurcate."):
            mod = name.split(".", 1)[1]
        tb = tb.tb_next
    return mod or type(exc).__module__.split(".")[-1]


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(r=args.r, out=args.out)
    except ConfigError as exc:
        print(f"{PROG}: error [config]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    cmd = args.command
    kwargs: dict = {}
    if cmd in ("critpts", "portrait", "report"):
        kwargs["x"] = args.x
    if cmd in ("scan", "report"):
        kwargs["r"] = args.r
    if cmd == "validate" and args.diagram is not None:
        kwargs["diagram_path"] = args.diagram
    try:
        result = SUBCOMMANDS[cmd](cfg, **kwargs)
    except KeyboardInterrupt:
        print(f"{PROG}: interrupted", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # surfaced with the module that raised it
        print(f"{PROG}: error [{provenance(exc)}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for m in result.messages:
        print(m)
    for f in result.files:
        print(f"wrote {f}")
    return result.status


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))

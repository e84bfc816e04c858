"""
cli.py -- Command-line interface for HypoKernel
Handles CLI arguments and subcommands (check, eval, verify, config, info)
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .configure import main as configure_main
from .utils import (
    APP_VERSION,
    LOG_LEVELS,
    ConfigManager,
    LogManager,
    get_app_dir,
    get_config_path,
    get_log_path,
    thread_cap,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypokernel",
        description="HypoKernel - kernels, semigroups and fractional powers of hypoelliptic Kolmogorov operators",
        epilog="Run 'hypokernel info' to see where settings and logs live.",
    )

    parser.add_argument("--version", action="version", version=f"HypoKernel {APP_VERSION}")
    parser.add_argument("--settings", metavar="PATH", help="settings INI file (default: per-user file)")
    parser.add_argument("--log-file", metavar="PATH", help="log file (default: per-user log directory)")
    parser.add_argument(
        "--log-level",
        choices=LOG_LEVELS,
        type=str.upper,
        help="log level (default: [runtime] log_level from settings, WARNING if unset)",
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    def with_io(sub: argparse.ArgumentParser) -> argparse.ArgumentParser:
        sub.add_argument("-c", "--config", required=True, metavar="FILE", help="run configuration (JSON)")
        sub.add_argument("-o", "--output", metavar="FILE", help="write the report here instead of stdout")
        return sub

    with_io(subparsers.add_parser("check", help="Report whether the model is hypoelliptic (JSON)"))

    eval_parser = with_io(subparsers.add_parser("eval", help="Evaluate a quantity at the configured points (CSV)"))
    eval_parser.add_argument("--what", required=True, choices=("kernel", "semigroup", "frac", "extend", "dtn", "resolvent"))

    verify_parser = with_io(subparsers.add_parser("verify", help="Run invariant suites (JSON)"))
    verify_parser.add_argument(
        "--suite", default="all", choices=("kernels", "semigroup", "fractional", "extension", "all")
    )

    config_parser = subparsers.add_parser("config", help="Edit the quadrature and runtime settings")
    config_parser.add_argument("--show", action="store_true", help="print the current settings and exit")

    subparsers.add_parser("info", help="Show HypoKernel installation and configuration information")
    return parser


def _setup_logging(args: argparse.Namespace) -> None:
    level = args.log_level
    if level is None:
        level = ConfigManager(args.settings).get_runtime_settings().log_level
    LogManager.setup(level=getattr(logging, level), log_file=args.log_file)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point for the hypokernel command."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage errors map to 1 here
        code = 0 if exc.code in (0, None) else 1
        if argv is None:
            sys.exit(code)
        return code

    if args.command is None:
        parser.print_help()
        code = 1
    elif args.command == "config":
        code = configure_main(args.settings, show_only=args.show)
    elif args.command == "info":
        show_info(args.settings)
        code = 0
    else:
        _setup_logging(args)
        from . import main as commands

        if args.command == "check":
            command = commands.cmd_check
        elif args.command == "eval":
            what = args.what

            def command(session, out):
                return commands.cmd_eval(session, what, out)

        else:
            suite = args.suite

            def command(session, out):
                return commands.cmd_verify(session, suite, out)

        code = commands.run(command, args.config, args.settings, args.output)

    if argv is None:
        sys.exit(code)
    return code


def show_info(settings_path: Optional[str] = None) -> None:
    """Display installation and configuration information."""
    path = settings_path or get_config_path()
    print("=" * 60)
    print("HypoKernel - hypoelliptic Kolmogorov operators")
    print("=" * 60)
    print(f"Version: {APP_VERSION}")
    print(f"Application Directory: {get_app_dir()}")
    print(f"Settings File: {path}")
    print(f"Log File: {get_log_path()}")

    existed = Path(path).exists()
    try:
        cm = ConfigManager(path)
        quad = cm.get_quadrature_config()
        runtime = cm.get_runtime_settings()
        print(f"Settings Status: {'✓ Exists' if existed else '✓ Created with defaults'}")

        print("\nQuadrature:")
        for key, value in quad.to_dict().items():
            print(f"  {key}: {value}")

        print("\nRuntime:")
        print(f"  Threads: {runtime.threads} (effective {thread_cap(runtime)})")
        print(f"  Log Level: {runtime.log_level}")
    except Exception as e:
        print(f"  Error reading settings: {e}")

    print("=" * 60)
    print("\nUsage:")
    print("  hypokernel check  -c model.json           - Hypoellipticity report")
    print("  hypokernel eval   --what dtn -c run.json  - Evaluate at configured points")
    print("  hypokernel verify --suite all -c run.json - Run invariant suites")
    print("  hypokernel config                         - Edit settings")
    print("  hypokernel info                           - Show this information")
    print("=" * 60)


if __name__ == "__main__":
    main()

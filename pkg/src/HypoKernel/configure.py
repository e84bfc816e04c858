"""
configure.py -- interactive editor for the HypoKernel settings file
"""

from __future__ import annotations

from typing import Callable, Optional

from .errors import DomainError
from .quadrature import QuadratureConfig
from .utils import LOG_LEVELS, QUADRATURE_DEFAULTS, ConfigManager, RuntimeSettings


def show_settings(cm: ConfigManager) -> None:
    print(f"Settings file: {cm.config_path}\n")
    raw = cm.get_raw()
    for section in raw.sections():
        print(f"[{section}]")
        for key, value in raw[section].items():
            print(f"{key} = {value}")
        print()


def _ask(prompt: str, default: str, check: Callable[[str], object], ask: Callable[[str], str]) -> str:
    """Prompt until the answer parses; Enter keeps the default."""
    while True:
        answer = ask(f"{prompt} [{default}]: ").strip() or default
        try:
            check(answer)
            return answer
        except ValueError as exc:
            print(f"  invalid value {answer!r}: {exc}")


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise ValueError("must be a positive integer")
    return value


def _log_level(raw: str) -> str:
    if raw.upper() not in LOG_LEVELS:
        raise ValueError(f"expected one of {', '.join(LOG_LEVELS)}")
    return raw.upper()


def main(settings_path: Optional[str] = None, show_only: bool = False, ask: Callable[[str], str] = input) -> int:
    """Show the current settings and, on confirmation, prompt for each value."""
    cm = ConfigManager(settings_path)
    show_settings(cm)
    if show_only:
        return 0

    overwrite = ask("Do you want to change these settings? (y/N): ")
    if overwrite.strip().lower() != "y":
        print("Exiting without changes.")
        return 0

    print("Please answer the prompts below:")
    print("Hit Enter to keep the value shown in [brackets].\n")
    raw = cm.get_raw()
    for section in ("quadrature", "runtime"):
        if not raw.has_section(section):
            raw.add_section(section)

    print("--- Quadrature ---")
    casts = {"gh_nodes": int, "max_subdiv": int, "max_degree": int}
    for key, fallback in QUADRATURE_DEFAULTS.items():
        current = raw.get("quadrature", key, fallback=fallback)
        cast = casts.get(key, float)
        raw.set("quadrature", key, _ask(key, current, cast, ask))

    try:
        values = {k: casts.get(k, float)(v) for k, v in raw.items("quadrature")}
        QuadratureConfig(**values)
    except (DomainError, TypeError) as exc:
        print(f"\nQuadrature settings rejected: {exc}")
        print("Exiting without changes.")
        cm.load()
        return 1

    print("\n--- Runtime ---")
    defaults = RuntimeSettings()
    threads = raw.get("runtime", "threads", fallback=str(defaults.threads))
    raw.set("runtime", "threads", _ask("threads", threads, _positive_int, ask))
    level = raw.get("runtime", "log_level", fallback=defaults.log_level)
    raw.set("runtime", "log_level", _log_level(_ask("log_level", level, _log_level, ask)))

    cm.save()
    print(f"\nSettings saved to: {cm.config_path}")
    return 0


if __name__ == "__main__":
    main()

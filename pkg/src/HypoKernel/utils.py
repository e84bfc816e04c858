"""
utils.py -- Utility functions and classes for HypoKernel (logging, paths, settings).

Features
- platformdirs-based application directories (data, logs)
- queue-backed logging with a RotatingFileHandler (prevents duplicate handlers)
- ConfigManager that creates a settings template on first run
- Typed small dataclasses for settings returned by ConfigManager
- HYPOKERNEL_THREADS environment cap for the evaluation pool
"""

from __future__ import annotations

import atexit
import configparser
import logging
import logging.handlers
import os
import queue
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

import platformdirs

if TYPE_CHECKING:
    from .quadrature import QuadratureConfig

# --------------------------
# Constants / Defaults
# --------------------------
APP_NAME = "HypoKernel"
APP_AUTHOR = "HypoKernel"
APP_VERSION = "1.0.0"
CONFIG_FILE_NAME = "hypokernelcfg.ini"
LOG_FILE_NAME = "hypokernel.log"
THREADS_ENV_VAR = "HYPOKERNEL_THREADS"

DEFAULT_MAX_LOG_BYTES = 5 * 1024 * 1024  # 5 MB
DEFAULT_LOG_BACKUP_COUNT = 5
DEFAULT_MAX_THREADS = 8

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


# --------------------------
# Dataclasses for typed settings
# --------------------------
@dataclass
class RuntimeSettings:
    threads: int = min(os.cpu_count() or 1, DEFAULT_MAX_THREADS)
    log_level: str = "WARNING"


# --------------------------
# Paths & helpers
# --------------------------
def get_app_dir() -> str:
    """Return and ensure application data directory exists."""
    app_dir = platformdirs.user_data_dir(APP_NAME, APP_AUTHOR)
    Path(app_dir).mkdir(parents=True, exist_ok=True)
    return app_dir


def get_config_path() -> str:
    """Return full path to the settings file (parent directory is created)."""
    cfg = Path(get_app_dir()) / CONFIG_FILE_NAME
    cfg.parent.mkdir(parents=True, exist_ok=True)
    return str(cfg)


def get_log_path() -> str:
    """Return full path to log file (creates parent dir)."""
    lp = Path(platformdirs.user_log_dir(APP_NAME, APP_AUTHOR)) / LOG_FILE_NAME
    lp.parent.mkdir(parents=True, exist_ok=True)
    # handler creates the file lazily
    return str(lp)


def thread_cap(settings: Optional[RuntimeSettings] = None) -> int:
    """Worker count for per-point evaluation: settings value, capped by HYPOKERNEL_THREADS."""
    threads = (settings or RuntimeSettings()).threads
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return max(1, threads)
    try:
        cap = int(raw)
        if cap < 1:
            raise ValueError(raw)
    except ValueError:
        LogManager.get("Utils").warning("Ignoring invalid %s=%r", THREADS_ENV_VAR, raw)
        return max(1, threads)
    return max(1, min(threads, cap))


# --------------------------
# Logging
# --------------------------
class LogManager:
    """
    Centralized logging setup using QueueHandler and QueueListener.

    File and console I/O happen on the listener thread, so evaluation workers never block
    on a handler. The console handler writes to stderr; stdout is reserved for reports.

    Usage:
        LogManager.setup()            # sets up the HypoKernel logger (idempotent)
        logger = LogManager.get("Covariance")

    Cleanup:
        LogManager.shutdown()         # stops the queue listener (automatic on exit)
    """

    _is_setup = False
    _queue_listener: Optional[logging.handlers.QueueListener] = None
    _log_queue: Optional[queue.Queue] = None

    @classmethod
    def setup(
        cls,
        level: int = logging.INFO,
        log_file: Optional[str] = None,
        max_bytes: int = DEFAULT_MAX_LOG_BYTES,
        backup_count: int = DEFAULT_LOG_BACKUP_COUNT,
    ) -> None:
        """Configure queue-backed logging for the application. Idempotent."""
        if cls._is_setup:
            return

        log_file = log_file or get_log_path()
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger = logging.getLogger(APP_NAME)
        logger.setLevel(level)

        if logger.handlers:
            cls._is_setup = True
            return

        cls._log_queue = queue.Queue(-1)

        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding="utf-8",
        )
        file_fmt = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s", "%Y-%m-%d %H:%M:%S"
        )
        file_handler.setFormatter(file_fmt)
        file_handler.setLevel(level)

        console_handler = logging.StreamHandler()
        console_fmt = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s", "%H:%M:%S")
        console_handler.setFormatter(console_fmt)
        console_handler.setLevel(level)

        cls._queue_listener = logging.handlers.QueueListener(
            cls._log_queue, file_handler, console_handler, respect_handler_level=True
        )
        cls._queue_listener.start()

        logger.addHandler(logging.handlers.QueueHandler(cls._log_queue))
        logger.propagate = False

        logger.debug("LogManager initialized. Logging to %s", log_file)
        cls._is_setup = True

        atexit.register(cls.shutdown)

    @classmethod
    def shutdown(cls) -> None:
        """Stop the queue listener and flush remaining logs. Safe to call multiple times."""
        logger = logging.getLogger(APP_NAME)
        if cls._queue_listener is not None:
            cls._queue_listener.stop()
            for handler in cls._queue_listener.handlers:
                handler.close()
            cls._queue_listener = None
        for handler in list(logger.handlers):
            if isinstance(handler, logging.handlers.QueueHandler):
                logger.removeHandler(handler)
        cls._log_queue = None
        cls._is_setup = False

    @staticmethod
    def get(name: str) -> logging.Logger:
        """Get a logger under the application namespace (APP_NAME.name)."""
        return logging.getLogger(f"{APP_NAME}.{name}")


# --------------------------
# Settings Management
# --------------------------
QUADRATURE_DEFAULTS = {
    "gh_nodes": "40",
    "abs_tol": "1e-12",
    "rel_tol": "1e-10",
    "max_subdiv": "2000",
    "balakrishnan_split": "1.0",
    "tail_cut": "1e-16",
    "t_max": "1e10",
    "max_degree": "16",
}


def default_settings_template() -> configparser.ConfigParser:
    template = configparser.ConfigParser()
    template["quadrature"] = dict(QUADRATURE_DEFAULTS)
    defaults = RuntimeSettings()
    template["runtime"] = {"threads": str(defaults.threads), "log_level": defaults.log_level}
    return template


class ConfigManager:
    """Loads, validates and provides user settings (quadrature defaults and runtime)."""

    def __init__(self, config_path: Optional[str] = None) -> None:
        self._logger = LogManager.get("ConfigManager")

        self.config_path = config_path or get_config_path()
        self._cfg = configparser.ConfigParser()
        self._ensure_config_exists()
        self.load()

    def _ensure_config_exists(self) -> None:
        """If file is missing or empty, write the default template."""
        p = Path(self.config_path)
        if not p.exists() or p.stat().st_size == 0:
            self._logger.info("Settings file %s missing or empty, writing template.", p)
            p.parent.mkdir(parents=True, exist_ok=True)
            with open(p, "w", encoding="utf-8") as fh:
                default_settings_template().write(fh)

    def load(self) -> None:
        """Read the settings file into memory."""
        try:
            read = self._cfg.read(self.config_path, encoding="utf-8")
            if not read:
                self._logger.warning("Settings file %s could not be read", self.config_path)
            else:
                self._logger.debug("Settings loaded from %s", self.config_path)
        except configparser.Error:
            self._logger.exception("Failed to parse settings file %s", self.config_path)
            raise

    def save(self) -> None:
        """Persist current in-memory settings to disk."""
        try:
            with open(self.config_path, "w", encoding="utf-8") as fh:
                self._cfg.write(fh)
            self._logger.info("Settings saved to %s", self.config_path)
        except OSError:
            self._logger.exception("Failed to save settings to %s", self.config_path)
            raise

    # ----- getters (typed) -----
    def get_quadrature_config(self) -> QuadratureConfig:
        """QuadratureConfig from the [quadrature] section; bad values fall back to defaults."""
        from .quadrature import QuadratureConfig

        sec = "quadrature"
        base = QuadratureConfig()
        values: dict[str, Any] = {}
        casts = {
            "gh_nodes": int,
            "max_subdiv": int,
            "max_degree": int,
            "abs_tol": float,
            "rel_tol": float,
            "balakrishnan_split": float,
            "tail_cut": float,
            "t_max": float,
        }
        for key, cast in casts.items():
            raw = self._cfg.get(sec, key, fallback=None)
            if raw is None:
                continue
            try:
                values[key] = cast(raw)
            except ValueError:
                self._logger.warning("Invalid %s.%s=%r; using %r", sec, key, raw, getattr(base, key))
        try:
            return base.replace(**values)
        except ValueError:
            self._logger.exception("Invalid quadrature settings; using defaults.")
            return base

    def get_runtime_settings(self) -> RuntimeSettings:
        sec = "runtime"
        defaults = RuntimeSettings()
        try:
            threads = int(self._cfg.get(sec, "threads", fallback=str(defaults.threads)))
            log_level = self._cfg.get(sec, "log_level", fallback=defaults.log_level).upper()
            if threads < 1 or log_level not in LOG_LEVELS:
                raise ValueError(f"threads={threads}, log_level={log_level}")
            return RuntimeSettings(threads=threads, log_level=log_level)
        except ValueError:
            self._logger.exception("Error reading runtime settings; using defaults.")
            return defaults

    # ----- raw access for advanced users -----
    def get_raw(self) -> configparser.ConfigParser:
        """Return the underlying ConfigParser instance for advanced reads/writes."""
        return self._cfg

    def set_option(self, section: str, option: str, value: Any) -> None:
        """Convenience to set and persist an option."""
        if not self._cfg.has_section(section):
            self._cfg.add_section(section)
        self._cfg.set(section, option, str(value))
        self.save()

"""
main.py -- command implementations behind the hypokernel CLI
- loads settings and the run configuration
- dispatches check / eval / verify
- maps failures onto the exit-code contract
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, TextIO

import numpy as np

from . import extension, fractional, semigroup
from .covariance import DEFAULT_SAMPLE_TIMES, hypo_report
from .errors import ConfigError, DomainError, PointEvaluationError, PreconditionError
from .evalManager import EvalManager
from .kernels import FractionalParams, hormander_kernel, require_hypoelliptic
from .quadrature import QuadratureConfig
from .runConfig import PointSpec, RunConfig
from .utils import ConfigManager, LogManager, RuntimeSettings, thread_cap
from .verification import run_suites

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PRECONDITION = 2
EXIT_VERIFY_FAILED = 3

EVAL_TASKS = ("kernel", "semigroup", "frac", "extend", "dtn", "resolvent")
VERIFY_SUITES = ("kernels", "semigroup", "fractional", "extension", "all")

logger = LogManager.get("Main")


@dataclass
class Session:
    """What every command needs: the parsed run config plus the user settings."""

    config: RunConfig
    quad: QuadratureConfig
    runtime: RuntimeSettings

    @classmethod
    def open(cls, config_path: str, settings_path: Optional[str] = None) -> Session:
        settings = ConfigManager(settings_path)
        config = RunConfig.load(config_path)
        quad = config.quadrature(settings.get_quadrature_config())
        logger.info("Loaded %s (model %s, N=%d)", config_path, config.model.name, config.N)
        return cls(config, quad, settings.get_runtime_settings())


# -----------------------------------------------------------------------------
# Output
# -----------------------------------------------------------------------------

def write_json(doc: Any, out: TextIO) -> None:
    out.write(json.dumps(doc, sort_keys=True, indent=2))
    out.write("\n")


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])


# -----------------------------------------------------------------------------
# check
# -----------------------------------------------------------------------------

def cmd_check(session: Session, out: TextIO) -> int:
    """HypoReport as JSON; exit 0 when hypoelliptic, 2 otherwise."""
    config = session.config
    times = config.sample_times or DEFAULT_SAMPLE_TIMES
    report = hypo_report(config.model, times)
    doc = report.to_dict()
    doc["model"] = config.model.name
    write_json(doc, out)
    return EXIT_OK if report.is_hypoelliptic else EXIT_PRECONDITION


# -----------------------------------------------------------------------------
# eval
# -----------------------------------------------------------------------------

def _need(point: PointSpec, key: str) -> Any:
    value = getattr(point, key)
    if value is None:
        raise ConfigError(f"point is missing {key!r}")
    return value


def _coords(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


@dataclass
class EvalTask:
    header: list[str]
    evaluate: Callable[[PointSpec], list[list[Any]]]


def build_task(what: str, session: Session) -> EvalTask:
    """Header and per-point evaluator for one eval task; rows come back as lists."""
    config, quad = session.config, session.quad
    model = config.model
    n = config.N
    X_cols = _coords("X", n)

    if what == "kernel":

        def kernel(p: PointSpec) -> list[list[Any]]:
            Y, t = _need(p, "Y"), _need(p, "t")
            return [[*p.X, *Y, t, hormander_kernel(model, p.X, Y, t)]]

        return EvalTask([*X_cols, *_coords("Y", n), "t", "kernel"], kernel)

    fn = config.require_function()
    dependent = fn.time is not None

    if what == "semigroup":
        if dependent:
            u = fn.space_time_function(quad.max_degree)

            def semigroup_K(p: PointSpec) -> list[list[Any]]:
                t, tau = _need(p, "t"), _need(p, "tau")
                return [[*p.X, t, tau, semigroup.apply_PK(u, model, p.X, t, tau, quad)]]

            return EvalTask([*X_cols, "t", "tau", "value"], semigroup_K)
        f = fn.space_function(quad.max_degree)

        def semigroup_A(p: PointSpec) -> list[list[Any]]:
            t = _need(p, "t")
            return [[*p.X, t, semigroup.apply_Pt(f, model, p.X, t, quad)]]

        return EvalTask([*X_cols, "t", "value"], semigroup_A)

    if what == "resolvent":
        f = fn.space_function(quad.max_degree)

        def resolvent(p: PointSpec) -> list[list[Any]]:
            lam = _need(p, "lam")
            return [[*p.X, lam, semigroup.resolvent_apply(f, model, lam, p.X, quad)]]

        return EvalTask([*X_cols, "lam", "value"], resolvent)

    s = FractionalParams(config.require_s()).s
    a = 1.0 - 2.0 * s

    if what == "frac":
        if dependent:
            u = fn.space_time_function(quad.max_degree)

            def frac_K(p: PointSpec) -> list[list[Any]]:
                t = _need(p, "t")
                return [[*p.X, t, fractional.frac_K(u, model, p.X, t, s, quad)]]

            return EvalTask([*X_cols, "t", "frac_value"], frac_K)
        f = fn.space_function(quad.max_degree)

        def frac_A(p: PointSpec) -> list[list[Any]]:
            return [[*p.X, fractional.frac_A(f, model, p.X, s, quad)]]

        return EvalTask([*X_cols, "frac_value"], frac_A)

    if what == "extend":
        if dependent:
            u = fn.space_time_function(quad.max_degree)

            def extend_K(p: PointSpec) -> list[list[Any]]:
                t, z = _need(p, "t"), _need(p, "z")
                return [[*p.X, t, z, extension.extend_K(u, model, p.X, t, z, a, quad)]]

            return EvalTask([*X_cols, "t", "z", "value"], extend_K)
        f = fn.space_function(quad.max_degree)

        def extend_A(p: PointSpec) -> list[list[Any]]:
            z = _need(p, "z")
            return [[*p.X, z, extension.extend_A(f, model, p.X, z, a, quad)]]

        return EvalTask([*X_cols, "z", "value"], extend_A)

    if what == "dtn":
        z_grid = config.z_grid or extension.DEFAULT_Z_GRID
        data = fn.space_time_function(quad.max_degree) if dependent else fn.space_function(quad.max_degree)

        def dtn(p: PointSpec) -> list[list[Any]]:
            t = _need(p, "t") if dependent else 0.0
            sweep = extension.dtn_sweep(data, model, p.X, t, s, z_grid, quad)
            return [[r.z, r.value, r.target, r.abs_err] for r in sweep.rows]

        return EvalTask(["z", "dtn_value", "frac_value", "abs_err"], dtn)

    raise DomainError(f"unknown eval task {what!r}")


def cmd_eval(session: Session, what: str, out: TextIO) -> int:
    """One CSV row per point (per z for dtn), in input order."""
    require_hypoelliptic(session.config.model)
    task = build_task(what, session)
    points = session.config.require_points()
    manager = EvalManager(task.evaluate, thread_cap(session.runtime))
    results = manager.run(points)
    write_csv(task.header, [row for rows in results for row in rows], out)
    logger.info("eval %s: %d points", what, len(points))
    return EXIT_OK


# -----------------------------------------------------------------------------
# verify
# -----------------------------------------------------------------------------

def cmd_verify(session: Session, suite: str, out: TextIO) -> int:
    """Run the named suites; exit 3 if any check fails."""
    config = session.config
    function = config.function.space_function(session.quad.max_degree) if config.function else None
    reports = run_suites(suite, config.model, session.quad, function, config.s)
    passed = all(r.passed for r in reports)
    write_json(
        {
            "model": config.model.name,
            "suite": suite,
            "passed": passed,
            "suites": [r.to_dict() for r in reports],
        },
        out,
    )
    for report in reports:
        for check in report.failures:
            logger.warning("%s/%s failed: %.3e vs %.1e", report.suite, check.name, check.value, check.tolerance)
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


# -----------------------------------------------------------------------------
# Entry Point
# -----------------------------------------------------------------------------

def run(
    command: Callable[[Session, TextIO], int],
    config_path: str,
    settings_path: Optional[str] = None,
    output: Optional[str] = None,
) -> int:
    """Open a session, run one command and translate failures into exit codes."""
    try:
        session = Session.open(config_path, settings_path)
        if output is None:
            return command(session, sys.stdout)
        with open(output, "w", encoding="utf-8", newline="") as fh:
            return command(session, fh)
    except PreconditionError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except PointEvaluationError as exc:
        logger.error("%s", exc)
        print(f"error: point {exc.index} failed: {exc.cause}", file=sys.stderr)
        return EXIT_FAILURE
    except json.JSONDecodeError as exc:
        print(f"error: {config_path} is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ConfigError, DomainError, OSError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:
        logger.exception("Command failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE

"""
runConfig.py -- Strict JSON run configuration for the command line.

Every block rejects unknown keys. Matrices are row-major arrays of arrays and must be N×N;
every point vector must have length N. to_dict() and from_dict() are inverses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DomainError
from .funcspace import (
    GaussPolyFunction,
    ModelSpec,
    Polynomial,
    SpaceTimeGaussPoly,
    heat_model,
    kolmogorov_model,
    kramers_model,
    ou_model,
)
from .quadrature import QuadratureConfig

PRESETS = ("heat", "ou", "kolmogorov", "kramers")
POINT_KEYS = ("X", "Y", "t", "tau", "z", "lam")
GRID_KEYS = ("z_grid", "t_grid", "sample_times")
INTEGER_QUAD_KEYS = ("gh_nodes", "max_subdiv", "max_degree")
TOP_KEYS = {"model", "fractional", "quadrature", "function", "points", *GRID_KEYS}


# --------------------------
# Field parsers
# --------------------------
def _check_keys(block: Any, allowed: set, where: str) -> Mapping:
    if not isinstance(block, Mapping):
        raise ConfigError(f"{where} must be an object")
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    return block


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _vector(value: Any, where: str, n: Optional[int] = None) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError(f"{where} must be an array")
    vec = tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))
    if n is not None and len(vec) != n:
        raise ConfigError(f"{where} has length {len(vec)}, expected {n}")
    return vec


def _matrix(value: Any, where: str, n: Optional[int] = None) -> tuple[tuple[float, ...], ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where} must be a non-empty array of rows")
    rows = tuple(_vector(r, f"{where}[{i}]") for i, r in enumerate(value))
    width = len(rows)
    if any(len(r) != width for r in rows):
        raise ConfigError(f"{where} must be square with {width} columns in every row")
    if n is not None and width != n:
        raise ConfigError(f"{where} is {width}×{width}, expected {n}×{n}")
    return rows


# --------------------------
# Blocks
# --------------------------
@dataclass(frozen=True)
class ModelBlock:
    Q: Optional[tuple] = None
    B: Optional[tuple] = None
    preset: Optional[str] = None
    N: Optional[int] = None
    n: Optional[int] = None

    @classmethod
    def from_dict(cls, block: Any) -> ModelBlock:
        block = _check_keys(block, {"Q", "B", "preset", "N", "n"}, "model")
        if "preset" in block:
            if "Q" in block or "B" in block:
                raise ConfigError("model: give either a preset or Q and B, not both")
            preset = block["preset"]
            if preset not in PRESETS:
                raise ConfigError(f"model.preset must be one of {PRESETS}, got {preset!r}")
            N = _integer(block["N"], "model.N") if "N" in block else None
            n = _integer(block["n"], "model.n") if "n" in block else None
            return cls(preset=preset, N=N, n=n)
        if "N" in block or "n" in block:
            raise ConfigError("model.N and model.n only apply to presets")
        if "Q" not in block or "B" not in block:
            raise ConfigError("model needs both Q and B (or a preset)")
        Q = _matrix(block["Q"], "model.Q")
        B = _matrix(block["B"], "model.B", len(Q))
        return cls(Q=Q, B=B)

    def build(self) -> ModelSpec:
        try:
            if self.preset is None:
                return ModelSpec(np.array(self.Q), np.array(self.B))
            if self.preset == "kolmogorov":
                return kolmogorov_model(self.n or 1)
            if self.preset == "kramers":
                return kramers_model()
            factory = heat_model if self.preset == "heat" else ou_model
            return factory(self.N or 1)
        except DomainError as exc:
            raise ConfigError(f"model: {exc}") from exc

    def to_dict(self) -> dict:
        if self.preset is None:
            return {"Q": [list(r) for r in self.Q], "B": [list(r) for r in self.B]}
        out: dict[str, Any] = {"preset": self.preset}
        if self.N is not None:
            out["N"] = self.N
        if self.n is not None:
            out["n"] = self.n
        return out


@dataclass(frozen=True)
class PolyBlock:
    center: tuple
    shape: tuple
    amplitude: float = 1.0
    poly: tuple = ()

    @classmethod
    def from_dict(cls, block: Any, where: str, n: int) -> PolyBlock:
        block = _check_keys(block, {"center", "shape", "amplitude", "poly"}, where)
        for key in ("center", "shape"):
            if key not in block:
                raise ConfigError(f"{where}.{key} is required")
        if n == 1 and not isinstance(block["center"], list):
            center = (_number(block["center"], f"{where}.center"),)
            shape = ((_number(block["shape"], f"{where}.shape"),),)
        else:
            center = _vector(block["center"], f"{where}.center", n)
            shape = _matrix(block["shape"], f"{where}.shape", n)
        amplitude = _number(block.get("amplitude", 1.0), f"{where}.amplitude")
        raw = block.get("poly", [{"exponent": [0] * n, "coeff": 1.0}])
        if not isinstance(raw, list):
            raise ConfigError(f"{where}.poly must be an array")
        terms = []
        for i, term in enumerate(raw):
            term = _check_keys(term, {"exponent", "coeff"}, f"{where}.poly[{i}]")
            exp = term.get("exponent")
            if not isinstance(exp, list) or len(exp) != n:
                raise ConfigError(f"{where}.poly[{i}].exponent must have length {n}")
            exp = tuple(_integer(e, f"{where}.poly[{i}].exponent") for e in exp)
            if any(e < 0 for e in exp):
                raise ConfigError(f"{where}.poly[{i}].exponent must be non-negative")
            terms.append((exp, _number(term.get("coeff"), f"{where}.poly[{i}].coeff")))
        return cls(center, shape, amplitude, tuple(terms))

    def build(self, max_degree: int) -> GaussPolyFunction:
        n = len(self.center)
        poly = Polynomial(n, {})
        for exp, c in self.poly:
            poly = poly + Polynomial(n, {exp: c})
        return GaussPolyFunction(
            np.array(self.center), np.array(self.shape), poly, self.amplitude, None,
            max(max_degree, poly.degree),
        )

    def to_dict(self, scalar: bool = False) -> dict:
        return {
            "center": self.center[0] if scalar else list(self.center),
            "shape": self.shape[0][0] if scalar else [list(r) for r in self.shape],
            "amplitude": self.amplitude,
            "poly": [{"exponent": list(e), "coeff": c} for e, c in self.poly],
        }


@dataclass(frozen=True)
class FunctionBlock:
    space: PolyBlock
    time: Optional[PolyBlock] = None

    @classmethod
    def from_dict(cls, block: Any, n: int) -> FunctionBlock:
        block = _check_keys(block, {"center", "shape", "amplitude", "poly", "time"}, "function")
        space_doc = {k: v for k, v in block.items() if k != "time"}
        space = PolyBlock.from_dict(space_doc, "function", n)
        time = block.get("time")
        return cls(space, None if time is None else PolyBlock.from_dict(time, "function.time", 1))

    def space_function(self, max_degree: int = 16) -> GaussPolyFunction:
        return self.space.build(max_degree)

    def space_time_function(self, max_degree: int = 16) -> SpaceTimeGaussPoly:
        h = None if self.time is None else self.time.build(max_degree)
        return SpaceTimeGaussPoly.from_factors(self.space.build(max_degree), h)

    def to_dict(self) -> dict:
        out = self.space.to_dict()
        out["time"] = None if self.time is None else self.time.to_dict(scalar=True)
        return out


@dataclass(frozen=True)
class PointSpec:
    X: tuple
    Y: Optional[tuple] = None
    t: Optional[float] = None
    tau: Optional[float] = None
    z: Optional[float] = None
    lam: Optional[float] = None

    @classmethod
    def from_dict(cls, block: Any, where: str, n: int) -> PointSpec:
        block = _check_keys(block, set(POINT_KEYS), where)
        if "X" not in block:
            raise ConfigError(f"{where}.X is required")
        values: dict[str, Any] = {"X": _vector(block["X"], f"{where}.X", n)}
        if "Y" in block:
            values["Y"] = _vector(block["Y"], f"{where}.Y", n)
        for key in ("t", "tau", "z", "lam"):
            if key in block:
                values[key] = _number(block[key], f"{where}.{key}")
        return cls(**values)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


# --------------------------
# RunConfig
# --------------------------
@dataclass(frozen=True)
class RunConfig:
    model_block: ModelBlock
    s: Optional[float] = None
    quadrature_overrides: tuple = ()
    function: Optional[FunctionBlock] = None
    points: tuple = ()
    z_grid: Optional[tuple] = None
    t_grid: Optional[tuple] = None
    sample_times: Optional[tuple] = None
    model: ModelSpec = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", self.model_block.build())

    @property
    def N(self) -> int:
        return self.model.N

    @classmethod
    def from_dict(cls, doc: Any) -> RunConfig:
        doc = _check_keys(doc, TOP_KEYS, "config")
        if "model" not in doc:
            raise ConfigError("config needs a model block")
        model_block = ModelBlock.from_dict(doc["model"])
        n = model_block.build().N

        s = None
        if "fractional" in doc:
            frac = _check_keys(doc["fractional"], {"s"}, "fractional")
            if "s" not in frac:
                raise ConfigError("fractional.s is required")
            s = _number(frac["s"], "fractional.s")

        overrides: tuple = ()
        if "quadrature" in doc:
            q = _check_keys(doc["quadrature"], {f.name for f in fields(QuadratureConfig)}, "quadrature")
            overrides = tuple(
                sorted(
                    (k, (_integer if k in INTEGER_QUAD_KEYS else _number)(v, f"quadrature.{k}"))
                    for k, v in q.items()
                )
            )

        function = None
        if doc.get("function") is not None:
            function = FunctionBlock.from_dict(doc["function"], n)

        raw_points = doc.get("points", [])
        if not isinstance(raw_points, list):
            raise ConfigError("points must be an array")
        points = tuple(PointSpec.from_dict(p, f"points[{i}]", n) for i, p in enumerate(raw_points))

        grids = {k: _vector(doc[k], k) if k in doc else None for k in GRID_KEYS}
        return cls(model_block, s, overrides, function, points, **grids)

    @classmethod
    def load(cls, path: Union[str, Path]) -> RunConfig:
        """Parse a JSON file; json.JSONDecodeError propagates."""
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"model": self.model_block.to_dict()}
        if self.s is not None:
            out["fractional"] = {"s": self.s}
        if self.quadrature_overrides:
            out["quadrature"] = dict(self.quadrature_overrides)
        if self.function is not None:
            out["function"] = self.function.to_dict()
        if self.points:
            out["points"] = [p.to_dict() for p in self.points]
        for key in GRID_KEYS:
            value = getattr(self, key)
            if value is not None:
                out[key] = list(value)
        return out

    def quadrature(self, base: Optional[QuadratureConfig] = None) -> QuadratureConfig:
        """base (settings file or defaults) with this config's overrides applied."""
        base = base or QuadratureConfig()
        return base.replace(**dict(self.quadrature_overrides))

    def require_function(self) -> FunctionBlock:
        if self.function is None:
            raise ConfigError("this task needs a function block")
        return self.function

    def require_s(self) -> float:
        if self.s is None:
            raise ConfigError("this task needs fractional.s")
        return self.s

    def require_points(self) -> Sequence[PointSpec]:
        if not self.points:
            raise ConfigError("this task needs at least one point")
        return self.points

"""Scenario files: schema-validated declarations of manifolds, frames and points.

A scenario bundles everything a CLI command needs: an embedded manifold or
a flattened chart model, named CR frames, adapted charts, named points, the
integrator configuration and a seed.  Four scenarios ship built in (lewy,
flat, tube3, expchart) so the verification suites need no external files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .connection import ChartSetup
from .crmanifold import AdaptedChart, EmbeddedManifold
from .expr import ExprError, parse_expr
from .flow import IntegratorConfig
from .util import canonical_json
from .vectorfield import VectorFieldSpec

__all__ = [
    "Scenario",
    "ScenarioError",
    "SCENARIO_SCHEMA",
    "BUILTIN_SCENARIOS",
    "load_scenario",
    "builtin_scenario",
]

SCHEMA_VERSION = "1"


class ScenarioError(Exception):
    """Scenario failed schema validation or reference resolution."""


_FIELD = {"type": "array", "items": {"type": "string"}, "minItems": 1}
_FRAME = {"type": "array", "items": _FIELD, "minItems": 1}

SCENARIO_SCHEMA: dict = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "crorbit scenario",
    "type": "object",
    "required": ["name", "manifold"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"type": "string"},
        "name": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "manifold": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["type", "complex_dim", "rho"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "embedded"},
                        "complex_dim": {"type": "integer", "minimum": 1},
                        "rho": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                        "aliases": {"type": "array", "items": {"type": "string"}},
                    },
                },
                {
                    "type": "object",
                    "required": ["type", "l", "m", "frame"],
                    "additionalProperties": False,
                    "properties": {
                        "type": {"const": "chart"},
                        "l": {"type": "integer", "minimum": 1},
                        "m": {"type": "integer", "minimum": 0},
                        "frame": _FRAME,
                        "aliases": {"type": "array", "items": {"type": "string"}},
                    },
                },
            ]
        },
        "frames": {"type": "object", "additionalProperties": _FRAME},
        "charts": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["l", "m", "frame"],
                "additionalProperties": False,
                "properties": {
                    "l": {"type": "integer", "minimum": 1},
                    "m": {"type": "integer", "minimum": 0},
                    "frame": _FRAME,
                },
            },
        },
        "adapted_charts": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["l", "m", "psi", "frame"],
                "additionalProperties": False,
                "properties": {
                    "l": {"type": "integer", "minimum": 1},
                    "m": {"type": "integer", "minimum": 0},
                    "psi": {"type": "array", "items": {"type": "string"}, "minItems": 2},
                    "frame": _FRAME,
                },
            },
        },
        "points": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "number"}},
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
                "max_step": {"type": "number", "exclusiveMinimum": 0},
                "retract": {"type": "boolean"},
                "retract_tol": {"type": "number", "exclusiveMinimum": 0},
                "drift_bound": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"rank_rtol": {"type": "number", "exclusiveMinimum": 0}},
        },
    },
}


@dataclass
class Scenario:
    """Resolved scenario: parsed expressions, constructed objects, digest."""

    name: str
    kind: str  # embedded | chart
    seed: int
    raw: dict
    digest: str
    manifold: EmbeddedManifold | None = None
    model_chart: ChartSetup | None = None
    aliases: list[str] | None = None
    frames: dict[str, list[VectorFieldSpec]] = field(default_factory=dict)
    charts: dict[str, ChartSetup] = field(default_factory=dict)
    adapted_charts: dict[str, tuple[AdaptedChart, list[VectorFieldSpec]]] = field(
        default_factory=dict
    )
    points: dict[str, np.ndarray] = field(default_factory=dict)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def point(self, spec: str) -> np.ndarray:
        """Resolve a named point or comma-separated coordinates."""
        if spec in self.points:
            return self.points[spec].copy()
        try:
            return np.array([float(v) for v in spec.split(",")], dtype=float)
        except ValueError:
            raise ScenarioError(
                f"unknown point {spec!r}; known: {sorted(self.points)}"
            ) from None

    def default_frame(self) -> list[VectorFieldSpec]:
        if self.kind == "chart":
            return list(self.model_chart.frame)
        if not self.frames:
            raise ScenarioError(f"scenario {self.name!r} declares no frames")
        name = sorted(self.frames)[0]
        return self.frames[name]


def _resolve(raw: dict) -> Scenario:
    try:
        jsonschema.validate(raw, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {path}: {exc.message}") from exc
    declared = raw.get("schema_version", SCHEMA_VERSION)
    if declared != SCHEMA_VERSION:
        raise ScenarioError(
            f"scenario schema version {declared!r} is not supported (expected {SCHEMA_VERSION!r})"
        )

    digest = hashlib.sha256(canonical_json(raw).encode()).hexdigest()
    man = raw["manifold"]
    aliases = man.get("aliases")
    sc = Scenario(
        name=raw["name"],
        kind=man["type"],
        seed=int(raw.get("seed", 0)),
        raw=raw,
        digest=digest,
        aliases=list(aliases) if aliases else None,
    )
    try:
        if man["type"] == "embedded":
            n = man["complex_dim"]
            ambient = 2 * n
            if aliases and len(aliases) != ambient:
                raise ScenarioError(
                    f"{len(aliases)} aliases for {ambient} real coordinates"
                )
            sc.manifold = EmbeddedManifold.parse(n, man["rho"], aliases)
            if "tolerances" in raw and "rank_rtol" in raw["tolerances"]:
                sc.manifold = EmbeddedManifold(
                    n, sc.manifold.rho, raw["tolerances"]["rank_rtol"]
                )
            for fname, fields in raw.get("frames", {}).items():
                sc.frames[fname] = [
                    VectorFieldSpec.parse(coeffs, ambient, aliases) for coeffs in fields
                ]
        else:
            l, m = man["l"], man["m"]
            dim = l + m
            frame = tuple(
                VectorFieldSpec.parse(coeffs, dim, aliases) for coeffs in man["frame"]
            )
            sc.model_chart = ChartSetup(l, m, frame)

        for cname, cdecl in raw.get("charts", {}).items():
            dim = cdecl["l"] + cdecl["m"]
            frame = tuple(
                VectorFieldSpec.parse(coeffs, dim) for coeffs in cdecl["frame"]
            )
            sc.charts[cname] = ChartSetup(cdecl["l"], cdecl["m"], frame)

        for aname, adecl in raw.get("adapted_charts", {}).items():
            if sc.manifold is None:
                raise ScenarioError("adapted charts need an embedded manifold")
            dim = adecl["l"] + adecl["m"]
            if len(adecl["psi"]) != sc.manifold.ambient_dim:
                raise ScenarioError(
                    f"adapted chart {aname!r}: psi needs {sc.manifold.ambient_dim} components"
                )
            chart = AdaptedChart(
                adecl["l"],
                adecl["m"],
                tuple(parse_expr(t, dim) for t in adecl["psi"]),
            )
            frame = [VectorFieldSpec.parse(coeffs, dim) for coeffs in adecl["frame"]]
            sc.adapted_charts[aname] = (chart, frame)
    except ExprError as exc:
        raise ScenarioError(f"expression error: {exc}") from exc

    expected_dim = (
        sc.manifold.ambient_dim if sc.manifold is not None else sc.model_chart.l
    )
    for pname, coords in raw.get("points", {}).items():
        pt = np.array(coords, dtype=float)
        if pt.shape[0] != expected_dim:
            raise ScenarioError(
                f"point {pname!r} has {pt.shape[0]} coordinates, expected {expected_dim}"
            )
        sc.points[pname] = pt

    sc.integrator = IntegratorConfig(**raw.get("integrator", {}))
    return sc


BUILTIN_SCENARIOS: dict[str, dict] = {
    "lewy": {
        "schema_version": SCHEMA_VERSION,
        "name": "lewy",
        "seed": 0,
        "manifold": {
            "type": "embedded",
            "complex_dim": 2,
            "aliases": ["x", "y", "u", "v"],
            "rho": ["v - x^2 - y^2"],
        },
        "frames": {
            "cr": [["1", "0", "2*y", "2*x"], ["0", "1", "-2*x", "2*y"]],
        },
        "points": {"origin": [0.0, 0.0, 0.0, 0.0]},
        "integrator": {"retract": True},
    },
    "flat": {
        "schema_version": SCHEMA_VERSION,
        "name": "flat",
        "seed": 0,
        "manifold": {
            "type": "embedded",
            "complex_dim": 2,
            "aliases": ["x", "y", "u", "v"],
            "rho": ["v"],
        },
        "frames": {
            "cr": [["1", "0", "0", "0"], ["0", "1", "0", "0"]],
        },
        "adapted_charts": {
            "complex_line": {
                "l": 2,
                "m": 1,
                "psi": ["x1", "x2", "x3", "0"],
                "frame": [["1", "0", "0"], ["0", "1", "0"]],
            }
        },
        "points": {"origin": [0.0, 0.0, 0.0, 0.0]},
        "integrator": {"retract": True},
    },
    "tube3": {
        "schema_version": SCHEMA_VERSION,
        "name": "tube3",
        "seed": 0,
        "manifold": {
            "type": "embedded",
            "complex_dim": 3,
            "aliases": ["x", "y", "u1", "v1", "u2", "v2"],
            "rho": ["v1 - x^2 - y^2", "v2"],
        },
        "frames": {
            "cr": [
                ["1", "0", "2*y", "2*x", "0", "0"],
                ["0", "1", "-2*x", "2*y", "0", "0"],
            ],
        },
        "points": {"origin": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]},
        "integrator": {"retract": True},
    },
    "expchart": {
        "schema_version": SCHEMA_VERSION,
        "name": "expchart",
        "seed": 0,
        "manifold": {
            "type": "chart",
            "l": 1,
            "m": 1,
            "frame": [["1", "x2"]],
        },
        "charts": {"main": {"l": 1, "m": 1, "frame": [["1", "x2"]]}},
        "points": {"origin": [0.0]},
    },
}


def builtin_scenario(name: str) -> Scenario:
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(
            f"unknown builtin scenario {name!r}; available: {sorted(BUILTIN_SCENARIOS)}"
        )
    return _resolve(BUILTIN_SCENARIOS[name])


def load_scenario(spec: str | Path) -> Scenario:
    """Load a scenario by builtin name or from a JSON file path."""
    name = str(spec)
    if name in BUILTIN_SCENARIOS:
        return builtin_scenario(name)
    path = Path(spec)
    if not path.exists():
        raise ScenarioError(
            f"{name!r} is neither a builtin scenario nor an existing file"
        )
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must contain a JSON object")
    return _resolve(raw)

"""Run configuration: published JSON schema, defaults, canonical hashing,
and the loader that turns a config document into grid/problem/solver objects.

A config describes one solve: the periodic box, the physical parameters, the
initial data, the iteration controls, and an optional error reference.  All
fields except ``domain`` have defaults matching the 1D benchmark problem
(free soliton, omega = 1, p = 3, beta = -1), so a minimal config is just

    {"domain": [{"x0": -32.0, "L": 64.0, "M": 512}]}

Validation happens before any numerics; schema violations raise
:class:`ConfigSchemaError`, which the CLI maps to exit code 2.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .fieldio import read_field
from .functionals import PotentialSpec, ProblemParams, alpha_min
from .grid import GridField, GridSpec
from .reference import InitialDataSpec, exact_soliton
from .solver import ConfigError, SolverConfig


class ConfigSchemaError(ConfigError):
    """The config document violates the published schema or its cross-field
    consistency rules."""


_AXIS_VALUE = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2},
    ]
}

CONFIG_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gfalm run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["domain"],
    "properties": {
        "dims": {"type": "integer", "enum": [1, 2]},
        "domain": {
            "type": "array",
            "minItems": 1,
            "maxItems": 2,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["x0", "L", "M"],
                "properties": {
                    "x0": {"type": "number"},
                    "L": {"type": "number", "exclusiveMinimum": 0},
                    "M": {"type": "integer", "minimum": 4, "multipleOf": 2},
                },
            },
        },
        "omega": {"type": "number"},
        "beta": {"type": "number", "exclusiveMaximum": 0},
        "p": {"type": "number", "exclusiveMinimum": 1},
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"type": "string", "enum": ["zero", "harmonic"]},
                "gamma": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 1,
                    "maxItems": 2,
                },
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {
                    "type": "string",
                    "enum": [
                        "gaussian",
                        "shifted_gaussian",
                        "vortex",
                        "soliton_exact",
                        "constant",
                        "from_file",
                    ],
                },
                "center": _AXIS_VALUE,
                "width": _AXIS_VALUE,
                "offset": _AXIS_VALUE,
                "omega": {"type": "number", "exclusiveMinimum": 0},
                "path": {"type": "string"},
            },
        },
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"oneOf": [{"const": "auto"}, {"type": "number"}]},
        "tol_linf": {"type": "number", "exclusiveMinimum": 0},
        "max_iters": {"type": "integer", "minimum": 0},
        "record_every": {"type": "integer", "minimum": 1},
        "reference": {
            "oneOf": [
                {"const": "exact_soliton"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["path"],
                    "properties": {"path": {"type": "string"}},
                },
                {"type": "null"},
            ]
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS: dict = {
    "omega": 1.0,
    "beta": -1.0,
    "p": 3.0,
    "potential": {"kind": "zero"},
    "initial": {"kind": "gaussian"},
    "tau": 0.5,
    "alpha": "auto",
    "tol_linf": 1e-11,
    "max_iters": 100_000,
    "record_every": 1,
    "reference": None,
    "seed": 0,
}


def validate_config(cfg: dict) -> None:
    """Check ``cfg`` against :data:`CONFIG_SCHEMA`; raises ConfigSchemaError."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(k) for k in exc.absolute_path) or "<root>"
        raise ConfigSchemaError(f"config invalid at {where}: {exc.message}") from exc


def normalized_config(cfg: dict) -> dict:
    """Validated copy of ``cfg`` with all defaults filled in and ``dims``
    made explicit.  This is the canonical form that gets hashed."""
    validate_config(cfg)
    full = copy.deepcopy(DEFAULTS)
    full.update(copy.deepcopy(cfg))
    full.setdefault("dims", len(full["domain"]))
    if full["dims"] != len(full["domain"]):
        raise ConfigSchemaError(
            f"dims = {full['dims']} but domain lists {len(full['domain'])} axes"
        )
    return full


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON encoding of the normalized config."""
    canon = json.dumps(normalized_config(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunSetup:
    """Everything needed to execute one configured solve."""

    grid: GridSpec
    params: ProblemParams
    initial: InitialDataSpec
    solver: SolverConfig
    reference: GridField | None
    seed: int
    config: dict
    config_hash: str


def _build_potential(spec: dict, dims: int) -> PotentialSpec:
    if spec["kind"] == "zero":
        return PotentialSpec.zero()
    gamma = spec.get("gamma")
    if gamma is None:
        gamma = [1.0] * dims
    if len(gamma) != dims:
        raise ConfigSchemaError(
            f"harmonic potential lists {len(gamma)} rates for {dims} axes"
        )
    return PotentialSpec.harmonic(*gamma)


def _build_initial(spec: dict, dims: int, base_dir: Path) -> InitialDataSpec:
    kind = spec["kind"]
    if kind == "vortex" and dims != 2:
        raise ConfigSchemaError("vortex initial data requires a 2D domain")
    if kind == "soliton_exact" and dims != 1:
        raise ConfigSchemaError("soliton_exact initial data requires a 1D domain")
    path = spec.get("path")
    if kind == "from_file" and path is not None:
        path = str((base_dir / path).resolve()) if not Path(path).is_absolute() else path
    return InitialDataSpec(
        kind=kind,
        center=spec.get("center"),
        width=spec.get("width"),
        offset=spec.get("offset"),
        omega=spec.get("omega"),
        path=path,
    )


def _build_reference(
    spec, grid: GridSpec, params: ProblemParams, base_dir: Path
) -> GridField | None:
    if spec is None:
        return None
    if spec == "exact_soliton":
        if grid.dims != 1:
            raise ConfigSchemaError("the exact_soliton reference requires a 1D domain")
        return exact_soliton(params.omega, grid)
    path = Path(spec["path"])
    if not path.is_absolute():
        path = base_dir / path
    ref = read_field(path)
    if ref.grid != grid:
        raise ConfigSchemaError(
            f"reference field at {path} lives on a different grid than the config"
        )
    return ref


def parse_config(cfg: dict, base_dir: str | Path = ".") -> RunSetup:
    """Build the run objects from a config dict.

    ``base_dir`` anchors relative paths (initial data and reference files);
    pass the config file's directory when loading from disk.  Explicit alpha
    values are checked against the admissible minimum here, so an
    inadmissible config is rejected before any iteration starts.
    """
    base_dir = Path(base_dir)
    full = normalized_config(cfg)
    dims = full["dims"]

    grid = GridSpec(
        x0=tuple(ax["x0"] for ax in full["domain"]),
        L=tuple(ax["L"] for ax in full["domain"]),
        M=tuple(ax["M"] for ax in full["domain"]),
    )
    params = ProblemParams(
        omega=full["omega"],
        beta=full["beta"],
        p=full["p"],
        potential=_build_potential(full["potential"], dims),
    )
    alpha = full["alpha"]
    if not isinstance(alpha, str):
        amin = alpha_min(params, grid)
        if alpha < amin - 1e-12:
            raise ConfigSchemaError(
                f"alpha = {alpha} is below the admissible minimum {amin} "
                "for this potential and omega"
            )
    initial = _build_initial(full["initial"], dims, base_dir)
    reference = _build_reference(full["reference"], grid, params, base_dir)
    solver = SolverConfig(
        tau=full["tau"],
        alpha=alpha,
        tol_linf=full["tol_linf"],
        max_iters=full["max_iters"],
        record_every=full["record_every"],
        reference=reference,
    )
    return RunSetup(
        grid=grid,
        params=params,
        initial=initial,
        solver=solver,
        reference=reference,
        seed=full["seed"],
        config=full,
        config_hash=config_hash(cfg),
    )


def load_config(path: str | Path) -> RunSetup:
    """Read, validate, and parse a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigSchemaError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSchemaError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigSchemaError(f"config {path} must contain a JSON object")
    return parse_config(cfg, base_dir=path.parent)

"""Experiment configuration: YAML files validated against per-command schemas.

The format is nested key-value; unknown keys are rejected so typos fail
loudly.  Couplings may be given as the string "yamabe" (resolved to
(n-2)/(4(n-1)) from the grid dimension) or as a number; kernel-breaking
commands reject c in {0, 1/2} up front.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import yaml

from .errors import ConfigError
from .grids import Grid
from .operators import coupling_constant
from .recipes import METRIC_RECIPES


class Field:
    """Schema leaf: expected type(s), optional default, optional validator."""

    def __init__(self, types, default=None, required=False, check=None, doc=""):
        self.types = types if isinstance(types, tuple) else (types,)
        self.default = default
        self.required = required
        self.check = check
        self.doc = doc


def _positive(x):
    return x > 0


def _nonnegative(x):
    return x >= 0


GRID_SCHEMA = {
    "shape": Field(list, required=True),
    "period": Field(list, default=None),
    "order": Field(int, default=4, check=lambda v: v in (2, 4)),
}

METRIC_SCHEMA = {
    "recipe": Field(str, required=True, check=lambda v: v in METRIC_RECIPES),
    "scale": Field((int, float), default=1.0, check=_positive),
    "amplitude": Field((int, float), default=0.1),
    "seed": Field(int, default=None),
    "t": Field((int, float), default=1.0),
    "max_frequency": Field(int, default=1, check=_positive),
    "modes": Field(int, default=4, check=_positive),
    "fourier_modes": Field(list, default=None),
}

DIRECTION_SCHEMA = {
    "recipe": Field(str, default="random-traceless", check=lambda v: v in ("random-traceless", "zero", "metric")),
    "seed": Field(int, default=0),
    "amplitude": Field((int, float), default=0.3),
    "scale": Field((int, float), default=1.0),
    "max_frequency": Field(int, default=1, check=_positive),
    "modes": Field(int, default=4, check=_positive),
}

SCHEMAS = {
    "spectrum": {
        "grid": GRID_SCHEMA,
        "metric": METRIC_SCHEMA,
        "operator": {
            "coupling": Field((str, int, float), default="yamabe"),
            "window": Field(int, default=8, check=_positive),
            "method": Field(str, default="auto", check=lambda v: v in ("auto", "dense", "shift-invert")),
        },
        "kernel": {
            "tau": Field((int, float), default=None),
            "kappa": Field((int, float), default=1.0, check=_positive),
        },
        "count_below": Field((int, float), default=None),
        "seed": Field(int, default=0),
        "output": {
            "prefix": Field(str, default="spectrum"),
            "eigenvector_fields": Field(int, default=0, check=_nonnegative),
        },
    },
    "perturb": {
        "grid": GRID_SCHEMA,
        "metric": METRIC_SCHEMA,
        "direction": DIRECTION_SCHEMA,
        "coupling": Field((str, int, float), default="yamabe"),
        "window": Field(int, default=8, check=_positive),
        "t_grid": {
            "start": Field((int, float), default=0.0),
            "stop": Field((int, float), required=True),
            "count": Field(int, required=True, check=lambda v: v >= 2),
        },
        "kernel_tau": Field((int, float), default=None),
        "seed": Field(int, default=0),
        "output": {"prefix": Field(str, default="perturb")},
    },
    "break-kernel": {
        "grid": GRID_SCHEMA,
        "metric": METRIC_SCHEMA,
        "coupling": Field((str, int, float), required=True),
        "search": {
            "enabled": Field(bool, default=False),
            "direction": DIRECTION_SCHEMA,
            "branch_index": Field(int, default=1, check=_nonnegative),
            "t_start": Field((int, float), default=0.0),
            "t_stop": Field((int, float), default=0.5),
            "t_count": Field(int, default=8, check=lambda v: v >= 2),
            "window": Field(int, default=8, check=_positive),
        },
        "break": {
            "tau": Field((int, float), default=None),
            "eps": Field((int, float), default=0.5, check=_positive),
            "max_levels": Field(int, default=20, check=_positive),
        },
        "seed": Field(int, default=0),
        "output": {"prefix": Field(str, default="break_kernel")},
    },
    "product": {
        "base": {
            "kind": Field(str, default="sphere", check=lambda v: v == "sphere"),
            "dim": Field(int, default=2, check=lambda v: v >= 2),
            "l_max": Field(int, default=3, check=_nonnegative),
        },
        "fiber": {
            "k": Field(int, required=True, check=_positive),
            "eps": Field((int, float), required=True, check=_positive),
            "genus": Field(int, default=2, check=lambda v: v >= 2),
            "lam_max": Field((int, float), default=12.0, check=_positive),
        },
        "sweep": {
            "t_start": Field((int, float), default=0.5, check=_positive),
            "t_stop": Field((int, float), required=True, check=_positive),
            "t_count": Field(int, default=40, check=lambda v: v >= 2),
        },
        "rescale_t": Field((int, float), default=None),
        "family": {
            "enabled": Field(bool, default=True),
            "k_values": Field(list, default=[1, 3, 10, 30]),
            "t": Field((int, float), default=12.0, check=_positive),
        },
        "seed": Field(int, default=0),
        "output": {"prefix": Field(str, default="product")},
    },
    "curvature-check": {
        "grid": GRID_SCHEMA,
        "metric": METRIC_SCHEMA,
        "conformal": {
            "seed": Field(int, default=0),
            "amplitude": Field((int, float), default=0.1),
            "offset": Field((int, float), default=1.0),
            "max_frequency": Field(int, default=1, check=_positive),
            "modes": Field(int, default=4, check=_positive),
        },
        "window": Field(int, default=8, check=_positive),
        "seed": Field(int, default=0),
        "output": {"prefix": Field(str, default="curvature_check")},
    },
}

#: commands whose coupling feeds the kernel-breaking machinery
KERNEL_BREAKING_COMMANDS = ("break-kernel",)


def _validate_node(data, schema, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    out = {}
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"unknown key {path + key!r}")
        spec = schema[key]
        if isinstance(spec, dict):
            out[key] = _validate_node(value, spec, path + key + ".")
        else:
            if value is None and spec.default is None and not spec.required:
                out[key] = None
                continue
            if not isinstance(value, spec.types) or isinstance(value, bool) and bool not in spec.types:
                raise ConfigError(
                    f"{path + key}: expected {'/'.join(t.__name__ for t in spec.types)}, "
                    f"got {type(value).__name__}"
                )
            if spec.check is not None and not spec.check(value):
                raise ConfigError(f"{path + key}: value {value!r} out of range")
            out[key] = value
    for key, spec in schema.items():
        if key in out:
            continue
        if isinstance(spec, dict):
            out[key] = _validate_node({}, spec, path + key + ".")
        elif spec.required:
            raise ConfigError(f"missing required key {path + key!r}")
        else:
            out[key] = spec.default
    return out


def load_config(path, command: str) -> dict:
    """Load and validate a YAML config for the given command."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"malformed YAML in {path}: {err}") from err
    if raw is None:
        raw = {}
    cfg = _validate_node(raw, SCHEMAS[command], "")
    if command in KERNEL_BREAKING_COMMANDS:
        c = cfg.get("coupling")
        if isinstance(c, (int, float)) and float(c) in (0.0, 0.5):
            raise ConfigError(
                f"coupling {c} is rejected for kernel-breaking commands: "
                "the perturbation argument requires c != 0, c != 1/2"
            )
    return cfg


def config_hash(path) -> str:
    """SHA-256 of the raw config bytes, recorded in every CSV comment line."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def build_grid(cfg: dict) -> Grid:
    shape = tuple(int(v) for v in cfg["shape"])
    period = cfg["period"]
    period = tuple(float(v) for v in period) if period is not None else (1.0,) * len(shape)
    return Grid(shape, period, cfg["order"])


def resolve_coupling(value, dim: int) -> float:
    if isinstance(value, str):
        if value == "yamabe":
            return coupling_constant(dim)
        raise ConfigError(f"coupling must be a number or 'yamabe', got {value!r}")
    return float(value)

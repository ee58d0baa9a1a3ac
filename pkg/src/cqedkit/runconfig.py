"""Flat ``key = value`` run configuration with per-subcommand schemas.

Lines hold one assignment each; ``#`` starts a comment anywhere.  Unknown and
duplicate keys are rejected, as are values that fail the key's parser.  Flag
overrides supplied by the CLI win over file values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ConfigurationError

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class RunConfig:
    """Raw key/value entries with source line numbers for error messages."""

    entries: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    path: str = "<config>"

    def merged(self, overrides: dict) -> dict:
        out = dict(self.entries)
        out.update({k: str(v) for k, v in overrides.items() if v is not None})
        return out


def parse_config_text(text: str, path: str = "<config>") -> RunConfig:
    entries, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not _KEY_RE.match(key):
            raise ConfigurationError(f"{path}:{lineno}: bad key {key!r}")
        if key in entries:
            raise ConfigurationError(
                f"{path}:{lineno}: duplicate key {key!r}"
                f" (first set on line {lines[key]})")
        if not value:
            raise ConfigurationError(f"{path}:{lineno}: empty value for {key!r}")
        entries[key] = value
        lines[key] = lineno
    return RunConfig(entries=entries, lines=lines, path=path)


def read_config(path) -> RunConfig:
    with open(path, "r", encoding="ascii") as fh:
        return parse_config_text(fh.read(), str(path))


# ---------------------------------------------------------------------------
# typed keys


def _float(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigurationError(f"expected a number, got {raw!r}")
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigurationError(f"non-finite value {raw!r}")
    return value


def _nonneg(raw: str) -> float:
    value = _float(raw)
    if value < 0:
        raise ConfigurationError(f"must be >= 0, got {raw!r}")
    return value


def _positive(raw: str) -> float:
    value = _float(raw)
    if value <= 0:
        raise ConfigurationError(f"must be > 0, got {raw!r}")
    return value


def _int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"expected an integer, got {raw!r}")


def _pos_int(raw: str) -> int:
    value = _int(raw)
    if value <= 0:
        raise ConfigurationError(f"must be a positive integer, got {raw!r}")
    return value


def _choice(*options):
    def parse(raw: str):
        if raw not in options:
            raise ConfigurationError(
                f"expected one of {', '.join(options)}, got {raw!r}")
        return raw
    return parse


def _float_list(n: int):
    def parse(raw: str):
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != n:
            raise ConfigurationError(f"expected {n} comma-separated numbers")
        return tuple(_float(p) for p in parts)
    return parse


@dataclass(frozen=True)
class Key:
    parse: object
    required: bool = False
    default: object = None


_SYSTEM_KEYS = {
    "g_ghz": Key(_nonneg, default=0.0),
    "kappa_ghz": Key(_positive, required=True),
    "kappa_wg_fraction": Key(_nonneg, default=1.0),
    "gamma_rad_ghz": Key(_nonneg, default=0.0),
    "gamma_deph_ghz": Key(_nonneg, default=0.0),
    "cavity_freq_ghz": Key(_float, default=0.0),
    "emitter_freq_ghz": Key(_float, default=0.0),
}

SCHEMAS = {
    "derive": {
        "tau_on_ns": Key(_positive, required=True),
        "tau_on_sigma_ns": Key(_nonneg, default=0.0),
        "tau_off_ns": Key(_positive, required=True),
        "tau_off_sigma_ns": Key(_nonneg, default=0.0),
        "xi_max": Key(_positive, required=True),
        "lifetime_ratio": Key(_positive),
        "lifetime_ratio_sigma": Key(_nonneg, default=0.0),
        "g_ghz": Key(_positive, required=True),
        "g_sigma_ghz": Key(_nonneg, default=0.0),
        "kappa_ghz": Key(_positive, required=True),
        "kappa_sigma_ghz": Key(_nonneg, default=0.0),
        "gamma_ghz": Key(_positive, required=True),
        "gamma_sigma_ghz": Key(_nonneg, default=0.0),
        "wavelength_nm": Key(_positive),
        "q_factor": Key(_positive),
        "mode_volume": Key(_positive),
        "linewidth_mhz": Key(_positive),
        "out_path": Key(str),
    },
    "spectrum": {
        **_SYSTEM_KEYS,
        "freq_min_ghz": Key(_float, required=True),
        "freq_max_ghz": Key(_float, required=True),
        "freq_points": Key(_pos_int, required=True),
        "out_path": Key(str),
    },
    "decay": {
        **_SYSTEM_KEYS,
        "n_max": Key(_pos_int, default=1),
        "n_emitters": Key(_pos_int, default=1),
        "t_final_ns": Key(_positive, required=True),
        "dt_ns": Key(_positive, required=True),
        "kind": Key(_choice("population", "counts"), default="population"),
        "peak_counts": Key(_positive, default=10000.0),
        "seed": Key(_int, default=0),
        "out_path": Key(str),
    },
    "tuning-map": {
        "kappa_ghz": Key(_positive, required=True),
        "line_freqs_ghz": Key(_float_list(4), required=True),
        "f0_per_line": Key(_float_list(4), required=True),
        "linewidths_ghz": Key(_float_list(4), default=(0.0, 0.0, 0.0, 0.0)),
        "ground_splitting_ghz": Key(_nonneg, default=0.0),
        "xi_max": Key(_positive, default=1.0),
        "grid_min": Key(_float, required=True),
        "grid_max": Key(_float, required=True),
        "grid_points": Key(_pos_int, required=True),
        "grid_kind": Key(_choice("freq_ghz", "wavelength_nm"),
                         default="freq_ghz"),
        "out_path": Key(str),
    },
    "g2": {
        **_SYSTEM_KEYS,
        "omega_drive_ghz": Key(_positive, required=True),
        "n_max": Key(_pos_int, default=2),
        "n_emitters": Key(_pos_int, default=1),
        "tau_max_ns": Key(_positive, required=True),
        "tau_points": Key(_pos_int, required=True),
        "out_path": Key(str),
    },
    "streak-bin": {
        "lambda_min_nm": Key(_positive, required=True),
        "lambda_max_nm": Key(_positive, required=True),
        "out_path": Key(str),
    },
}

_FIT_COMMON = {
    "weights": Key(_choice("none", "sqrt_counts"), default="none"),
    "out_path": Key(str),
}


def fit_schema(model_params) -> dict:
    """Schema for the fit subcommand, one init/fix/lo/hi slot per parameter."""
    schema = dict(_FIT_COMMON)
    for name in model_params:
        schema[f"init_{name}"] = Key(_float)
        schema[f"fix_{name}"] = Key(_float)
        schema[f"lo_{name}"] = Key(_float)
        schema[f"hi_{name}"] = Key(_float)
    return schema


def validate(config: RunConfig, schema: dict, overrides: dict | None = None,
             context: str = "config") -> dict:
    """Typed values from config + overrides; rejects unknown keys."""
    raw = config.merged(overrides or {})
    for key in raw:
        if key not in schema:
            where = (f" ({config.path}:{config.lines[key]})"
                     if key in config.lines else "")
            raise ConfigurationError(f"unknown {context} key {key!r}{where}")
    out = {}
    for key, spec in schema.items():
        if key in raw:
            try:
                out[key] = spec.parse(raw[key])
            except ConfigurationError as exc:
                raise ConfigurationError(f"key {key!r}: {exc}") from None
        elif spec.required:
            raise ConfigurationError(f"missing required key {key!r}")
        else:
            out[key] = spec.default
    return out

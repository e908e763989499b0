"""
Run configuration.

Settings are layered: dataclass defaults, then ``FEEC_MHD_*`` environment
variables (a ``.env`` file is honoured), then an optional TOML file, then
explicit overrides coming from the command line.
"""

import logging
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

ENV_PREFIX = "FEEC_MHD_"


@dataclass(frozen=True)
class Settings:
    """All knobs of a run. ``None`` means "take the scenario default"."""

    scenario: str = "taylor-green"
    nx: Optional[int] = None
    ny: Optional[int] = None
    degree: Optional[int] = None
    dt: Optional[float] = None
    t_final: Optional[float] = None
    tol: float = 1e-10
    max_picard: int = 50
    linear_tol: float = 1e-13
    anderson_depth: int = 0
    out_dir: str = "runs/latest"
    snapshot_every: int = 0
    reverse_at: Optional[float] = None
    samples_per_cell: int = 4
    log_every: int = 10
    threads: Optional[int] = None
    b0: float = 0.4
    direct_solve_max_dofs: int = 512
    assembly_budget_mb: int = 256
    log_level: str = "INFO"


def _field_types() -> dict[str, type]:
    hints = {}
    for f in fields(Settings):
        text = str(f.type)
        if "int" in text:
            hints[f.name] = int
        elif "float" in text:
            hints[f.name] = float
        else:
            hints[f.name] = str
    return hints


def _coerce(name: str, value: Any) -> Any:
    if value is None:
        return None
    kind = _field_types()[name]
    if isinstance(value, str) and value.strip().lower() in ("", "none"):
        return None
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"setting {name!r}: cannot read {value!r} as {kind.__name__}") from exc


def settings_from_env(environ: Optional[dict] = None) -> dict[str, Any]:
    """
    Collects ``FEEC_MHD_<FIELD>`` variables.

    Args:
        environ: mapping to read instead of ``os.environ`` (tests)

    Returns:
        Dictionary of coerced values keyed by field name
    """
    if environ is None:
        load_dotenv()
        environ = os.environ
    values = {}
    for name in _field_types():
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = _coerce(name, raw)
    return values


def settings_from_toml(path) -> dict[str, Any]:
    """Reads a TOML config; keys may sit at top level or under ``[run]``."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    table = dict(data.get("run", {}))
    table.update({k: v for k, v in data.items() if k != "run"})
    known = _field_types()
    values = {}
    for key, value in table.items():
        if key not in known:
            raise ValueError(f"unknown configuration key {key!r} in {path}")
        values[key] = _coerce(key, value)
    return values


def load_settings(
    config_path=None,
    overrides: Optional[dict[str, Any]] = None,
    environ: Optional[dict] = None,
) -> Settings:
    """
    Builds the effective settings of a run.

    Args:
        config_path: optional TOML file
        overrides: values given explicitly (CLI flags); ``None`` entries are ignored
        environ: environment mapping, defaults to the process environment

    Returns:
        Frozen Settings instance
    """
    merged: dict[str, Any] = {}
    merged.update(settings_from_env(environ))
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ValueError(f"config file not found: {path}")
        merged.update(settings_from_toml(path))
        logger.debug("Loaded configuration from %s", path)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _field_types():
            raise ValueError(f"unknown setting {key!r}")
        merged[key] = _coerce(key, value)
    return replace(Settings(), **merged)

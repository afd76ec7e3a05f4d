"""
Run config files and layered overrides.

A config file is flat ``KEY=VALUE`` text in dotenv syntax and must carry
``schema_version``. Layers are merged in order preset < file < ``--set``
< dedicated CLI flags; validation errors name the offending key and, when it
came from a file, its line.
"""
import logging
import re
from pathlib import Path
from typing import Any, Iterable, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigurationError
from app.core.presets import get_preset
from app.schemas.params import ModelParams
from app.schemas.run import RunConfig, SweepAxis

logger = logging.getLogger(__name__)

_KEY_LINE = re.compile(r"^\s*(?:export\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*=")

PARAM_KEYS = set(ModelParams.model_fields)

Layer = tuple[dict[str, Any], dict[str, int]]


def _key_lines(text: str) -> dict[str, int]:
    lines = {}
    for number, line in enumerate(text.splitlines(), start=1):
        match = _KEY_LINE.match(line)
        if match:
            lines[match.group(1)] = number
    return lines


def read_config_file(path: Path) -> Layer:
    if not path.is_file():
        raise ConfigurationError(f"config file {path} not found")
    values = dotenv_values(path)
    lines = _key_lines(path.read_text())
    for key, value in values.items():
        if value is None:
            raise ConfigurationError("expected KEY=VALUE", field=key, line=lines.get(key))

    version = values.pop("schema_version", None)
    if version is None:
        raise ConfigurationError("missing schema_version", field="schema_version")
    if version.strip() != str(settings.CONFIG_SCHEMA_VERSION):
        raise ConfigurationError(
            f"unsupported schema_version {version} (expected {settings.CONFIG_SCHEMA_VERSION})",
            field="schema_version",
            line=lines.get("schema_version"),
        )
    logger.debug(f"read {len(values)} keys from {path}")
    return dict(values), lines


def parse_overrides(items: Iterable[str]) -> Layer:
    values = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"override '{item}' is not key=value", field=item)
        values[key.strip()] = value.strip()
    values.pop("schema_version", None)
    return values, {}


def preset_layer(name: str) -> Layer:
    try:
        values = get_preset(name)
    except KeyError as exc:
        raise ConfigurationError(str(exc.args[0]), field="preset") from None
    values["preset"] = name
    return values, {}


def _split_list(value: Any, sep: str = ",") -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [part.strip() for part in str(value).split(sep) if part.strip()]


def _convert(key: str, value: Any) -> Any:
    if key == "sweep_cycles":
        return [int(v) for v in _split_list(value)]
    if key in ("theta_grid", "convergence_gammas"):
        return [float(v) for v in _split_list(value)]
    if key == "convergence_depths":
        return [tuple(int(n) for n in pair.split(",")) for pair in _split_list(value, ";")]
    if key == "dt" and str(value).strip().lower() in ("", "auto", "none"):
        return None
    return value


def _raise_from_validation(exc: ValidationError, origin: dict[str, Optional[int]], prefix: str = "") -> None:
    error = exc.errors()[0]
    loc = [str(part) for part in error["loc"]]
    if prefix and loc and loc[0] == "params":
        loc = loc[1:]
    field = loc[0] if loc else None
    if field == "sweep_axes":
        field = f"sweep_axis{int(loc[1]) + 1}" if len(loc) > 1 and loc[1].isdigit() else "sweep_axis1"
    raise ConfigurationError(error["msg"], field=field, line=origin.get(field)) from None


def build_run_config(layers: Iterable[Layer]) -> RunConfig:
    """Merge layers (later wins) and validate them into a ``RunConfig``."""
    merged: dict[str, Any] = {}
    origin: dict[str, Optional[int]] = {}
    for values, lines in layers:
        for key, value in values.items():
            merged[key] = value
            origin[key] = lines.get(key)

    params_raw, run_raw, axes = {}, {}, {}
    for key, value in merged.items():
        try:
            converted = _convert(key, value)
        except ValueError as exc:
            raise ConfigurationError(str(exc), field=key, line=origin.get(key)) from None
        if key in PARAM_KEYS:
            params_raw[key] = converted
        elif key in ("sweep_axis1", "sweep_axis2"):
            try:
                axes[key] = value if isinstance(value, SweepAxis) else SweepAxis.parse(str(value))
            except (ValueError, ValidationError) as exc:
                raise ConfigurationError(str(exc).splitlines()[0], field=key, line=origin.get(key)) from None
        else:
            run_raw[key] = converted
    if axes:
        run_raw["sweep_axes"] = [axes[k] for k in sorted(axes)]

    try:
        params = ModelParams(**params_raw)
    except ValidationError as exc:
        _raise_from_validation(exc, origin)
    try:
        return RunConfig(params=params, **run_raw)
    except ValidationError as exc:
        _raise_from_validation(exc, origin, prefix="params")


def load_run_config(
    config_path: Optional[Path] = None,
    preset: Optional[str] = None,
    overrides: Iterable[str] = (),
    flags: Optional[dict[str, Any]] = None,
) -> RunConfig:
    layers: list[Layer] = []
    if preset:
        layers.append(preset_layer(preset))
    if config_path:
        layers.append(read_config_file(Path(config_path)))
    layers.append(parse_overrides(overrides))
    if flags:
        layers.append(({k: v for k, v in flags.items() if v is not None}, {}))
    return build_run_config(layers)

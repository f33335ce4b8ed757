import csv
import json
import sys
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, TextIO

import numpy as np
import tomli
from typing_extensions import Self

RUN_CONFIG_FILENAME = "hexfade-run.toml"

# Canonical list of args persisted in a run-config [args] section.
# Update this tuple when adding new shared CLI flags.
RUN_CONFIG_ARG_KEYS: tuple[str, ...] = (
    "preset",
    "cell_radius_m",
    "close_in_m",
    "alpha_db",
    "beta_db",
    "sigma_psi_db",
    "n_samples",
    "n_bins",
    "seed",
    "grid_points",
    "workers",
    "output",
    "shape",
    "strategy",
    "mu_min",
    "mu_max",
    "mu_step",
    "n_total",
)

MODULE_PATH = Path(__file__).parent
DEFAULT_PRESETS_PATH = MODULE_PATH / "assets" / "presets.toml"


def split_csv_floats(s: str) -> list[float]:
    """Parse a comma-separated list of numbers.

    >>> split_csv_floats("600,1500,2500")
    [600.0, 1500.0, 2500.0]
    >>> split_csv_floats(" 600 , 3.5e3 ")
    [600.0, 3500.0]
    >>> split_csv_floats("")
    []
    """
    return [float(part) for part in s.split(",") if part.strip()]


def format_float(value: float) -> str:
    """Render a float with 17 significant digits so files diff exactly.

    >>> format_float(0.1)
    '0.10000000000000001'
    >>> format_float(600.0)
    '600'
    """
    return format(float(value), ".17g")


@dataclass
class Preset:
    description: str | None = None
    cell_radius_m: float | None = None
    close_in_m: float | None = None
    alpha_db: float | None = None
    beta_db: float | None = None
    sigma_psi_db: float | None = None
    n_samples: int | None = None
    n_bins: int | None = None
    grid_points: int | None = None

    @classmethod
    def from_dict(cls, data: dict) -> Self:
        valid_fields = {f.name for f in fields(cls)}
        data = {k: v for k, v in data.items() if k in valid_fields}
        return cls(**data)

    def options(self) -> dict[str, float | int]:
        """Values to seed ``ctx.default_map`` with, skipping unset ones and the description."""
        values = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "description"}
        return {k: v for k, v in values.items() if v is not None}


def _merge_preset_options(common_options: dict, preset_options: dict) -> dict:
    """Overlay a named preset on the [common] table; the description is never inherited."""
    merged_options = {k: v for k, v in common_options.items() if k != "description" and v is not None}
    merged_options.update({k: v for k, v in preset_options.items() if v is not None})
    return merged_options


def load_presets(path: Path = DEFAULT_PRESETS_PATH) -> dict[str, Preset]:
    with open(path, "rb") as f:
        presets_data = tomli.load(f)

    if "common" in presets_data:
        common_options = presets_data["common"]
        for name, options in presets_data.items():
            if name == "common":
                continue
            presets_data[name] = _merge_preset_options(common_options, options)

    return {name: Preset.from_dict(options) for name, options in presets_data.items()}


def _format_toml_value(value: str | bool | int | float | list) -> str:
    """Format a Python value as a TOML literal.

    >>> _format_toml_value(True)
    'true'
    >>> _format_toml_value(35)
    '35'
    >>> _format_toml_value(34.5)
    '34.5'
    >>> _format_toml_value([600.0, 1500.0])
    '[600.0, 1500.0]'
    >>> _format_toml_value('out"put.csv')
    '"out\\\\"put.csv"'
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        items = ", ".join(_format_toml_value(item) for item in value)
        return f"[{items}]"
    # Escape backslashes first, then characters illegal in TOML basic strings
    escaped = (
        value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
    )
    return f'"{escaped}"'


def write_run_config(
    path: Path,
    args: dict[str, Any],
    subcommand: str,
    *,
    tool_version: str | None = None,
) -> Path:
    """Write a replayable run config to *path* (a file, or a directory to hold the default name).

    Keys outside ``RUN_CONFIG_ARG_KEYS`` and ``None`` values are left out.
    """
    if path.is_dir():
        path = path / RUN_CONFIG_FILENAME
    lines = ["# Auto-generated by hexfade", "[metadata]", f'subcommand = "{subcommand}"']
    if tool_version:
        lines.append(f'tool_version = "{tool_version}"')
    lines.append("")
    lines.append("[args]")
    for key in RUN_CONFIG_ARG_KEYS:
        if args.get(key) is not None:
            value = args[key]
            lines.append(f"{key} = {_format_toml_value(str(value) if isinstance(value, Path) else value)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_run_config(path: Path) -> tuple[dict[str, Any], dict[str, str]]:
    """Read a run config from *path* (directory or file).

    Returns ``(args_dict, metadata_dict)``.
    Raises ``FileNotFoundError`` if the config file doesn't exist.
    """
    if path.is_dir():
        path = path / RUN_CONFIG_FILENAME
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, "rb") as f:
        data = tomli.load(f)
    return data.get("args", {}), data.get("metadata", {})


def _write_rows(stream: TextIO, header: Sequence[str], columns: Sequence[Iterable[float]]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns, strict=True):
        writer.writerow([format_float(v) for v in row])


def write_csv(path: Path | None, header: Sequence[str], columns: Sequence[Iterable[float]]) -> Path | None:
    """Write equal-length numeric columns as CSV to *path*, or to stdout when *path* is None."""
    if path is None:
        _write_rows(sys.stdout, header, columns)
        return None
    with open(path, "w", encoding="utf-8", newline="") as f:
        _write_rows(f, header, columns)
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")  # noqa: TRY003


def dumps_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default)


def write_json(path: Path, data: Any) -> Path:
    path.write_text(dumps_json(data) + "\n", encoding="utf-8")
    return path

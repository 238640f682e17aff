"""CSV tables and YAML run configurations.

Floats are written with 17 significant digits so that a write/read round
trip reproduces every value bit for bit.  NaN is never written.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
import yaml

from .errors import InvalidConfig, SchemaError

__all__ = [
    "SCHEMAS",
    "write_csv",
    "read_csv",
    "format_value",
    "load_config",
    "merge_config",
    "dump_config",
]

# column name -> type, per emitted table
SCHEMAS = {
    "convergence": {"N": int, "scheme": str, "rmse_grad": float, "rmse_lap": float},
    "noise": {"s": float, "scheme": str, "rmse_grad": float, "rmse_lap": float},
    "burgers_snapshot": {"t": float, "x": float, "u": float},
    "euler_snapshot": {"t": float, "x": float, "rho": float, "u": float, "p": float},
    "grid": {"i": int, "x_node": float, "x_interface_right": float},
    "sod_metrics": {"scheme": str, "region": str, "l1": float, "linf": float,
                    "thickness": float, "post_shock_osc": float, "tv": float},
    "dnn_table": {"function": str, "dnn_mse_grad": float, "implicit_mse_grad": float,
                  "implicit_mse_lap": float, "explicit_mse_grad": float,
                  "explicit_mse_lap": float},
    "sweep": {"k": float, "theta": float, "rmse_exact": float, "rmse_self": float},
    "derivatives_1d": {"x": float, "grad": float, "lap": float},
}


def _schema(schema):
    if isinstance(schema, str):
        try:
            return SCHEMAS[schema]
        except KeyError:
            raise SchemaError(f"unknown schema {schema!r}") from None
    if isinstance(schema, dict):
        return schema
    # a plain sequence of names: every column is a float
    return {name: float for name in schema}


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, rows, schema) -> Path:
    """Write ``rows`` (dicts keyed by column) under the declared schema.

    An empty ``rows`` gives a header-only file.  Missing or extra columns
    and NaN values raise :class:`SchemaError` naming the column.
    """
    cols = _schema(schema)
    names = list(cols)
    path = Path(path)
    lines = []
    for n, row in enumerate(rows):
        extra = set(row) - set(names)
        if extra:
            col = sorted(extra)[0]
            raise SchemaError(f"row {n}: unexpected column {col!r}", column=col)
        out = []
        for name in names:
            if name not in row:
                raise SchemaError(f"row {n}: missing column {name!r}", column=name)
            v = row[name]
            if isinstance(v, (float, np.floating)) and math.isnan(v):
                raise SchemaError(f"row {n}: NaN in column {name!r}", column=name)
            out.append(format_value(v))
        lines.append(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        writer.writerows(lines)
    return path


def read_csv(path, schema) -> list[dict]:
    """Read a table written by :func:`write_csv` and convert column types."""
    cols = _schema(schema)
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: no header") from None
        for want, got in zip(list(cols), header):
            if want != got:
                raise SchemaError(f"expected column {want!r}, found {got!r}", column=want)
        if len(header) != len(cols):
            names = list(cols)
            col = names[len(header)] if len(header) < len(cols) else header[len(cols)]
            raise SchemaError(f"column count mismatch at {col!r}", column=col)
        rows = []
        for n, rec in enumerate(reader, start=2):
            if len(rec) != len(cols):
                raise SchemaError(f"line {n}: expected {len(cols)} fields", column=None)
            row = {}
            for (name, typ), text in zip(cols.items(), rec):
                try:
                    row[name] = typ(text)
                except ValueError:
                    raise SchemaError(f"line {n}: bad value {text!r} in column {name!r}",
                                      column=name) from None
                if typ is float and math.isnan(row[name]):
                    raise SchemaError(f"line {n}: NaN in column {name!r}", column=name)
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# configuration


def load_config(path) -> dict:
    """Read a YAML mapping; an empty file is an empty mapping."""
    try:
        with Path(path).open() as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"cannot parse {path}: {exc}", key=str(path)) from None
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc.strerror}", key=str(path)) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InvalidConfig("the config file must hold a mapping", key=str(path))
    return data


def merge_config(defaults: dict, *layers: dict) -> dict:
    """Overlay ``layers`` on ``defaults``; keys absent from ``defaults`` are rejected.

    Nested mappings are merged recursively.  ``None`` values in a layer are
    skipped so unset command-line flags leave file values alone.
    """
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in defaults.items()}
    for layer in layers:
        for key, value in (layer or {}).items():
            if key not in out:
                raise InvalidConfig(f"unknown config key {key!r}", key=key)
            if value is None:
                continue
            if isinstance(out[key], dict):
                if not isinstance(value, dict):
                    raise InvalidConfig(f"config key {key!r} must be a mapping", key=key)
                try:
                    out[key] = merge_config(out[key], value)
                except InvalidConfig as exc:
                    raise InvalidConfig(str(exc), key=f"{key}.{exc.key}") from None
            else:
                out[key] = _coerce(key, out[key], value)
    return out


def _coerce(key, default, value):
    """Convert ``value`` to the type of ``default`` (unset defaults accept anything)."""
    if default is None:
        return value
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
        if isinstance(default, list):
            if not isinstance(value, (list, tuple)):
                raise TypeError
            kind = type(default[0]) if default else None
            return [_coerce(key, kind(), v) if kind else v for v in value]
    except (TypeError, ValueError):
        raise InvalidConfig(f"config key {key!r} expects {type(default).__name__}, "
                            f"got {value!r}", key=key) from None
    return value


def dump_config(path, cfg: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        yaml.safe_dump(_plain(cfg), fh, sort_keys=False)
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj

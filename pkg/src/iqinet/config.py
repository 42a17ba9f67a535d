"""Flat ``key = value`` configuration files with namespaced keys.

Lines starting with ``#`` are comments. Lists are comma separated.

Recognised keys (defaults in parentheses):

``channel.irr_db`` (inf), ``channel.irr_mode`` (amplitude), ``channel.kappa`` (table),
``channel.distance_m`` (10), ``channel.freq_hz`` (100e9), ``channel.gt_dbi`` (30),
``channel.gr_dbi`` (30), ``channel.rel_humidity`` (50), ``channel.temperature_k`` (300.15),
``channel.pressure_pa`` (101325), ``channel.ps_w`` (1.0), ``channel.no_w`` (noise over
``channel.bandwidth_hz`` at 300 K)

``train.*``: every field of :class:`iqinet.training.TrainConfig`
(``train.m``, ``train.snr_db``, ``train.lr_adam``, ``train.lr_sgd``, ``train.sigma2``, ...)

``sweep.snr_db_list``, ``sweep.irr_db_list``, ``sweep.m_list``, ``sweep.systems``,
``sweep.min_errors`` (100), ``sweep.max_bits`` (1e7), ``sweep.seed`` (0),
``sweep.workers`` (1), ``sweep.checkpoint_dir`` (checkpoints)
"""

from __future__ import annotations

import math
from pathlib import Path


class ConfigError(ValueError):
    pass


def loads(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = value
    return out


def load(path) -> dict[str, str]:
    return loads(Path(path).read_text())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def dumps(values: dict) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(values.items()))


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_float(text) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "+inf", "infinity", "ideal"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_int(text) -> int:
    try:
        v = float(str(text).strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None
    if not v.is_integer():
        raise ConfigError(f"not an integer: {text!r}")
    return int(v)


def parse_list(text, item=parse_float) -> list:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    return [item(p) for p in parts]


def coerce(value, kind):
    if not isinstance(value, str):
        return value
    if kind is bool:
        return parse_bool(value)
    if kind is int:
        return parse_int(value)
    if kind is float:
        return parse_float(value)
    return value

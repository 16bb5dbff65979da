"""JSON form of :class:`UnitConfig`.

Tables are stored inline as raw coefficient dicts; when loading, a table
entry may instead be a path to a coefficient file written by ``fit``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .fixed_point import QFormat, RoundingMode
from .pwl import PwlTable, load_table
from .softmax_core import UnitConfig

_FORMATS = ("input_fmt", "sum_fmt", "prob_fmt")


def config_to_dict(cfg: UnitConfig) -> dict:
    d = {"n": cfg.n, "rounding": cfg.rounding.value}
    for name in _FORMATS:
        d[name] = getattr(cfg, name).to_dict()
    d["exp_table"] = cfg.exp_table.to_dict()
    d["log_table"] = cfg.log_table.to_dict()
    return d


def _table(entry, base: Path) -> PwlTable:
    if isinstance(entry, str):
        path = Path(entry)
        return load_table(path if path.is_absolute() else base / path)
    return PwlTable.from_dict(entry)


def config_from_dict(d: dict, base: Path = Path(".")) -> UnitConfig:
    unknown = set(d) - {"n", "rounding", *_FORMATS, "exp_table", "log_table"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    if "n" in d:
        kw["n"] = int(d["n"])
    if "rounding" in d:
        kw["rounding"] = RoundingMode(d["rounding"])
    for name in _FORMATS:
        if name in d:
            kw[name] = QFormat.from_dict(d[name])
    for name in ("exp_table", "log_table"):
        if name in d:
            kw[name] = _table(d[name], base)
    return UnitConfig(**kw)


def load_config(path) -> UnitConfig:
    path = Path(path)
    return config_from_dict(json.loads(path.read_text()), path.parent)


def dump_config(cfg: UnitConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"

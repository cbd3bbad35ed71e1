"""Series CSV parsing, key=value config files and result (de)serialisation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .model import TimeSeries
from .sampler import DetectionResult


class DataError(ValueError):
    """Malformed input data."""


class ConfigError(ValueError):
    """Unknown or malformed configuration entry."""


def _parse_float(text: str, lineno: int) -> float:
    try:
        val = float(text)
    except ValueError:
        raise DataError(f"line {lineno}: not a number: {text.strip()!r}") from None
    if not math.isfinite(val):
        raise DataError(f"line {lineno}: non-finite value {text.strip()!r}")
    return val


def parse_series_text(text: str, source: str = "<input>") -> TimeSeries:
    """Parse one value per line, or ``index,value`` pairs (the second column is used).

    A single non-numeric first line is treated as a header.  Blank lines are
    skipped.
    """
    values = []
    lines = text.splitlines()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        cols = [c.strip() for c in line.split(",")]
        if len(cols) > 2:
            raise DataError(f"{source}: line {lineno}: expected 1 or 2 columns, got {len(cols)}")
        field_ = cols[-1]
        if lineno == 1 and not values:
            try:
                float(field_)
            except ValueError:
                continue  # header
        values.append(_parse_float(field_, lineno))
    if len(values) < 2:
        raise DataError(f"{source}: need at least 2 values, found {len(values)}")
    return TimeSeries(np.asarray(values))


def parse_series_csv(path) -> TimeSeries:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_series_text(text, str(path))
    except DataError as exc:
        msg = str(exc)
        raise DataError(msg if msg.startswith(str(path)) else f"{path}: {msg}") from None


def write_series_csv(path, values: Iterable[float]) -> None:
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in values))


def read_config(path, valid_keys: Iterable[str]) -> dict[str, str]:
    """Read flat ``key = value`` lines; ``#`` starts a comment.

    Keys may use dashes or underscores.  Unknown keys raise
    :class:`ConfigError` naming every valid key.
    """
    valid = sorted(set(valid_keys))
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in valid:
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}; "
                              f"valid keys: {', '.join(valid)}")
        out[key] = value
    return out


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def result_to_dict(result: DetectionResult) -> dict:
    return _jsonable(asdict(result))


def result_to_json(result: DetectionResult) -> str:
    return json.dumps(result_to_dict(result), indent=2, sort_keys=True) + "\n"


def result_from_json(text: str) -> DetectionResult:
    d = json.loads(text)
    return DetectionResult(
        change_points=[int(t) for t in d["change_points"]],
        posterior_prob=np.asarray(d["posterior_prob"], dtype=float),
        pooled_prob=np.asarray(d["pooled_prob"], dtype=float),
        labels=[int(c) for c in d["labels"]],
        class_means=[float(m) for m in d["class_means"]],
        num_classes=int(d["num_classes"]),
        k_posterior={int(k): float(v) for k, v in d["k_posterior"].items()},
        settings=d["settings"],
        seed=d["seed"],
    )

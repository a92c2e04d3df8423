"""Flat ``key = value`` run configuration.

Each command has a schema of typed keys with defaults; ``seed`` and
``preset`` are accepted by every command. Unknown keys are errors. Lines
starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union


class ConfigError(ValueError):
    pass


FLOATS = "floats"  # comma-separated list of floats

_PULSE = {
    "cc": (float, None),
    "jitter": (bool, True),
    "n_pulses": (int, 20),
    "pulse_width": (float, 1e-4),
    "amplitude": (float, 1.0),
    "gap_width": (float, 1e-4),
    "gap_amplitude": (float, 0.1),
    "i_fire": (float, 1e-6),
}

SCHEMAS: Dict[str, Dict[str, Tuple[Any, Any]]] = {
    "sweep": {
        "cc": (float, None), "jitter": (bool, True),
        "v_max": (float, 1.0), "v_min": (float, -1.0), "segment_time": (float, 0.25),
        "points_per_segment": (int, 500), "cycles": (int, 1),
    },
    "pulse": dict(_PULSE, reset_on_fire=(bool, True)),
    "lif": dict(_PULSE, cycles=(int, 2), t_recover=(float, None)),
    "firing-ratio": {
        "cc": (float, None), "jitter": (bool, True),
        "widths": (FLOATS, (1e-4, 2e-4, 3e-4, 4e-4)), "trials": (int, 50),
        "pulses_per_trial": (int, 20), "amplitude": (float, 1.0),
        "gap_width": (float, 1e-4), "gap_amplitude": (float, 0.1), "i_fire": (float, 1e-6),
    },
    "plasticity": {
        "cc": (float, 5e-3), "jitter": (bool, True),
        "n_pulses": (int, 30), "pulse_width": (float, 15e-3), "amplitude": (float, 2.5),
        "gap_width": (float, 10e-3), "gap_amplitude": (float, 0.1), "idle": (float, None),
    },
    "endurance": {
        "cc": (float, None), "jitter": (bool, True), "cycles": (int, 2500),
        "v_max": (float, 1.0), "v_min": (float, -1.0), "segment_time": (float, 0.1),
        "points_per_segment": (int, 200), "min_ratio": (float, 10.0),
    },
    "sample-array": {
        "rows": (int, 16), "cols": (int, 65), "yield_p": (float, 0.93),
        "onoff_decades_mean": (float, 5.5), "onoff_decades_sigma": (float, 0.3),
        "v_set_mean": (float, 0.29), "v_set_sigma": (float, 0.10),
        "v_reset_mean": (float, -0.44), "v_reset_sigma": (float, 0.20),
    },
    "synth-data": {
        "n_images": (int, 12), "height": (int, 96), "width": (int, 96),
        "lesions_per_type": (int, 1), "distractors": (int, 4), "texture": (float, 0.02),
    },
    "train-dr": {
        "manifest": (str, ""), "vectors": (str, ""), "separable": (bool, False),
        "n_samples": (int, 400), "mode": (str, "float"), "epochs": (int, 1000),
        "batch_size": (int, 16), "step": (float, 1.0 / 800), "test_fraction": (float, 0.25),
        "yield_p": (float, 0.93), "n_models": (int, 9), "n_levels": (int, 800),
        "nonlinearity": (float, 0.25), "alpha": (float, None), "curve": (str, ""),
    },
    "eval-dr": {
        "model": (str, "model.json"), "manifest": (str, ""), "vectors": (str, ""),
        "separable": (bool, False), "n_samples": (int, 400),
    },
    "tti": {
        "profile": (str, ""), "amplitude": (float, None),
        "calibration": (FLOATS, (4.0, 0.3, 12.0, 0.8, 25.0, 1.5)),
        "pulse_width": (float, 0.2e-3), "gap_width": (float, 0.1e-3), "gap_amplitude": (float, 0.1),
        "pulses_per_burst": (int, 100), "bursts": (int, 10), "burst_idle": (float, 1.0),
        "i_fire": (float, 1e-6), "cc": (float, 1e-3), "jitter": (bool, True),
    },
}

DEFAULT_PRESET = {
    "sweep": "nonvolatile-1mA", "pulse": "lif-calibrated", "lif": "lif-calibrated",
    "firing-ratio": "lif-calibrated", "plasticity": "lif-calibrated",
    "endurance": "nonvolatile-1mA", "sample-array": "nonvolatile-1mA", "tti": "tti-au",
}

GLOBAL_KEYS = ("seed", "preset")


@dataclass
class RunConfig:
    command: str
    values: Dict[str, Any]
    seed: int = 0
    preset: Optional[str] = None
    out: Optional[str] = None

    def __getitem__(self, key: str) -> Any:
        return self.values[key]


def _parse(kind, key: str, text: str):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind is FLOATS:
            return tuple(float(t) for t in text.split(",") if t.strip())
        if text.lower() in ("", "none") and kind is not str:
            return None
        return kind(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    return str(value)


def defaults(command: str) -> RunConfig:
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    return RunConfig(command, {k: d for k, (_, d) in SCHEMAS[command].items()},
                     preset=DEFAULT_PRESET.get(command))


def set_value(cfg: RunConfig, key: str, value: Union[str, Any]) -> None:
    """Set one key; strings are parsed with the key's type."""
    if key == "seed":
        cfg.seed = _parse(int, key, value) if isinstance(value, str) else int(value)
        return
    if key == "preset":
        cfg.preset = str(value)
        return
    schema = SCHEMAS[cfg.command]
    if key not in schema:
        raise ConfigError(f"unknown key {key!r} for command {cfg.command}")
    kind = schema[key][0]
    cfg.values[key] = _parse(kind, key, value) if isinstance(value, str) else value


def parse_text(text: str, command: str) -> RunConfig:
    cfg = defaults(command)
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            set_value(cfg, key, value)
        except ConfigError as e:
            raise ConfigError(f"line {n}: {e}") from None
    return cfg


def parse_config(path: Union[str, Path], command: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_text(text, command)


def serialize(cfg: RunConfig) -> str:
    """All effective values, one per line; ``parse_text`` reads it back unchanged."""
    lines = [f"# {cfg.command}", f"seed = {cfg.seed}"]
    if cfg.preset is not None:
        lines.append(f"preset = {cfg.preset}")
    lines += [f"{k} = {_render(v)}" for k, v in cfg.values.items()]
    return "\n".join(lines) + "\n"

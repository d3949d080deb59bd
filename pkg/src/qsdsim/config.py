"""Run configuration: a flat JSON file plus command-line overrides.

Strengths (M_z, M_x) are the user-facing knobs; coupling amplitudes are
derived from the box-function period T.  Unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

__all__ = ["RunConfig", "load_config", "build_run_config", "parse_set_value"]

_EXPERIMENTS = ("trajectory", "density", "dwell", "cascade", "collapse_time", "validate")


@dataclass
class RunConfig:
    system: str = "spin_one"
    experiment: str | None = None
    M_z: float = 8.0
    M_x: float | list = 8.0
    T: float = 2.0
    dt: float = 1e-4
    duration: float | None = None
    stepper: str = "kraus"
    seed: int = 0
    n_trajectories: int = 1
    initial: str = "mixed_start"
    output_dir: str = "."
    sample_stride: int = 10
    threads: int = 1
    bins: int = 200
    classify_eps: float = 1e-3
    collapse_threshold: float = 0.9
    collapse_targets: list = field(default_factory=lambda: [1, -1])
    observable: str = "z"

    def __post_init__(self) -> None:
        if self.system not in ("spin_half", "spin_one"):
            raise ValueError(f"invalid config: system must be spin_half or spin_one, got {self.system!r}")
        if self.experiment is not None and self.experiment not in _EXPERIMENTS:
            raise ValueError(f"invalid config: unknown experiment {self.experiment!r}")
        if self.stepper not in ("kraus", "euler"):
            raise ValueError(f"invalid config: stepper must be kraus or euler, got {self.stepper!r}")
        if self.observable not in ("z", "x"):
            raise ValueError(f"invalid config: observable must be 'z' or 'x', got {self.observable!r}")
        if self.T <= 0 or self.dt <= 0:
            raise ValueError("invalid config: T and dt must be positive")
        if self.n_trajectories < 1 or self.threads < 1 or self.bins < 2:
            raise ValueError("invalid config: n_trajectories/threads/bins out of range")
        m_x_values = self.M_x if isinstance(self.M_x, list) else [self.M_x]
        for value in [self.M_z, *m_x_values]:
            if not isinstance(value, (int, float)) or value < 0:
                raise ValueError("invalid config: measurement strengths must be numbers >= 0")
        if not 0.0 < self.classify_eps < 0.5:
            raise ValueError("invalid config: classify_eps must lie in (0, 0.5)")
        if not 0.5 < self.collapse_threshold < 1.0:
            raise ValueError("invalid config: collapse_threshold must lie in (0.5, 1)")

    @property
    def m_x_values(self) -> list[float]:
        return [float(v) for v in (self.M_x if isinstance(self.M_x, list) else [self.M_x])]

    @property
    def m_x_scalar(self) -> float:
        values = self.m_x_values
        if len(values) != 1:
            raise ValueError("invalid config: this experiment needs a single M_x value")
        return values[0]

    def echo(self) -> dict:
        return asdict(self)


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def load_config(path: str | Path) -> dict[str, Any]:
    """Parse a JSON config file; parse errors keep their line/column info."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"invalid config {path}: {err}") from None
    if not isinstance(data, dict):
        raise ValueError(f"invalid config {path}: top level must be an object")
    return data


def parse_set_value(text: str) -> Any:
    """Value of a --set key=value override: JSON literal when possible,
    bare string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_run_config(
    file_data: dict[str, Any] | None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Merge config-file keys and command-line overrides (overrides win)."""
    merged: dict[str, Any] = {}
    for source, origin in ((file_data, "config file"), (overrides, "command line")):
        if not source:
            continue
        for key, value in source.items():
            if key not in _FIELD_NAMES:
                raise ValueError(f"invalid config: unknown key {key!r} (from {origin})")
            merged[key] = value
    for key in ("seed", "n_trajectories", "sample_stride", "threads", "bins"):
        if key in merged:
            merged[key] = int(merged[key])
    return RunConfig(**merged)

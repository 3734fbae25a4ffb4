import json
import os
from dataclasses import dataclass, fields
from dataclasses import field as dataclass_field
from typing import List, Optional, Union

from config.log_config import app_logger
from config.presets_config import DEFAULT_CT_FREQUENCY, DEFAULT_DECOHERENCE_MODEL, DEFAULT_LINEWIDTH, DEFAULT_SYSTEM

FORMATS = ("csv", "json")
MIN_GRID = 16
RESULT_FOLDER = "result"

# Per-command defaults for values the config file and flags leave unset
COMMAND_DEFAULTS = {
    "levels": {"field_range": [0.0, 0.6], "grid": 512},
    "transitions": {"grid": 16},
    "find-ct": {"field_range": [0.005, 0.25], "grid": 2048},
    "spectrum": {"field_range": [0.065, 0.095], "grid": 3001},
    "t2": {"grid": 64},
    "echo": {"grid": 64},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    system: Union[str, dict] = DEFAULT_SYSTEM
    field_range: Optional[List[float]] = None
    grid: Optional[int] = None
    output: Optional[str] = None
    format: str = "csv"
    seed: int = 0
    progress: bool = True
    # transitions
    field: Optional[float] = None
    # find-ct
    quantity: str = "dfdB"
    merge_doublets: bool = True
    cache: bool = False
    cache_db: Optional[str] = None
    # spectrum
    f_mw: Optional[float] = None
    linewidth: str = DEFAULT_LINEWIDTH
    width_f0: Optional[float] = None
    width_A: Optional[float] = None
    width_B: Optional[float] = None
    shape: Optional[str] = None
    # t2
    mode: str = "fit"
    data: Optional[str] = None
    model: str = DEFAULT_DECOHERENCE_MODEL
    x: List[float] = dataclass_field(default_factory=list)
    concentration: Optional[float] = None
    shared: bool = True
    ct_frequency: float = DEFAULT_CT_FREQUENCY
    # echo
    simulate: bool = False
    T2: Optional[float] = None
    n: float = 1.0
    noise: float = 0.0
    magnitude: bool = False
    max_delay: Optional[float] = None

    @property
    def output_path(self):
        if self.output:
            return self.output
        return os.path.join(RESULT_FOLDER, f"{self.command}.{self.format}")

    def validate(self):
        if self.command not in COMMAND_DEFAULTS:
            raise ConfigError(f"Unknown command: {self.command}")
        if self.format not in FORMATS:
            raise ConfigError(f"Output format must be one of {FORMATS}, got {self.format!r}")
        if self.grid is None or int(self.grid) != self.grid or self.grid < MIN_GRID:
            raise ConfigError(f"Grid must be an integer >= {MIN_GRID}, got {self.grid}")
        if self.field_range is not None:
            if len(self.field_range) != 2:
                raise ConfigError(f"Field range needs two values, got {self.field_range}")
            lo, hi = self.field_range
            if hi < lo:
                raise ConfigError(f"Field range must be ordered, got [{lo}, {hi}]")
        if self.quantity not in ("dfdB", "dfdA"):
            raise ConfigError(f"Quantity must be dfdB or dfdA, got {self.quantity!r}")
        if self.mode not in ("fit", "eval"):
            raise ConfigError(f"T2 mode must be fit or eval, got {self.mode!r}")

        if self.command == "transitions" and self.field is None:
            raise ConfigError("transitions needs --field")
        if self.command == "spectrum" and self.f_mw is None:
            raise ConfigError("spectrum needs --fmw")
        if self.command == "t2" and self.mode == "fit" and not self.data:
            raise ConfigError("t2 --mode fit needs --data")
        if self.command == "t2" and self.mode == "eval" and not self.data and not self.x:
            raise ConfigError("t2 --mode eval needs --data or --x")
        if self.command == "echo":
            if self.simulate and self.T2 is None:
                raise ConfigError("echo --simulate needs --t2")
            if not self.simulate and not self.data:
                raise ConfigError("echo needs --data or --simulate")
        return self


def load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    app_logger.debug(f"Loaded run config from {path}")
    return data


def build_run_config(command: str, file_values: dict = None, overrides: dict = None) -> RunConfig:
    """Command defaults, then config file values, then every flag that was actually given."""
    known = {f.name for f in fields(RunConfig)}
    values = dict(COMMAND_DEFAULTS.get(command, {}))
    for source in (file_values or {}, overrides or {}):
        unknown = sorted(set(source) - known)
        if unknown:
            raise ConfigError(f"Unknown config key(s): {unknown}")
        values.update({k: v for k, v in source.items() if v is not None})
    values["command"] = command
    try:
        config = RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    if config.field_range is not None:
        config.field_range = [float(v) for v in config.field_range]
    return config.validate()

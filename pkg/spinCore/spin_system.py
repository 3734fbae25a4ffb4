import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from config.log_config import app_logger
from config.presets_config import SYSTEM_NAME_MAP

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "system_config")


class SpinSystemError(ValueError):
    pass


def _is_half_integer(value):
    twice = 2 * value
    return value >= 0 and np.isclose(twice, round(twice))


@dataclass(frozen=True)
class SpinSystem:
    """Physical constants of one donor species.

    Frequencies are in GHz (E/h), fields in T, so gamma_e and gamma_n are in GHz/T.
    """
    S: float
    I: float
    gamma_e: float
    gamma_n: float
    A: float
    name: str = "custom"

    def __post_init__(self):
        if not _is_half_integer(self.S) or not _is_half_integer(self.I):
            raise SpinSystemError(f"S and I must be non-negative half-integers, got S={self.S}, I={self.I}")
        if not self.gamma_e > 0:
            raise SpinSystemError(f"gamma_e must be positive, got {self.gamma_e}")
        for field in ("gamma_n", "A"):
            if not np.isfinite(getattr(self, field)):
                raise SpinSystemError(f"{field} must be finite")

    @property
    def dim(self):
        return int(round((2 * self.S + 1) * (2 * self.I + 1)))

    def to_dict(self):
        return asdict(self)

    def with_hyperfine(self, A):
        return SpinSystem(self.S, self.I, self.gamma_e, self.gamma_n, A, self.name)


def _config_path(name):
    file_stem = SYSTEM_NAME_MAP.get(name, name.replace(":", "-"))
    return os.path.join(CONFIG_DIR, f"{file_stem}.json")


def available_systems():
    if not os.path.isdir(CONFIG_DIR):
        return sorted(SYSTEM_NAME_MAP)
    stems = [os.path.splitext(f)[0] for f in os.listdir(CONFIG_DIR) if f.endswith(".json")]
    return sorted(stem.replace("-", ":") if stem != "Custom" else stem for stem in stems)


def system_from_dict(data, name=None):
    """Build a SpinSystem from an inline {S, I, gamma_e, gamma_n, A} mapping."""
    missing = [key for key in ("S", "I", "gamma_e", "gamma_n", "A") if key not in data]
    if missing:
        raise SpinSystemError(f"Spin system is missing keys: {missing}")
    try:
        return SpinSystem(
            S=float(data["S"]),
            I=float(data["I"]),
            gamma_e=float(data["gamma_e"]),
            gamma_n=float(data["gamma_n"]),
            A=float(data["A"]),
            name=name or data.get("name", "custom"),
        )
    except SpinSystemError:
        raise
    except (TypeError, ValueError) as e:
        raise SpinSystemError(f"Invalid spin system values: {e}") from e


def load_system(system):
    """Resolve a preset name ("Si:Bi") or an inline dict into a SpinSystem."""
    if isinstance(system, SpinSystem):
        return system
    if isinstance(system, dict):
        return system_from_dict(system)

    json_path = _config_path(str(system))
    if not os.path.exists(json_path):
        app_logger.error(f"System config file not found: {json_path}")
        raise SpinSystemError(f"Unknown spin system '{system}'. Available: {available_systems()}")

    try:
        with open(json_path, "r", encoding="utf-8") as f:
            config = json.load(f)
    except json.JSONDecodeError as e:
        app_logger.error(f"Failed to parse JSON file: {json_path}")
        raise SpinSystemError(f"Malformed system config {json_path}: {e}") from e

    app_logger.debug(f"Loaded spin system '{system}' from {json_path}")
    return system_from_dict(config, name=config.get("name", str(system)))

"""
Phenomenological coherence-time model.

    1/T2 = C^e_dFF k_dFF + C^e_iFF k_iFF x + C^e_ID k_ID x^2

with x = |df/dB| / gamma_e the normalized field slope of the driven transition
and C the donor concentration (cm^-3). All exponents default to 1.
"""

import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.optimize import least_squares, nnls

from config.log_config import app_logger

CHANNELS = ("dFF", "iFF", "ID")
SLOPE_POWERS = {"dFF": 0, "iFF": 1, "ID": 2}
CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "decoherence_config")
# A channel needs data at x below / above these fractions to be separable
DECADE = 0.1
MAX_X = 1.01


class IdentifiabilityError(ValueError):
    pass


class FitConvergenceError(RuntimeError):
    pass


def _default_exponents():
    return {channel: 1.0 for channel in CHANNELS}


@dataclass
class DecoherenceModel:
    k_dFF: float
    k_iFF: float
    k_ID: float
    concentration: float
    exponents: Dict[str, float] = field(default_factory=_default_exponents)
    name: str = "custom"
    temperature_K: Optional[float] = None

    def __post_init__(self):
        for channel in CHANNELS:
            value = self.coefficient(channel)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"k_{channel} must be finite and non-negative, got {value}")
        if not np.isfinite(self.concentration) or self.concentration <= 0:
            raise ValueError(f"Concentration must be positive, got {self.concentration}")
        exponents = _default_exponents()
        exponents.update(self.exponents or {})
        unknown = set(exponents) - set(CHANNELS)
        if unknown:
            raise ValueError(f"Unknown decoherence channel(s): {sorted(unknown)}")
        self.exponents = {channel: float(exponents[channel]) for channel in CHANNELS}

    def coefficient(self, channel):
        return getattr(self, f"k_{channel}")

    def channel_rates(self, x, concentration=None):
        """Per-channel decoherence rates (1/s) at normalized slope x."""
        x = _check_slope(x)
        C = self.concentration if concentration is None else np.asarray(concentration, dtype=float)
        return {
            channel: self.coefficient(channel) * np.power(C, self.exponents[channel]) * x ** SLOPE_POWERS[channel]
            for channel in CHANNELS
        }

    def crossovers(self, concentration=None):
        """Slopes x where dFF hands over to iFF, and iFF to ID."""
        C = self.concentration if concentration is None else concentration
        scaled = {channel: self.coefficient(channel) * C ** self.exponents[channel] for channel in CHANNELS}

        def ratio(a, b):
            return scaled[a] / scaled[b] if scaled[b] > 0 else np.inf

        return {"dFF_iFF": ratio("dFF", "iFF"), "iFF_ID": ratio("iFF", "ID")}

    def with_concentration(self, concentration):
        data = self.to_dict()
        data["concentration"] = float(concentration)
        return DecoherenceModel.from_dict(data)

    def to_dict(self):
        return {
            "name": self.name,
            "k_dFF": self.k_dFF,
            "k_iFF": self.k_iFF,
            "k_ID": self.k_ID,
            "concentration": self.concentration,
            "exponents": dict(self.exponents),
            "temperature_K": self.temperature_K,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                k_dFF=float(data["k_dFF"]),
                k_iFF=float(data["k_iFF"]),
                k_ID=float(data["k_ID"]),
                concentration=float(data["concentration"]),
                exponents=dict(data.get("exponents") or {}),
                name=data.get("name", "custom"),
                temperature_K=data.get("temperature_K"),
            )
        except KeyError as e:
            raise ValueError(f"Decoherence model is missing field {e}") from e


def _check_slope(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > MAX_X):
        raise ValueError("Normalized slope x must lie in [0, 1]")
    return x


def inv_t2(model: DecoherenceModel, x, concentration=None):
    rates = model.channel_rates(x, concentration)
    total = sum(rates.values())
    return float(total) if np.ndim(total) == 0 else total


def t2(model: DecoherenceModel, x, concentration=None):
    return 1.0 / inv_t2(model, x, concentration)


def available_models():
    return sorted(os.path.splitext(name)[0] for name in os.listdir(CONFIG_DIR) if name.endswith(".json"))


def load_model(name_or_path: str) -> DecoherenceModel:
    """Bundled model by name (config/decoherence_config/<name>.json) or a JSON file path."""
    path = name_or_path if os.path.isfile(name_or_path) else os.path.join(CONFIG_DIR, f"{name_or_path}.json")
    if not os.path.isfile(path):
        raise ValueError(f"Unknown decoherence model: {name_or_path}. Available: {available_models()}")
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    data.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    model = DecoherenceModel.from_dict(data)
    app_logger.debug(f"Loaded decoherence model {model.name} from {path}")
    return model


@dataclass
class T2Fit:
    model: DecoherenceModel
    models: Dict[float, DecoherenceModel]
    residuals: np.ndarray
    stderr: Dict[str, float]
    unidentifiable: List[str]
    cost: float
    shared: bool = True

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "models": {f"{C:.6g}": model.to_dict() for C, model in sorted(self.models.items())},
            "stderr": self.stderr,
            "unidentifiable": list(self.unidentifiable),
            "rms_log_residual": float(np.sqrt(np.mean(self.residuals ** 2))) if len(self.residuals) else 0.0,
            "shared": self.shared,
        }


def t2_frame(data) -> pd.DataFrame:
    """Normalize (x, concentration_cm3, T2_s) data given as a DataFrame or a list of tuples."""
    if isinstance(data, pd.DataFrame):
        frame = data
    else:
        frame = pd.DataFrame(list(data), columns=["x", "concentration_cm3", "T2_s"])
    missing = {"x", "concentration_cm3", "T2_s"} - set(frame.columns)
    if missing:
        raise ValueError(f"T2 data is missing column(s): {sorted(missing)}")
    frame = frame[["x", "concentration_cm3", "T2_s"]].astype(float)
    if not np.all(np.isfinite(frame.values)):
        raise ValueError("T2 data contains non-finite values")
    if (frame["T2_s"] <= 0).any() or (frame["concentration_cm3"] <= 0).any():
        raise ValueError("T2 and concentration values must be positive")
    _check_slope(frame["x"].values)
    return frame


def _identifiability(x):
    if len(x) < 3:
        raise IdentifiabilityError(f"At least 3 points are needed to fit three channels, got {len(x)}")
    if np.ptp(x) == 0:
        raise IdentifiabilityError("All slopes x are equal; the channels cannot be separated (rank deficient)")
    flagged = []
    if x.min() > DECADE * x.max():
        flagged.append("k_dFF")
    if x.max() < DECADE:
        flagged.append("k_ID")
    for name in flagged:
        app_logger.warning(f"{name} is not identifiable from the supplied slope range [{x.min():.3g}, {x.max():.3g}]")
    return flagged


def _fit_group(x, C, T2, exponents, C_ref):
    rates = 1.0 / T2
    design = np.column_stack([(C / C_ref) ** exponents[channel] * x ** SLOPE_POWERS[channel] for channel in CHANNELS])

    # Relative-error NNLS start, then refine on log rates
    weights = 1.0 / rates
    start, _ = nnls(design * weights[:, None], np.ones_like(rates))
    floor = 1e-9 * max(start.max(), rates.min())
    start = np.maximum(start, floor)

    def residuals(p):
        return np.log(np.maximum(design @ p, np.finfo(float).tiny)) - np.log(rates)

    result = least_squares(residuals, start, bounds=(0, np.inf), x_scale="jac", method="trf")
    if not result.success:
        raise FitConvergenceError(f"Decoherence fit did not converge: {result.message}")

    dof = len(rates) - len(CHANNELS)
    stderr = np.full(len(CHANNELS), np.nan)
    if dof > 0:
        jtj = result.jac.T @ result.jac
        covariance = np.linalg.pinv(jtj) * (2 * result.cost / dof)
        stderr = np.sqrt(np.clip(np.diag(covariance), 0, None))

    scale = np.array([C_ref ** exponents[channel] for channel in CHANNELS])
    return result.x / scale, stderr / scale, result.fun, float(result.cost)


def fit_t2_model(data, shared: bool = True, exponents: Optional[Dict[str, float]] = None,
                 reference_concentration: Optional[float] = None) -> T2Fit:
    """Least-squares fit of the three channel coefficients on log(1/T2), coefficients >= 0.

    shared=True fits one coefficient set across all concentrations; otherwise each
    concentration is fitted on its own and `model` is the lowest-concentration fit.
    """
    frame = t2_frame(data)
    exps = _default_exponents()
    exps.update(exponents or {})
    x = frame["x"].values
    C = frame["concentration_cm3"].values
    T2 = frame["T2_s"].values
    unidentifiable = _identifiability(x)

    models = {}
    if shared:
        C_ref = reference_concentration or float(C.min())
        k, err, residuals, cost = _fit_group(x, C, T2, exps, C_ref)
        base = DecoherenceModel(*map(float, k), concentration=C_ref, exponents=exps, name="fit")
        for value in np.unique(C):
            models[float(value)] = base.with_concentration(value)
        stderr = {f"k_{channel}": float(e) for channel, e in zip(CHANNELS, err)}
        model = base
    else:
        residuals, cost, stderr = [], 0.0, {}
        for value in np.unique(C):
            mask = C == value
            group_flags = _identifiability(x[mask])
            unidentifiable.extend(f"{name}@{value:.3g}" for name in group_flags)
            k, err, group_residuals, group_cost = _fit_group(x[mask], C[mask], T2[mask], exps, float(value))
            models[float(value)] = DecoherenceModel(*map(float, k), concentration=float(value), exponents=exps, name="fit")
            stderr.update({f"k_{channel}@{value:.3g}": float(e) for channel, e in zip(CHANNELS, err)})
            residuals.append(group_residuals)
            cost += group_cost
        residuals = np.concatenate(residuals)
        model = models[min(models)]

    app_logger.info(
        f"Fitted decoherence model on {len(frame)} point(s): "
        + ", ".join(f"k_{channel}={model.coefficient(channel):.4g}" for channel in CHANNELS)
    )
    return T2Fit(model=model, models=models, residuals=np.asarray(residuals), stderr=stderr,
                 unidentifiable=unidentifiable, cost=cost, shared=shared)

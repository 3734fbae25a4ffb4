from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import cauchy, norm

from config.presets_config import LINEWIDTH_PRESETS

SHAPES = ("gaussian", "lorentzian")
# FWHM = 2 sqrt(2 ln 2) sigma for a Gaussian
FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))
# Lineshapes are cut beyond this many FWHM from resonance
CUTOFF_WIDTHS = 200.0


@dataclass(frozen=True)
class LinewidthModel:
    """Inhomogeneous widths, all FWHM: sigma_f0 and sigma_A in GHz, sigma_B in T."""
    sigma_f0: float = 270e-6
    sigma_A: float = 0.0
    sigma_B: float = 0.0
    shape: str = "gaussian"

    def __post_init__(self):
        widths = (self.sigma_f0, self.sigma_A, self.sigma_B)
        if any(not np.isfinite(w) or w < 0 for w in widths):
            raise ValueError(f"Linewidths must be finite and non-negative, got {widths}")
        if not any(w > 0 for w in widths):
            raise ValueError("At least one linewidth must be positive")
        if self.shape not in SHAPES:
            raise ValueError(f"Unknown lineshape: {self.shape}, expected one of {SHAPES}")

    def to_dict(self):
        return asdict(self)


def linewidth_from_preset(name: str, **overrides) -> LinewidthModel:
    if name not in LINEWIDTH_PRESETS:
        raise ValueError(f"Unknown linewidth preset: {name}. Available: {sorted(LINEWIDTH_PRESETS)}")
    values = dict(LINEWIDTH_PRESETS[name])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return LinewidthModel(**values)


def linewidth_values(dfdA, dfdB, model: LinewidthModel):
    """Quadrature sum of the intrinsic, hyperfine-spread and field-spread widths (GHz)."""
    dfdA = np.asarray(dfdA, dtype=float)
    dfdB = np.asarray(dfdB, dtype=float)
    return np.sqrt(model.sigma_f0 ** 2 + (dfdA * model.sigma_A) ** 2 + (dfdB * model.sigma_B) ** 2)


def effective_linewidth(trans, model: LinewidthModel) -> float:
    return float(linewidth_values(trans.dfdA, trans.dfdB, model))


def lineshape(detuning, fwhm, shape: str = "gaussian"):
    """Area-normalized lineshape (1/GHz); zero where the width is zero or the detuning is past the cutoff."""
    detuning = np.asarray(detuning, dtype=float)
    fwhm = np.broadcast_to(np.asarray(fwhm, dtype=float), detuning.shape)
    values = np.zeros(detuning.shape)
    active = (fwhm > 0) & (np.abs(detuning) <= CUTOFF_WIDTHS * fwhm)
    if not np.any(active):
        return values
    if shape == "gaussian":
        values[active] = norm.pdf(detuning[active], scale=fwhm[active] / FWHM_PER_SIGMA)
    elif shape == "lorentzian":
        values[active] = cauchy.pdf(detuning[active], scale=fwhm[active] / 2)
    else:
        raise ValueError(f"Unknown lineshape: {shape}, expected one of {SHAPES}")
    return values

"""
Echo-detected field-sweep spectra at a fixed microwave frequency.

At every field the lineshape is evaluated in the frequency domain and
weighted by the transition intensity; the apparent width in field follows
from the shape of f(B) alone, so no |dB/df| factor is applied.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy import signal

from config.log_config import app_logger
from spinCore.hamiltonian import solve
from spinCore.operators import SpinOperators, build_operators
from spinCore.spin_system import SpinSystem
from spinTransitions.transition import transition_arrays
from .lineshape import LinewidthModel, lineshape, linewidth_values

PEAK_MIN_HEIGHT = 0.05
PEAK_MIN_PROMINENCE = 0.05
# A rise above the running minimum by this fraction of the peak height marks a neighbouring peak
OVERLAP_RISE = 0.05
# Components below this fraction of the strongest point are dropped
COMPONENT_FLOOR = 1e-9


class UnresolvedPeakError(ValueError):
    pass


@dataclass
class Spectrum:
    f_mw: float
    fields: np.ndarray
    amplitude: np.ndarray
    components: Dict[str, np.ndarray] = field(default_factory=dict)
    model: Optional[LinewidthModel] = None

    @property
    def empty(self):
        return not np.any(self.amplitude > 0)


def field_sweep(
    system: SpinSystem,
    f_mw: float,
    B_range,
    n_points: int,
    model: LinewidthModel,
    ops: Optional[SpinOperators] = None,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> Spectrum:
    if n_points < 2:
        raise ValueError(f"A field sweep needs at least 2 points, got {n_points}")
    lo, hi = float(B_range[0]), float(B_range[1])
    if hi < lo:
        raise ValueError(f"Invalid field range: {B_range}")
    ops = ops or build_operators(system)
    fields = np.linspace(lo, hi, n_points)

    amplitude = np.zeros(n_points)
    raw_components = {}
    names = {}
    for index, B0 in enumerate(fields):
        sol = solve(system, ops, float(B0))
        arrays = transition_arrays(sol, system, ops)
        widths = linewidth_values(arrays.dfdA, arrays.dfdB, model)
        contributions = arrays.intensity * lineshape(f_mw - arrays.f, widths, model.shape)
        amplitude[index] = contributions.sum()
        for k in np.flatnonzero(contributions > 0):
            label_i, label_j = sol.labels[arrays.i[k]], sol.labels[arrays.j[k]]
            key = (label_i.mF, label_i.rank, label_j.mF, label_j.rank)
            if key not in raw_components:
                raw_components[key] = np.zeros(n_points)
                names[key] = f"{label_i.text()}->{label_j.text()}"
            raw_components[key][index] = contributions[k]
        if progress_callback:
            progress_callback(index + 1, n_points)

    peak = amplitude.max(initial=0.0)
    if peak <= 0:
        app_logger.warning(f"No transition resonant with {f_mw} GHz in [{lo}, {hi}] T; spectrum is zero")
        return Spectrum(f_mw=f_mw, fields=fields, amplitude=amplitude, components={}, model=model)

    components = {}
    for key in sorted(raw_components):
        values = raw_components[key]
        if values.max() >= COMPONENT_FLOOR * peak:
            components[names[key]] = values / peak
    app_logger.info(f"Field sweep at {f_mw} GHz: {len(components)} contributing transition(s)")
    return Spectrum(f_mw=f_mw, fields=fields, amplitude=amplitude / peak, components=components, model=model)


def _profile(spectrum: Spectrum, component: Optional[str]):
    if component is None:
        return spectrum.amplitude
    if component not in spectrum.components:
        raise ValueError(f"Unknown spectrum component: {component}")
    return spectrum.components[component]


def find_peaks(spectrum: Spectrum, component: Optional[str] = None,
               min_height: float = PEAK_MIN_HEIGHT, min_prominence: float = PEAK_MIN_PROMINENCE) -> np.ndarray:
    """Indices of local maxima above min_height (relative to the spectrum max), ascending in field."""
    profile = _profile(spectrum, component)
    top = profile.max(initial=0.0)
    if top <= 0:
        return np.array([], dtype=int)
    peaks, _ = signal.find_peaks(profile, height=min_height * top, prominence=min_prominence * top)
    return peaks


def _half_crossing(fields, profile, peak, half, step):
    k = peak
    lowest = profile[peak]
    while 0 <= k + step < len(profile):
        nxt = k + step
        if profile[nxt] < half:
            fraction = (profile[k] - half) / (profile[k] - profile[nxt])
            return fields[k] + fraction * (fields[nxt] - fields[k])
        lowest = min(lowest, profile[nxt])
        if profile[nxt] - lowest > OVERLAP_RISE * profile[peak]:
            raise UnresolvedPeakError(
                f"Peak at {fields[peak]:.6g} T overlaps a neighbour before reaching half maximum"
            )
        k = nxt
    raise UnresolvedPeakError(f"Half maximum of the peak at {fields[peak]:.6g} T lies outside the sweep")


def peak_width_field_domain(spectrum: Spectrum, which_peak: Union[int, str] = 0, component: Optional[str] = None) -> float:
    """FWHM in tesla of one peak; which_peak indexes peaks in field order, or "max" for the tallest."""
    profile = _profile(spectrum, component)
    peaks = find_peaks(spectrum, component)
    if len(peaks) == 0:
        raise UnresolvedPeakError("Spectrum has no peak above the detection threshold")
    if which_peak == "max":
        peak = int(peaks[np.argmax(profile[peaks])])
    else:
        try:
            peak = int(peaks[which_peak])
        except IndexError:
            raise UnresolvedPeakError(f"Peak {which_peak} requested, {len(peaks)} found") from None

    half = 0.5 * profile[peak]
    left = _half_crossing(spectrum.fields, profile, peak, half, -1)
    right = _half_crossing(spectrum.fields, profile, peak, half, +1)
    return float(right - left)

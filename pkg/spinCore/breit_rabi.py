"""
Closed-form levels for an S=1/2 electron coupled to a nucleus of any spin I.

H commutes with Fz, so the Hamiltonian splits into mF blocks of at most two
product states |+1/2, mF-1/2> and |-1/2, mF+1/2>.
"""

import numpy as np

from .hamiltonian import EigenSolution
from .spin_system import SpinSystem, SpinSystemError


def _product_index(system, mS, mI):
    n_nuclear = int(round(2 * system.I + 1))
    return int(round(system.S - mS)) * n_nuclear + int(round(system.I - mI))


def block_levels(system: SpinSystem, B0: float, mF: float):
    """Energies and product-basis amplitudes of one mF block, ascending in energy.

    Returns a list of (energy, {product_index: amplitude}) pairs.
    """
    I, A = system.I, system.A
    ge, gn = system.gamma_e, system.gamma_n
    up = (0.5, mF - 0.5)
    down = (-0.5, mF + 0.5)
    has_up = abs(up[1]) <= I + 1e-9
    has_down = abs(down[1]) <= I + 1e-9

    d_up = B0 * (ge * 0.5 - gn * up[1]) + 0.5 * A * up[1]
    d_down = B0 * (-ge * 0.5 - gn * down[1]) - 0.5 * A * down[1]

    if has_up and has_down:
        i_up = _product_index(system, *up)
        i_down = _product_index(system, *down)
        coupling = 0.5 * A * np.sqrt(I * (I + 1) - up[1] * down[1])
        mean = 0.5 * (d_up + d_down)
        half_gap = 0.5 * np.hypot(d_up - d_down, 2 * coupling)
        theta = 0.5 * np.arctan2(2 * coupling, d_up - d_down)
        lower = (mean - half_gap, {i_up: -np.sin(theta), i_down: np.cos(theta)})
        upper = (mean + half_gap, {i_up: np.cos(theta), i_down: np.sin(theta)})
        return [lower, upper]
    if has_up:
        return [(d_up, {_product_index(system, *up): 1.0})]
    if has_down:
        return [(d_down, {_product_index(system, *down): 1.0})]
    return []


def breit_rabi_levels(system: SpinSystem, B0: float) -> EigenSolution:
    """Analytic eigensolution for S=1/2, identical level set to the dense solver."""
    if not np.isclose(system.S, 0.5):
        raise SpinSystemError(f"Breit-Rabi solution needs S=1/2, got S={system.S}")
    if not np.isfinite(B0):
        raise ValueError(f"Magnetic field must be finite, got {B0}")

    dim = system.dim
    energies = []
    columns = []
    top = system.I + 0.5
    for mF in np.arange(-top, top + 0.5, 1.0):
        for energy, amplitudes in block_levels(system, B0, float(mF)):
            column = np.zeros(dim)
            for index, amplitude in amplitudes.items():
                column[index] = amplitude
            energies.append(energy)
            columns.append(column)

    energies = np.asarray(energies)
    order = np.argsort(energies, kind="stable")
    vectors = np.column_stack(columns)[:, order]
    return EigenSolution(B0=B0, energies=energies[order], vectors=vectors)

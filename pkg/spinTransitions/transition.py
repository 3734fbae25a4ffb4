from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from config.log_config import app_logger
from spinCore.hamiltonian import EigenSolution, solve
from spinCore.labels import DEGENERACY_TOLERANCE, StateLabel
from spinCore.operators import SpinOperators
from spinCore.spin_system import SpinSystem

ESR_TYPE = "ESR-type"
NMR_TYPE = "NMR-type"
# Relative to the intensity of a free electron flip, (gamma_e / 2)^2
DEFAULT_INTENSITY_FLOOR = 1e-6


@dataclass
class Transition:
    """A dipole-allowed (|dmF| = 1) transition between levels i < j (energy order at B0)."""
    B0: float
    level_i: int
    level_j: int
    f: float
    dfdB: float
    dfdA: float
    intensity: float
    sx_element: float
    ix_element: float
    kind: str
    selection: int
    label_i: StateLabel
    label_j: StateLabel
    weak: bool = False
    d2fdB2: Optional[float] = None

    @property
    def key(self):
        """Block identity (mF, rank) of both levels, stable along a field sweep."""
        return (self.label_i.mF, self.label_i.rank), (self.label_j.mF, self.label_j.rank)

    @property
    def name(self):
        return f"{self.label_i.text()}->{self.label_j.text()}"

    def selection_text(self):
        return {1: "+1", -1: "-1"}.get(self.selection, "other")


@dataclass
class TransitionArrays:
    """Vectorized transition quantities for every |dmF| = 1 pair at one field."""
    i: np.ndarray
    j: np.ndarray
    f: np.ndarray
    dfdB: np.ndarray
    dfdA: np.ndarray
    intensity: np.ndarray
    sx: np.ndarray
    ix: np.ndarray


def level_slopes(sol: EigenSolution, system: SpinSystem, ops: SpinOperators):
    """Hellmann-Feynman dE/dB (GHz/T) and dE/dA (dimensionless) for every level."""
    dH_dB = system.gamma_e * np.diag(ops.Sz) - system.gamma_n * np.diag(ops.Iz)
    V = sol.vectors
    dE_dB = np.einsum("ij,i,ij->j", V, dH_dB, V)
    dE_dA = np.einsum("ij,ik,kj->j", V, ops.SdotI, V)
    return dE_dB, dE_dA


def transition_arrays(sol: EigenSolution, system: SpinSystem, ops: SpinOperators) -> TransitionArrays:
    V = sol.vectors
    mF = np.array([label.mF for label in sol.labels])
    i, j = np.triu_indices(sol.dim, k=1)
    allowed = np.isclose(np.abs(mF[j] - mF[i]), 1.0)
    # Pairs inside a degenerate manifold carry no transition
    tolerance = DEGENERACY_TOLERANCE * max(1.0, np.abs(sol.energies).max(initial=0.0))
    allowed &= sol.energies[j] - sol.energies[i] > tolerance
    i, j = i[allowed], j[allowed]

    dE_dB, dE_dA = level_slopes(sol, system, ops)
    sx = (V.T @ ops.Sx @ V)[i, j]
    ix = (V.T @ ops.Ix @ V)[i, j]
    drive = system.gamma_e * sx - system.gamma_n * ix
    return TransitionArrays(
        i=i,
        j=j,
        f=sol.energies[j] - sol.energies[i],
        dfdB=dE_dB[j] - dE_dB[i],
        dfdA=dE_dA[j] - dE_dA[i],
        intensity=drive ** 2,
        sx=sx,
        ix=ix,
    )


def classify_labels(label_i: StateLabel, label_j: StateLabel) -> str:
    """ESR-type when the transition flips the electron projection of the high-field
    states the two levels connect to (an Sx-coupled transition), NMR-type otherwise."""
    if np.isnan(label_i.branch_mS) or np.isnan(label_j.branch_mS):
        return ESR_TYPE if label_i.F != label_j.F else NMR_TYPE
    if abs(label_j.branch_mS - label_i.branch_mS) >= 1 - 1e-9:
        return ESR_TYPE
    return NMR_TYPE


def classify(trans: Transition) -> str:
    return classify_labels(trans.label_i, trans.label_j)


def selection_product(label_i: StateLabel, label_j: StateLabel) -> int:
    product = (label_j.F - label_i.F) * (label_j.mF - label_i.mF)
    if np.isclose(product, 1.0):
        return 1
    if np.isclose(product, -1.0):
        return -1
    return 0


def all_transitions(
    sol: EigenSolution,
    system: SpinSystem,
    ops: SpinOperators,
    intensity_floor: float = DEFAULT_INTENSITY_FLOOR,
    curvature: bool = False,
) -> List[Transition]:
    """Every |dmF| = 1 level pair, weak ones flagged rather than dropped."""
    if sol.labels is None:
        raise ValueError("all_transitions needs a labeled eigensolution")
    arrays = transition_arrays(sol, system, ops)
    floor = intensity_floor * (system.gamma_e / 2) ** 2

    if sol.B0 == 0:
        app_logger.warning("Degenerate levels at B0=0: only transitions between manifolds are listed")

    transitions = []
    for k in range(len(arrays.i)):
        label_i = sol.labels[arrays.i[k]]
        label_j = sol.labels[arrays.j[k]]
        transitions.append(Transition(
            B0=sol.B0,
            level_i=int(arrays.i[k]),
            level_j=int(arrays.j[k]),
            f=float(arrays.f[k]),
            dfdB=float(arrays.dfdB[k]),
            dfdA=float(arrays.dfdA[k]),
            intensity=float(arrays.intensity[k]),
            sx_element=float(arrays.sx[k]),
            ix_element=float(arrays.ix[k]),
            kind=classify_labels(label_i, label_j),
            selection=selection_product(label_i, label_j),
            label_i=label_i,
            label_j=label_j,
            weak=bool(arrays.intensity[k] < floor),
        ))

    if curvature:
        from .derivatives import curvatures
        for trans, value in zip(transitions, curvatures(transitions, system, ops)):
            trans.d2fdB2 = value
    return transitions


def dfdB(trans: Transition, sol: EigenSolution, system: SpinSystem, ops: SpinOperators) -> float:
    """gamma_e(<Sz>_j - <Sz>_i) - gamma_n(<Iz>_j - <Iz>_i)."""
    if sol.B0 == 0 and np.isclose(sol.energies[trans.level_i], sol.energies[trans.level_j]):
        app_logger.warning(f"dfdB of degenerate levels {trans.level_i},{trans.level_j} at B0=0")
    dE_dB, _ = level_slopes(sol, system, ops)
    return float(dE_dB[trans.level_j] - dE_dB[trans.level_i])


def dfdA(trans: Transition, sol: EigenSolution, ops: SpinOperators) -> float:
    """<S.I>_j - <S.I>_i, the change of f per unit change of A."""
    if sol.B0 == 0 and np.isclose(sol.energies[trans.level_i], sol.energies[trans.level_j]):
        app_logger.warning(f"dfdA of degenerate levels {trans.level_i},{trans.level_j} at B0=0")
    V = sol.vectors
    expectation = np.einsum("ij,ik,kj->j", V, ops.SdotI, V)
    return float(expectation[trans.level_j] - expectation[trans.level_i])


def transitions_at(system: SpinSystem, ops: SpinOperators, B0: float, **kwargs) -> List[Transition]:
    return all_transitions(solve(system, ops, B0), system, ops, **kwargs)


def resonant_transition(system: SpinSystem, ops: SpinOperators, B0: float, f_mw: float) -> Transition:
    """Strong ESR-type transition closest in frequency to f_mw at field B0."""
    candidates = [t for t in transitions_at(system, ops, B0) if t.kind == ESR_TYPE and not t.weak]
    if not candidates:
        raise ValueError(f"No ESR-type transition at B0={B0}")
    return min(candidates, key=lambda t: abs(t.f - f_mw))


TABLE_COLUMNS = ["B0", "i", "j", "f", "dfdB", "d2fdB2", "dfdA", "intensity", "kind", "selection",
                 "label_i", "label_j", "weak"]


def transitions_frame(transitions: List[Transition]) -> pd.DataFrame:
    rows = [
        {
            "B0": t.B0,
            "i": t.level_i,
            "j": t.level_j,
            "f": t.f,
            "dfdB": t.dfdB,
            "d2fdB2": t.d2fdB2,
            "dfdA": t.dfdA,
            "intensity": t.intensity,
            "kind": t.kind,
            "selection": t.selection_text(),
            "label_i": t.label_i.text(),
            "label_j": t.label_j.text(),
            "weak": t.weak,
        }
        for t in transitions
    ]
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def transition_table(sol: EigenSolution, system: SpinSystem, ops: SpinOperators, curvature: bool = False) -> pd.DataFrame:
    """All |dmF| = 1 transitions at one field as table rows."""
    return transitions_frame(all_transitions(sol, system, ops, curvature=curvature))

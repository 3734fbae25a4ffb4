"""
Adiabatic level tracking along a field sweep, and single-branch evaluation.

Along a sweep each level is matched to the eigenvector at the next field with
the largest squared overlap (Hungarian assignment on the overlap matrix), so
branch identity survives crossings between different mF blocks. Point
evaluations away from a sweep locate a branch by its (mF, rank) block
identity, which cannot change with field because levels in one mF block
never cross.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from config.log_config import app_logger
from spinCore.hamiltonian import solve
from spinCore.labels import find_branch
from spinCore.operators import SpinOperators
from spinCore.spin_system import SpinSystem
from .transition import classify_labels, level_slopes, selection_product

MIN_OVERLAP = 0.5


class BranchTrackingError(RuntimeError):
    pass


def match_levels(previous: np.ndarray, current: np.ndarray, B0: float) -> np.ndarray:
    """order[k] = column of `current` continuing column k of `previous`."""
    overlaps = (previous.T @ current) ** 2
    rows, columns = linear_sum_assignment(overlaps, maximize=True)
    order = np.empty(len(rows), dtype=int)
    order[rows] = columns
    matched = overlaps[rows, columns]
    if matched.min() < MIN_OVERLAP:
        worst = int(rows[np.argmin(matched)])
        raise BranchTrackingError(
            f"Ambiguous branch match for level {worst} at B0={B0:.9g} T "
            f"(overlap {matched.min():.3f})"
        )
    return order


@dataclass
class LevelSweep:
    """Energies and Hellmann-Feynman slopes of every branch over a field grid.

    Branch k is the level with energy index k at fields[0]; keys[k] is its
    (mF, rank) block identity. point_labels holds per-field labels in branch
    order when tracking keeps them.
    """
    fields: np.ndarray
    energies: np.ndarray
    dE_dB: np.ndarray
    dE_dA: np.ndarray
    keys: List[Tuple[float, int]]
    point_labels: list = field(default_factory=list)

    @property
    def n_branches(self):
        return self.energies.shape[1]

    def branch_pairs(self):
        """Branch pairs (a, b), a < b, with |dmF| = 1."""
        pairs = []
        for a in range(self.n_branches):
            for b in range(a + 1, self.n_branches):
                if np.isclose(abs(self.keys[b][0] - self.keys[a][0]), 1.0):
                    pairs.append((a, b))
        return pairs

    def pair_frequency(self, a, b):
        """Signed E_b - E_a; its sign may change where the two branches cross."""
        return self.energies[:, b] - self.energies[:, a]

    def pair_slope(self, a, b, quantity="dfdB"):
        if quantity == "dfdB":
            return self.dE_dB[:, b] - self.dE_dB[:, a]
        if quantity == "dfdA":
            return self.dE_dA[:, b] - self.dE_dA[:, a]
        raise ValueError(f"Unknown quantity: {quantity}")


def track_levels(
    system: SpinSystem,
    ops: SpinOperators,
    fields,
    progress_callback: Optional[Callable[[int, int], None]] = None,
    keep_labels: bool = False,
) -> LevelSweep:
    fields = np.asarray(fields, dtype=float)
    if fields.ndim != 1 or len(fields) == 0:
        raise ValueError("track_levels needs a non-empty 1-D field grid")
    n, dim = len(fields), ops.dim
    energies = np.empty((n, dim))
    dE_dB = np.empty((n, dim))
    dE_dA = np.empty((n, dim))

    previous = None
    keys, point_labels = [], []
    for index, B0 in enumerate(fields):
        sol = solve(system, ops, float(B0))
        if previous is None:
            order = np.arange(dim)
            keys = [(label.mF, label.rank) for label in sol.labels]
        else:
            order = match_levels(previous, sol.vectors, float(B0))
        vectors = sol.vectors[:, order]
        slopes_B, slopes_A = level_slopes(sol, system, ops)
        energies[index] = sol.energies[order]
        dE_dB[index] = slopes_B[order]
        dE_dA[index] = slopes_A[order]
        if keep_labels:
            point_labels.append([sol.labels[k] for k in order])
        previous = vectors
        if progress_callback:
            progress_callback(index + 1, n)

    app_logger.debug(f"Tracked {dim} levels over {n} field points")
    return LevelSweep(fields=fields, energies=energies, dE_dB=dE_dB, dE_dA=dE_dA, keys=keys,
                      point_labels=point_labels)


class BranchEvaluator:
    """Frequency and its derivatives for one branch pair, evaluated at arbitrary fields.

    The orientation (sign) is fixed once so the frequency stays smooth through
    points where the two levels cross.
    """

    def __init__(self, system: SpinSystem, ops: SpinOperators, key_i, key_j, sign: float = 1.0):
        self.system = system
        self.ops = ops
        self.key_i = tuple(key_i)
        self.key_j = tuple(key_j)
        self.sign = 1.0 if sign >= 0 else -1.0
        self._cache = {}

    def _levels(self, B0):
        B0 = float(B0)
        if B0 not in self._cache:
            sol = solve(self.system, self.ops, B0)
            try:
                i = find_branch(sol, *self.key_i)
                j = find_branch(sol, *self.key_j)
            except ValueError as e:
                raise BranchTrackingError(str(e)) from e
            slopes_B, slopes_A = level_slopes(sol, self.system, self.ops)
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[B0] = (sol, i, j, slopes_B, slopes_A)
        return self._cache[B0]

    def frequency(self, B0):
        sol, i, j, _, _ = self._levels(B0)
        return self.sign * (sol.energies[j] - sol.energies[i])

    def dfdb(self, B0):
        _, i, j, slopes_B, _ = self._levels(B0)
        return self.sign * (slopes_B[j] - slopes_B[i])

    def dfda(self, B0):
        _, i, j, _, slopes_A = self._levels(B0)
        return self.sign * (slopes_A[j] - slopes_A[i])

    def slope(self, B0, quantity="dfdB"):
        if quantity == "dfdB":
            return self.dfdb(B0)
        if quantity == "dfdA":
            return self.dfda(B0)
        raise ValueError(f"Unknown quantity: {quantity}")

    def metadata(self, B0):
        """Level indices, labels, kind and selection rule of the pair at B0, lower level first."""
        sol, i, j, _, _ = self._levels(B0)
        if sol.energies[j] < sol.energies[i]:
            i, j = j, i
        label_i, label_j = sol.labels[i], sol.labels[j]
        return {
            "level_i": int(i),
            "level_j": int(j),
            "label_i": label_i,
            "label_j": label_j,
            "kind": classify_labels(label_i, label_j),
            "selection": selection_product(label_i, label_j),
            "key": ((label_i.mF, label_i.rank), (label_j.mF, label_j.rank)),
        }

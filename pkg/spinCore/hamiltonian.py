from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from config.log_config import app_logger
from .operators import SpinOperators
from .spin_system import SpinSystem

RESIDUAL_TOLERANCE = 1e-9


class EigenSolveError(RuntimeError):
    pass


@dataclass
class EigenSolution:
    """Energies (GHz, ascending) and column eigenvectors at one field value B0 (T)."""
    B0: Optional[float]
    energies: np.ndarray
    vectors: np.ndarray
    labels: Optional[List] = None

    @property
    def dim(self):
        return len(self.energies)

    def with_labels(self, labels, vectors=None):
        return replace(self, labels=labels, vectors=self.vectors if vectors is None else vectors)


def hamiltonian(system: SpinSystem, ops: SpinOperators, B0: float) -> np.ndarray:
    """H = B0 (gamma_e Sz - gamma_n Iz) + A S.I in GHz, real symmetric in the product basis."""
    if not np.isfinite(B0):
        raise ValueError(f"Magnetic field must be finite, got {B0}")
    return B0 * (system.gamma_e * ops.Sz - system.gamma_n * ops.Iz) + system.A * ops.SdotI


def _fix_signs(vectors):
    # Largest component positive, so repeated runs give identical vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _check_residuals(H, energies, vectors, B0):
    scale = max(np.linalg.norm(H, ord=2), 1.0)
    residuals = np.linalg.norm(H @ vectors - vectors * energies, axis=0)
    worst = residuals.max(initial=0.0)
    if worst > RESIDUAL_TOLERANCE * scale:
        raise EigenSolveError(f"Eigen-decomposition residual {worst:.3e} too large at B0={B0}")


def eigensolve(H: np.ndarray, fz: Optional[np.ndarray] = None, B0: Optional[float] = None) -> EigenSolution:
    """Diagonalize a real symmetric Hamiltonian.

    When the diagonal of Fz (= Sz + Iz in the product basis) is supplied, each mF block is
    diagonalized on its own; the Hamiltonian commutes with Fz, so this is exact and gives
    every eigenvector a definite mF even where levels of different mF are degenerate.
    """
    if not np.all(np.isfinite(H)):
        raise EigenSolveError(f"Hamiltonian contains non-finite entries at B0={B0}")
    dim = H.shape[0]
    try:
        if fz is None:
            energies, vectors = np.linalg.eigh(H)
        else:
            energies = np.empty(dim)
            vectors = np.zeros((dim, dim))
            column = 0
            for mF in np.unique(fz):
                indices = np.flatnonzero(np.isclose(fz, mF))
                block_energies, block_vectors = np.linalg.eigh(H[np.ix_(indices, indices)])
                width = len(indices)
                energies[column:column + width] = block_energies
                vectors[indices, column:column + width] = block_vectors
                column += width
            order = np.argsort(energies, kind="stable")
            energies = energies[order]
            vectors = vectors[:, order]
    except np.linalg.LinAlgError as e:
        app_logger.error(f"Eigensolver failed at B0={B0}: {e}")
        raise EigenSolveError(f"Eigensolver did not converge at B0={B0}") from e

    vectors = _fix_signs(vectors)
    _check_residuals(H, energies, vectors, B0)
    return EigenSolution(B0=B0, energies=energies, vectors=vectors)


def solve(system: SpinSystem, ops: SpinOperators, B0: float) -> EigenSolution:
    """Labeled eigensolution at one field, diagonalized block by block in mF."""
    from .labels import label_states

    H = hamiltonian(system, ops, B0)
    return label_states(eigensolve(H, fz=ops.fz, B0=B0), system, ops)

from dataclasses import dataclass

import numpy as np

from config.log_config import app_logger
from .hamiltonian import EigenSolution
from .operators import SpinOperators
from .spin_system import SpinSystem

MF_TOLERANCE = 1e-6
DEGENERACY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class StateLabel:
    """Dominant zero-field |F, mF> component of one level.

    branch_mS is the electron projection of the high-field state the level
    connects to adiabatically; within an mF block levels never cross, so it
    follows from the level's energy rank inside the block.
    """
    F: float
    mF: float
    purity: float
    branch_mS: float
    rank: int
    flagged: bool = False

    def text(self):
        return f"|{_half(self.F)},{_half(self.mF)}>"


def _half(value):
    if float(value).is_integer():
        return str(int(value))
    return f"{int(round(2 * value))}/2"


def _align_degenerate(sol: EigenSolution, ops: SpinOperators):
    """Rotate degenerate manifolds onto simultaneous eigenvectors of Fz and S.I."""
    energies = sol.energies
    vectors = sol.vectors.copy()
    tolerance = DEGENERACY_TOLERANCE * max(1.0, np.abs(energies).max(initial=0.0))
    start = 0
    fz = np.diag(ops.fz)
    while start < len(energies):
        stop = start + 1
        while stop < len(energies) and energies[stop] - energies[start] <= tolerance:
            stop += 1
        if stop - start > 1:
            group = vectors[:, start:stop]
            # Fz first, then S.I inside any remaining equal-mF subspace
            fz_values, rotation = np.linalg.eigh(group.T @ fz @ group)
            group = group @ rotation
            sub_start = 0
            while sub_start < group.shape[1]:
                sub_stop = sub_start + 1
                while sub_stop < group.shape[1] and abs(fz_values[sub_stop] - fz_values[sub_start]) < MF_TOLERANCE:
                    sub_stop += 1
                if sub_stop - sub_start > 1:
                    sub = group[:, sub_start:sub_stop]
                    _, sub_rotation = np.linalg.eigh(sub.T @ ops.SdotI @ sub)
                    group[:, sub_start:sub_stop] = sub @ sub_rotation
                sub_start = sub_stop
            vectors[:, start:stop] = group
        start = stop
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def label_states(sol: EigenSolution, system: SpinSystem, ops: SpinOperators) -> EigenSolution:
    """Attach exact mF, dominant F with purity, and high-field branch labels to each level."""
    vectors = _align_degenerate(sol, ops)
    mF_expect = np.einsum("ij,i,ij->j", vectors, ops.fz, vectors)
    mF_exact = np.round(2 * mF_expect) / 2

    deviations = np.abs(mF_expect - mF_exact)
    flagged = deviations > MF_TOLERANCE
    if flagged.any():
        app_logger.warning(
            f"{int(flagged.sum())} level(s) without a definite mF at B0={sol.B0} "
            f"(max deviation {deviations.max():.2e})"
        )

    descending = sol.B0 is not None and sol.B0 < 0
    labels = [None] * sol.dim
    for mF in np.unique(mF_exact):
        block = ops.blocks.get(float(mF))
        levels = np.flatnonzero(mF_exact == mF)
        if block is None:
            for level in levels:
                labels[level] = StateLabel(np.nan, float(mF), 0.0, np.nan, 0, True)
            continue
        # Overlap of each level with the zero-field |F, mF> states of its block
        overlaps = (block.vectors.T @ vectors[block.indices][:, levels]) ** 2
        ranked = levels[np.argsort(sol.energies[levels], kind="stable")]
        mS_order = block.mS[::-1] if descending else block.mS
        for rank, level in enumerate(ranked):
            column = int(np.flatnonzero(levels == level)[0])
            dominant = int(np.argmax(overlaps[:, column]))
            branch_mS = float(mS_order[rank]) if rank < len(mS_order) else np.nan
            labels[level] = StateLabel(
                F=float(block.F[dominant]),
                mF=float(mF),
                purity=float(overlaps[dominant, column]),
                branch_mS=branch_mS,
                rank=rank,
                flagged=bool(flagged[level]),
            )
    return sol.with_labels(labels, vectors=vectors)


def find_branch(sol: EigenSolution, mF: float, rank: int) -> int:
    """Index of the level with the given mF and energy rank inside its mF block."""
    if sol.labels is None:
        raise ValueError("Eigensolution has no labels; call label_states first")
    for index, label in enumerate(sol.labels):
        if label.rank == rank and np.isclose(label.mF, mF):
            return index
    raise ValueError(f"No level with mF={mF}, rank={rank} at B0={sol.B0}")


def find_level(sol: EigenSolution, F: float, mF: float) -> int:
    """Index of the level whose dominant label is |F, mF>."""
    if sol.labels is None:
        raise ValueError("Eigensolution has no labels; call label_states first")
    for index, label in enumerate(sol.labels):
        if np.isclose(label.F, F) and np.isclose(label.mF, mF):
            return index
    raise ValueError(f"No level labeled |F={F}, mF={mF}> at B0={sol.B0}")

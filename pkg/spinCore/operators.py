from dataclasses import dataclass, field

import numpy as np

from .spin_system import SpinSystem, SpinSystemError, _is_half_integer


def spin_matrices(j):
    """Angular momentum matrices (jx, jy, jz) for spin j in the |m> basis, m descending."""
    if not _is_half_integer(j):
        raise SpinSystemError(f"Spin quantum number must be a non-negative half-integer, got {j}")
    m = j - np.arange(int(round(2 * j + 1)))
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m> sits one row above the diagonal
    raising = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    lowering = raising.conj().T
    jx = (raising + lowering) / 2
    jy = (raising - lowering) / 2j
    return jx, jy, jz


@dataclass
class CoupledBlock:
    """Zero-field |F, mF> states of one mF block, expressed in the block's product-state indices."""
    mF: float
    indices: np.ndarray
    F: np.ndarray
    vectors: np.ndarray
    mS: np.ndarray


@dataclass
class SpinOperators:
    S: float
    I: float
    dim: int
    Sx: np.ndarray
    Sy: np.ndarray
    Sz: np.ndarray
    Ix: np.ndarray
    Iy: np.ndarray
    Iz: np.ndarray
    SdotI: np.ndarray
    fz: np.ndarray
    blocks: dict = field(default_factory=dict)


def _coupled_blocks(S, I, SdotI, fz, ms_diag):
    blocks = {}
    s_term = S * (S + 1)
    i_term = I * (I + 1)
    for mF in np.unique(fz):
        indices = np.flatnonzero(np.isclose(fz, mF))
        sub = SdotI[np.ix_(indices, indices)]
        eigenvalues, vectors = np.linalg.eigh(sub)
        # S.I = (F(F+1) - S(S+1) - I(I+1)) / 2
        f_f1 = 2 * eigenvalues + s_term + i_term
        F = np.round(2 * (-0.5 + np.sqrt(0.25 + f_f1))) / 2
        # Electron projections available in this block, ascending
        mS = np.sort(ms_diag[indices])
        blocks[float(mF)] = CoupledBlock(float(mF), indices, F, vectors, mS)
    return blocks


def build_operators(system: SpinSystem) -> SpinOperators:
    """Electron and nuclear spin operators in the product basis |mS> (x) |mI>."""
    S, I = system.S, system.I
    sx, sy, sz = spin_matrices(S)
    ix, iy, iz = spin_matrices(I)
    eye_s = np.eye(sx.shape[0])
    eye_i = np.eye(ix.shape[0])

    Sx, Sy, Sz = (np.kron(op, eye_i) for op in (sx, sy, sz))
    Ix, Iy, Iz = (np.kron(eye_s, op) for op in (ix, iy, iz))

    s_dot_i = Sx @ Ix + Sy @ Iy + Sz @ Iz
    # The imaginary parts of Sy (x) Iy cancel
    SdotI = s_dot_i.real

    fz = np.real(np.diag(Sz) + np.diag(Iz))
    ms_diag = np.real(np.diag(Sz))
    blocks = _coupled_blocks(S, I, SdotI, fz, ms_diag)

    return SpinOperators(
        S=S,
        I=I,
        dim=system.dim,
        Sx=Sx.real,
        Sy=Sy,
        Sz=Sz.real,
        Ix=Ix.real,
        Iy=Iy,
        Iz=Iz.real,
        SdotI=SdotI,
        fz=fz,
        blocks=blocks,
    )

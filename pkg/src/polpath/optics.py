"""Unitary models of the bench optics and state evolution.

Wave plates act on the polarization qubit (2x2), the phase shifter and
beam splitter on the path qubit lifted to the full 4x4 space, and the
interferometer composes phase shifter then beam splitter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import DensityMatrix

UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class OpticalUnitary:
    """2x2 (polarization-only) or 4x4 (polarization x path) unitary."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape not in ((2, 2), (4, 4)):
            raise ValueError(f"optical unitaries are 2x2 or 4x4, got {m.shape}")
        defect = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if defect > UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (defect {defect:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def qwp(theta: float) -> OpticalUnitary:
    """Quarter-wave plate with fast axis at ``theta`` to the horizontal."""
    c = np.cos(2.0 * theta)
    s = np.sin(2.0 * theta)
    return OpticalUnitary(np.array([[1j + c, s], [s, 1j - c]]) / np.sqrt(2.0))


def hwp(theta: float) -> OpticalUnitary:
    """Half-wave plate with fast axis at ``theta`` to the horizontal."""
    c = np.cos(2.0 * theta)
    s = np.sin(2.0 * theta)
    return OpticalUnitary(np.array([[c, s], [s, -c]], dtype=complex))


def phase_shifter(phi: float) -> OpticalUnitary:
    """Phase ``phi`` applied to path 1, identity on polarization."""
    return OpticalUnitary(np.kron(np.eye(2), np.diag([1.0, np.exp(1j * phi)])))


def beam_splitter() -> OpticalUnitary:
    """Symmetric 1:1 beam splitter on the path qubit, lifted to 4x4.

    Sign convention: minus on the |0><1| element. The output-arm fringe
    signs depend on it, so it must not be changed independently.
    """
    b = np.array([[1.0, -1.0], [1.0, 1.0]], dtype=complex) / np.sqrt(2.0)
    return OpticalUnitary(np.kron(np.eye(2), b))


def interferometer(phi: float) -> OpticalUnitary:
    """Phase shifter followed by the recombining beam splitter (4x4)."""
    e = np.exp(1j * phi)
    u = np.array(
        [
            [1.0, -e, 0.0, 0.0],
            [1.0, e, 0.0, 0.0],
            [0.0, 0.0, 1.0, -e],
            [0.0, 0.0, 1.0, e],
        ]
    ) / np.sqrt(2.0)
    return OpticalUnitary(u)


def plate_on_path(plate: OpticalUnitary) -> OpticalUnitary:
    """Lift a 2x2 polarization plate to the full space (identity on path)."""
    if plate.dim != 2:
        raise ValueError("plate_on_path expects a 2x2 polarization unitary")
    return OpticalUnitary(np.kron(plate.matrix, np.eye(2)))


def evolve(u: OpticalUnitary, rho: DensityMatrix) -> DensityMatrix:
    """Conjugate the state: U rho U^H. Preserves trace, purity and spectrum."""
    if u.dim != 4:
        raise ValueError("evolve expects a 4x4 unitary")
    m = u.matrix
    defect = np.max(np.abs(m.conj().T @ m - np.eye(4)))
    if defect > 1e-10:
        raise ValueError(f"matrix is not unitary (defect {defect:.3e})")
    return DensityMatrix(m @ rho.matrix @ m.conj().T, validated=rho.validated)

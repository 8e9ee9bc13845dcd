"""Density matrices for the polarization-path two-qubit space.

A single photon carries two qubits here: polarization (H/V) and path (0/1).
Every module in the package shares the basis ordering (H0, H1, V0, V1),
i.e. flat index = 2 * polarization + path with H = 0, V = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BASIS_LABELS = ("H0", "H1", "V0", "V1")
DIM = 4

#: threshold for physicality validation (trace, hermiticity, positivity)
PHYSICALITY_TOL = 1e-10
#: threshold for exact algebraic identities
IDENTITY_TOL = 1e-12

_JACOBI_OFF_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 100


def _as_matrix(entries, dim: int = DIM) -> np.ndarray:
    m = np.array(entries, dtype=complex)
    if m.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class DensityMatrix:
    """4x4 complex matrix over the (H0, H1, V0, V1) basis.

    ``validated`` is True only for states known to be physical (Hermitian,
    unit trace, positive semidefinite). Raw reconstruction output keeps the
    flag False until it has been checked or repaired.
    """

    matrix: np.ndarray
    validated: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _as_matrix(self.matrix))

    def to_dict(self) -> dict:
        """JSON-ready payload: {"basis": [...], "re": 4x4, "im": 4x4}."""
        return {
            "basis": list(BASIS_LABELS),
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict, validated: bool = False) -> "DensityMatrix":
        basis = payload.get("basis")
        if basis is not None and tuple(basis) != BASIS_LABELS:
            raise ValueError(f"unsupported basis ordering: {basis!r}")
        m = np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload["im"], dtype=float)
        return cls(m, validated=validated)


@dataclass(frozen=True)
class PolarizationState:
    """Unit-norm polarization amplitudes in the (H, V) basis."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (2,):
            raise ValueError("polarization state needs exactly two amplitudes")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError("polarization state must have unit norm")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def horizontal(cls) -> "PolarizationState":
        return cls(np.array([1.0, 0.0]))

    @classmethod
    def vertical(cls) -> "PolarizationState":
        return cls(np.array([0.0, 1.0]))

    @classmethod
    def diagonal(cls) -> "PolarizationState":
        return cls(np.array([1.0, 1.0]) / np.sqrt(2.0))

    @classmethod
    def antidiagonal(cls) -> "PolarizationState":
        return cls(np.array([1.0, -1.0]) / np.sqrt(2.0))

    @classmethod
    def right_circular(cls) -> "PolarizationState":
        return cls(np.array([1.0, 1.0j]) / np.sqrt(2.0))

    @classmethod
    def left_circular(cls) -> "PolarizationState":
        return cls(np.array([1.0, -1.0j]) / np.sqrt(2.0))


@dataclass(frozen=True)
class ValidityReport:
    """Physicality diagnostics for a density matrix."""

    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    is_physical: bool = field(init=False)

    def __post_init__(self) -> None:
        physical = (
            self.hermiticity_defect <= PHYSICALITY_TOL
            and self.trace_defect <= PHYSICALITY_TOL
            and self.min_eigenvalue >= -PHYSICALITY_TOL
        )
        object.__setattr__(self, "is_physical", bool(physical))


def eigh4(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a 4x4 Hermitian matrix by cyclic Jacobi rotations.

    Operates on the Hermitian part of ``matrix``. Returns ``(eigenvalues,
    eigenvectors)`` with eigenvalues ascending and matching eigenvector
    columns. Sweeps stop once the off-diagonal Frobenius norm drops below
    1e-14 (at most 100 sweeps).
    """
    a = np.asarray(matrix, dtype=complex)
    if a.shape != (DIM, DIM):
        raise ValueError(f"expected a {DIM}x{DIM} matrix, got shape {a.shape}")
    a = 0.5 * (a + a.conj().T)
    v = np.eye(DIM, dtype=complex)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.sqrt(2.0 * sum(abs(a[p, q]) ** 2 for p in range(DIM) for q in range(p + 1, DIM)))
        if off < _JACOBI_OFF_TOL:
            break
        for p in range(DIM - 1):
            for q in range(p + 1, DIM):
                r = abs(a[p, q])
                if r < 1e-300:
                    continue
                phase = a[p, q] / r
                tau = (a[p, p].real - a[q, q].real) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.hypot(tau, 1.0))
                else:
                    t = 1.0 / (tau - np.hypot(tau, 1.0))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # unitary plane rotation R: R[p,p]=c, R[p,q]=-s*phase,
                # R[q,p]=s*conj(phase), R[q,q]=c;  A <- R^H A R, V <- V R
                col_p = c * a[:, p] + s * np.conj(phase) * a[:, q]
                col_q = -s * phase * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = col_p, col_q
                row_p = c * a[p, :] + s * phase * a[q, :]
                row_q = -s * np.conj(phase) * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = row_p, row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = c * v[:, p] + s * np.conj(phase) * v[:, q]
                vec_q = -s * phase * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = vec_p, vec_q
    evals = a.diagonal().real.copy()
    order = np.argsort(evals, kind="stable")
    return evals[order], v[:, order]


def pure_state(amplitudes) -> DensityMatrix:
    """Outer product |psi><psi| of the normalized 4-amplitude vector."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if psi.shape != (DIM,):
        raise ValueError(f"expected {DIM} amplitudes, got {psi.shape}")
    norm = np.linalg.norm(psi)
    if norm == 0.0:
        raise ValueError("degenerate state vector")
    psi = psi / norm
    return DensityMatrix(np.outer(psi, psi.conj()), validated=True)


def bell_pbs_state() -> DensityMatrix:
    """Maximally entangled polarization-path state (|H,0> + |V,1>)/sqrt(2)."""
    return pure_state(np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0))


def maximally_mixed() -> DensityMatrix:
    return DensityMatrix(np.eye(DIM) / DIM, validated=True)


def random_density(seed: int, rank: int = DIM) -> DensityMatrix:
    """Random physical state from the Ginibre ensemble: G G^H / Tr(G G^H)."""
    rank = int(rank)
    if not 1 <= rank <= DIM:
        raise ValueError(f"rank must be in 1..{DIM}, got {rank}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((DIM, rank)) + 1j * rng.standard_normal((DIM, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, validated=True)


def validate_density(rho: DensityMatrix) -> ValidityReport:
    """Measure hermiticity/trace defects and the minimum eigenvalue."""
    m = rho.matrix
    herm = float(np.max(np.abs(m - m.conj().T)))
    trace = float(abs(np.trace(m) - 1.0))
    evals, _ = eigh4(m)
    return ValidityReport(herm, trace, float(evals[0]))


def ensure_physical(rho: DensityMatrix) -> DensityMatrix:
    """Return ``rho`` flagged as validated, checking it first if needed."""
    if rho.validated:
        return rho
    report = validate_density(rho)
    if not report.is_physical:
        raise ValueError(
            "not a physical density matrix "
            f"(hermiticity defect {report.hermiticity_defect:.3e}, "
            f"trace defect {report.trace_defect:.3e}, "
            f"min eigenvalue {report.min_eigenvalue:.3e})"
        )
    return DensityMatrix(rho.matrix, validated=True)


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2); 1 for pure states, 0.25 for the maximally mixed state."""
    m = rho.matrix
    return float(np.trace(m @ m).real)


def _clean_psd_eigenvalues(evals: np.ndarray) -> np.ndarray:
    # null-space eigenvalues come back as solver noise ~1e-14; sqrt would
    # amplify that to ~1e-7, so zero everything below a relative floor
    floor = 1e-13 * max(float(np.max(np.abs(evals))), 1e-300)
    cleaned = np.clip(evals, 0.0, None)
    cleaned[cleaned < floor] = 0.0
    return cleaned


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    evals, vecs = eigh4(matrix)
    roots = np.sqrt(_clean_psd_eigenvalues(evals))
    return (vecs * roots) @ vecs.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 in [0, 1].

    When either argument is pure the computation reduces to the overlap
    <psi|other|psi>. Raises ValueError for unphysical inputs.
    """
    a = ensure_physical(rho).matrix
    b = ensure_physical(sigma).matrix
    for first, second in ((a, b), (b, a)):
        if np.trace(first @ first).real >= 1.0 - 1e-12:
            evals, vecs = eigh4(first)
            psi = vecs[:, -1]
            value = float(np.real(psi.conj() @ second @ psi))
            return min(max(value, 0.0), 1.0)
    inner = _sqrt_psd(a)
    evals, _ = eigh4(inner @ b @ inner)
    value = float(np.sum(np.sqrt(_clean_psd_eigenvalues(evals))) ** 2)
    return min(max(value, 0.0), 1.0)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) Tr|rho - sigma| via the eigenvalues of the Hermitian difference."""
    evals, _ = eigh4(rho.matrix - sigma.matrix)
    return float(0.5 * np.sum(np.abs(evals)))

"""Stokes-parameter maps for polarization-path states.

Forward maps take a density matrix to the one-path Stokes parameters
(four reals per path) and the two-path Stokes parameters (four complex
cross-path coherences). The inverse map rebuilds the full 4x4 matrix from
those twelve quantities. Fringe prediction and extraction implement the
interferometer phase dependence of the output-arm parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import DensityMatrix

#: anti-Hermitian inputs beyond this defect are rejected
HERMITICITY_ERROR_TOL = 1e-9


@dataclass(frozen=True)
class OnePathStokes:
    """Stokes 4-vector (s0..s3) of the photons travelling one path."""

    path: int
    s: np.ndarray

    def __post_init__(self) -> None:
        if self.path not in (0, 1):
            raise ValueError(f"path must be 0 or 1, got {self.path}")
        values = np.array(self.s, dtype=float).reshape(-1)
        if values.shape != (4,):
            raise ValueError("one-path Stokes parameters need four components")
        values.setflags(write=False)
        object.__setattr__(self, "s", values)


@dataclass(frozen=True)
class TwoPathStokes:
    """Complex cross-path Stokes 4-vector (S0..S3)."""

    S: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.S, dtype=complex).reshape(-1)
        if values.shape != (4,):
            raise ValueError("two-path Stokes parameters need four components")
        values.setflags(write=False)
        object.__setattr__(self, "S", values)


@dataclass(frozen=True)
class StokesSet:
    """Complete Stokes description: both one-path vectors plus the cross terms."""

    path0: OnePathStokes
    path1: OnePathStokes
    cross: TwoPathStokes

    def to_dict(self) -> dict:
        return {
            "s0": self.path0.s.tolist(),
            "s1": self.path1.s.tolist(),
            "S_re": self.cross.S.real.tolist(),
            "S_im": self.cross.S.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StokesSet":
        cross = np.asarray(payload["S_re"], dtype=float) + 1j * np.asarray(payload["S_im"], dtype=float)
        return cls(
            OnePathStokes(0, payload["s0"]),
            OnePathStokes(1, payload["s1"]),
            TwoPathStokes(cross),
        )


def _checked_matrix(rho: DensityMatrix) -> np.ndarray:
    m = rho.matrix
    defect = float(np.max(np.abs(m - m.conj().T)))
    if defect > HERMITICITY_ERROR_TOL:
        raise ValueError(f"input is not Hermitian (defect {defect:.3e})")
    return m


def opsp(rho: DensityMatrix, path: int) -> OnePathStokes:
    """One-path Stokes parameters; imaginary residue below 1e-12 is discarded.

    Path 0 reads the (H0, V0) block, path 1 the (H1, V1) block.
    """
    m = _checked_matrix(rho)
    if path == 0:
        raw = np.array(
            [
                m[0, 0] + m[2, 2],
                m[0, 0] - m[2, 2],
                m[0, 2] + m[2, 0],
                1j * (m[0, 2] - m[2, 0]),
            ]
        )
    elif path == 1:
        raw = np.array(
            [
                m[1, 1] + m[3, 3],
                m[1, 1] - m[3, 3],
                m[1, 3] + m[3, 1],
                1j * (m[1, 3] - m[3, 1]),
            ]
        )
    else:
        raise ValueError(f"path must be 0 or 1, got {path}")
    return OnePathStokes(path=path, s=raw.real)


def tpsp(rho: DensityMatrix) -> TwoPathStokes:
    """Two-path Stokes parameters built from the path-coherence entries."""
    m = _checked_matrix(rho)
    values = np.array(
        [
            m[1, 0] + m[3, 2],
            m[1, 0] - m[3, 2],
            m[1, 2] + m[3, 0],
            1j * (m[1, 2] - m[3, 0]),
        ]
    )
    return TwoPathStokes(values)


def stokes_set(rho: DensityMatrix) -> StokesSet:
    """Full forward map: both one-path vectors plus the cross terms."""
    return StokesSet(opsp(rho, 0), opsp(rho, 1), tpsp(rho))


def reconstruct(params: StokesSet) -> DensityMatrix:
    """Rebuild the density matrix from a Stokes set.

    The output is Hermitian by construction for real one-path inputs, has
    trace path0.s[0] + path1.s[0], and is *not* renormalized or checked for
    positivity; callers dealing with noisy estimates handle that.
    """
    s0 = params.path0.s
    s1 = params.path1.s
    S = params.cross.S
    Sc = np.conj(S)
    m = 0.5 * np.array(
        [
            [s0[0] + s0[1], Sc[0] + Sc[1], s0[2] - 1j * s0[3], Sc[2] - 1j * Sc[3]],
            [S[0] + S[1], s1[0] + s1[1], S[2] - 1j * S[3], s1[2] - 1j * s1[3]],
            [s0[2] + 1j * s0[3], Sc[2] + 1j * Sc[3], s0[0] - s0[1], Sc[0] - Sc[1]],
            [S[2] + 1j * S[3], s1[2] + 1j * s1[3], S[0] - S[1], s1[0] - s1[1]],
        ]
    )
    return DensityMatrix(m, validated=False)


def predicted_fringe(params: StokesSet, out_path: int, phi: float) -> OnePathStokes:
    """Output-arm Stokes parameters behind the interferometer at phase ``phi``.

    Output path 0 is the arm collected by SPM3 (minus sign on the cross
    term), output path 1 the arm collected by SPM2 (plus sign).
    """
    if out_path not in (0, 1):
        raise ValueError(f"out_path must be 0 or 1, got {out_path}")
    sums = params.path0.s + params.path1.s
    sign = -1.0 if out_path == 0 else 1.0
    values = 0.5 * (sums + sign * 2.0 * np.real(params.cross.S * np.exp(1j * phi)))
    return OnePathStokes(path=out_path, s=values)


def extract_tpsp(
    sums,
    fringe_at_0: OnePathStokes,
    fringe_at_half_pi: OnePathStokes,
    out_path: int,
) -> TwoPathStokes:
    """Invert the fringe formulas using measurements at phi = 0 and pi/2.

    ``sums`` holds the input-arm component sums s0_n + s1_n. Either output
    path works; the sign convention flips between them.
    """
    sums = np.asarray(sums, dtype=float).reshape(-1)
    if sums.shape != (4,):
        raise ValueError("sums must hold four components")
    if out_path == 0:
        real = 0.5 * sums - fringe_at_0.s
        imag = -0.5 * sums + fringe_at_half_pi.s
    elif out_path == 1:
        real = -0.5 * sums + fringe_at_0.s
        imag = 0.5 * sums - fringe_at_half_pi.s
    else:
        raise ValueError(f"out_path must be 0 or 1, got {out_path}")
    return TwoPathStokes(real + 1j * imag)


def complementarity_defect(
    set_in: StokesSet,
    fringe_path0: OnePathStokes,
    fringe_path1: OnePathStokes,
) -> np.ndarray:
    """Per-component |(s0_n + s1_n) - (s0f_n + s1f_n)|; zero for exact data.

    Nonzero values are diagnostics for noisy estimates, never an error.
    """
    sums_in = set_in.path0.s + set_in.path1.s
    sums_out = fringe_path0.s + fringe_path1.s
    return np.abs(sums_in - sums_out)

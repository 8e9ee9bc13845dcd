"""Monte-Carlo simulation of the tomography bench.

Photons enter in paths 0/1. A 1:1 tap-off on each input path sends half of
them to the monitor analyzers SPM0/SPM1; the transmitted half traverses
the phase shifter + beam splitter and lands on SPM3 (output path 0) or
SPM2 (output path 1). Each SPM optionally inserts a wave plate and splits
H to detector D0, V to detector D1.

Counts are sampled from a multinomial over the eight detector
probabilities using one counter-based random stream per run, keyed on
(seed, run index), so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import optics, qstate
from .qstate import DensityMatrix

DETECTORS = (
    "SPM0.D0",
    "SPM0.D1",
    "SPM1.D0",
    "SPM1.D1",
    "SPM2.D0",
    "SPM2.D1",
    "SPM3.D0",
    "SPM3.D1",
)
_DETECTOR_INDEX = {name: i for i, name in enumerate(DETECTORS)}

#: monitor SPMs watch the input paths; SPM3/SPM2 watch output paths 0/1
_SPM_SOURCES = ((0, "input", 0), (1, "input", 1), (2, "output", 1), (3, "output", 0))

PLATE_KINDS = ("none", "hwp", "qwp")
_NOMINAL_ANGLES = {"none": 0.0, "hwp": math.pi / 8.0, "qwp": math.pi / 4.0}


@dataclass(frozen=True)
class PlateSetting:
    """Analyzer wave-plate choice; the nominal angle follows the kind."""

    kind: str
    nominal_angle: float = field(init=False)

    def __post_init__(self) -> None:
        if self.kind not in _NOMINAL_ANGLES:
            raise ValueError(f"unknown plate kind {self.kind!r}; use one of {PLATE_KINDS}")
        object.__setattr__(self, "nominal_angle", _NOMINAL_ANGLES[self.kind])


DEFAULT_SETTINGS = tuple(PlateSetting(kind) for kind in PLATE_KINDS)
DEFAULT_PHASES = (0.0, math.pi / 2.0)


@dataclass(frozen=True)
class ExperimentConfig:
    n_photons_total: int
    seed: int
    phases: tuple = DEFAULT_PHASES
    settings: tuple = DEFAULT_SETTINGS
    angle_jitter_sigma: float = 0.0
    budget_policy: str = "equal-split"

    def __post_init__(self) -> None:
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        object.__setattr__(self, "settings", tuple(self.settings))
        if not self.phases:
            raise ValueError("config needs at least one phase")
        if not self.settings:
            raise ValueError("config needs at least one plate setting")
        if self.angle_jitter_sigma < 0.0:
            raise ValueError("angle jitter sigma must be nonnegative")
        if self.budget_policy != "equal-split":
            raise ValueError(f"unknown budget policy {self.budget_policy!r}")
        n_runs = len(self.phases) * len(self.settings)
        if int(self.n_photons_total) < n_runs:
            raise ValueError(
                f"photon budget {self.n_photons_total} is smaller than the "
                f"number of runs ({n_runs})"
            )
        object.__setattr__(self, "n_photons_total", int(self.n_photons_total))


@dataclass(frozen=True)
class Run:
    """One data-taking configuration with its realized angles and counts."""

    setting: PlateSetting
    angles: dict
    phase: float
    n_in: int
    counts: dict

    def to_dict(self) -> dict:
        return {
            "setting": self.setting.kind,
            "angles": {k: float(v) for k, v in self.angles.items()},
            "phase": float(self.phase),
            "n_in": int(self.n_in),
            "counts": {k: int(v) for k, v in self.counts.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Run":
        counts = {k: int(v) for k, v in payload["counts"].items()}
        missing = [d for d in DETECTORS if d not in counts]
        if missing:
            raise ValueError(f"run is missing detector counts for {missing}")
        return cls(
            setting=PlateSetting(payload["setting"]),
            angles={k: float(v) for k, v in payload.get("angles", {}).items()},
            phase=float(payload["phase"]),
            n_in=int(payload["n_in"]),
            counts=counts,
        )


@dataclass(frozen=True)
class CountData:
    runs: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "runs", tuple(self.runs))

    def to_dict(self) -> dict:
        return {"runs": [run.to_dict() for run in self.runs]}

    @classmethod
    def from_dict(cls, payload: dict) -> "CountData":
        return cls(tuple(Run.from_dict(entry) for entry in payload["runs"]))


def plate_unitary(setting: PlateSetting, angle: float | None = None) -> optics.OpticalUnitary:
    """2x2 unitary of the setting's plate at ``angle`` (nominal by default)."""
    if setting.kind == "none":
        return optics.OpticalUnitary(np.eye(2))
    theta = setting.nominal_angle if angle is None else float(angle)
    return optics.hwp(theta) if setting.kind == "hwp" else optics.qwp(theta)


def detector_probabilities(
    rho: DensityMatrix,
    setting: PlateSetting,
    phi: float,
    spm_angles: dict | None = None,
) -> np.ndarray:
    """Click probabilities for the eight detectors, in ``DETECTORS`` order.

    Monitor arms project the input state, output arms the interferometer
    output, each weighted by the 1:1 tap-off factor 1/2. ``spm_angles``
    optionally overrides the plate angle per SPM ({"SPM0": angle, ...}),
    which is how realized (jittered) angles enter.
    """
    matrix = qstate.ensure_physical(rho).matrix
    u4 = optics.interferometer(phi).matrix
    rho_out = u4 @ matrix @ u4.conj().T
    probs = np.empty(len(DETECTORS))
    for spm, source, path in _SPM_SOURCES:
        angle = None if spm_angles is None else spm_angles.get(f"SPM{spm}")
        lifted = optics.plate_on_path(plate_unitary(setting, angle)).matrix
        state = matrix if source == "input" else rho_out
        sigma = lifted @ state @ lifted.conj().T
        probs[_DETECTOR_INDEX[f"SPM{spm}.D0"]] = 0.5 * sigma[path, path].real
        probs[_DETECTOR_INDEX[f"SPM{spm}.D1"]] = 0.5 * sigma[2 + path, 2 + path].real
    return probs


def measurement_operators(
    setting: PlateSetting,
    phi: float,
    spm_angles: dict | None = None,
) -> np.ndarray:
    """The eight detector POVM elements as a (8, 4, 4) array.

    Satisfies Tr(op[d] rho) == detector_probabilities(rho, ...)[d] and
    sums to the identity; used by the likelihood fit to avoid repeated
    state evolutions.
    """
    u4 = optics.interferometer(phi).matrix
    ops = np.empty((len(DETECTORS), 4, 4), dtype=complex)
    for spm, source, path in _SPM_SOURCES:
        angle = None if spm_angles is None else spm_angles.get(f"SPM{spm}")
        w = optics.plate_on_path(plate_unitary(setting, angle)).matrix
        if source == "output":
            w = w @ u4
        for pol, detector in ((0, "D0"), (1, "D1")):
            row = w[2 * pol + path, :]
            ops[_DETECTOR_INDEX[f"SPM{spm}.{detector}"]] = 0.5 * np.outer(row.conj(), row)
    return ops


def realized_angle(nominal: float, sigma: float, rng: np.random.Generator) -> float:
    """Nominal plate angle plus one Gaussian miscalibration draw."""
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return float(nominal)
    return float(nominal + sigma * rng.standard_normal())


def run_layout(cfg: ExperimentConfig) -> list:
    """(setting, phase, budget) triples; equal split, remainder to the first runs."""
    pairs = [(setting, phase) for setting in cfg.settings for phase in cfg.phases]
    base, remainder = divmod(cfg.n_photons_total, len(pairs))
    return [
        (setting, phase, base + (1 if index < remainder else 0))
        for index, (setting, phase) in enumerate(pairs)
    ]


def _run_rng(seed: int, run_index: int) -> np.random.Generator:
    key = np.array([seed % (1 << 64), run_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate(rho: DensityMatrix, cfg: ExperimentConfig) -> CountData:
    """Sample finite-count data for every (setting, phase) run.

    Jitter is drawn once per SPM per run (systematic miscalibration within
    a run); runs use independent streams, so any evaluation order yields
    the same data.
    """
    rho = qstate.ensure_physical(rho)
    runs = []
    for index, (setting, phase, n_in) in enumerate(run_layout(cfg)):
        rng = _run_rng(cfg.seed, index)
        if setting.kind == "none":
            angles = {}
        else:
            angles = {
                f"SPM{spm}": realized_angle(setting.nominal_angle, cfg.angle_jitter_sigma, rng)
                for spm in range(4)
            }
        probs = detector_probabilities(rho, setting, phase, spm_angles=angles or None)
        probs = np.clip(probs, 0.0, None)
        drawn = rng.multinomial(n_in, probs / probs.sum())
        counts = {name: int(drawn[i]) for i, name in enumerate(DETECTORS)}
        runs.append(Run(setting, angles, phase, n_in, counts))
    return CountData(tuple(runs))


def exact_counts(rho: DensityMatrix, cfg: ExperimentConfig) -> CountData:
    """Deterministic variant: counts = round(n * p) at nominal angles.

    Separates algebraic checks from sampling noise; jitter and seed are
    ignored. Rounding keeps counts integral, so at budget n the recorded
    data quantizes each probability to about 1/(2n).
    """
    rho = qstate.ensure_physical(rho)
    runs = []
    for setting, phase, n_in in run_layout(cfg):
        probs = detector_probabilities(rho, setting, phase)
        rounded = np.rint(n_in * probs)
        counts = {name: int(rounded[i]) for i, name in enumerate(DETECTORS)}
        angles = {} if setting.kind == "none" else {f"SPM{spm}": setting.nominal_angle for spm in range(4)}
        runs.append(Run(setting, angles, phase, n_in, counts))
    return CountData(tuple(runs))

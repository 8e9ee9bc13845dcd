"""Estimation pipeline from detector counts to a physical density matrix.

Counts are first turned into Stokes estimates with the tap-off factor 2
(half the photons feed the monitor arms), then into a raw matrix by the
exact inverse map, and finally refined by a maximum-likelihood fit over a
Cholesky-style parameterization that is physical by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import experiment, qstate, stokes
from .qstate import DensityMatrix

log = logging.getLogger(__name__)

PHASE_TOL = 1e-9

#: plate kind measured by each difference estimator component
_KIND_COMPONENT = {"none": 1, "hwp": 2, "qwp": 3}

_MAX_EVALUATIONS = 20000
_RELATIVE_COST_TOL = 1e-10
_RESTART_SEED = 7
_REPAIR_EPSILON = 1e-6

_DIAG = np.arange(4)
_LOWER_ROWS = np.array([1, 2, 2, 3, 3, 3])
_LOWER_COLS = np.array([0, 0, 1, 0, 1, 2])


@dataclass(frozen=True)
class StokesErrors:
    """Standard errors matching the StokesSet layout (real/imag for cross)."""

    s0: np.ndarray
    s1: np.ndarray
    S_re: np.ndarray
    S_im: np.ndarray

    def __post_init__(self) -> None:
        for name in ("s0", "s1", "S_re", "S_im"):
            values = np.array(getattr(self, name), dtype=float).reshape(-1)
            if values.shape != (4,):
                raise ValueError(f"{name} must hold four standard errors")
            if np.any(values < 0.0):
                raise ValueError("standard errors must be nonnegative")
            values.setflags(write=False)
            object.__setattr__(self, name, values)


@dataclass(frozen=True)
class StokesEstimate:
    set: stokes.StokesSet
    std_errs: StokesErrors


@dataclass(frozen=True)
class MleParams:
    """16 reals (4 diagonal + 6 complex lower entries) of the factor T.

    The induced state T^H T / Tr(T^H T) is Hermitian, unit trace and
    positive semidefinite for every nonzero parameter vector.
    """

    t: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.t, dtype=float).reshape(-1)
        if values.shape != (16,):
            raise ValueError("MLE parameterization needs exactly 16 reals")
        values.setflags(write=False)
        object.__setattr__(self, "t", values)


@dataclass
class ReconstructionResult:
    rho_linear: DensityMatrix
    rho_mle: DensityMatrix | None = None
    diagnostics: dict | None = None
    metrics: dict | None = None

    def to_dict(self) -> dict:
        return {
            "rho_linear": self.rho_linear.to_dict(),
            "rho_mle": self.rho_mle.to_dict() if self.rho_mle is not None else None,
            "diagnostics": self.diagnostics,
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ReconstructionResult":
        rho_mle = payload.get("rho_mle")
        return cls(
            rho_linear=DensityMatrix.from_dict(payload["rho_linear"]),
            rho_mle=DensityMatrix.from_dict(rho_mle) if rho_mle is not None else None,
            diagnostics=payload.get("diagnostics"),
            metrics=payload.get("metrics"),
        )


def _matching_runs(runs, kind=None, phase=None):
    selected = []
    for run in runs:
        if kind is not None and run.setting.kind != kind:
            continue
        if phase is not None and abs(run.phase - phase) > PHASE_TOL:
            continue
        selected.append(run)
    return selected


def _pooled_difference(runs, d0: str, d1: str):
    """2(N0 - N1)/N over pooled runs plus its multinomial variance."""
    n0 = sum(run.counts[d0] for run in runs)
    n1 = sum(run.counts[d1] for run in runs)
    total = sum(run.n_in for run in runs)
    value = 2.0 * (n0 - n1) / total
    p0 = n0 / total
    p1 = n1 / total
    variance = 4.0 * max(p0 + p1 - (p0 - p1) ** 2, 0.0) / total
    return value, variance


def _mean_pair_sum(runs, d0: str, d1: str):
    """Average of the per-run 2(N0 + N1)/n estimates plus its variance."""
    values = []
    variances = []
    for run in runs:
        q = (run.counts[d0] + run.counts[d1]) / run.n_in
        values.append(2.0 * q)
        variances.append(4.0 * max(q * (1.0 - q), 0.0) / run.n_in)
    count = len(values)
    return float(np.mean(values)), float(np.sum(variances)) / count**2


def estimate_stokes(data: experiment.CountData) -> StokesEstimate:
    """Stokes parameters and standard errors from detector counts.

    Requires runs for every plate kind at both phi = 0 and phi = pi/2.
    Input-arm parameters come from SPM0/SPM1 (s0 averaged over every run,
    the difference estimators pooled per kind across phases). Output-arm
    fringes come from SPM3 (output path 0) and SPM2 (output path 1) at
    each required phase; the cross parameters average the extractions from
    both output paths. Standard errors propagate multinomial variances,
    treating the arms as independent (the small same-run covariance is
    ignored).
    """
    runs = list(data.runs)
    if not runs:
        raise ValueError("count data holds no runs")
    for run in runs:
        if run.n_in <= 0:
            raise ValueError(f"zero photon budget in a '{run.setting.kind}' run")

    required_phases = ((0.0, "0"), (math.pi / 2.0, "pi/2"))
    for kind in experiment.PLATE_KINDS:
        for phase, label in required_phases:
            if not _matching_runs(runs, kind=kind, phase=phase):
                raise ValueError(f"missing run: setting '{kind}' at phase {label}")

    s_in = np.zeros((2, 4))
    var_in = np.zeros((2, 4))
    for path in (0, 1):
        d0, d1 = f"SPM{path}.D0", f"SPM{path}.D1"
        s_in[path, 0], var_in[path, 0] = _mean_pair_sum(runs, d0, d1)
        for kind, component in _KIND_COMPONENT.items():
            s_in[path, component], var_in[path, component] = _pooled_difference(
                _matching_runs(runs, kind=kind), d0, d1
            )

    sums = s_in[0] + s_in[1]

    fringes = {}
    fringe_vars = {}
    for out_path, spm in ((0, 3), (1, 2)):
        d0, d1 = f"SPM{spm}.D0", f"SPM{spm}.D1"
        for phase, label in required_phases:
            values = np.zeros(4)
            variances = np.zeros(4)
            values[0], variances[0] = _mean_pair_sum(_matching_runs(runs, phase=phase), d0, d1)
            for kind, component in _KIND_COMPONENT.items():
                values[component], variances[component] = _pooled_difference(
                    _matching_runs(runs, kind=kind, phase=phase), d0, d1
                )
            fringes[(out_path, label)] = stokes.OnePathStokes(out_path, values)
            fringe_vars[(out_path, label)] = variances

    from_path0 = stokes.extract_tpsp(sums, fringes[(0, "0")], fringes[(0, "pi/2")], 0)
    from_path1 = stokes.extract_tpsp(sums, fringes[(1, "0")], fringes[(1, "pi/2")], 1)
    cross = 0.5 * (from_path0.S + from_path1.S)
    # the input-arm sums cancel in the two-path average, leaving half the
    # fringe difference, so only fringe variances enter
    var_re = 0.25 * (fringe_vars[(0, "0")] + fringe_vars[(1, "0")])
    var_im = 0.25 * (fringe_vars[(0, "pi/2")] + fringe_vars[(1, "pi/2")])

    estimate = stokes.StokesSet(
        stokes.OnePathStokes(0, s_in[0]),
        stokes.OnePathStokes(1, s_in[1]),
        stokes.TwoPathStokes(cross),
    )
    errors = StokesErrors(
        np.sqrt(var_in[0]), np.sqrt(var_in[1]), np.sqrt(var_re), np.sqrt(var_im)
    )
    return StokesEstimate(estimate, errors)


def linear_inversion(estimate: StokesEstimate, renormalize: bool = True) -> DensityMatrix:
    """Algebraic inversion of the Stokes estimate; possibly unphysical.

    With ``renormalize`` the matrix is divided by its trace, which must
    exceed 0.5; below that the count record is too degenerate to use.
    """
    raw = stokes.reconstruct(estimate.set)
    if not renormalize:
        return raw
    trace = float(np.trace(raw.matrix).real)
    if trace <= 0.5:
        raise ValueError(f"degenerate count record (reconstructed trace {trace:.4f})")
    if abs(trace - 1.0) > 1e-12:
        log.info("renormalizing linear inversion trace %.6f -> 1", trace)
    return DensityMatrix(raw.matrix / trace, validated=False)


def factor_from_params(t) -> np.ndarray:
    """Lower-triangular complex T from the 16-real parameter vector."""
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.shape != (16,):
        raise ValueError("expected 16 parameters")
    T = np.zeros((4, 4), dtype=complex)
    T[_DIAG, _DIAG] = t[:4]
    T[_LOWER_ROWS, _LOWER_COLS] = t[4::2] + 1j * t[5::2]
    return T


def params_from_factor(T) -> np.ndarray:
    T = np.asarray(T, dtype=complex)
    t = np.empty(16)
    t[:4] = T[_DIAG, _DIAG].real
    lower = T[_LOWER_ROWS, _LOWER_COLS]
    t[4::2] = lower.real
    t[5::2] = lower.imag
    return t


def rho_from_params(params: MleParams) -> DensityMatrix:
    """Physical state T^H T / Tr(T^H T) induced by the parameters."""
    T = factor_from_params(params.t)
    m = T.conj().T @ T
    trace = float(np.trace(m).real)
    if trace <= 0.0:
        raise ValueError("degenerate parameters (zero factor)")
    return DensityMatrix(m / trace, validated=True)


def cholesky_repair(rho_raw: DensityMatrix) -> MleParams:
    """Parameters whose induced state is the closest physical repair.

    Negative eigenvalues are clipped, the trace renormalized, and a small
    epsilon * I added so the Cholesky factor exists; an all-zero input
    falls back to the maximally mixed state. The factor is taken lower
    triangular via a reversal-conjugated Cholesky.
    """
    evals, vecs = qstate.eigh4(rho_raw.matrix)
    clipped = np.clip(evals, 0.0, None)
    total = clipped.sum()
    if total <= 0.0:
        repaired = np.eye(4) / 4.0
    else:
        repaired = (vecs * (clipped / total)) @ vecs.conj().T
    repaired = repaired + _REPAIR_EPSILON * np.eye(4)
    reversal = np.eye(4)[::-1]
    lower = np.linalg.cholesky(reversal @ repaired @ reversal)
    T = reversal @ lower.conj().T @ reversal
    return MleParams(params_from_factor(T))


@dataclass(frozen=True)
class _Design:
    """Per-detector linear forms: probability = operators @ vec(rho)."""

    operators: np.ndarray  # (n_runs * 8, 16)
    budgets: np.ndarray  # (n_runs * 8,)
    observed: np.ndarray  # (n_runs * 8,)


def _build_design(data: experiment.CountData) -> _Design:
    rows = []
    budgets = []
    observed = []
    for run in data.runs:
        ops = experiment.measurement_operators(run.setting, run.phase)
        for index, detector in enumerate(experiment.DETECTORS):
            rows.append(ops[index].T.reshape(-1))
            budgets.append(run.n_in)
            observed.append(run.counts[detector])
    return _Design(
        np.array(rows), np.array(budgets, dtype=float), np.array(observed, dtype=float)
    )


def _design_cost(design: _Design, t: np.ndarray) -> float:
    T = factor_from_params(t)
    m = T.conj().T @ T
    trace = np.trace(m).real
    if not np.isfinite(trace) or trace <= 0.0:
        return np.inf
    predicted = design.budgets * (design.operators @ (m.reshape(-1) / trace)).real
    residual = predicted - design.observed
    return float(np.sum(residual * residual / (2.0 * np.maximum(predicted, 0.5))))


def mle_cost(params: MleParams, data: experiment.CountData) -> float:
    """Gaussian-approximation negative log-likelihood of the counts.

    Sum over every run and detector of (n p - n_obs)^2 / (2 max(n p, 0.5)),
    with probabilities evaluated at the runs' nominal plate angles.
    """
    if float(np.dot(params.t, params.t)) <= 0.0:
        raise ValueError("degenerate parameters (zero factor)")
    return _design_cost(_build_design(data), params.t)


def _nelder_mead(func, x0: np.ndarray, max_evals: int, rel_tol: float = _RELATIVE_COST_TOL):
    """Minimize with the standard simplex moves; returns the best-ever point.

    Stops when the simplex cost spread falls below rel_tol relative to the
    best value, or when the evaluation budget is exhausted.
    """
    n = x0.size
    evals = 0

    def evaluate(x):
        nonlocal evals
        evals += 1
        return func(x)

    simplex = np.empty((n + 1, n))
    fvals = np.empty(n + 1)
    simplex[0] = x0
    fvals[0] = evaluate(x0)
    for i in range(n):
        point = x0.copy()
        point[i] = point[i] * 1.05 if point[i] != 0.0 else 0.00025
        simplex[i + 1] = point
        fvals[i + 1] = evaluate(point)

    iterations = 0
    converged = False
    while evals + n + 2 <= max_evals:
        order = np.argsort(fvals, kind="stable")
        simplex = simplex[order]
        fvals = fvals[order]
        if fvals[-1] - fvals[0] <= rel_tol * (abs(fvals[0]) + 1e-15):
            converged = True
            break
        iterations += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1].copy()
        reflected = centroid + (centroid - worst)
        f_reflected = evaluate(reflected)
        if f_reflected < fvals[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_expanded = evaluate(expanded)
            if f_expanded < f_reflected:
                simplex[-1], fvals[-1] = expanded, f_expanded
            else:
                simplex[-1], fvals[-1] = reflected, f_reflected
        elif f_reflected < fvals[-2]:
            simplex[-1], fvals[-1] = reflected, f_reflected
        else:
            if f_reflected < fvals[-1]:
                contracted = centroid + 0.5 * (reflected - centroid)
                f_contracted = evaluate(contracted)
                accept = f_contracted <= f_reflected
            else:
                contracted = centroid - 0.5 * (centroid - worst)
                f_contracted = evaluate(contracted)
                accept = f_contracted < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = contracted, f_contracted
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = evaluate(simplex[i])
    best = int(np.argmin(fvals))
    return simplex[best].copy(), float(fvals[best]), evals, iterations, converged


def mle_fit(data: experiment.CountData, init: DensityMatrix) -> ReconstructionResult:
    """Maximum-likelihood refinement starting from a (possibly raw) state.

    The initialization is repaired to a physical parameterization, then the
    cost is minimized with Nelder-Mead (relative tolerance 1e-10, at most
    20000 evaluations). If the first pass fails to improve on the repaired
    start, one restart from a perturbed simplex (fixed seed 7) is taken.
    The returned cost never exceeds the repaired-initialization cost.
    """
    design = _build_design(data)

    def cost(t):
        return _design_cost(design, t)

    start = cholesky_repair(init)
    cost_initial = cost(start.t)
    if not np.isfinite(cost_initial):
        raise RuntimeError(f"initialization cost is not finite ({cost_initial})")

    best_t, best_cost, evals, iterations, converged = _nelder_mead(
        cost, start.t.copy(), max_evals=_MAX_EVALUATIONS
    )
    restarts = 0
    if best_cost >= cost_initial and evals < _MAX_EVALUATIONS:
        restarts = 1
        rng = np.random.default_rng(_RESTART_SEED)
        perturbed = best_t + 0.05 * (np.abs(best_t) + 0.01) * rng.standard_normal(best_t.size)
        t2, cost2, evals2, iters2, conv2 = _nelder_mead(
            cost, perturbed, max_evals=_MAX_EVALUATIONS - evals
        )
        evals += evals2
        iterations += iters2
        if cost2 < best_cost:
            best_t, best_cost, converged = t2, cost2, conv2
    if not np.isfinite(best_cost):
        raise RuntimeError(
            f"optimizer failed to produce a finite cost "
            f"(initial {cost_initial}, final {best_cost}, evaluations {evals})"
        )

    rho_mle = rho_from_params(MleParams(best_t))
    diagnostics = {
        "cost_initial": float(cost_initial),
        "cost_final": float(best_cost),
        "iterations": int(iterations),
        "evaluations": int(evals),
        "restarts": int(restarts),
        "converged": bool(converged),
    }
    return ReconstructionResult(rho_linear=init, rho_mle=rho_mle, diagnostics=diagnostics)


def report(rho_ref: DensityMatrix, result: ReconstructionResult) -> dict:
    """Fill ``result.metrics`` with quality numbers against a reference.

    Uses the MLE state when present, otherwise the linear-inversion state
    (which must then be physical).
    """
    reference = qstate.ensure_physical(rho_ref)
    if result.rho_mle is not None:
        estimate = result.rho_mle
    else:
        try:
            estimate = qstate.ensure_physical(result.rho_linear)
        except ValueError as exc:
            raise ValueError(
                f"linear-inversion estimate is unphysical ({exc}); rerun with MLE"
            ) from None
    metrics = {
        "fidelity": qstate.fidelity(estimate, reference),
        "trace_distance": qstate.trace_distance(estimate, reference),
        "purity_est": qstate.purity(estimate),
        "purity_ref": qstate.purity(reference),
    }
    result.metrics = metrics
    return metrics

"""Twin-experiment driver and theoretical condition checkers.

A twin experiment advances the reference state and one assimilated state per
scheme as a single stacked adaptive-step system, so the discrepancy is
rebuilt from the current states at every Runge-Kutta stage and both
trajectories see identical steps. The L2 synchronization error
E(t) = ||u - v|| is recorded on a fixed output-time axis.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .grids import Field, Grid
from .interpolation import ObservationNetwork
from .models import (
    ModelSpec,
    SchemeSpec,
    build_twin_rhs,
    initial_condition,
    model_dim,
    reference_rhs,
)
from .operators import array_l2, l2_norm
from .rk45 import StiffnessError, Tolerances, rk45_core

__all__ = [
    "TwinExperiment", "TwinResult", "ConditionReport",
    "run_twin", "run_twin_joint", "check_condition", "estimate_lipschitz",
    "BLOWUP_FACTOR",
]

# a run aborts once any scheme's error exceeds this multiple of its E(0)
BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class TwinExperiment:
    """Fully deterministic description of one twin run."""

    model: ModelSpec
    scheme: SchemeSpec
    network: ObservationNetwork
    grid: Grid
    t_end: float
    output_dt: float
    tolerances: Tolerances = Tolerances()
    disc: Optional[str] = None
    snapshot_dt: Optional[float] = None  # default: eighth of the span

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.output_dt <= self.t_end:
            raise ValueError("output_dt must be in (0, t_end]")
        if model_dim(self.model) != self.grid.ndim:
            raise ValueError("grid dimension does not match the model")
        if self.network.ndim != self.grid.ndim:
            raise ValueError("network dimension does not match the model")


@dataclass(frozen=True, eq=False)
class TwinResult:
    """Error trace and snapshots of one scheme's twin run.

    status is "ok" or "blow-up"; on blow-up the series is truncated at the
    last completed output time.
    """

    scheme: SchemeSpec
    times: np.ndarray
    errors: np.ndarray
    snapshot_times: np.ndarray
    reference_snapshots: List[Field]
    assimilated_snapshots: List[Field]
    wall_time: float
    status: str = "ok"


def _output_times(t_end: float, output_dt: float) -> np.ndarray:
    n = int(round(t_end / output_dt))
    if abs(n * output_dt - t_end) > 1e-9 * t_end:
        n = int(np.ceil(t_end / output_dt))
    return np.linspace(0.0, t_end, n + 1)


def run_twin_joint(
    model: ModelSpec,
    schemes: Sequence[SchemeSpec],
    network: ObservationNetwork,
    grid: Grid,
    t_end: float,
    output_dt: float,
    tolerances: Tolerances = Tolerances(),
    disc: Optional[str] = None,
    snapshot_dt: Optional[float] = None,
    v0: Optional[Field] = None,
) -> List[TwinResult]:
    """Run one reference trajectory against several schemes at once.

    All schemes share the reference state inside one stacked integration,
    which keeps the comparison on identical adaptive steps and costs far
    less than separate runs. Returns one TwinResult per scheme, in order.
    """
    schemes = list(schemes)
    if not schemes:
        raise ValueError("need at least one scheme")
    rhs = build_twin_rhs(model, schemes, network, grid, disc)
    u0 = initial_condition(model, "reference", grid).values
    v0_values = (
        initial_condition(model, "assimilated", grid).values
        if v0 is None
        else v0.values
    )
    m = len(schemes)
    size = u0.size
    y0 = np.concatenate([u0.ravel()] + [v0_values.ravel()] * m)

    times = _output_times(t_end, output_dt)
    if snapshot_dt is None:
        snapshot_dt = t_end / 8.0
    snap_stride = max(1, int(round(snapshot_dt / output_dt)))
    snap_idx = set(range(0, times.size, snap_stride)) | {times.size - 1}

    vol = grid.cell_volume
    errors = np.full((m, times.size), np.nan)
    ref_snaps: List[Field] = []
    asm_snaps: List[List[Field]] = [[] for _ in range(m)]
    snap_times: List[float] = []

    e0 = np.array([array_l2(u0.ravel() - v0_values.ravel(), vol)] * m)
    thresholds = np.where(e0 > 0, BLOWUP_FACTOR * e0, np.inf)
    blown: List[int] = []

    def emit(i, t, y):
        states = y.reshape(m + 1, size)
        for j in range(m):
            errors[j, i] = array_l2(states[0] - states[j + 1], vol)
        if i in snap_idx:
            snap_times.append(t)
            ref_snaps.append(Field(grid, states[0].reshape(grid.shape)))
            for j in range(m):
                asm_snaps[j].append(Field(grid, states[j + 1].reshape(grid.shape)))

    def post_step(t, y):
        states = y.reshape(m + 1, size)
        for j in range(m):
            if array_l2(states[0] - states[j + 1], vol) > thresholds[j]:
                blown.append(j)
        return bool(blown)

    start = time.perf_counter()
    stats = rk45_core(
        rhs,
        y0,
        (0.0, t_end),
        tolerances.rel_tol,
        tolerances.abs_tol,
        times,
        emit,
        max_step=tolerances.max_step,
        post_step=post_step,
        context=f"{type(model).__name__} twin run",
    )
    wall = time.perf_counter() - start

    n_emitted = stats["n_emitted"]
    results = []
    for j, scheme in enumerate(schemes):
        status = "blow-up" if j in blown else "ok"
        results.append(
            TwinResult(
                scheme=scheme,
                times=times[:n_emitted].copy(),
                errors=errors[j, :n_emitted].copy(),
                snapshot_times=np.array(snap_times),
                reference_snapshots=list(ref_snaps),
                assimilated_snapshots=list(asm_snaps[j]),
                wall_time=wall,
                status=status,
            )
        )
    return results


def run_twin(exp: TwinExperiment) -> TwinResult:
    """Advance the coupled reference/assimilated pair and record E(t)."""
    return run_twin_joint(
        exp.model,
        [exp.scheme],
        exp.network,
        exp.grid,
        exp.t_end,
        exp.output_dt,
        exp.tolerances,
        exp.disc,
        exp.snapshot_dt,
    )[0]


# ---------------------------------------------------------------------------
# theoretical operating window


@dataclass(frozen=True)
class ConditionReport:
    """Sufficient-condition window and predicted decay rate for a scheme.

    The window is advisory: experiments may run outside it and still
    converge (the sufficient conditions are not sharp).
    """

    scheme_kind: str
    lambda_lower: float
    lambda_upper: float
    feasible: bool
    gamma_predicted: float
    inputs: Dict[str, float] = field(default_factory=dict)


def check_condition(
    scheme_kind: str,
    L: float,
    C: float,
    h: float,
    mu: float,
    eta: float = 0.0,
    kappa: float = 1.0,
    alpha: float = 0.5,
    lam: float = 1.0,
) -> ConditionReport:
    """Evaluate the exponential-convergence window for AOT or IDDA.

    IDDA (effective diffusion mu + eta*kappa):
        L^2 C^2 h^2 / (2 alpha (mu + eta kappa)) < lambda < (mu + eta kappa) / (C^2 h^2)
        gamma = lambda alpha - L^2 C^2 h^2 / (2 (mu + eta kappa))
    AOT:
        L / alpha < lambda < 2 mu / (C^2 h^2)
        gamma = lambda alpha - L
    """
    if scheme_kind not in ("aot", "idda"):
        raise ValueError(f"scheme kind must be 'aot' or 'idda', got {scheme_kind!r}")
    if not 0.5 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [1/2, 1], got {alpha}")
    if min(C, h, mu) <= 0 or L < 0 or eta < 0 or not 0 < kappa <= 1:
        raise ValueError("parameters out of range")
    if scheme_kind == "idda":
        mu_eff = mu + eta * kappa
        lower = (L**2 * C**2 * h**2) / (2 * alpha * mu_eff)
        upper = mu_eff / (C**2 * h**2)
        gamma = lam * alpha - (L**2 * C**2 * h**2) / (2 * mu_eff)
    else:
        lower = L / alpha
        upper = 2 * mu / (C**2 * h**2)
        gamma = lam * alpha - L
    return ConditionReport(
        scheme_kind=scheme_kind,
        lambda_lower=lower,
        lambda_upper=upper,
        feasible=bool(lower < lam < upper),
        gamma_predicted=gamma,
        inputs={
            "L": L, "C": C, "h": h, "mu": mu, "eta": eta,
            "kappa": kappa, "alpha": alpha, "lambda": lam,
        },
    )


def estimate_lipschitz(model: ModelSpec, sample_fields: Sequence[Field]) -> float:
    """Empirical max of ||F[u] - F[w]|| / ||u - w|| over the given fields.

    A lower bound on the true constant; identical pairs are skipped.
    """
    fields = list(sample_fields)
    if len(fields) < 2:
        raise ValueError("need at least two sample fields")
    split = reference_rhs(model)
    f_values = [split.f(f) for f in fields]
    worst = 0.0
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            dv = Field(fields[i].grid, fields[i].values - fields[j].values)
            denom = l2_norm(dv)
            if denom == 0.0:
                continue
            df = Field(fields[i].grid, f_values[i].values - f_values[j].values)
            worst = max(worst, l2_norm(df) / denom)
    return worst

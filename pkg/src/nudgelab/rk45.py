"""Adaptive explicit Runge-Kutta time integration.

Dormand-Prince 5(4) embedded pair with PI step-size control and the pair's
standard fourth-order dense output. The FSAL property is exploited, so an
accepted step costs six fresh right-hand-side evaluations. Output states are
interpolated from the dense representation rather than by forcing steps onto
the output times, which keeps the step-size controller undisturbed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .grids import Field, Grid


class StiffnessError(RuntimeError):
    """Raised when the step size underflows, i.e. the problem looks stiff."""


@dataclass(frozen=True)
class Tolerances:
    """Error-control settings for the adaptive integrator."""

    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    max_step: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must be in (0, 1), got {self.rel_tol}")
        if not 0.0 < self.abs_tol < 1.0:
            raise ValueError(f"abs_tol must be in (0, 1), got {self.abs_tol}")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError(f"max_step must be positive, got {self.max_step}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States sampled at the requested output times."""

    times: np.ndarray
    states: List[Field]

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) < 2:
            raise ValueError("a trajectory needs at least two samples")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")


# Butcher tableau of the Dormand-Prince 5(4) pair.
_A = np.array([
    [0, 0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0],
])
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_B5 = _A[6].copy()  # fifth-order weights; the last stage is FSAL
_ERR = np.array([
    71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
])
# dense-output weights for the quartic interpolant
_D = np.array([
    -12715105075 / 11282082432, 0, 87487479700 / 32700410799,
    -10690763975 / 1880347072, 701980252875 / 199316789632,
    -1453857185 / 822651844, 69997945 / 29380423,
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents (k = 5 for the embedded fourth-order estimate)
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_UNDERFLOW = 1e-14


def _error_norm(err: np.ndarray, y: np.ndarray, y_new: np.ndarray,
                rel_tol: float, abs_tol: float) -> float:
    scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(rhs, t0, y0, f0, rel_tol, abs_tol, span):
    """Standard curvature-based guess for the first step size."""
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def rk45_core(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_span: tuple,
    rel_tol: float,
    abs_tol: float,
    output_times: np.ndarray,
    emit: Callable[[int, float, np.ndarray], None],
    max_step: Optional[float] = None,
    post_step: Optional[Callable[[float, np.ndarray], bool]] = None,
    context: str = "system",
) -> dict:
    """Advance y' = rhs(t, y) over t_span, emitting dense output.

    emit(i, t, y) is called once per output time, in order. post_step(t, y)
    runs after each accepted step; returning True stops the integration
    early. Returns integration statistics including the stop status.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    output_times = np.asarray(output_times, dtype=float)
    if output_times.size and (output_times[0] < t0 - 1e-12 or output_times[-1] > t1 + 1e-12):
        raise ValueError("output_times must lie within t_span")
    span = t1 - t0
    hmax = span if max_step is None else min(max_step, span)

    y = np.array(y0, dtype=float)
    t = t0
    n = y.size
    K = np.empty((7, n))
    K[0] = rhs(t, y)

    oi = 0
    while oi < output_times.size and output_times[oi] <= t0 + 1e-15 * max(1.0, abs(t0)):
        emit(oi, t0, y.copy())
        oi += 1

    h = min(_initial_step(rhs, t0, y, K[0], rel_tol, abs_tol, span), hmax)
    err_prev = 1e-4
    n_steps = 0
    n_rejected = 0
    status = "ok"

    while t < t1 - 1e-14 * span:
        h = min(h, hmax, t1 - t)
        if h < _UNDERFLOW * span:
            raise StiffnessError(
                f"step size underflow at t={t:.6g} while integrating {context}"
            )
        for i in range(1, 7):
            K[i] = rhs(t + _C[i] * h, y + h * (_A[i, :i] @ K[:i]))
        y_new = y + h * (_B5 @ K)
        err_vec = h * (_ERR @ K)
        err = _error_norm(err_vec, y, y_new, rel_tol, abs_tol)

        if err <= 1.0:
            # dense output on (t, t+h]
            if oi < output_times.size and output_times[oi] <= t + h + 1e-12 * span:
                y_diff = y_new - y
                bspl = h * K[0] - y_diff
                r4 = y_diff - h * K[6] - bspl
                r5 = h * (_D @ K)
                while oi < output_times.size and output_times[oi] <= t + h + 1e-12 * span:
                    s = (output_times[oi] - t) / h
                    s1 = 1.0 - s
                    y_out = y + s * (y_diff + s1 * (bspl + s * (r4 + s1 * r5)))
                    emit(oi, output_times[oi], y_out)
                    oi += 1
            t += h
            y = y_new
            K[0] = K[6]  # FSAL
            n_steps += 1
            factor = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** _PI_BETA if err > 0 \
                else _MAX_FACTOR
            err_prev = max(err, 1e-4)
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            if post_step is not None and post_step(t, y):
                status = "stopped"
                break
        else:
            n_rejected += 1
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)

    return {
        "status": status,
        "t_final": t,
        "n_steps": n_steps,
        "n_rejected": n_rejected,
        "n_emitted": oi,
    }


def integrate_rk45(
    rhs: Callable[[float, Field], Field],
    y0: Field,
    t_span: tuple,
    tol: Tolerances = Tolerances(),
    output_times: Optional[Sequence[float]] = None,
    context: str = "system",
) -> Trajectory:
    """Integrate a field-valued ODE and sample the solution at output_times.

    Deterministic for fixed inputs. output_times defaults to the ends of
    t_span. Raises StiffnessError on step-size underflow.
    """
    grid: Grid = y0.grid
    if output_times is None:
        output_times = np.array([t_span[0], t_span[1]], dtype=float)
    else:
        output_times = np.asarray(output_times, dtype=float)

    shape = grid.shape

    def rhs_flat(t, y):
        return np.asarray(
            rhs(t, Field(grid, y.reshape(shape))).values, dtype=float
        ).ravel()

    states: List[Optional[Field]] = [None] * output_times.size

    def emit(i, t, y):
        states[i] = Field(grid, y.reshape(shape))

    rk45_core(
        rhs_flat,
        y0.values.ravel(),
        t_span,
        tol.rel_tol,
        tol.abs_tol,
        output_times,
        emit,
        max_step=tol.max_step,
        context=context,
    )
    return Trajectory(times=output_times, states=list(states))

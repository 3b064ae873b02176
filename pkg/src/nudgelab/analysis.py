"""Error-series post-processing: exponential rate fits and sweep tables.

The synchronization error of a converging twin run behaves like
E(t) ~ E0 exp(-gamma t) between an initial transient and a late-time
plateau near the integration noise floor. fit_rate makes that window
operational: it cuts the transient (samples before E first drops below
0.9 E(0)) and the plateau (samples after E first falls below
max(1e-10, 1e-12 E(0))), then least-squares fits ln E against t.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "ErrorSeries", "RateFit", "SweepRow", "SweepTable",
    "fit_rate", "build_sweep",
    "sweep_to_csv", "sweep_from_csv", "rate_fit_to_dict",
    "TRANSIENT_FRACTION", "PLATEAU_FLOOR", "PLATEAU_RELATIVE",
]

TRANSIENT_FRACTION = 0.9
PLATEAU_FLOOR = 1e-10
PLATEAU_RELATIVE = 1e-12
MIN_WINDOW_FRACTION = 0.2


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    """L2 error trace over time."""

    times: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        errors = np.asarray(self.errors, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "errors", errors)
        if times.shape != errors.shape or times.ndim != 1:
            raise ValueError("times and errors must be 1D arrays of equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(errors)) or np.any(errors < 0):
            raise ValueError("errors must be finite and non-negative")


@dataclass(frozen=True)
class RateFit:
    """Fitted exponential decay rate; positive gamma means decay."""

    gamma: float
    intercept: float
    window: Tuple[float, float]
    r_squared: Optional[float]
    status: str  # ok | no-exponential-window | non-convergent
    late: Optional["RateFit"] = None  # secondary fit over the last half window


def _ls_fit(t: np.ndarray, log_e: np.ndarray):
    slope, intercept = np.polyfit(t, log_e, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((log_e - pred) ** 2))
    ss_tot = float(np.sum((log_e - log_e.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), max(0.0, min(1.0, r2))


def _fit_window(times, errors, t_lo, t_hi, span) -> RateFit:
    sel = (times >= t_lo) & (times <= t_hi) & (errors > 0)
    t = times[sel]
    e = errors[sel]
    if t.size < 4:
        return RateFit(math.nan, math.nan, (t_lo, t_hi), None, "no-exponential-window")
    slope, intercept, r2 = _ls_fit(t, np.log(e))
    window = (float(t[0]), float(t[-1]))
    if (t[-1] - t[0]) < MIN_WINDOW_FRACTION * span or slope >= 0:
        return RateFit(-slope, intercept, window, r2, "non-convergent")
    return RateFit(-slope, intercept, window, r2, "ok")


def fit_rate(series: ErrorSeries, policy: Union[str, Tuple[float, float]] = "auto") -> RateFit:
    """Fit gamma from ln E(t); see the module docstring for the auto window.

    policy is "auto" or an explicit (t_lo, t_hi) window. The auto fit also
    carries a secondary fit over the last half of its window (field `late`),
    which is the right quantity for series that converge only after a long
    non-monotone transient.
    """
    times = series.times
    errors = series.errors
    if times.size < 8:
        raise ValueError(f"need at least 8 samples to fit a rate, got {times.size}")
    span = times[-1] - times[0]

    if policy != "auto":
        t_lo, t_hi = policy
        return _fit_window(times, errors, t_lo, t_hi, span)

    e0 = errors[0]
    below_transient = np.nonzero(errors < TRANSIENT_FRACTION * e0)[0]
    if e0 <= 0 or below_transient.size == 0:
        return RateFit(
            math.nan, math.nan, (times[0], times[-1]), None, "no-exponential-window"
        )
    start = below_transient[0]
    plateau = max(PLATEAU_FLOOR, PLATEAU_RELATIVE * e0)
    below_plateau = np.nonzero(errors < plateau)[0]
    stop = below_plateau[0] + 1 if below_plateau.size else times.size

    t = times[start:stop]
    if t.size < 4:
        return RateFit(
            math.nan, math.nan, (times[0], times[-1]), None, "no-exponential-window"
        )
    primary = _fit_window(times, errors, t[0], t[-1], span)
    if primary.status == "no-exponential-window":
        return primary
    mid = t[0] + 0.5 * (t[-1] - t[0])
    late = _fit_window(times, errors, mid, t[-1], span)
    return RateFit(
        primary.gamma, primary.intercept, primary.window,
        primary.r_squared, primary.status, late=late,
    )


# ---------------------------------------------------------------------------
# sweep assembly


@dataclass(frozen=True)
class SweepRow:
    param_value: float
    scheme: str
    fit: Optional[RateFit]
    status: str  # fit status, or the run failure ("blow-up", "stiff", ...)


@dataclass(frozen=True)
class SweepTable:
    param_name: str
    rows: List[SweepRow]


def build_sweep(param_name: str, entries: Sequence[Tuple[float, str, Optional[RateFit], str]]) -> SweepTable:
    """Assemble per-(value, scheme) fits into a table.

    entries are (param_value, scheme_name, fit_or_None, run_status). Failed
    or non-convergent runs keep their row; duplicates are an error. Rows are
    ordered by parameter value then scheme name regardless of input order.
    """
    seen = set()
    rows = []
    for value, scheme, fit, run_status in entries:
        key = (float(value), scheme)
        if key in seen:
            raise ValueError(f"duplicate sweep entry for {key}")
        seen.add(key)
        if run_status != "ok":
            status = run_status
        else:
            status = fit.status if fit is not None else "no-exponential-window"
        rows.append(SweepRow(float(value), scheme, fit, status))
    rows.sort(key=lambda r: (r.param_value, r.scheme))
    return SweepTable(param_name, rows)


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(float(x), ".17g")


def sweep_to_csv(table: SweepTable) -> str:
    """CSV form with 17-significant-digit floats and LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["param_value", "scheme", "gamma", "r_squared", "t_lo", "t_hi", "status"]
    )
    for row in table.rows:
        fit = row.fit
        if fit is None:
            writer.writerow([_fmt(row.param_value), row.scheme, "nan", "nan",
                             "nan", "nan", row.status])
        else:
            writer.writerow([
                _fmt(row.param_value), row.scheme, _fmt(fit.gamma),
                _fmt(fit.r_squared) if fit.r_squared is not None else "nan",
                _fmt(fit.window[0]), _fmt(fit.window[1]), row.status,
            ])
    return buf.getvalue()


def sweep_from_csv(text: str, param_name: str = "param") -> SweepTable:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        gamma = float(rec["gamma"])
        r2 = float(rec["r_squared"])
        window = (float(rec["t_lo"]), float(rec["t_hi"]))
        if math.isnan(gamma) and math.isnan(window[0]):
            fit = None
        else:
            fit = RateFit(gamma, math.nan, window,
                          None if math.isnan(r2) else r2, rec["status"]
                          if rec["status"] in ("ok", "non-convergent",
                                               "no-exponential-window")
                          else "ok")
        rows.append(SweepRow(float(rec["param_value"]), rec["scheme"], fit,
                             rec["status"]))
    return SweepTable(param_name, rows)


def rate_fit_to_dict(fit: RateFit) -> dict:
    out = {
        "gamma": None if math.isnan(fit.gamma) else fit.gamma,
        "intercept": None if math.isnan(fit.intercept) else fit.intercept,
        "window": [fit.window[0], fit.window[1]],
        "r_squared": fit.r_squared,
        "status": fit.status,
    }
    if fit.late is not None:
        out["late"] = rate_fit_to_dict(fit.late)
    return out

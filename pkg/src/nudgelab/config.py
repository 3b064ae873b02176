"""Experiment configs: JSON schema, validation, and canned benchmark runs.

Validation is total: every problem is reported with the JSON path of the
offending field, and nothing is executed until the whole config is clean.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .grids import Grid, Grid1D, Grid2D
from .interpolation import (
    CubicSplinePeriodic,
    Linear,
    ObservationNetwork,
    RbfWendlandC2,
    equispaced_points_1d,
    halton_points_2d,
)
from .models import (
    FULL_SUBSTITUTION,
    GRADIENT_OF_MODEL_ONLY,
    Burgers,
    KppBurgers,
    KuramotoSivashinsky,
    ModelSpec,
    NavierStokes2D,
    SchemeSpec,
    model_dim,
)
from .rk45 import Tolerances

__all__ = [
    "ConfigError", "BuiltExperiment", "validate_config", "build_experiment",
    "canned_config", "canned_names", "load_config", "SWEEP_PARAMS",
]

_MODEL_KINDS = {
    "burgers": Burgers,
    "kpp_burgers": KppBurgers,
    "kuramoto_sivashinsky": KuramotoSivashinsky,
    "navier_stokes_2d": NavierStokes2D,
}
_METHODS_1D = ("linear", "spline")
SWEEP_PARAMS = ("Ns", "lambda", "rho", "eta_k")


class ConfigError(ValueError):
    """Invalid experiment config; .problems lists 'json.path: message' strings."""

    def __init__(self, problems: List[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True, eq=False)
class BuiltExperiment:
    """A validated config resolved into runnable objects."""

    name: str
    model: ModelSpec
    grid: Grid
    network: ObservationNetwork
    schemes: List[SchemeSpec]
    scheme_names: List[str]
    t_end: float
    output_dt: float
    snapshot_dt: Optional[float]
    tolerances: Tolerances
    rate_policy: Union[str, Tuple[float, float]]
    disc: Optional[str]
    raw: dict


def _num(obj, path, problems, positive=False, nonneg=False):
    val = obj
    if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val):
        problems.append(f"{path}: expected a finite number")
        return None
    if positive and not val > 0:
        problems.append(f"{path}: must be positive")
        return None
    if nonneg and val < 0:
        problems.append(f"{path}: must be >= 0")
        return None
    return float(val)


def validate_config(raw: dict) -> List[str]:
    """Return all problems found; an empty list means the config is runnable."""
    problems: List[str] = []
    try:
        _build(raw, problems)
    except _Abort:
        pass
    return problems


def build_experiment(raw: dict, full: bool = False) -> BuiltExperiment:
    """Validate and resolve a config; raises ConfigError listing every problem."""
    raw = copy.deepcopy(raw)
    if full and isinstance(raw.get("full_overrides"), dict):
        raw = _merge(raw, raw["full_overrides"])
    problems: List[str] = []
    built = None
    try:
        built = _build(raw, problems)
    except _Abort:
        pass
    if problems:
        raise ConfigError(problems)
    return built


def _merge(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    out.pop("full_overrides", None)
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = {**out[key], **val}
        else:
            out[key] = val
    return out


class _Abort(Exception):
    """Internal: stop validation when later checks would be meaningless."""


def _build(raw: dict, problems: List[str]) -> Optional[BuiltExperiment]:
    if not isinstance(raw, dict):
        problems.append(": config must be a JSON object")
        raise _Abort
    name = raw.get("name", "experiment")

    model_obj = raw.get("model")
    if not isinstance(model_obj, dict) or model_obj.get("kind") not in _MODEL_KINDS:
        problems.append(
            f"model.kind: expected one of {sorted(_MODEL_KINDS)}"
        )
        raise _Abort
    kind = model_obj["kind"]
    if kind == "kuramoto_sivashinsky":
        if "mu" in model_obj:
            problems.append("model.mu: kuramoto_sivashinsky has fixed coefficients")
        model: ModelSpec = KuramotoSivashinsky()
    else:
        mu = _num(model_obj.get("mu"), "model.mu", problems, positive=True)
        if mu is None:
            raise _Abort
        model = _MODEL_KINDS[kind](mu=mu)
    dim = model_dim(model)

    grid_obj = raw.get("grid")
    if not isinstance(grid_obj, dict):
        problems.append("grid: required object")
        raise _Abort
    if dim == 1:
        n = grid_obj.get("n")
        length = _num(grid_obj.get("length"), "grid.length", problems, positive=True)
        if not isinstance(n, int) or n < 8:
            problems.append("grid.n: expected an integer >= 8")
            raise _Abort
        if length is None:
            raise _Abort
        grid: Grid = Grid1D(n, length)
        domain: Union[float, Tuple[float, float]] = length
    else:
        nx, ny = grid_obj.get("nx"), grid_obj.get("ny")
        lx = _num(grid_obj.get("lx"), "grid.lx", problems, positive=True)
        ly = _num(grid_obj.get("ly"), "grid.ly", problems, positive=True)
        if not (isinstance(nx, int) and isinstance(ny, int) and nx >= 8 and ny >= 8):
            problems.append("grid.nx/ny: expected integers >= 8")
            raise _Abort
        if lx is None or ly is None:
            raise _Abort
        if lx != ly:
            problems.append("grid: lx and ly must match (square domain)")
            raise _Abort
        grid = Grid2D(nx, ny, lx, ly)
        domain = (lx, ly)

    network = _build_network(raw.get("network"), dim, domain, problems)
    disc = raw.get("disc")
    if disc is not None and disc not in ("central-fd", "spectral"):
        problems.append("disc: expected 'central-fd' or 'spectral'")
        disc = None
    if disc == "central-fd" and dim == 2:
        problems.append("disc: the 2D vorticity model is spectral-only")
        disc = None

    schemes_obj = raw.get("schemes")
    schemes: List[SchemeSpec] = []
    scheme_names: List[str] = []
    if not isinstance(schemes_obj, list) or not schemes_obj:
        problems.append("schemes: expected a non-empty list")
    else:
        for i, s in enumerate(schemes_obj):
            scheme = _build_scheme(s, i, model, network, problems)
            if scheme is not None:
                schemes.append(scheme)
                base = scheme.kind
                label = base if base not in scheme_names else f"{base}_{i}"
                scheme_names.append(label)

    t_end = _num(raw.get("t_end"), "t_end", problems, positive=True)
    output_dt = _num(raw.get("output_dt"), "output_dt", problems, positive=True)
    if t_end is not None and output_dt is not None and output_dt > t_end:
        problems.append("output_dt: must not exceed t_end")
    snapshot_dt = None
    if "snapshot_dt" in raw:
        snapshot_dt = _num(raw.get("snapshot_dt"), "snapshot_dt", problems, positive=True)

    tol_obj = raw.get("tolerances", {})
    tolerances = Tolerances()
    if not isinstance(tol_obj, dict):
        problems.append("tolerances: expected an object")
    else:
        rel = tol_obj.get("rel_tol", 1e-6)
        abs_ = tol_obj.get("abs_tol", 1e-9)
        max_step = tol_obj.get("max_step")
        try:
            tolerances = Tolerances(
                rel_tol=float(rel), abs_tol=float(abs_),
                max_step=None if max_step is None else float(max_step),
            )
        except (TypeError, ValueError) as exc:
            problems.append(f"tolerances: {exc}")

    rate_obj = raw.get("rate_fit", {"policy": "auto"})
    rate_policy: Union[str, Tuple[float, float]] = "auto"
    if isinstance(rate_obj, dict):
        pol = rate_obj.get("policy", "auto")
        if pol == "auto":
            rate_policy = "auto"
        elif pol == "window":
            lo = _num(rate_obj.get("t_lo"), "rate_fit.t_lo", problems)
            hi = _num(rate_obj.get("t_hi"), "rate_fit.t_hi", problems)
            if lo is not None and hi is not None and lo < hi:
                rate_policy = (lo, hi)
            else:
                problems.append("rate_fit: window policy needs t_lo < t_hi")
        else:
            problems.append("rate_fit.policy: expected 'auto' or 'window'")
    else:
        problems.append("rate_fit: expected an object")

    if problems or network is None:
        raise _Abort
    return BuiltExperiment(
        name=str(name), model=model, grid=grid, network=network,
        schemes=schemes, scheme_names=scheme_names,
        t_end=t_end, output_dt=output_dt, snapshot_dt=snapshot_dt,
        tolerances=tolerances, rate_policy=rate_policy, disc=disc, raw=raw,
    )


def _build_network(net_obj, dim, domain, problems) -> Optional[ObservationNetwork]:
    if not isinstance(net_obj, dict):
        problems.append("network: required object")
        return None
    method_name = net_obj.get("method")
    if dim == 1 and method_name not in _METHODS_1D:
        problems.append(f"network.method: expected one of {_METHODS_1D} for 1D models")
        return None
    if dim == 2 and method_name != "rbf":
        problems.append("network.method: 2D models use 'rbf'")
        return None
    if method_name == "rbf":
        rho = _num(net_obj.get("rho", 5.0), "network.rho", problems, positive=True)
        if rho is None or not 1.0 <= rho <= 10.0:
            problems.append("network.rho: must lie in [1, 10]")
            return None
        method = RbfWendlandC2(rho=rho)
    elif method_name == "linear":
        method = Linear()
    else:
        method = CubicSplinePeriodic()

    selectors = [k for k in ("points", "equispaced", "halton") if k in net_obj]
    if len(selectors) != 1:
        problems.append("network: give exactly one of points / equispaced / halton")
        return None
    sel = selectors[0]
    try:
        if sel == "points":
            pts = np.asarray(net_obj["points"], dtype=float)
            if dim == 1 and pts.ndim == 2 and pts.shape[1] == 1:
                pts = pts[:, 0]
        elif sel == "equispaced":
            ns = net_obj["equispaced"]
            if not isinstance(ns, int) or ns < 1:
                problems.append("network.equispaced: expected a positive integer")
                return None
            if dim != 1:
                problems.append("network.equispaced: 1D only; use halton for 2D")
                return None
            pts = equispaced_points_1d(ns, domain)
        else:
            ns = net_obj["halton"]
            if not isinstance(ns, int) or ns < 1:
                problems.append("network.halton: expected a positive integer")
                return None
            if dim != 2:
                problems.append("network.halton: 2D only; use equispaced for 1D")
                return None
            pts = halton_points_2d(ns, domain)
        net = ObservationNetwork(pts, method, domain)
    except (ValueError, TypeError) as exc:
        problems.append(f"network: {exc}")
        return None
    if isinstance(method, CubicSplinePeriodic) and net.n_sensors < 3:
        problems.append("network: the periodic spline needs at least 3 sensors")
        return None
    return net


def _build_scheme(s, i, model, network, problems) -> Optional[SchemeSpec]:
    path = f"schemes[{i}]"
    if not isinstance(s, dict):
        problems.append(f"{path}: expected an object")
        return None
    kind = s.get("kind")
    if kind not in ("aot", "idda"):
        problems.append(f"{path}.kind: expected 'aot' or 'idda'")
        return None
    lam = _num(s.get("lambda"), f"{path}.lambda", problems)
    if lam is None:
        return None
    if lam <= 0:
        problems.append(f"{path}.lambda: must be positive")
        return None
    eta_k = 0.0
    if "eta_k" in s:
        eta_k = _num(s.get("eta_k"), f"{path}.eta_k", problems, nonneg=True)
        if eta_k is None:
            return None
        if eta_k > 2.0:
            problems.append(f"{path}.eta_k: must lie in [0, 2]")
            return None
        if not isinstance(model, NavierStokes2D) and eta_k > 0:
            problems.append(f"{path}.eta_k: artificial diffusion is 2D-only")
            return None
    mode = s.get("nonlinear_mode", FULL_SUBSTITUTION)
    if mode not in (FULL_SUBSTITUTION, GRADIENT_OF_MODEL_ONLY):
        problems.append(f"{path}.nonlinear_mode: unknown mode {mode!r}")
        return None
    if kind == "idda" and mode == GRADIENT_OF_MODEL_ONLY and isinstance(
        model, (KuramotoSivashinsky, NavierStokes2D)
    ):
        problems.append(
            f"{path}.nonlinear_mode: gradient-of-model-only is defined for the "
            "1D advection-diffusion models only"
        )
        return None
    if (
        kind == "idda"
        and network is not None
        and isinstance(network.method, Linear)
        and mode == FULL_SUBSTITUTION
    ):
        problems.append(
            f"{path}.nonlinear_mode: full substitution needs a differentiable "
            "interpolant; use gradient-of-model-only with linear interpolation"
        )
        return None
    if kind == "idda" and network is not None and isinstance(
        model, KuramotoSivashinsky
    ) and isinstance(network.method, Linear):
        problems.append(f"{path}: Kuramoto-Sivashinsky assimilation needs spline "
                        "interpolation")
        return None
    eta = eta_k * network.h if network is not None else 0.0
    try:
        return SchemeSpec(kind=kind, lam=lam, eta=eta, nonlinear_mode=mode)
    except ValueError as exc:
        problems.append(f"{path}: {exc}")
        return None


def load_config(path_or_name: str) -> dict:
    """Load a config from a JSON file, or by canned name."""
    import os

    if os.path.exists(path_or_name):
        with open(path_or_name, "r", encoding="utf-8") as fh:
            try:
                return json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError([f": not valid JSON ({exc})"]) from exc
    if path_or_name in _CANNED:
        return copy.deepcopy(_CANNED[path_or_name])
    raise ConfigError(
        [f": {path_or_name!r} is neither a file nor a canned config "
         f"(canned: {', '.join(sorted(_CANNED))})"]
    )


def canned_config(name: str) -> dict:
    return copy.deepcopy(_CANNED[name])


def canned_names() -> List[str]:
    return sorted(_CANNED)


_TWO_PI = 2.0 * math.pi

# Canned benchmark configs. Desk-scale defaults; "full_overrides" restores
# the full-size runs behind the CLI --full flag.
_CANNED: Dict[str, dict] = {
    "burgers_fig1": {
        "name": "burgers_fig1",
        "model": {"kind": "burgers", "mu": 0.001},
        "grid": {"n": 1000, "length": 1.0},
        "network": {"method": "linear", "points": [[0.16], [0.49], [0.82]]},
        "schemes": [
            {"kind": "aot", "lambda": 2.0},
            {"kind": "idda", "lambda": 2.0,
             "nonlinear_mode": "gradient-of-model-only"},
        ],
        "t_end": 4.0,
        "output_dt": 0.02,
    },
    "kpp_fig2_spline": {
        "name": "kpp_fig2_spline",
        "model": {"kind": "kpp_burgers", "mu": 0.01},
        "grid": {"n": 1000, "length": 1.0},
        "network": {"method": "spline", "points": [[0.16], [0.49], [0.82]]},
        "schemes": [
            {"kind": "aot", "lambda": 4.0},
            {"kind": "idda", "lambda": 4.0},
        ],
        "t_end": 4.0,
        "output_dt": 0.02,
    },
    "kpp_fig2_linear": {
        "name": "kpp_fig2_linear",
        "model": {"kind": "kpp_burgers", "mu": 0.01},
        "grid": {"n": 1000, "length": 1.0},
        "network": {"method": "linear", "points": [[0.16], [0.49], [0.82]]},
        "schemes": [
            {"kind": "aot", "lambda": 4.0},
            {"kind": "idda", "lambda": 4.0,
             "nonlinear_mode": "gradient-of-model-only"},
        ],
        "t_end": 4.0,
        "output_dt": 0.02,
    },
    "ks_fig3": {
        "name": "ks_fig3",
        "model": {"kind": "kuramoto_sivashinsky"},
        "grid": {"n": 1024, "length": 32.0 * math.pi},
        "network": {"method": "spline", "equispaced": 64},
        "schemes": [
            {"kind": "aot", "lambda": 2.0},
            {"kind": "idda", "lambda": 2.0},
        ],
        "t_end": 10.0,
        "output_dt": 0.05,
        # step size is stability-limited, so tight tolerances are free and
        # keep the high-wavenumber noise floor out of the fitted window
        "tolerances": {"rel_tol": 1e-7, "abs_tol": 1e-10},
        "full_overrides": {"t_end": 16.0},
    },
    "ns_fig4": {
        "name": "ns_fig4",
        "model": {"kind": "navier_stokes_2d", "mu": 1e-4},
        "grid": {"nx": 128, "ny": 128, "lx": _TWO_PI, "ly": _TWO_PI},
        "network": {"method": "rbf", "halton": 400, "rho": 5.0},
        "schemes": [
            {"kind": "aot", "lambda": 2.0},
            {"kind": "idda", "lambda": 2.0, "eta_k": 1.0},
        ],
        "t_end": 8.0,
        "output_dt": 0.05,
        "full_overrides": {
            "grid": {"nx": 256, "ny": 256, "lx": _TWO_PI, "ly": _TWO_PI},
        },
    },
}

"""Observation networks and scattered-data interpolation.

Three interpolation operators are provided: periodic piecewise linear and
periodic C2 cubic splines in 1D, and compactly supported Wendland C2 radial
basis functions on the 2D torus. Each network caches the linear maps it
needs (sampling the model field at the sensors, pushing sensor values back
onto a grid, and for splines the analytic first/second derivatives), so that
inside a time-stepping loop a fresh discrepancy field costs one factorized
solve plus one matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse

from .grids import Field, Grid, Grid1D, Grid2D
from .operators import diff_periodic, gradient_2d, l2_inner, l2_norm

__all__ = [
    "Linear", "CubicSplinePeriodic", "RbfWendlandC2", "InterpolationMethod",
    "ObservationNetwork", "Interpolant",
    "sample_at", "build_interpolant", "evaluate_on_grid",
    "interpolated_discrepancy", "halton_points_2d", "equispaced_points_1d",
    "coercivity_diagnostic", "kappa_alignment", "estimate_interp_constant",
    "network_to_json", "network_from_json",
]


@dataclass(frozen=True)
class Linear:
    """Periodic piecewise-linear interpolation (1D)."""

    name = "linear"


@dataclass(frozen=True)
class CubicSplinePeriodic:
    """C2 periodic cubic spline through the sensor values (1D)."""

    name = "spline"


@dataclass(frozen=True)
class RbfWendlandC2:
    """Wendland C2 kernel interpolation with support radius rho * h (2D)."""

    rho: float = 5.0
    name = "rbf"

    def __post_init__(self):
        if not 1.0 <= self.rho <= 10.0:
            raise ValueError(f"rho must be in [1, 10], got {self.rho}")


InterpolationMethod = Union[Linear, CubicSplinePeriodic, RbfWendlandC2]


def _wendland_c2(q: np.ndarray) -> np.ndarray:
    """phi(q) = (1-q)^4 (4q+1) for q < 1, else 0. Positive definite in 2D."""
    out = np.clip(1.0 - q, 0.0, None)
    return out**4 * (4.0 * q + 1.0)


def _torus_distances(a: np.ndarray, b: np.ndarray, lx: float, ly: float) -> np.ndarray:
    """Pairwise minimum-image distances between 2D point sets on the torus."""
    dx = np.abs(a[:, 0, None] - b[None, :, 0])
    dx = np.minimum(dx, lx - dx)
    dy = np.abs(a[:, 1, None] - b[None, :, 1])
    dy = np.minimum(dy, ly - dy)
    return np.hypot(dx, dy)


class ObservationNetwork:
    """Fixed sensor locations with characteristic spacing h.

    1D points live in [0, length); 2D points in [0, lx) x [0, ly). The
    spacing h is the largest gap between cyclic neighbours in 1D and
    side / sqrt(Ns) in 2D. Interpolation structure (kernel factorizations,
    grid evaluation maps) is cached on the instance; sensors never move.
    """

    def __init__(self, points, method: InterpolationMethod, domain):
        points = np.atleast_1d(np.asarray(points, dtype=float))
        if points.ndim == 1:
            self.ndim = 1
            self.domain = float(domain)
            if np.any(points < 0) or np.any(points >= self.domain):
                raise ValueError("sensor locations must lie inside [0, length)")
            if isinstance(method, RbfWendlandC2):
                raise ValueError("RBF interpolation is for 2D networks")
            order = np.argsort(points)
            gaps = np.diff(points[order])
            wrap = self.domain - points[order[-1]] + points[order[0]]
            if points.size > 1 and (np.any(gaps == 0)):
                raise ValueError("sensor locations must be distinct")
            self.h = float(max(gaps.max(initial=0.0), wrap)) if points.size > 1 \
                else self.domain
        else:
            if points.shape[1] != 2:
                raise ValueError("2D sensor locations must be (Ns, 2)")
            self.ndim = 2
            lx, ly = float(domain[0]), float(domain[1])
            if lx != ly:
                raise ValueError("2D networks currently require a square domain")
            self.domain = (lx, ly)
            if (np.any(points < 0) or np.any(points[:, 0] >= lx)
                    or np.any(points[:, 1] >= ly)):
                raise ValueError("sensor locations must lie inside the domain")
            if len(np.unique(points, axis=0)) != len(points):
                raise ValueError("sensor locations must be distinct")
            if not isinstance(method, RbfWendlandC2):
                raise ValueError(f"{method.name} interpolation is 1D-only")
            self.h = lx / np.sqrt(len(points))
        self.points = points
        self.method = method
        self._maps = {}
        self._kernel = None
        self._kernel_cho = None
        self._moment_matrix = None

    @property
    def n_sensors(self) -> int:
        return len(self.points)

    # -- cached network-level factorizations --------------------------------

    def kernel_cho(self):
        """Cholesky factorization of the Wendland kernel matrix."""
        if self._kernel_cho is None:
            r0 = self.method.rho * self.h
            lx, ly = self.domain
            if r0 > min(lx, ly) / 2 + 1e-12:
                raise ValueError(
                    f"support radius rho*h = {r0:.4g} exceeds half the domain; "
                    "reduce rho or add sensors"
                )
            dists = _torus_distances(self.points, self.points, lx, ly)
            kernel = _wendland_c2(dists / r0)
            try:
                self._kernel_cho = scipy.linalg.cho_factor(kernel, lower=True)
            except scipy.linalg.LinAlgError as exc:
                raise ValueError(
                    "RBF kernel system is singular; sensor locations may be "
                    "duplicated or nearly so"
                ) from exc
            self._kernel = kernel
        return self._kernel_cho

    def moment_matrix(self) -> np.ndarray:
        """Map sensor values -> spline second-derivative moments (cyclic system)."""
        if self._moment_matrix is None:
            order = np.argsort(self.points)
            xs = self.points[order]
            n = xs.size
            if n < 3:
                raise ValueError("periodic cubic spline needs at least 3 sensors")
            gaps = np.diff(np.append(xs, xs[0] + self.domain))
            lhs = np.zeros((n, n))
            rhs = np.zeros((n, n))
            for i in range(n):
                im, ip = (i - 1) % n, (i + 1) % n
                lhs[i, im] += gaps[im] / 6.0
                lhs[i, i] += (gaps[im] + gaps[i]) / 3.0
                lhs[i, ip] += gaps[i] / 6.0
                rhs[i, ip] += 1.0 / gaps[i]
                rhs[i, i] -= 1.0 / gaps[i] + 1.0 / gaps[im]
                rhs[i, im] += 1.0 / gaps[im]
            sorted_moments = np.linalg.solve(lhs, rhs)
            # rows/columns back to the caller's sensor ordering
            mm = np.zeros((n, n))
            mm[:, order] = sorted_moments
            inv = np.empty(n, dtype=int)
            inv[order] = np.arange(n)
            self._moment_matrix = mm[inv]
        return self._moment_matrix

    def operator_for(self, grid: Grid):
        """Grid-specific sampling/evaluation maps, built once and cached."""
        if grid not in self._maps:
            if self.ndim == 1:
                if not isinstance(grid, Grid1D) or grid.length != self.domain:
                    raise ValueError("grid does not match the network domain")
                self._maps[grid] = _Maps1D(self, grid)
            else:
                if not isinstance(grid, Grid2D) or (grid.lx, grid.ly) != self.domain:
                    raise ValueError("grid does not match the network domain")
                self._maps[grid] = _MapsRbf(self, grid)
        return self._maps[grid]


class _Maps1D:
    """Sampling and evaluation matrices for the 1D methods."""

    def __init__(self, net: ObservationNetwork, grid: Grid1D):
        self.grid = grid
        self.sample_matrix = _linear_sampling_matrix_1d(net.points, grid)
        xg = grid.nodes()
        if isinstance(net.method, Linear):
            self.eval_matrix = _linear_eval_matrix(net.points, net.domain, xg)
            self.eval_d1 = None
            self.eval_d2 = None
        else:
            e, e1, e2 = _spline_eval_matrices(net, xg)
            self.eval_matrix, self.eval_d1, self.eval_d2 = e, e1, e2

    def sample(self, values: np.ndarray) -> np.ndarray:
        return self.sample_matrix @ values

    def evaluate(self, sensor_values: np.ndarray) -> np.ndarray:
        return self.eval_matrix @ sensor_values


class _MapsRbf:
    """Bilinear sampling plus the sparse Wendland evaluation map."""

    def __init__(self, net: ObservationNetwork, grid: Grid2D):
        self.grid = grid
        self.net = net
        self.sample_matrix = _bilinear_sampling_matrix(net.points, grid)
        self.phi = _wendland_grid_matrix(net, grid)

    def sample(self, values: np.ndarray) -> np.ndarray:
        return self.sample_matrix @ values.reshape(-1)

    def evaluate(self, sensor_values: np.ndarray) -> np.ndarray:
        weights = _rbf_weights(self.net, sensor_values)
        return (self.phi @ weights).reshape(self.grid.shape)

    def evaluate_weights(self, weights: np.ndarray) -> np.ndarray:
        return (self.phi @ weights).reshape(self.grid.shape)

    def evaluate_many(self, sensor_values: np.ndarray) -> np.ndarray:
        """Columns of (Ns, m) -> stacked (m, nx, ny) fields, one factorized
        solve and one sparse product for all columns. Single-solve accuracy
        (~1e-10 relative) is ample inside the time-stepping loop."""
        weights = scipy.linalg.cho_solve(self.net.kernel_cho(), sensor_values)
        fields = self.phi @ weights  # (n_grid, m)
        return np.ascontiguousarray(fields.T).reshape(
            (-1, self.grid.nx, self.grid.ny)
        )


def _linear_sampling_matrix_1d(points: np.ndarray, grid: Grid1D):
    n = grid.n
    pos = points / grid.dx
    i0 = np.floor(pos).astype(int) % n
    w = pos - np.floor(pos)
    rows = np.repeat(np.arange(points.size), 2)
    cols = np.stack([i0, (i0 + 1) % n], axis=1).ravel()
    data = np.stack([1.0 - w, w], axis=1).ravel()
    return scipy.sparse.csr_matrix((data, (rows, cols)), shape=(points.size, n))


def _bilinear_sampling_matrix(points: np.ndarray, grid: Grid2D):
    nx, ny = grid.nx, grid.ny
    px = points[:, 0] / grid.dx
    py = points[:, 1] / grid.dy
    ix = np.floor(px).astype(int) % nx
    iy = np.floor(py).astype(int) % ny
    wx = px - np.floor(px)
    wy = py - np.floor(py)
    ixp = (ix + 1) % nx
    iyp = (iy + 1) % ny
    rows = np.repeat(np.arange(points.shape[0]), 4)
    cols = np.stack([
        ix * ny + iy, ix * ny + iyp, ixp * ny + iy, ixp * ny + iyp,
    ], axis=1).ravel()
    data = np.stack([
        (1 - wx) * (1 - wy), (1 - wx) * wy, wx * (1 - wy), wx * wy,
    ], axis=1).ravel()
    return scipy.sparse.csr_matrix(
        (data, (rows, cols)), shape=(points.shape[0], nx * ny)
    )


def _bracket_1d(xs_sorted: np.ndarray, length: float, xg: np.ndarray):
    """For each grid point: enclosing sensor interval (cyclic) and offsets."""
    n = xs_sorted.size
    idx = np.searchsorted(xs_sorted, xg, side="right") - 1
    idx[idx < 0] = n - 1
    gaps = np.diff(np.append(xs_sorted, xs_sorted[0] + length))
    left = (xg - xs_sorted[idx]) % length
    return idx, gaps, left


def _linear_eval_matrix(points: np.ndarray, length: float, xg: np.ndarray) -> np.ndarray:
    order = np.argsort(points)
    xs = points[order]
    n = xs.size
    if n == 1:
        return np.ones((xg.size, 1))
    idx, gaps, left = _bracket_1d(xs, length, xg)
    w = left / gaps[idx]
    e_sorted = np.zeros((xg.size, n))
    rows = np.arange(xg.size)
    np.add.at(e_sorted, (rows, idx), 1.0 - w)
    np.add.at(e_sorted, (rows, (idx + 1) % n), w)
    e = np.zeros_like(e_sorted)
    e[:, order] = e_sorted
    return e


def _spline_eval_matrices(net: ObservationNetwork, xg: np.ndarray):
    """Dense maps sensor values -> spline value / d1 / d2 on the grid nodes.

    On interval [x_i, x_{i+1}] with moments M (second derivatives at knots):
      s  = M_i r^3/(6g) + M_{i+1} l^3/(6g) + (y_i - M_i g^2/6) r/g
           + (y_{i+1} - M_{i+1} g^2/6) l/g
    where l, r are distances to the left/right knot and g the gap.
    """
    moment = net.moment_matrix()
    order = np.argsort(net.points)
    xs = net.points[order]
    n = xs.size
    moment_sorted = moment[order]
    idx, gaps, left = _bracket_1d(xs, net.domain, xg)
    g = gaps[idx]
    right = g - left
    ip = (idx + 1) % n
    m = xg.size
    rows = np.arange(m)

    # direct y couplings act on sorted values; map columns back to the
    # caller's ordering before adding the moment contributions (the moment
    # matrix already takes values in the original order)
    e_y = np.zeros((m, n))
    np.add.at(e_y, (rows, idx), right / g)
    np.add.at(e_y, (rows, ip), left / g)
    e_y_un = np.zeros_like(e_y)
    e_y_un[:, order] = e_y
    cm_i = right**3 / (6 * g) - g * right / 6
    cm_ip = left**3 / (6 * g) - g * left / 6
    e = e_y_un + cm_i[:, None] * moment_sorted[idx] + cm_ip[:, None] * moment_sorted[ip]

    e1_y = np.zeros((m, n))
    np.add.at(e1_y, (rows, ip), 1.0 / g)
    np.add.at(e1_y, (rows, idx), -1.0 / g)
    e1_y_un = np.zeros_like(e1_y)
    e1_y_un[:, order] = e1_y
    c1_i = -(right**2) / (2 * g) + g / 6
    c1_ip = left**2 / (2 * g) - g / 6
    e1 = e1_y_un + c1_i[:, None] * moment_sorted[idx] + c1_ip[:, None] * moment_sorted[ip]

    e2 = (right / g)[:, None] * moment_sorted[idx] + (left / g)[:, None] * moment_sorted[ip]
    return e, e1, e2


def _wendland_grid_matrix(net: ObservationNetwork, grid: Grid2D):
    """Sparse (n_grid, Ns) matrix of kernel values phi(|x_g - x_s| / r0)."""
    r0 = net.method.rho * net.h
    lx, ly = net.domain
    X, Y = grid.nodes()
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    chunks = []
    chunk_rows = max(1, int(2**21 // max(net.n_sensors, 1)))
    for start in range(0, nodes.shape[0], chunk_rows):
        block = nodes[start:start + chunk_rows]
        d = _torus_distances(block, net.points, lx, ly)
        q = d / r0
        inside = q < 1.0
        r, c = np.nonzero(inside)
        vals = _wendland_c2(q[r, c])
        chunks.append((r + start, c, vals))
    rows = np.concatenate([c[0] for c in chunks])
    cols = np.concatenate([c[1] for c in chunks])
    data = np.concatenate([c[2] for c in chunks])
    return scipy.sparse.csr_matrix(
        (data, (rows, cols)), shape=(nodes.shape[0], net.n_sensors)
    )


def _rbf_weights(net: ObservationNetwork, values: np.ndarray) -> np.ndarray:
    """Solve the kernel system, with one iterative-refinement pass."""
    cho = net.kernel_cho()
    w = scipy.linalg.cho_solve(cho, values)
    return w + scipy.linalg.cho_solve(cho, values - net._kernel @ w)


@dataclass(frozen=True, eq=False)
class Interpolant:
    """Interpolant built from one vector of sensor values.

    coefficients are spline moments, RBF weights, or (for linear
    interpolation) the values themselves. Evaluation on a grid reuses the
    network's cached maps, so it is a single matrix-vector product.
    """

    network: ObservationNetwork
    values: np.ndarray
    coefficients: np.ndarray


def sample_at(f: Field, network: ObservationNetwork) -> np.ndarray:
    """Field value at each sensor; off-node sensors use periodic (bi)linear
    interpolation of the grid values, keeping the map linear in the field."""
    return network.operator_for(f.grid).sample(f.values)


def build_interpolant(network: ObservationNetwork, values) -> Interpolant:
    values = np.asarray(values, dtype=float)
    if values.shape != (network.n_sensors,):
        raise ValueError(
            f"expected {network.n_sensors} sensor values, got shape {values.shape}"
        )
    method = network.method
    if isinstance(method, Linear):
        coeff = values.copy()
    elif isinstance(method, CubicSplinePeriodic):
        coeff = network.moment_matrix() @ values
    else:
        coeff = _rbf_weights(network, values)
    return Interpolant(network, values.copy(), coeff)


def evaluate_on_grid(itp: Interpolant, grid: Grid) -> Field:
    maps = itp.network.operator_for(grid)
    if isinstance(maps, _MapsRbf):
        return Field(grid, maps.evaluate_weights(itp.coefficients))
    return Field(grid, maps.evaluate(itp.values))


def interpolated_discrepancy(
    obs_values, v: Field, network: ObservationNetwork
) -> Field:
    """Grid field of the interpolant of (observed - modeled) sensor values.

    By linearity of the interpolation this equals interp(u samples) minus
    interp(v samples).
    """
    delta = np.asarray(obs_values, dtype=float) - sample_at(v, network)
    return evaluate_on_grid(build_interpolant(network, delta), v.grid)


# ---------------------------------------------------------------------------
# sensor placement


def _radical_inverse(base: int, index: int) -> float:
    inv = 0.0
    f = 1.0 / base
    while index > 0:
        inv += f * (index % base)
        index //= base
        f /= base
    return inv


def halton_points_2d(n: int, domain) -> np.ndarray:
    """First n Halton points (bases 2 and 3, starting at index 1) scaled to
    [0, lx) x [0, ly). Deterministic, quasi-uniform coverage."""
    if n < 1:
        raise ValueError("need at least one point")
    lx, ly = float(domain[0]), float(domain[1])
    pts = np.empty((n, 2))
    for i in range(n):
        pts[i, 0] = lx * _radical_inverse(2, i + 1)
        pts[i, 1] = ly * _radical_inverse(3, i + 1)
    return pts


def equispaced_points_1d(n: int, length: float) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one point")
    return np.arange(n) * (length / n)


# ---------------------------------------------------------------------------
# diagnostics


def _grad_fields(f: Field) -> List[Field]:
    if isinstance(f.grid, Grid1D):
        return [diff_periodic(f, 1, "spectral")]
    return list(gradient_2d(f))


def coercivity_diagnostic(f: Field, network: ObservationNetwork) -> dict:
    """Ingredients of the interpolation inner-product lower bound.

    Returns <f~, f>, ||f||^2 and ||grad f||^2 so the caller can check
    inner >= alpha ||f||^2 - (C^2 h^2 / 2) ||grad f||^2 with alpha = 1/2.
    """
    f_tilde = evaluate_on_grid(build_interpolant(network, sample_at(f, network)), f.grid)
    inner = l2_inner(f_tilde, f)
    norm2 = l2_norm(f) ** 2
    grad_norm2 = sum(l2_norm(g) ** 2 for g in _grad_fields(f))
    return {"inner": inner, "norm2": norm2, "grad_norm2": grad_norm2}


def kappa_alignment(f: Field, network: ObservationNetwork) -> float:
    """H1 alignment <grad f~, grad f> / ||grad f~||^2 with discrete gradients.

    Measures how much of the artificial-diffusion term acting on the
    interpolated field dissipates the true field's gradient energy.
    """
    f_tilde = evaluate_on_grid(build_interpolant(network, sample_at(f, network)), f.grid)
    gt = _grad_fields(f_tilde)
    gf = _grad_fields(f)
    denom = sum(l2_norm(g) ** 2 for g in gt)
    if denom <= 1e-20 * max(l2_norm(f_tilde) ** 2, 1e-300):
        raise ValueError("interpolant has zero gradient; kappa is undefined")
    num = sum(l2_inner(a, b) for a, b in zip(gt, gf))
    return num / denom


def _probe_fields_1d(grid: Grid1D) -> List[Field]:
    x = grid.nodes()
    w = 2.0 * np.pi / grid.length
    probes = []
    for k in range(1, 9):
        probes.append(Field(grid, np.sin(k * w * x)))
        probes.append(Field(grid, np.cos(k * w * x)))
    for k in range(1, 5):
        for m in range(1, 5):
            probes.append(Field(grid, np.sin(k * w * x) * np.cos(m * w * x)))
    return probes


def _probe_fields_2d(grid: Grid2D) -> List[Field]:
    X, Y = grid.nodes()
    wx = 2.0 * np.pi / grid.lx
    wy = 2.0 * np.pi / grid.ly
    probes = []
    for k in range(1, 3):
        for m in range(1, 3):
            probes.append(Field(grid, np.sin(k * wx * X) * np.sin(m * wy * Y)))
            probes.append(Field(grid, np.sin(k * wx * X) * np.cos(m * wy * Y)))
            probes.append(Field(grid, np.cos(k * wx * X) * np.cos(m * wy * Y)))
    return probes


def estimate_interp_constant(
    method: InterpolationMethod, domain, h_values: Sequence[float]
) -> float:
    """Empirical constant in ||f - f~|| <= C h ||grad f||.

    Sweeps a fixed basis of smooth probe fields over networks at the given
    spacings and returns the worst observed ratio. Zero-gradient probes are
    excluded by construction.
    """
    h_values = list(h_values)
    if len(h_values) < 2:
        raise ValueError("need at least two spacing values")
    worst = 0.0
    if isinstance(method, RbfWendlandC2):
        lx, ly = float(domain[0]), float(domain[1])
        grid = Grid2D(64, 64, lx, ly)
        probes = _probe_fields_2d(grid)
        for h in h_values:
            ns = max(4, int(round((lx / h) ** 2)))
            net = ObservationNetwork(halton_points_2d(ns, (lx, ly)), method, (lx, ly))
            worst = max(worst, _probe_ratio(net, probes))
    else:
        length = float(domain)
        grid = Grid1D(1024, length)
        probes = _probe_fields_1d(grid)
        for h in h_values:
            ns = max(3, int(round(length / h)))
            net = ObservationNetwork(equispaced_points_1d(ns, length), method, length)
            worst = max(worst, _probe_ratio(net, probes))
    return worst


def _probe_ratio(net: ObservationNetwork, probes: List[Field]) -> float:
    worst = 0.0
    for f in probes:
        f_tilde = evaluate_on_grid(
            build_interpolant(net, sample_at(f, net)), f.grid
        )
        grad = np.sqrt(sum(l2_norm(g) ** 2 for g in _grad_fields(f)))
        if grad < 1e-12:
            continue
        err = l2_norm(Field(f.grid, f.values - f_tilde.values))
        worst = max(worst, err / (net.h * grad))
    return worst


# ---------------------------------------------------------------------------
# JSON wire format


_METHOD_NAMES = {"linear": Linear, "spline": CubicSplinePeriodic, "rbf": RbfWendlandC2}


def network_to_json(net: ObservationNetwork) -> dict:
    pts = net.points.reshape(net.n_sensors, -1).tolist()
    obj = {"points": pts, "method": net.method.name}
    if isinstance(net.method, RbfWendlandC2):
        obj["rho"] = net.method.rho
    return obj


def network_from_json(obj: dict, domain) -> ObservationNetwork:
    name = obj["method"]
    if name not in _METHOD_NAMES:
        raise ValueError(f"unknown interpolation method {name!r}")
    if name == "rbf":
        method = RbfWendlandC2(rho=float(obj.get("rho", 5.0)))
    else:
        method = _METHOD_NAMES[name]()
    pts = np.asarray(obj["points"], dtype=float)
    if pts.ndim == 2 and pts.shape[1] == 1:
        pts = pts[:, 0]
    return ObservationNetwork(pts, method, domain)

"""Discrete norms and periodic derivative operators.

All operators assume periodic boundary conditions. Spectral differentiation
multiplies the real-to-complex transform by (i k)^order; finite differences
use the standard second-order central stencils. Wavenumber arrays are cached
per grid since the grids are immutable.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .grids import Field, Grid1D, Grid2D


def l2_norm(f: Field) -> float:
    """Discrete L2 norm, sqrt(dx * sum f_i^2) in 1D and the dx*dy analogue in 2D."""
    return float(np.sqrt(f.grid.cell_volume * np.sum(f.values**2)))


def l2_inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product of two fields on the same grid."""
    if f.grid != g.grid:
        raise ValueError("inner product requires fields on the same grid")
    return float(f.grid.cell_volume * np.sum(f.values * g.values))


def array_l2(values: np.ndarray, cell_volume: float) -> float:
    """L2 norm of raw values; hot-path variant without Field construction."""
    return float(np.sqrt(cell_volume * np.sum(values**2)))


# ---------------------------------------------------------------------------
# cached wavenumber layouts


@lru_cache(maxsize=None)
def spectral_1d(grid: Grid1D):
    """Return (k, ik_odd) for the half-spectrum rfft layout.

    ik_odd has the Nyquist mode zeroed, as required for odd-order derivatives
    of real fields.
    """
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.n, d=grid.dx)
    ik_odd = 1j * k
    if grid.n % 2 == 0:
        ik_odd[-1] = 0.0
    return k, ik_odd


@lru_cache(maxsize=None)
def spectral_2d(grid: Grid2D):
    """Broadcastable wavenumbers for rfft2 fields of shape (nx, ny//2+1).

    Returns (kx, ky, ksq, inv_ksq, ikx_odd, iky_odd) where inv_ksq has the
    zero mode set to 0 (used by the Poisson solve, which fixes mean(psi)=0)
    and the *_odd multipliers have Nyquist modes zeroed.
    """
    kx = 2.0 * np.pi * np.fft.fftfreq(grid.nx, d=grid.dx)[:, None]
    ky = 2.0 * np.pi * np.fft.rfftfreq(grid.ny, d=grid.dy)[None, :]
    ksq = kx**2 + ky**2
    inv_ksq = np.zeros_like(ksq)
    nonzero = ksq > 0
    inv_ksq[nonzero] = 1.0 / ksq[nonzero]
    ikx_odd = 1j * kx * np.ones_like(ky)
    iky_odd = 1j * ky * np.ones_like(kx)
    if grid.nx % 2 == 0:
        ikx_odd[grid.nx // 2, :] = 0.0
    if grid.ny % 2 == 0:
        iky_odd[:, -1] = 0.0
    return kx, ky, ksq, inv_ksq, ikx_odd, iky_odd


# ---------------------------------------------------------------------------
# 1D derivatives


def _fd_derivative(values: np.ndarray, order: int, dx: float) -> np.ndarray:
    up1 = np.roll(values, -1)
    um1 = np.roll(values, 1)
    if order == 1:
        return (up1 - um1) / (2.0 * dx)
    if order == 2:
        return (up1 - 2.0 * values + um1) / dx**2
    if order == 4:
        up2 = np.roll(values, -2)
        um2 = np.roll(values, 2)
        return (up2 - 4.0 * up1 + 6.0 * values - 4.0 * um1 + um2) / dx**4
    raise ValueError(f"unsupported derivative order {order}; expected 1, 2 or 4")


def _spectral_derivative(values: np.ndarray, order: int, grid: Grid1D) -> np.ndarray:
    k, ik_odd = spectral_1d(grid)
    fhat = np.fft.rfft(values)
    if order == 1:
        fhat = ik_odd * fhat
    elif order == 2:
        fhat = -(k**2) * fhat
    elif order == 4:
        fhat = k**4 * fhat
    else:
        raise ValueError(f"unsupported derivative order {order}; expected 1, 2 or 4")
    return np.fft.irfft(fhat, n=grid.n)


def diff_periodic(f: Field, order: int, scheme: str = "central-fd") -> Field:
    """Periodic derivative of a 1D field.

    scheme is "central-fd" (second-order stencils) or "spectral". Spectral
    differentiation is exact for band-limited fields below the Nyquist mode.
    """
    if not isinstance(f.grid, Grid1D):
        raise TypeError("diff_periodic works on 1D fields; use the 2D helpers instead")
    if scheme == "central-fd":
        out = _fd_derivative(f.values, order, f.grid.dx)
    elif scheme == "spectral":
        out = _spectral_derivative(f.values, order, f.grid)
    else:
        raise ValueError(f"unknown differentiation scheme {scheme!r}")
    return Field(f.grid, out)


# ---------------------------------------------------------------------------
# 2D spectral operators


def _require_2d(f: Field) -> Grid2D:
    if not isinstance(f.grid, Grid2D):
        raise TypeError("expected a field on a 2D grid")
    return f.grid


def gradient_2d(f: Field) -> tuple:
    """Spectral gradient (df/dx, df/dy) of a 2D field."""
    grid = _require_2d(f)
    _, _, _, _, ikx, iky = spectral_2d(grid)
    fhat = np.fft.rfft2(f.values)
    fx = np.fft.irfft2(ikx * fhat, s=grid.shape)
    fy = np.fft.irfft2(iky * fhat, s=grid.shape)
    return Field(grid, fx), Field(grid, fy)


def laplacian_2d(f: Field) -> Field:
    grid = _require_2d(f)
    _, _, ksq, _, _, _ = spectral_2d(grid)
    fhat = np.fft.rfft2(f.values)
    return Field(grid, np.fft.irfft2(-ksq * fhat, s=grid.shape))


def divergence_2d(u: Field, v: Field) -> Field:
    """Spectral divergence du/dx + dv/dy of a 2D vector field."""
    grid = _require_2d(u)
    _, _, _, _, ikx, iky = spectral_2d(grid)
    div_hat = ikx * np.fft.rfft2(u.values) + iky * np.fft.rfft2(v.values)
    return Field(grid, np.fft.irfft2(div_hat, s=grid.shape))


def poisson_solve_2d(omega: Field) -> Field:
    """Solve -lap(psi) = omega - mean(omega) spectrally; returns mean-zero psi.

    On a periodic torus the problem is only solvable modulo constants, so the
    zero wavenumber of the right-hand side is projected out and psi is pinned
    to zero mean.
    """
    grid = _require_2d(omega)
    _, _, _, inv_ksq, _, _ = spectral_2d(grid)
    what = np.fft.rfft2(omega.values)
    psi_hat = what * inv_ksq
    return Field(grid, np.fft.irfft2(psi_hat, s=grid.shape))


def velocity_from_streamfunction(psi: Field) -> tuple:
    """Velocity (u, v) = (dpsi/dy, -dpsi/dx); discretely divergence-free."""
    grid = _require_2d(psi)
    _, _, _, _, ikx, iky = spectral_2d(grid)
    psi_hat = np.fft.rfft2(psi.values)
    u = np.fft.irfft2(iky * psi_hat, s=grid.shape)
    v = np.fft.irfft2(-ikx * psi_hat, s=grid.shape)
    return Field(grid, u), Field(grid, v)

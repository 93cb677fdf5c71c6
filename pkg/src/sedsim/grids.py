"""Shared grid numerics: derivatives, quadrature, masks.

Spectral derivatives assume the sampled function either decays below
roundoff at the grid ends or is genuinely periodic; finite-difference
stencils are used where a field grows (phases, log-densities near tails).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray


class MaskedField(NamedTuple):
    """Grid field with validity mask (True where the value is meaningful)."""

    values: NDArray[np.float64]
    mask: NDArray[np.bool_]


class BoundaryDecayError(ValueError):
    """Raised when a spectral operation needs boundary decay it does not have."""


def uniform_spacing(x: NDArray[np.float64]) -> float:
    """Spacing of a uniform grid; raises if the grid is not uniform."""
    dx = np.diff(x)
    if dx.size == 0 or not np.allclose(dx, dx[0], rtol=1e-12, atol=0.0):
        raise ValueError("grid must be uniform")
    if dx[0] <= 0:
        raise ValueError("grid must be increasing")
    return float(dx[0])


def check_boundary_decay(f: NDArray[np.float64], rel: float = 1e-8) -> None:
    scale = np.max(np.abs(f))
    if scale == 0.0:
        return
    edge = max(abs(f[0]), abs(f[-1]))
    if edge > rel * scale:
        raise BoundaryDecayError(
            f"boundary value {edge:.3e} exceeds {rel:.1e} of peak {scale:.3e}; "
            "enlarge the domain or use a periodic/FD route"
        )


def spectral_derivative(f: NDArray, dx: float, order: int = 1) -> NDArray:
    """FFT derivative treating the grid as one period of a periodic signal."""
    n = f.shape[-1]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    fk = np.fft.fft(f)
    out = np.fft.ifft(fk * (1j * k) ** order)
    if np.isrealobj(f):
        return out.real
    return out


def fd1_central(f: NDArray[np.float64], dx: float) -> NDArray[np.float64]:
    """Second-order first derivative, one-sided at the ends."""
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dx)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dx)
    return out


def fd2_central(f: NDArray[np.float64], dx: float) -> NDArray[np.float64]:
    """Second-order second derivative, one-sided at the ends."""
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (dx * dx)
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (dx * dx)
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (dx * dx)
    return out


def fd1_order4(f: NDArray[np.float64], dx: float) -> NDArray[np.float64]:
    """Fourth-order centered first derivative, second-order one-sided ends."""
    out = np.empty_like(f)
    c = 1.0 / (12.0 * dx)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) * c
    out[1] = (f[2] - f[0]) / (2.0 * dx)
    out[-2] = (f[-1] - f[-3]) / (2.0 * dx)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dx)
    return out


def fd2_order4(f: NDArray[np.float64], dx: float) -> NDArray[np.float64]:
    """Fourth-order centered second derivative, second-order one-sided ends."""
    out = np.empty_like(f)
    c = 1.0 / (12.0 * dx * dx)
    out[2:-2] = (
        -f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]
    ) * c
    out[1] = (f[0] - 2.0 * f[1] + f[2]) / (dx * dx)
    out[-2] = (f[-3] - 2.0 * f[-2] + f[-1]) / (dx * dx)
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (dx * dx)
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (dx * dx)
    return out


def fd1_periodic4(f: NDArray[np.float64], dx: float) -> NDArray[np.float64]:
    """Fourth-order first derivative on a periodic grid (endpoint excluded)."""
    c = 1.0 / (12.0 * dx)
    return (
        np.roll(f, 2) - 8.0 * np.roll(f, 1) + 8.0 * np.roll(f, -1) - np.roll(f, -2)
    ) * c


def fd2_periodic4(f: NDArray[np.float64], dx: float) -> NDArray[np.float64]:
    """Fourth-order second derivative on a periodic grid (endpoint excluded)."""
    c = 1.0 / (12.0 * dx * dx)
    return (
        -np.roll(f, 2)
        + 16.0 * np.roll(f, 1)
        - 30.0 * f
        + 16.0 * np.roll(f, -1)
        - np.roll(f, -2)
    ) * c


def log_density_curvature(
    rho: NDArray[np.float64],
    dx: float,
    mask: NDArray[np.bool_] | None = None,
    order: int = 2,
) -> NDArray[np.float64]:
    """d^2 ln rho / dx^2 by direct differencing of ln rho on the mask.

    ln rho grows quadratically in the tails, so spectral differentiation is
    not applicable; centered differences are used, one-sided at mask edges
    (the mask is assumed to be a single contiguous run).
    """
    if mask is None:
        mask = np.ones(rho.shape, dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size < 5:
        raise ValueError("mask too small for curvature stencil")
    if not np.all(np.diff(idx) == 1):
        raise ValueError("mask must be contiguous")
    logr = np.log(rho[idx])
    d2 = fd2_order4(logr, dx) if order == 4 else fd2_central(logr, dx)
    out = np.full(rho.shape, np.nan)
    out[idx] = d2
    return out


def trapezoid_2d(values: NDArray[np.float64], x: NDArray, y: NDArray) -> float:
    return float(np.trapezoid(np.trapezoid(values, y, axis=1), x))


def support_mask(rho: NDArray[np.float64], rel: float = 1e-3) -> NDArray[np.bool_]:
    return rho > rel * np.max(rho)


def contiguous_runs(mask: NDArray[np.bool_]) -> list[slice]:
    """Maximal runs of consecutive True entries, as slices."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([0], breaks + 1))
    stops = np.concatenate((breaks + 1, [idx.size]))
    return [slice(idx[a], idx[b - 1] + 1) for a, b in zip(starts, stops)]

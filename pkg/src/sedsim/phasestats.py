"""Phase-space statistics of trajectory ensembles.

Estimates the reduced phase-space density Q(x, p) from samples, computes its
partial characteristic transform Q~(x, z) = int Q e^{ipz} dp, the local
momentum moments <p>_x and <p^2>_x, and the residuals of the relations the
wave construction rests on:

    dispersion:   sigma_p^2(x) = -beta^2 d^2 ln rho / dx^2
    transport:    d rho/dt + (1/m) d(<p>_x rho)/dx = 0
                  d(<p>_x rho)/dt + (1/m) d(<p^2>_x rho)/dx = f(x) rho

The KDE estimator smooths a binned histogram with a Gaussian kernel of
Silverman bandwidth h = sigma n^(-1/6) per axis, which inflates conditional
p-variances by bandwidth_p^2 + dp^2/12; the meta dict carries both numbers so
consumers can subtract (see dispersion_identity_residual's smoothing_var).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import binary_erosion, gaussian_filter

from .grids import (
    check_boundary_decay,
    contiguous_runs,
    fd1_order4,
    fd1_periodic4,
    fd2_order4,
    fd2_periodic4,
    log_density_curvature,
    uniform_spacing,
)
from .params import PhysicalParams, Potential

SUPPORT_REL = 1e-3


class GridCoverageError(ValueError):
    """Samples fall outside the requested phase-space grid."""


@dataclass(frozen=True)
class PhaseDensity:
    """Nonnegative density on a rectangular (x, p) grid, trapezoid-normalized.

    values[i, j] is the density at (x[i], p[j]); the trapezoidal integral
    over the grid is 1 to within roundoff of the normalization division.
    """

    x: NDArray[np.float64]
    p: NDArray[np.float64]
    values: NDArray[np.float64]
    meta: dict

    @property
    def dx(self) -> float:
        return uniform_spacing(self.x)

    @property
    def dp(self) -> float:
        return uniform_spacing(self.p)


@dataclass(frozen=True)
class CharacteristicGrid:
    """Partial transform Q~(x, z) = int Q(x, p) e^{ipz} dp on an (x, z) grid."""

    x: NDArray[np.float64]
    z: NDArray[np.float64]
    values: NDArray[np.complex128]


@dataclass(frozen=True)
class LocalMoments:
    """Conditional momentum moments on the x grid.

    mean_p, second_p, var_p are NaN off the support mask (rho below the
    support threshold), and var_p is clipped at zero against roundoff.
    """

    x: NDArray[np.float64]
    rho: NDArray[np.float64]
    mean_p: NDArray[np.float64]
    second_p: NDArray[np.float64]
    var_p: NDArray[np.float64]
    mask: NDArray[np.bool_]


def density_from_grid(x, p, values, meta: dict | None = None) -> PhaseDensity:
    """Wrap an explicit nonnegative grid of values as a normalized density."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (x.size, p.size):
        raise ValueError("values must have shape (len(x), len(p))")
    if np.any(values < 0.0):
        raise ValueError("density values must be nonnegative")
    norm = float(np.trapezoid(np.trapezoid(values, p, axis=1), x))
    if norm <= 0.0:
        raise ValueError("density has zero mass on the grid")
    base = {"method": "analytic", "n_samples": 0,
            "bin_dx": uniform_spacing(x), "bin_dp": uniform_spacing(p),
            "bandwidth_x": 0.0, "bandwidth_p": 0.0}
    if meta:
        base.update(meta)
    return PhaseDensity(x=x, p=p, values=values / norm, meta=base)


def _silverman_bandwidth(samples: NDArray[np.float64]) -> float:
    # d=2 product-kernel rule: h_j = sigma_j n^(-1/(d+4))
    sd = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
    return max(sd, 1e-12) * samples.size ** (-1.0 / 6.0)


def estimate_density(
    xs,
    ps,
    x_grid,
    p_grid,
    method: str = "histogram",
    coverage_min: float = 0.99,
) -> PhaseDensity:
    """Estimate Q(x, p) from samples on the given uniform grids.

    method "histogram" bins into cells centered on the grid points;
    "kde" additionally smooths with a product Gaussian kernel of Silverman
    bandwidth.  Any sample count >= 1 is accepted; small ensembles are
    flagged through meta["rel_error_scale"] = n^(-1/2) rather than refused.

    Raises GridCoverageError when the grids cover less than coverage_min
    of the samples.
    """
    fx = np.asarray(xs, dtype=float).ravel()
    fp = np.asarray(ps, dtype=float).ravel()
    if fx.shape != fp.shape:
        raise ValueError("xs and ps must have matching shapes")
    n = fx.size
    if n < 1:
        raise ValueError("need at least one sample")
    if method not in ("histogram", "kde"):
        raise ValueError(f"unknown method {method!r}")

    x_grid = np.asarray(x_grid, dtype=float)
    p_grid = np.asarray(p_grid, dtype=float)
    dx = uniform_spacing(x_grid)
    dp = uniform_spacing(p_grid)
    x_edges = np.concatenate(([x_grid[0] - 0.5 * dx], x_grid + 0.5 * dx))
    p_edges = np.concatenate(([p_grid[0] - 0.5 * dp], p_grid + 0.5 * dp))

    inside = (
        (fx >= x_edges[0]) & (fx <= x_edges[-1])
        & (fp >= p_edges[0]) & (fp <= p_edges[-1])
    )
    coverage = float(np.mean(inside))
    if coverage < coverage_min:
        raise GridCoverageError(
            f"grids cover {coverage:.4f} of samples, below {coverage_min:.4f}"
        )

    counts, _, _ = np.histogram2d(fx[inside], fp[inside], bins=(x_edges, p_edges))
    values = counts / (n * dx * dp)

    h_x = 0.0
    h_p = 0.0
    if method == "kde":
        h_x = _silverman_bandwidth(fx)
        h_p = _silverman_bandwidth(fp)
        values = gaussian_filter(values, sigma=(h_x / dx, h_p / dp), mode="constant")

    norm = float(np.trapezoid(np.trapezoid(values, p_grid, axis=1), x_grid))
    if norm <= 0.0:
        raise ValueError("estimated density has zero mass on the grid")
    values = values / norm

    meta = {
        "method": method,
        "n_samples": n,
        "coverage": coverage,
        "bin_dx": dx,
        "bin_dp": dp,
        "bandwidth_x": h_x,
        "bandwidth_p": h_p,
        "rel_error_scale": 1.0 / math.sqrt(n),
    }
    return PhaseDensity(x=x_grid, p=p_grid, values=values, meta=meta)


def marginal_rho(density: PhaseDensity) -> NDArray[np.float64]:
    """Position marginal rho(x) = int Q(x, p) dp by trapezoid quadrature."""
    return np.trapezoid(density.values, density.p, axis=1)


def local_moments(density: PhaseDensity, n_max: int = 2) -> LocalMoments:
    """Conditional moments <p^n>_x = (1/rho) int p^n Q dp for n <= n_max.

    Entries are NaN where rho(x) is at or below the support threshold
    (SUPPORT_REL times its maximum); there the conditional average is
    dominated by a handful of samples and carries no usable information.
    """
    if n_max not in (1, 2):
        raise ValueError("n_max must be 1 or 2")
    p = density.p
    rho = marginal_rho(density)
    mask = rho > SUPPORT_REL * np.max(rho)

    mean_p = np.full(rho.shape, np.nan)
    second_p = np.full(rho.shape, np.nan)
    var_p = np.full(rho.shape, np.nan)

    m1 = np.trapezoid(density.values * p, p, axis=1)
    mean_p[mask] = m1[mask] / rho[mask]
    if n_max == 2:
        m2 = np.trapezoid(density.values * p * p, p, axis=1)
        second_p[mask] = m2[mask] / rho[mask]
        var_p[mask] = np.maximum(second_p[mask] - mean_p[mask] ** 2, 0.0)

    return LocalMoments(
        x=density.x, rho=rho, mean_p=mean_p, second_p=second_p,
        var_p=var_p, mask=mask,
    )


def characteristic_fn(density: PhaseDensity, z) -> CharacteristicGrid:
    """Partial Fourier transform Q~(x, z) = int Q(x, p) e^{ipz} dp.

    The p grid must resolve the requested oscillations:
    max|z| * dp <= pi/4.  The z = 0 column reproduces marginal_rho exactly
    (same quadrature), and Hermitian symmetry Q~*(x, z) = Q~(x, -z) holds
    to roundoff because Q is real.
    """
    z = np.asarray(z, dtype=float)
    p = density.p
    dp = density.dp
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    if zmax * dp > 0.25 * np.pi * (1.0 + 1e-12):
        raise ValueError(
            f"p grid too coarse: max|z|*dp = {zmax * dp:.3f} exceeds pi/4"
        )

    w = np.full(p.shape, dp)
    w[0] = 0.5 * dp
    w[-1] = 0.5 * dp
    kernel = np.exp(1j * np.outer(p, z))
    values = (density.values * w) @ kernel

    at_zero = z == 0.0
    if np.any(at_zero):
        values[:, at_zero] = marginal_rho(density)[:, None]

    return CharacteristicGrid(x=density.x, z=z, values=values)


def conjugate_z_grid(p_grid, n_z: int = 65, fill: float = 1.0) -> NDArray[np.float64]:
    """Symmetric odd-count z grid using `fill` of the pi/4 resolution budget."""
    if n_z < 3 or n_z % 2 == 0:
        raise ValueError("n_z must be odd and >= 3")
    dp = uniform_spacing(np.asarray(p_grid, dtype=float))
    z_max = fill * 0.25 * np.pi / dp
    return np.linspace(-z_max, z_max, n_z)


def moments_from_characteristic(char: CharacteristicGrid) -> LocalMoments:
    """Recover rho, <p>_x, <p^2>_x from derivatives of Q~ at z = 0.

    Uses the innermost centered triple of the z grid, so the recovered
    moments carry an O(dz^2) truncation error; this is the cross-check of
    the moment-generating property, not the production estimator.
    """
    z = char.z
    k0 = int(np.argmin(np.abs(z)))
    if abs(z[k0]) > 1e-12 * max(1.0, float(np.max(np.abs(z)))):
        raise ValueError("z grid must contain 0")
    if k0 == 0 or k0 == z.size - 1:
        raise ValueError("z = 0 needs neighbors on both sides")
    dz_plus = z[k0 + 1] - z[k0]
    dz_minus = z[k0] - z[k0 - 1]
    if not math.isclose(dz_plus, dz_minus, rel_tol=1e-9):
        raise ValueError("z grid must be symmetric about 0 near the origin")
    dz = dz_plus

    q0 = char.values[:, k0]
    qp = char.values[:, k0 + 1]
    qm = char.values[:, k0 - 1]
    rho = q0.real
    mask = rho > SUPPORT_REL * np.max(rho)

    mean_p = np.full(rho.shape, np.nan)
    second_p = np.full(rho.shape, np.nan)
    var_p = np.full(rho.shape, np.nan)
    d1 = (qp - qm) / (2.0 * dz)
    d2 = (qp - 2.0 * q0 + qm) / (dz * dz)
    mean_p[mask] = d1[mask].imag / rho[mask]
    second_p[mask] = -d2[mask].real / rho[mask]
    var_p[mask] = np.maximum(second_p[mask] - mean_p[mask] ** 2, 0.0)

    return LocalMoments(
        x=char.x, rho=rho, mean_p=mean_p, second_p=second_p,
        var_p=var_p, mask=mask,
    )


def dispersion_identity_residual(
    moments: LocalMoments,
    beta: float,
    smoothing_var: float = 0.0,
    order: int = 4,
) -> tuple[NDArray[np.float64], float]:
    """Residual r(x) = sigma_p^2(x) + beta^2 d^2 ln rho / dx^2 and its norm.

    The residual vanishes for densities of pure-state form and stays at
    sigma^2 for a classical uniform-rho ensemble.  smoothing_var is
    subtracted from sigma_p^2 first (pass the estimator's
    bandwidth_p^2 + dp^2/12 when the moments came from a KDE density).
    The norm is the root-mean-square over the valid points.  Node
    neighborhoods split the mask; runs shorter than the stencil are
    dropped from the residual.
    """
    dx = uniform_spacing(moments.x)
    valid = moments.mask & np.isfinite(moments.var_p)
    r = np.full(moments.x.shape, np.nan)
    usable = np.zeros(moments.x.shape, dtype=bool)
    for run in contiguous_runs(valid):
        if run.stop - run.start < 5:
            continue
        run_mask = np.zeros(moments.x.shape, dtype=bool)
        run_mask[run] = True
        curv = log_density_curvature(moments.rho, dx, mask=run_mask, order=order)
        r[run] = (
            moments.var_p[run] - smoothing_var + beta * beta * curv[run]
        )
        usable[run] = True
    if np.count_nonzero(usable) < 5:
        raise ValueError("mask too small for the dispersion residual")
    norm = float(np.sqrt(np.mean(r[usable] ** 2)))
    return r, norm


def hierarchy_residuals(
    series: Sequence[LocalMoments],
    dt: float,
    params: PhysicalParams,
    potential: Potential,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Residuals of the two-moment transport hierarchy on a snapshot series.

    R1 = d rho/dt + (1/m) d(<p>_x rho)/dx
    R2 = d(<p>_x rho)/dt + (1/m) d(<p^2>_x rho)/dx - f(x) rho

    Time derivatives are centered over snapshot triples (the series must be
    uniformly spaced in time with step dt and hold at least 3 slices on one
    common grid); rows of the returned (n_t - 2, n_x) arrays are NaN outside
    the eroded intersection of the triple's support masks.
    """
    if len(series) < 3:
        raise ValueError("need at least 3 time slices")
    x = series[0].x
    for mom in series[1:]:
        if mom.x.shape != x.shape or not np.array_equal(mom.x, x):
            raise ValueError("grid mismatch across slices")
    if dt <= 0:
        raise ValueError("dt must be positive")
    dx = uniform_spacing(x)
    m = params.m
    f = potential.force(x)

    rho = np.stack([mom.rho for mom in series])
    m1 = np.stack([
        np.where(mom.mask, mom.mean_p * mom.rho, 0.0) for mom in series
    ])
    m2 = np.stack([
        np.where(mom.mask, mom.second_p * mom.rho, 0.0) for mom in series
    ])
    masks = np.stack([mom.mask for mom in series])

    n_t = len(series)
    r1 = np.full((n_t - 2, x.size), np.nan)
    r2 = np.full((n_t - 2, x.size), np.nan)
    for k in range(1, n_t - 1):
        valid = binary_erosion(
            masks[k - 1] & masks[k] & masks[k + 1], iterations=2
        )
        drho = (rho[k + 1] - rho[k - 1]) / (2.0 * dt)
        dm1 = (m1[k + 1] - m1[k - 1]) / (2.0 * dt)
        row1 = drho + fd1_order4(m1[k], dx) / m
        row2 = dm1 + fd1_order4(m2[k], dx) / m - f * rho[k]
        r1[k - 1, valid] = row1[valid]
        r2[k - 1, valid] = row2[valid]
    return r1, r2


def avg_momentum_fluctuation(
    rho,
    dx: float,
    beta: float,
    periodic: bool = False,
    decay_rel: float = 1e-6,
) -> tuple[float, float]:
    """Both integral forms of the averaged momentum fluctuation.

    A = -beta^2 int rho (ln rho)'' dx  and  B = beta^2 int rho ((ln rho)')^2 dx
    agree by integration by parts whenever the boundary terms vanish; on a
    box grid that is enforced through the density's boundary decay, on a
    periodic grid it is automatic.  Returns (A, B).
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("rho must be strictly positive on the grid")
    logr = np.log(rho)
    if periodic:
        d1 = fd1_periodic4(logr, dx)
        d2 = fd2_periodic4(logr, dx)
        a = -beta * beta * dx * float(np.sum(rho * d2))
        b = beta * beta * dx * float(np.sum(rho * d1 * d1))
    else:
        check_boundary_decay(rho, rel=decay_rel)
        d1 = fd1_order4(logr, dx)
        d2 = fd2_order4(logr, dx)
        a = -beta * beta * float(np.trapezoid(rho * d2, dx=dx))
        b = beta * beta * float(np.trapezoid(rho * d1 * d1, dx=dx))
    return a, b


def total_variance_split(density: PhaseDensity) -> tuple[float, float, float]:
    """Law-of-total-variance decomposition of Var(p) over the density.

    Returns (total variance, mean of conditional variances, variance of
    conditional means); the first equals the sum of the other two by
    construction, and each term is meaningful on its own.
    """
    x, p, q = density.x, density.p, density.values
    rho = marginal_rho(density)
    m1 = np.trapezoid(q * p, p, axis=1)
    m2 = np.trapezoid(q * p * p, p, axis=1)
    a1 = float(np.trapezoid(m1, x))
    a2 = float(np.trapezoid(m2, x))
    cond = np.where(rho > 1e-300, m1 * m1 / np.where(rho > 1e-300, rho, 1.0), 0.0)
    c = float(np.trapezoid(cond, x))
    total = a2 - a1 * a1
    return total, a2 - c, c - a1 * a1

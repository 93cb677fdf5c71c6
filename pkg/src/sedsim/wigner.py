"""Phase-space transform of wave functions and its ensemble counterpart.

The transform maps psi to a real quasi-density on (x, p),

    W(x, p) = (1 / pi hbar) int psi*(x + y) psi(x - y) e^{+2ipy/hbar} dy,

with hbar = 2 beta; the kernel sign is fixed by requiring the momentum
marginal to match the momentum density of psi (a plane wave e^{ikx}
concentrates at p = hbar k).  Its marginals reproduce the position and momentum
densities, but W itself can dip negative, which is what separates it
from a true phase-space probability.  The same inverse transform applied
to an ensemble-estimated characteristic function stays nonnegative
within estimator noise; both routes share the grids and conventions
here so the contrast is quadrature-free.

The y integral is evaluated on the x lattice itself (y = j dx), so no
interpolation enters the negativity measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .params import PhysicalParams
from .phasestats import CharacteristicGrid
from .schrod import WaveFunction

WALL_REL = 1e-8
NORM_TOL = 1e-6
HERMITIAN_TOL = 1e-8


@dataclass(frozen=True)
class WignerGrid:
    """Real phase-space values w[i, j] at (x[i], p[j]).

    Transform outputs integrate to 1 within 1e-6 (trapezoid in both
    directions) and reproduce the state's marginals; reconstruction
    outputs inherit the estimator's normalization instead.  Values may
    be negative.
    """

    x: NDArray[np.float64]
    p: NDArray[np.float64]
    w: NDArray[np.float64]
    meta: dict = field(default_factory=dict)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    def integral(self) -> float:
        # Riemann cells: exact on periodic rings, equal to trapezoid to
        # roundoff for decayed box states
        return float(self.w.sum()) * self.dx * self.dp


@dataclass(frozen=True)
class NegativityReport:
    """Minimum value, its (x, p) location, and the negative volume."""

    min_value: float
    location: tuple[float, float]
    negative_fraction: float


def _lattice_pair(wf: WaveFunction) -> tuple[NDArray, NDArray]:
    """conj(psi(x+y)) psi(x-y) on the shared lattice, and the y offsets."""
    psi = wf.psi
    n = psi.size
    if wf.periodic:
        jj = np.arange(-(n // 2), (n + 1) // 2)
        idx = np.arange(n)[:, None]
        up = psi[(idx + jj[None, :]) % n]
        dn = psi[(idx - jj[None, :]) % n]
    else:
        peak = float(np.max(np.abs(psi)))
        wall = max(abs(psi[0]), abs(psi[-1]))
        if wall > WALL_REL * peak:
            raise ValueError(
                f"psi at the walls is {wall / peak:.1e} of the peak; the "
                "offset integral needs a decayed (or periodic) state"
            )
        jj = np.arange(-(n - 1), n)
        pad = np.concatenate([np.zeros(n - 1, complex), psi,
                              np.zeros(n - 1, complex)])
        idx = np.arange(n)[:, None] + (n - 1)
        up = pad[idx + jj[None, :]]
        dn = pad[idx - jj[None, :]]
    return np.conj(up) * dn, jj * wf.dx


def conjugate_momenta(n: int, dx: float, hbar: float) -> NDArray[np.float64]:
    """Momentum lattice resolving every distinct offset phase, step
    pi hbar / (2 n dx)."""
    return (np.pi * hbar / (2.0 * n * dx)) * np.arange(-n, n)


def wigner_transform(wf: WaveFunction, params: PhysicalParams,
                     p_grid=None) -> WignerGrid:
    """Offset-correlation transform of psi on the (x, p) lattice.

    p_grid defaults to the conjugate lattice of the y offsets, on which
    the position marginal is exact by the geometric-sum identity.  An
    explicit p_grid must still capture the state: the result is checked
    to integrate to 1 within 1e-6.
    """
    hbar = 2.0 * params.beta
    g, y = _lattice_pair(wf)
    if p_grid is None:
        p_grid = conjugate_momenta(wf.psi.size, wf.dx, hbar)
    else:
        p_grid = np.asarray(p_grid, dtype=float)
    phases = np.exp(2j / hbar * np.outer(y, p_grid))
    w_complex = (wf.dx / (np.pi * hbar)) * (g @ phases)
    max_imag = float(np.max(np.abs(w_complex.imag)))
    out = WignerGrid(
        x=wf.x,
        p=p_grid,
        w=w_complex.real,
        meta={"source": "wavefunction", "t": wf.t, "max_imag": max_imag},
    )
    total = out.integral()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(
            f"transform integrates to {total:.8f}; the p grid does not "
            "capture the state"
        )
    return out


def characteristic_from_wavefunction(wf: WaveFunction,
                                     params: PhysicalParams
                                     ) -> CharacteristicGrid:
    """Offset correlation psi*(x + beta z) psi(x - beta z) as a
    characteristic-function grid (z on the lattice dx / beta).

    This is the pure-state stand-in for an ensemble characteristic
    function; feeding it to inverse_characteristic reproduces
    wigner_transform including any negative regions.
    """
    g, y = _lattice_pair(wf)
    # conj(g) pairs psi* with x - beta z, matching the e^{+ipz} forward
    # convention of characteristic_fn so the e^{-ipz} inverse lands on
    # the transform above
    return CharacteristicGrid(x=wf.x, z=y / params.beta, values=np.conj(g))


def inverse_characteristic(char: CharacteristicGrid, p_grid=None,
                           hermitian_tol: float = HERMITIAN_TOL
                           ) -> WignerGrid:
    """Reconstruct the phase-space density Q(x, p) = (1/2pi) int Q~ e^{-ipz} dz.

    The z grid must be symmetric about 0 and the values Hermitian in z
    within hermitian_tol (true ensemble characteristics are, by realness
    of the underlying density).  Normalization follows the input; for
    estimated characteristics it holds to the estimator noise, not 1e-6.
    """
    z = np.asarray(char.z, dtype=float)
    vals = np.asarray(char.values)
    if z.size < 2 or not np.allclose(z, -z[::-1], atol=1e-12 * np.max(np.abs(z))):
        raise ValueError("z grid must be uniform and symmetric about 0")
    scale = float(np.max(np.abs(vals))) or 1.0
    herm = np.max(np.abs(vals - np.conj(vals[:, ::-1])))
    if herm > hermitian_tol * scale:
        raise ValueError(
            f"characteristic values break Hermitian symmetry at {herm / scale:.1e} "
            f"relative (tolerance {hermitian_tol:.1e})"
        )
    dz = float(z[1] - z[0])
    if p_grid is None:
        m = (z.size + 1) // 2
        p_grid = (2.0 * np.pi / ((z.size + 1) * dz)) * np.arange(-m, m)
    else:
        p_grid = np.asarray(p_grid, dtype=float)
    phases = np.exp(-1j * np.outer(z, p_grid))
    q_complex = (dz / (2.0 * np.pi)) * (vals @ phases)
    return WignerGrid(
        x=np.asarray(char.x, dtype=float),
        p=p_grid,
        w=q_complex.real,
        meta={"source": "inverse-characteristic",
              "max_imag": float(np.max(np.abs(q_complex.imag)))},
    )


def _momentum_density_at(wf: WaveFunction, p_grid, hbar: float
                         ) -> NDArray[np.float64]:
    # direct quadrature of the Fourier amplitude at arbitrary momenta
    phases = np.exp(-1j / hbar * np.outer(np.asarray(p_grid, float), wf.x))
    amp = phases @ wf.psi * wf.dx / np.sqrt(2.0 * np.pi * hbar)
    return np.abs(amp) ** 2


def marginals_check(w: WignerGrid, wf: WaveFunction,
                    params: PhysicalParams) -> tuple[float, float]:
    """L-infinity errors of the two marginals against the state.

    Position: sum_j W dp vs |psi|^2.  Momentum: sum_i W dx vs the
    momentum density of psi evaluated on w.p.  Riemann sums keep the
    single-cell linearity of the position check exact.
    """
    if w.x.shape != wf.x.shape or not np.array_equal(w.x, wf.x):
        raise ValueError("Wigner grid and wave function use different x grids")
    hbar = 2.0 * params.beta
    pos = np.max(np.abs(w.w.sum(axis=1) * w.dp - np.abs(wf.psi) ** 2))
    mom = np.max(np.abs(w.w.sum(axis=0) * w.dx
                        - _momentum_density_at(wf, w.p, hbar)))
    return float(pos), float(mom)


def negativity_report(w: WignerGrid) -> NegativityReport:
    """Minimum value with its location, and int |min(W, 0)| dx dp."""
    i, j = np.unravel_index(np.argmin(w.w), w.w.shape)
    negative = np.minimum(w.w, 0.0)
    fraction = -float(negative.sum()) * w.dx * w.dp
    return NegativityReport(
        min_value=float(w.w[i, j]),
        location=(float(w.x[i]), float(w.p[j])),
        negative_fraction=fraction,
    )


def phase_space_overlap(a: WignerGrid, b: WignerGrid,
                        params: PhysicalParams) -> float:
    """(2 pi hbar) int int a b dx dp; equals |<psi_a|psi_b>|^2 for pure
    states (1 for a = b)."""
    if a.w.shape != b.w.shape:
        raise ValueError("overlap needs matching grids")
    hbar = 2.0 * params.beta
    return float(2.0 * np.pi * hbar * np.sum(a.w * b.w) * a.dx * a.dp)

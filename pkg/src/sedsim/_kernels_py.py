"""NumPy fallback for the hot kernels.

Every floating-point expression here mirrors the Cython twin in
_kernels.pyx term for term (the extension is compiled with
-ffp-contract=off), so the two backends produce bit-identical states.
Do not rearrange arithmetic in one file without changing the other.

Trajectory kernel: classical RK4 for
    dx/dt = p/m
    dp/dt = f(x) + (tau/m) p f'(x) + kappa E(t)
with the field sampled on the half-step grid (column 2s is step time t_s,
column 2s+1 is t_s + dt/2, column 2s+2 is t_{s+1}).

Madelung kernel: one RK4 step of the log-amplitude hydrodynamic system
    R_t = -(2 beta/m) S_x R_x - (beta/m) S_xx
    S_t = -V/(2 beta) - (beta/m) (S_x^2 - (R_xx + R_x^2))
on a uniform grid, fourth-order centered stencils inside, second-order
one-sided at box edges (periodic grids wrap at fourth order).
"""

from __future__ import annotations

import numpy as np

from .grids import fd1_order4, fd2_order4

BACKEND_NAME = "python"


def _acc_free(x, p, tmf, kap, e):
    if e is None:
        return np.zeros_like(x)
    return kap * e


def _acc_harmonic(x, p, c1, d1, kap, e):
    if e is None:
        return -c1 * x - d1 * p
    return -c1 * x - d1 * p + kap * e


def _acc_quartic(x, p, c1, c2, c2_3, tmf, kap, e):
    fx = -c1 * x - c2 * x * x * x
    fp = -c1 - c2_3 * x * x
    if e is None:
        return fx + tmf * p * fp
    return fx + tmf * p * fp + kap * e


def rk4_trajectory_window(x, p, e2, n_steps, dt, m, tau, kappa, kind, c1, c2):
    """Advance (x, p) in place by n_steps; e2 is (n, 2*n_steps+1) or None."""
    im = 1.0 / m
    tmf = tau / m
    hdt = 0.5 * dt
    sixth = dt / 6.0
    d1 = tmf * c1
    c2_3 = 3.0 * c2
    kap = kappa

    if kind == 0:
        acc = lambda xx, pp, ee: _acc_free(xx, pp, tmf, kap, ee)
    elif kind == 1:
        acc = lambda xx, pp, ee: _acc_harmonic(xx, pp, c1, d1, kap, ee)
    elif kind == 2:
        acc = lambda xx, pp, ee: _acc_quartic(xx, pp, c1, c2, c2_3, tmf, kap, ee)
    else:
        raise ValueError("kernel supports kinds 0, 1, 2")

    for s in range(n_steps):
        if e2 is None:
            e0 = eh = e1 = None
        else:
            e0 = e2[:, 2 * s]
            eh = e2[:, 2 * s + 1]
            e1 = e2[:, 2 * s + 2]
        k1x = p * im
        k1p = acc(x, p, e0)
        x2 = x + hdt * k1x
        p2 = p + hdt * k1p
        k2x = p2 * im
        k2p = acc(x2, p2, eh)
        x3 = x + hdt * k2x
        p3 = p + hdt * k2p
        k3x = p3 * im
        k3p = acc(x3, p3, eh)
        x4 = x + dt * k3x
        p4 = p + dt * k3p
        k4x = p4 * im
        k4p = acc(x4, p4, e1)
        x[:] = x + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        p[:] = p + sixth * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)


def rk4_trajectory_window_callables(
    x, p, e2, n_steps, dt, m, tau, kappa, force, fprime
):
    """Same integrator with callable force data (tabulated potentials)."""
    im = 1.0 / m
    tmf = tau / m
    hdt = 0.5 * dt
    sixth = dt / 6.0

    def acc(xx, pp, ee):
        out = force(xx) + tmf * pp * fprime(xx)
        if ee is not None:
            out = out + kappa * ee
        return out

    for s in range(n_steps):
        if e2 is None:
            e0 = eh = e1 = None
        else:
            e0 = e2[:, 2 * s]
            eh = e2[:, 2 * s + 1]
            e1 = e2[:, 2 * s + 2]
        k1x = p * im
        k1p = acc(x, p, e0)
        x2 = x + hdt * k1x
        p2 = p + hdt * k1p
        k2x = p2 * im
        k2p = acc(x2, p2, eh)
        x3 = x + hdt * k2x
        p3 = p + hdt * k2p
        k3x = p3 * im
        k3p = acc(x3, p3, eh)
        x4 = x + dt * k3x
        p4 = p + dt * k3p
        k4x = p4 * im
        k4p = acc(x4, p4, e1)
        x[:] = x + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        p[:] = p + sixth * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)


def _d1_periodic4(f, c):
    return (
        np.roll(f, 2) - 8.0 * np.roll(f, 1) + 8.0 * np.roll(f, -1) - np.roll(f, -2)
    ) * c


def _d2_periodic4(f, c):
    return (
        -np.roll(f, 2)
        + 16.0 * np.roll(f, 1)
        - 30.0 * f
        + 16.0 * np.roll(f, -1)
        - np.roll(f, -2)
    ) * c


def madelung_step(r, s, vv, dt, dx, tbm, bom, periodic):
    """One RK4 step in place.  vv = V/(2 beta) precomputed by the driver."""
    if periodic:
        c1 = 1.0 / (12.0 * dx)
        c2 = 1.0 / (12.0 * dx * dx)

        def rhs(rr, ss):
            sx = _d1_periodic4(ss, c1)
            rx = _d1_periodic4(rr, c1)
            sxx = _d2_periodic4(ss, c2)
            rxx = _d2_periodic4(rr, c2)
            dr = -(tbm * sx * rx) - bom * sxx
            q = rxx + rx * rx
            ds = -vv - bom * (sx * sx - q)
            return dr, ds

    else:

        def rhs(rr, ss):
            sx = fd1_order4(ss, dx)
            rx = fd1_order4(rr, dx)
            sxx = fd2_order4(ss, dx)
            rxx = fd2_order4(rr, dx)
            dr = -(tbm * sx * rx) - bom * sxx
            q = rxx + rx * rx
            ds = -vv - bom * (sx * sx - q)
            return dr, ds

    hdt = 0.5 * dt
    sixth = dt / 6.0
    dr1, ds1 = rhs(r, s)
    r2 = r + hdt * dr1
    s2 = s + hdt * ds1
    dr2, ds2 = rhs(r2, s2)
    r3 = r + hdt * dr2
    s3 = s + hdt * ds2
    dr3, ds3 = rhs(r3, s3)
    r4 = r + dt * dr3
    s4 = s + dt * ds3
    dr4, ds4 = rhs(r4, s4)
    r[:] = r + sixth * (dr1 + 2.0 * dr2 + 2.0 * dr3 + dr4)
    s[:] = s + sixth * (ds1 + 2.0 * ds2 + 2.0 * ds3 + ds4)

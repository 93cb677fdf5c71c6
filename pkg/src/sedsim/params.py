"""Physical parameters and external potentials.

The particle is a charged point mass with radiation-reaction time scale
tau = 2 e^2 / (3 m c^3) (Gaussian units), coupled to the vacuum field with
coupling kappa equal to the charge.  beta is the half-action scale entering
the momentum-dispersion identity; a quantum-calibrated parameter set pins
beta = hbar / 2.

Potentials are one of: free, harmonic(omega0), quartic(a, b) with
V = a x^2 + b x^4, or tabulated (cubic-spline interpolation).  The force is
f = -dV/dx and fprime = df/dx; all three are returned by eval_force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from scipy.interpolate import CubicSpline

# Gaussian-unit constants for the electron-like preset (CODATA 2018).
_ELECTRON_CHARGE_ESU = 4.80320471e-10
_ELECTRON_MASS_G = 9.1093837015e-28
_SPEED_OF_LIGHT_CGS = 2.99792458e10
_HBAR_ERG_S = 1.054571817e-27

KIND_FREE = 0
KIND_HARMONIC = 1
KIND_QUARTIC = 2
KIND_TABULATED = 3


@dataclass(frozen=True)
class PhysicalParams:
    """Particle and coupling constants.

    m, hbar, c must be positive; tau nonnegative.  When quantum_calibrated
    is set, beta must equal hbar / 2 exactly (the energy-balance fixed point).
    """

    m: float = 1.0
    hbar: float = 1.0
    beta: float = 0.5
    tau: float = 0.0
    kappa: float = 0.0
    c: float = 1.0
    quantum_calibrated: bool = False

    def __post_init__(self) -> None:
        if self.m <= 0 or self.hbar <= 0 or self.c <= 0:
            raise ValueError("m, hbar and c must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.quantum_calibrated and self.beta != 0.5 * self.hbar:
            raise ValueError("quantum-calibrated parameters require beta = hbar/2")

    def with_changes(self, **kw) -> "PhysicalParams":
        return replace(self, **kw)


def radiation_reaction_tau(charge: float, mass: float, c: float) -> float:
    """tau = 2 q^2 / (3 m c^3)."""
    return 2.0 * charge * charge / (3.0 * mass * c**3)


def coupling_for_tau(tau: float, mass: float, c: float) -> float:
    """Charge magnitude consistent with a given tau: kappa = sqrt(3 m c^3 tau / 2)."""
    return math.sqrt(1.5 * mass * c**3 * tau)


def default_params(preset: str) -> PhysicalParams:
    """Named parameter presets.

    "dimensionless-ho": hbar = m = c = 1, tau = 1e-3 (so tau*omega0^2 = 1e-3
    for the default unit-frequency well), kappa matched to tau.
    "electron-like": Gaussian cgs values for an electron.
    """
    if preset == "dimensionless-ho":
        tau = 1e-3
        return PhysicalParams(
            m=1.0,
            hbar=1.0,
            beta=0.5,
            tau=tau,
            kappa=coupling_for_tau(tau, 1.0, 1.0),
            c=1.0,
            quantum_calibrated=True,
        )
    if preset == "electron-like":
        tau = radiation_reaction_tau(
            _ELECTRON_CHARGE_ESU, _ELECTRON_MASS_G, _SPEED_OF_LIGHT_CGS
        )
        return PhysicalParams(
            m=_ELECTRON_MASS_G,
            hbar=_HBAR_ERG_S,
            beta=0.5 * _HBAR_ERG_S,
            tau=tau,
            kappa=_ELECTRON_CHARGE_ESU,
            c=_SPEED_OF_LIGHT_CGS,
            quantum_calibrated=True,
        )
    raise ValueError(f"unknown preset {preset!r}")


@dataclass(frozen=True)
class Potential:
    """External potential with analytic force data.

    kind_code / c1 / c2 feed the compiled trajectory kernel:
      free      f = 0
      harmonic  f = -c1 x          (c1 = mass * omega0^2)
      quartic   f = -c1 x - c2 x^3 (c1 = 2a, c2 = 4b)
    Tabulated potentials carry spline callables instead and are evaluated
    on the NumPy path only.
    """

    kind: str
    kind_code: int
    c1: float = 0.0
    c2: float = 0.0
    omega0: float = 0.0
    quartic_a: float = 0.0
    quartic_b: float = 0.0
    _spline: Callable | None = None
    x_min: float = -math.inf
    x_max: float = math.inf

    @staticmethod
    def free() -> "Potential":
        return Potential(kind="free", kind_code=KIND_FREE)

    @staticmethod
    def harmonic(omega0: float, mass: float = 1.0) -> "Potential":
        if omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if mass <= 0:
            raise ValueError("mass must be positive")
        return Potential(
            kind="harmonic",
            kind_code=KIND_HARMONIC,
            c1=mass * omega0 * omega0,
            omega0=omega0,
        )

    @staticmethod
    def quartic(a: float, b: float) -> "Potential":
        if b < 0:
            raise ValueError("quartic coefficient b must be nonnegative")
        if b == 0 and a <= 0:
            raise ValueError("quartic(a, 0) requires a > 0 for confinement")
        return Potential(
            kind="quartic",
            kind_code=KIND_QUARTIC,
            c1=2.0 * a,
            c2=4.0 * b,
            quartic_a=a,
            quartic_b=b,
        )

    @staticmethod
    def tabulated(x: NDArray[np.float64], values: NDArray[np.float64]) -> "Potential":
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.size < 4 or x.shape != values.shape:
            raise ValueError("tabulated potential needs matching 1-D arrays, >= 4 points")
        if np.any(np.diff(x) <= 0):
            raise ValueError("tabulated grid must be strictly increasing")
        spline = CubicSpline(x, values)
        return Potential(
            kind="tabulated",
            kind_code=KIND_TABULATED,
            _spline=spline,
            x_min=float(x[0]),
            x_max=float(x[-1]),
        )

    def V(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return 0.5 * self.c1 * x * x
        if self.kind == "quartic":
            return 0.5 * self.c1 * x * x + 0.25 * self.c2 * x**4
        self._check_range(x)
        return self._spline(x)

    def force(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return -self.c1 * x
        if self.kind == "quartic":
            return -self.c1 * x - self.c2 * x**3
        self._check_range(x)
        return -self._spline(x, 1)

    def fprime(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return np.full_like(x, -self.c1)
        if self.kind == "quartic":
            return -self.c1 - 3.0 * self.c2 * x * x
        self._check_range(x)
        return -self._spline(x, 2)

    def _check_range(self, x) -> None:
        if np.any(x < self.x_min) or np.any(x > self.x_max):
            raise ValueError("x outside the tabulated range")


def eval_force(potential: Potential, x):
    """Return the triple (V(x), f(x), f'(x))."""
    return potential.V(x), potential.force(x), potential.fprime(x)

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sedsim.grids import (
    BoundaryDecayError,
    check_boundary_decay,
    fd1_central,
    fd1_order4,
    fd2_central,
    fd2_order4,
    log_density_curvature,
    spectral_derivative,
    support_mask,
    trapezoid_2d,
    uniform_spacing,
)


def _grid(n=201, lo=-4.0, hi=4.0):
    x = np.linspace(lo, hi, n)
    return x, x[1] - x[0]


def test_uniform_spacing():
    x, dx = _grid()
    assert_allclose(uniform_spacing(x), dx)
    with pytest.raises(ValueError):
        uniform_spacing(np.array([0.0, 1.0, 3.0]))
    with pytest.raises(ValueError):
        uniform_spacing(np.array([1.0, 0.0, -1.0]))


@pytest.mark.parametrize("fd,order", [(fd1_central, 2), (fd1_order4, 4)])
def test_fd1_convergence(fd, order):
    errs = []
    for n in (101, 201, 401):
        x, dx = _grid(n)
        err = np.max(np.abs(fd(np.sin(x), dx)[4:-4] - np.cos(x)[4:-4]))
        errs.append(err)
    rates = np.log2(np.asarray(errs[:-1]) / errs[1:])
    assert np.all(rates > order - 0.3)


@pytest.mark.parametrize("fd,order", [(fd2_central, 2), (fd2_order4, 4)])
def test_fd2_convergence(fd, order):
    errs = []
    for n in (101, 201, 401):
        x, dx = _grid(n)
        err = np.max(np.abs(fd(np.sin(x), dx)[4:-4] + np.sin(x)[4:-4]))
        errs.append(err)
    rates = np.log2(np.asarray(errs[:-1]) / errs[1:])
    assert np.all(rates > order - 0.3)


def test_fd_exact_on_polynomials():
    x, dx = _grid(41, 0.0, 2.0)
    f = 3.0 * x**2 - 2.0 * x + 1.0
    assert_allclose(fd1_order4(f, dx), 6.0 * x - 2.0, atol=1e-11)
    assert_allclose(fd2_order4(f, dx), np.full_like(x, 6.0), atol=1e-10)


def test_spectral_derivative_periodic():
    n = 128
    x = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    dx = x[1] - x[0]
    f = np.exp(np.sin(x))
    d1 = spectral_derivative(f, dx, order=1)
    d2 = spectral_derivative(f, dx, order=2)
    assert_allclose(d1, np.cos(x) * f, atol=1e-10)
    assert_allclose(d2, (np.cos(x) ** 2 - np.sin(x)) * f, atol=1e-9)


def test_log_density_curvature_gaussian():
    x, dx = _grid(301)
    sigma = 0.8
    rho = np.exp(-x**2 / (2.0 * sigma**2))
    mask = support_mask(rho, rel=1e-2)
    curv = log_density_curvature(rho, dx, mask=mask)
    assert_allclose(curv[mask], -1.0 / sigma**2, rtol=1e-3)
    assert np.all(np.isnan(curv[~mask]))


def test_log_density_curvature_mask_errors():
    x, dx = _grid(64)
    rho = np.exp(-(x**2))
    holes = np.ones_like(rho, dtype=bool)
    holes[30] = False
    with pytest.raises(ValueError):
        log_density_curvature(rho, dx, mask=holes)
    tiny = np.zeros_like(rho, dtype=bool)
    tiny[10:13] = True
    with pytest.raises(ValueError):
        log_density_curvature(rho, dx, mask=tiny)


def test_boundary_decay_guard():
    x, _ = _grid(101, -6.0, 6.0)
    check_boundary_decay(np.exp(-x**2))
    with pytest.raises(BoundaryDecayError):
        check_boundary_decay(np.exp(-x**2) + 1e-3)


def test_support_mask_contiguous():
    x, _ = _grid(101)
    rho = np.exp(-x**2)
    mask = support_mask(rho, rel=1e-2)
    idx = np.flatnonzero(mask)
    assert np.all(np.diff(idx) == 1)
    assert rho[mask].min() >= 1e-2 * rho.max() * (1.0 - 1e-12)


def test_trapezoid_2d_separable():
    x = np.linspace(-5.0, 5.0, 201)
    y = np.linspace(-6.0, 6.0, 241)
    gx = np.exp(-x**2)
    gy = np.exp(-(y**2) / 2.0)
    val = trapezoid_2d(np.outer(gx, gy), x, y)
    assert_allclose(val, np.sqrt(np.pi) * np.sqrt(2.0 * np.pi), rtol=1e-6)

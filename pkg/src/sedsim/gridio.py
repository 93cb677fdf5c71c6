"""CSV and binary emitters for grids, series, and states.

Text outputs print every float with %.17g, which round-trips IEEE doubles
exactly, so a rerun with identical inputs is byte-identical.  Large 2-D
grids can also go to a little-endian binary layout with an explicit
header; see write_grid_binary for the byte layout.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .grids import uniform_spacing
from .hydro import HydroState, quantum_potential
from .params import PhysicalParams, Potential
from .schrod import WaveFunction

MAGIC = b"SEDGRID1"


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_table(path, header: Sequence[str], columns: Sequence) -> None:
    """Write named columns as comma-separated text, one row per grid point."""
    cols = [np.asarray(c).ravel() for c in columns]
    if len(cols) != len(header):
        raise ValueError("one header name per column required")
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise ValueError("columns must have equal length")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(float(c[i])) for c in cols) + "\n")


def read_table(path) -> dict[str, NDArray[np.float64]]:
    """Read a write_table file back as {column name: array}."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(names):
        raise ValueError(f"{path}: {len(names)} columns named, {data.shape[1]} found")
    return {name: data[:, j] for j, name in enumerate(names)}


def write_moments_csv(path, moments, residual=None) -> None:
    """Local-moment profile: x, rho, mean_p, second_p, var_p [, residual]."""
    header = ["x", "rho", "mean_p", "second_p", "var_p"]
    cols = [moments.x, moments.rho, moments.mean_p, moments.second_p,
            moments.var_p]
    if residual is not None:
        header.append("residual")
        cols.append(residual)
    write_table(path, header, cols)


def write_energy_series_csv(path, t, energy) -> None:
    write_table(path, ["t", "energy"], [t, energy])


def write_wavefunction_csv(path, wf: WaveFunction) -> None:
    write_table(path, ["x", "re_psi", "im_psi"],
                [wf.x, wf.psi.real, wf.psi.imag])


def write_hydro_series_csv(
    path,
    states: Sequence[HydroState],
    params: PhysicalParams,
) -> None:
    """Long-format snapshot series: one row per (t, x) with rho, S, v, Q.

    The quantum potential is NaN off the density support, matching the
    masked evaluation used everywhere else.
    """
    ts, xs, rhos, ss, vs, qs = [], [], [], [], [], []
    for st in states:
        dx = uniform_spacing(st.x)
        q = quantum_potential(st.rho, dx, params.beta, params.m,
                              periodic=st.periodic)
        ts.append(np.full(st.x.size, st.t))
        xs.append(st.x)
        rhos.append(st.rho)
        ss.append(st.s)
        vs.append(st.velocity(params))
        qs.append(q)
    write_table(
        path,
        ["t", "x", "rho", "s", "v", "q_pot"],
        [np.concatenate(c) for c in (ts, xs, rhos, ss, vs, qs)],
    )


def write_grid_csv(path, x, p, values, value_name: str = "value") -> None:
    """Flat long-format 2-D grid: one row per (x, p) cell, row-major in x."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (x.size, p.size):
        raise ValueError("values must have shape (len(x), len(p))")
    xx = np.repeat(x, p.size)
    pp = np.tile(p, x.size)
    write_table(path, ["x", "p", value_name], [xx, pp, values.ravel()])


def read_grid_csv(path):
    """Inverse of write_grid_csv: returns (x, p, values)."""
    cols = read_table(path)
    names = list(cols)
    xx, pp, vv = cols[names[0]], cols[names[1]], cols[names[2]]
    # row-major layout: the p block repeats once per x value
    if np.any(xx != xx[0]):
        n_p = int(np.argmax(xx != xx[0]))
    else:
        n_p = xx.size
    p = pp[:n_p]
    x = xx[::n_p]
    if xx.size != x.size * n_p:
        raise ValueError(f"{path}: not a rectangular grid")
    return x, p, vv.reshape(x.size, n_p)


def write_grid_binary(path, x, p, values) -> None:
    """Binary 2-D grid, little-endian throughout.

    Layout: 8-byte magic "SEDGRID1"; two int64 dims (nx, np); four float64
    extents (x0, x1, p0, p1); payload nx*np float64, row-major with x as
    the slow axis.  Grids must be uniform; the reader rebuilds them from
    the extents.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (x.size, p.size):
        raise ValueError("values must have shape (len(x), len(p))")
    uniform_spacing(x), uniform_spacing(p)  # reject nonuniform grids
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<qq", x.size, p.size))
        fh.write(struct.pack("<dddd", x[0], x[-1], p[0], p[-1]))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_grid_binary(path):
    """Inverse of write_grid_binary: returns (x, p, values)."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a grid file (bad magic)")
    nx, np_ = struct.unpack_from("<qq", raw, 8)
    x0, x1, p0, p1 = struct.unpack_from("<dddd", raw, 24)
    payload = raw[56:]
    if len(payload) != 8 * nx * np_:
        raise ValueError(f"{path}: payload holds {len(payload)} bytes, "
                         f"expected {8 * nx * np_}")
    values = np.frombuffer(payload, dtype="<f8").reshape(nx, np_).copy()
    return np.linspace(x0, x1, nx), np.linspace(p0, p1, np_), values

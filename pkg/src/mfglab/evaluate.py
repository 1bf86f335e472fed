"""Evaluation and comparison: rectangular tabulation of any solver output,
relative-error maps and scalars, turnpike distance curves, and decimal
round-trip CSV export."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .sampling import Domain


@dataclass(frozen=True)
class EvalGrid:
    """Uniform (n_t x n_x) node grid over [0,T] x domain, endpoints included."""

    T: float
    domain: Domain
    n_t: int = 200
    n_x: int = 200

    def __post_init__(self):
        if self.n_t < 2 or self.n_x < 2:
            raise ValueError("need at least 2 nodes per axis")

    @property
    def t(self):
        return np.linspace(0.0, self.T, self.n_t)

    @property
    def x(self):
        if self.domain.kind == "torus":
            return np.linspace(0.0, 1.0, self.n_x)
        return np.linspace(-self.domain.L, self.domain.L, self.n_x)


def mesh_points(grid):
    tt, xx = np.meshgrid(grid.t, grid.x, indexing="ij")
    return np.column_stack([tt.ravel(), xx.ravel()])


def tabulate_nets(u_net, m_net, grid):
    P = mesh_points(grid)
    shape = (grid.n_t, grid.n_x)
    return u_net(P).reshape(shape), m_net(P).reshape(shape)


def tabulate_fdm(sol, grid):
    """Bilinear interpolation from the solver's native node grid."""
    return (_bilinear(sol.grid.t_nodes, sol.grid.x_nodes, sol.U, grid),
            _bilinear(sol.grid.t_nodes, sol.grid.x_nodes, sol.M, grid))


def _bilinear(tn, xn, F, grid):
    t, x = grid.t, grid.x
    it = np.clip(np.searchsorted(tn, t) - 1, 0, len(tn) - 2)
    ix = np.clip(np.searchsorted(xn, x) - 1, 0, len(xn) - 2)
    wt = (t - tn[it]) / (tn[it + 1] - tn[it])
    wx = (x - xn[ix]) / (xn[ix + 1] - xn[ix])
    wt = np.clip(wt, 0.0, 1.0)[:, None]
    wx = np.clip(wx, 0.0, 1.0)[None, :]
    f00 = F[np.ix_(it, ix)]
    f01 = F[np.ix_(it, ix + 1)]
    f10 = F[np.ix_(it + 1, ix)]
    f11 = F[np.ix_(it + 1, ix + 1)]
    return (1 - wt) * ((1 - wx) * f00 + wx * f01) + wt * ((1 - wx) * f10 + wx * f11)


def tabulate_lq(sol, grid):
    t = grid.t[:, None]
    x = grid.x[None, :]
    return sol.u_at(t, x), sol.m_at(t, x)


def tabulate(source, grid):
    """Dispatch on the solver output type."""
    if hasattr(source, "u_at"):
        return tabulate_lq(source, grid)
    if hasattr(source, "residual_history"):
        return tabulate_fdm(source, grid)
    if isinstance(source, (tuple, list)) and len(source) == 2:
        return tabulate_nets(source[0], source[1], grid)
    raise TypeError(f"cannot tabulate {type(source).__name__}")


def rel_error(A, B, mode="l2", eps=1e-8):
    """Pointwise map |A-B|/(|B|+eps) or scalar ||A-B||_2 / ||B||_2."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    if A.shape != B.shape:
        raise ValueError("shape mismatch")
    if mode == "map":
        return np.abs(A - B) / (np.abs(B) + eps)
    if mode == "l2":
        nb = float(np.linalg.norm(B))
        if nb == 0.0:
            raise ZeroDivisionError("reference field is identically zero")
        return float(np.linalg.norm(A - B)) / nb
    raise ValueError(f"unknown mode {mode!r}")


def _trapz(y, x):
    return np.trapezoid(y, x, axis=-1)


def turnpike_curves(U, M, grid, ubar_vals, mbar_vals):
    """Per-time L2 and L1 distances to the stationary pair.

    The value field is compared after removing its spatial mean, so the
    curves are invariant under adding any constant to u at each time.
    """
    x = grid.x
    vol = grid.domain.volume
    du = U - _trapz(U, x)[:, None] / vol - ubar_vals[None, :]
    dm = M - mbar_vals[None, :]
    return {
        "t": grid.t,
        "u_l2": np.sqrt(_trapz(du * du, x)),
        "u_l1": _trapz(np.abs(du), x),
        "m_l2": np.sqrt(_trapz(dm * dm, x)),
        "m_l1": _trapz(np.abs(dm), x),
    }


def lq_mean_curve(M, grid):
    """Trapezoid estimate of int x m(t,x) dx at each time node."""
    return _trapz(M * grid.x[None, :], grid.x)


def write_long_csv(path, t, x, fields):
    """Long-form rows (t, x, field...) with decimal round-trip formatting."""
    names = list(fields)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"] + names)
        for i, tv in enumerate(t):
            for j, xv in enumerate(x):
                w.writerow([repr(float(tv)), repr(float(xv))]
                           + [repr(float(fields[n][i, j])) for n in names])


def read_long_csv(path):
    """Inverse of write_long_csv: returns (t, x, {name: array})."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        names = header[2:]
        rows = [[float(v) for v in row] for row in rd]
    data = np.array(rows)
    t = np.unique(data[:, 0])
    x = np.unique(data[:, 1])
    fields = {}
    if len(data) != len(t) * len(x):
        raise ValueError(f"{path} is not a full rectangular grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    data = data[order]
    for k, name in enumerate(names):
        fields[name] = data[:, 2 + k].reshape(len(t), len(x))
    return t, x, fields


def write_curves_csv(path, curves, extra=None):
    names = ["t", "u_l2", "u_l1", "m_l2", "m_l1"] + (list(extra) if extra else [])
    cols = dict(curves)
    if extra:
        cols.update(extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(len(curves["t"])):
            w.writerow([repr(float(cols[n][i])) for n in names])

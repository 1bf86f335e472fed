"""Finite-difference reference solver on [0,T] x [0,1] with periodic wrap.

Space is discretised with the upwind monotone stencil: the numerical
Hamiltonian applies H(p) = |p|^2/2 to the projected pair
(min(forward, 0), max(backward, 0)), which keeps the implicit backward value
sweep an M-matrix Newton problem and makes the adjoint transport operator of
the density sweep conservative and positivity-preserving.  Time stepping is
implicit Euler in both directions; each implicit row solve is a direct
periodic-tridiagonal factorisation (Thomas plus a rank-one correction).

The value and density sweeps alternate inside a damped fixed point on the
density (Picard with convex relaxation).  Node N_h is identified with node
0: solver arrays carry N_h unknown columns and the returned fields append
the wrap column.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded


@dataclass(frozen=True)
class FdmGrid:
    NT: int
    Nh: int
    T: float

    def __post_init__(self):
        if self.NT < 1 or self.Nh < 3:
            raise ValueError("need NT >= 1 and Nh >= 3")
        if self.T <= 0:
            raise ValueError("T must be positive")

    @property
    def dt(self):
        return self.T / self.NT

    @property
    def h(self):
        return 1.0 / self.Nh

    @property
    def t_nodes(self):
        return np.linspace(0.0, self.T, self.NT + 1)

    @property
    def x_nodes(self):
        """All N_h + 1 nodes including the wrap node at 1."""
        return np.linspace(0.0, 1.0, self.Nh + 1)

    @property
    def x_cells(self):
        """The N_h unknown columns (wrap node excluded)."""
        return self.x_nodes[:-1]


def forward_diff(F, h):
    """(DF)_i = (F_{i+1} - F_i)/h with periodic wrap."""
    return (np.roll(F, -1) - F) / h


def lap_h(F, h):
    """(Lap_h F)_i = (F_{i+1} - 2 F_i + F_{i-1})/h^2 with periodic wrap."""
    return (np.roll(F, -1) - 2.0 * F + np.roll(F, 1)) / (h * h)


def grad_pair(F, h):
    """[(DF)_i, (DF)_{i-1}]: forward and backward differences at node i."""
    d = forward_diff(F, h)
    return d, np.roll(d, 1)


def numerical_hamiltonian(x, p1, p2):
    """Upwind value of |p|^2/2 from the forward/backward difference pair."""
    a = np.minimum(p1, 0.0)
    b = np.maximum(p2, 0.0)
    return 0.5 * (a * a + b * b)


def hamiltonian_partials(x, p1, p2):
    """(dH/dp1, dH/dp2) = (min(p1,0), max(p2,0))."""
    return np.minimum(p1, 0.0), np.maximum(p2, 0.0)


def solve_cyclic_tridiag(sub, diag, sup, rhs):
    """Direct solve of a periodic tridiagonal system.

    Row i reads sub[i]*x[i-1] + diag[i]*x[i] + sup[i]*x[i+1] = rhs[i] with
    periodic index wrap, so sub[0] and sup[n-1] are the corner entries.
    Thomas factorisation of the stripped system plus a Sherman-Morrison
    rank-one correction.
    """
    n = len(diag)
    if n < 3:
        raise ValueError("cyclic solver needs n >= 3")
    cl, cu = sub[0], sup[n - 1]
    gamma = -diag[0]
    d = diag.copy()
    d[0] -= gamma
    d[-1] -= cl * cu / gamma

    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = d
    ab[2, :-1] = sub[1:]

    u = np.zeros(n)
    u[0] = gamma
    u[-1] = cu
    yz = solve_banded((1, 1), ab, np.column_stack([rhs, u]))
    y, z = yz[:, 0], yz[:, 1]
    # v = (1, 0, ..., 0, cl/gamma)
    vy = y[0] + cl / gamma * y[-1]
    vz = z[0] + cl / gamma * z[-1]
    return y - z * (vy / (1.0 + vz))


class NewtonError(RuntimeError):
    pass


def _hjb_row_solve(u_next, rhs, kappa, dt, h, tol, max_newton):
    """Implicit backward step: damped Newton on the upwind HJB row."""
    u = u_next.copy()
    for it in range(max_newton):
        p1, p2 = grad_pair(u, h)
        res = (u - u_next) / dt - kappa * lap_h(u, h) \
            + numerical_hamiltonian(None, p1, p2) - rhs
        rnorm = np.max(np.abs(res))
        if rnorm <= tol:
            return u, it
        hp1, hp2 = hamiltonian_partials(None, p1, p2)
        diag = 1.0 / dt + 2.0 * kappa / h ** 2 - hp1 / h + hp2 / h
        sup = -kappa / h ** 2 + hp1 / h
        sub = -kappa / h ** 2 - hp2 / h
        delta = solve_cyclic_tridiag(sub, diag, sup, -res)
        step = 1.0
        for _ in range(40):
            u_try = u + step * delta
            p1, p2 = grad_pair(u_try, h)
            res_try = (u_try - u_next) / dt - kappa * lap_h(u_try, h) \
                + numerical_hamiltonian(None, p1, p2) - rhs
            if np.max(np.abs(res_try)) < rnorm:
                break
            step *= 0.5
        else:
            raise NewtonError(f"line search stalled at residual {rnorm:.3e}")
        u = u_try
    p1, p2 = grad_pair(u, h)
    res = (u - u_next) / dt - kappa * lap_h(u, h) \
        + numerical_hamiltonian(None, p1, p2) - rhs
    if np.max(np.abs(res)) > tol:
        raise NewtonError(
            f"Newton did not reach tol {tol:.1e} in {max_newton} iterations "
            f"(residual {np.max(np.abs(res)):.3e})")
    return u, max_newton


def hjb_newton_sweep(model, grid, M, terminal=None, forcing=None,
                     tol=1e-10, max_newton=30, kappa=None):
    """Backward value sweep given the density iterate M (NT+1, Nh columns).

    ``forcing`` (NT, Nh), when given, is added to the coupling right-hand
    side of each row (manufactured-solution studies).  Returns (U, newton
    iteration counts), U with Nh columns.
    """
    kappa = model.kappa if kappa is None else kappa
    x = grid.x_cells
    U = np.empty((grid.NT + 1, grid.Nh))
    U[-1] = model.terminal_cost(x) if terminal is None else terminal
    counts = np.zeros(grid.NT, dtype=int)
    for n in range(grid.NT - 1, -1, -1):
        rhs = model.coupling(x, M[n + 1])
        if forcing is not None:
            rhs = rhs + forcing[n]
        U[n], counts[n] = _hjb_row_solve(U[n + 1], rhs, kappa, grid.dt,
                                         grid.h, tol, max_newton)
    return U, counts


def kfp_forward_sweep(grid, U, chi, kappa=0.5, forcing=None,
                      negativity_tol=-1e-12):
    """Forward density sweep: implicit transport-diffusion steps.

    chi is the initial row (Nh columns); the step matrix columns sum to one,
    so the discrete mass h*sum(M) is conserved exactly.  Raises if any value
    falls below ``negativity_tol`` (skipped when a forcing is supplied, which
    legitimately breaks positivity).
    """
    dt, h = grid.dt, grid.h
    M = np.empty((grid.NT + 1, grid.Nh))
    M[0] = chi
    for n in range(grid.NT):
        p1, p2 = grad_pair(U[n + 1], h)
        hp1, hp2 = hamiltonian_partials(None, p1, p2)
        diag = 1.0 + 2.0 * kappa * dt / h ** 2 - dt / h * (hp1 - hp2)
        sub = -kappa * dt / h ** 2 + dt / h * np.roll(hp1, 1)
        sup = -kappa * dt / h ** 2 - dt / h * np.roll(hp2, -1)
        rhs = M[n] if forcing is None else M[n] + dt * forcing[n]
        M[n + 1] = solve_cyclic_tridiag(sub, diag, sup, rhs)
        if forcing is None and M[n + 1].min() < negativity_tol:
            raise RuntimeError(
                f"density fell to {M[n + 1].min():.3e} at step {n + 1}")
    return M


@dataclass
class DiscreteSolution:
    """Solver output on the full node set (wrap column appended)."""

    grid: FdmGrid
    U: np.ndarray
    M: np.ndarray
    residual_history: list
    newton_counts: np.ndarray
    iterations: int
    converged: bool
    stagnated: bool = False

    @property
    def mass(self):
        return self.grid.h * self.M[:, :-1].sum(axis=1)

    @property
    def mass_drift(self):
        return float(np.max(np.abs(self.mass - 1.0)))

    def diagnostics(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "stagnated": self.stagnated,
            "residual_history": [float(r) for r in self.residual_history],
            "mass_drift": self.mass_drift,
            "min_density": float(self.M.min()),
            "newton_max": int(self.newton_counts.max()),
        }


def _with_wrap(A):
    return np.column_stack([A, A[:, 0]])


def fixed_point_solve(model, grid, damping=0.5, K=200, tol=1e-6,
                      newton_tol=1e-10, max_newton=30, init=None):
    """Damped Picard iteration alternating the two sweeps.

    ``damping`` may be a constant or a callable k -> delta(k); the density
    iterate is relaxed as delta*old + (1-delta)*new.  ``init`` optionally
    supplies a stationary density profile on grid.x_cells used for the
    initial density iterate (warm start); the default repeats the initial
    condition down the time axis.  Convergence is declared when successive
    raw density sweeps differ by at most ``tol`` in sup norm; stagnation
    (no improvement over 20 iterations) returns the best iterate flagged.
    """
    x = grid.x_cells
    chi = model.initial_density(x)
    chi = chi / (grid.h * chi.sum())

    if init is None:
        M_tilde = np.tile(chi, (grid.NT + 1, 1))
    else:
        prof = np.asarray(init, dtype=float)
        prof = prof / (grid.h * prof.sum())
        M_tilde = np.tile(prof, (grid.NT + 1, 1))
        M_tilde[0] = chi

    delta_fn = damping if callable(damping) else (lambda k: damping)
    history = []
    M_prev = None
    best = np.inf
    stall = 0
    converged = False
    U = None
    counts = None

    for k in range(K):
        U, counts = hjb_newton_sweep(model, grid, M_tilde, tol=newton_tol,
                                     max_newton=max_newton)
        M_new = kfp_forward_sweep(grid, U, chi, kappa=model.kappa)
        if M_prev is not None:
            dist = float(np.max(np.abs(M_new - M_prev)))
            history.append(dist)
            if dist <= tol:
                converged = True
                M_prev = M_new
                break
            if dist < best - 1e-15:
                best = dist
                stall = 0
            else:
                stall += 1
                if stall >= 20:
                    M_prev = M_new
                    break
        M_prev = M_new
        d = delta_fn(k)
        M_tilde = d * M_tilde + (1.0 - d) * M_new

    stagnated = not converged and stall >= 20
    return DiscreteSolution(grid=grid, U=_with_wrap(U), M=_with_wrap(M_prev),
                            residual_history=history, newton_counts=counts,
                            iterations=len(history) + 1, converged=converged,
                            stagnated=stagnated)

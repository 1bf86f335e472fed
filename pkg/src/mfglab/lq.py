"""Semi-explicit solver for the linear-quadratic game and its ergodic oracle.

The value ansatz u(t,x) = phi_t x^2 / 2 + chi_t x + psi_t reduces the PDE
system to ODEs: a Riccati equation for phi (solved in a stable tanh form
that satisfies phi_T = 2 Psi for every parameter set), a linear
forward-backward pair for (mu, chi) handled by shooting, and a backward
quadrature for psi with the diffusion term read as (sigma^2/2) phi_t.

On the branch sqrt(C) = 2 Psi the pair (mu, chi) has constant coefficient
matrix A = [[-sqrt(C), -1], [B, sqrt(C)]] with eigenvalues -w, +w for
w = sqrt(C - B).  The trajectory is expanded on the eigenvectors with the
growing mode parameterised by its terminal weight, which keeps every value
well conditioned for arbitrarily long horizons; the shooting constant is
evaluated in the same exponentially-rescaled form.  Off the branch the
solver falls back to dense RK4 with the exact time-varying phi and linear
superposition for the shooting.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .models import LQModel, simpson


def riccati_phi(model, t):
    """Solution of -phi' = -phi^2 + C with phi(T) = 2 Psi (stable form)."""
    t = np.asarray(t, dtype=float)
    rC = model.sqrtC
    g = model.gamma_ric
    th = np.tanh(rC * (model.T - t))
    return rC * (g + rC * th) / (rC + g * th)


def riccati_residual(model, t, dt=1e-6):
    """Centred-difference check of the Riccati ODE at interior times."""
    t = np.asarray(t, dtype=float)
    dphi = (riccati_phi(model, t + dt) - riccati_phi(model, t - dt)) / (2 * dt)
    phi = riccati_phi(model, t)
    return -dphi - (-phi * phi + model.Q + model.B)


def phi_turnpike_gap(model, t):
    """(actual |phi_t - sqrt(C)|, bound 2|sqrt(C)-2Psi| exp(-2 sqrt(C)(T-t)))."""
    gap = np.abs(riccati_phi(model, t) - model.sqrtC)
    bound = 2.0 * abs(model.sqrtC - model.gamma_ric) \
        * np.exp(-2.0 * model.sqrtC * (model.T - np.asarray(t, float)))
    return gap, bound


def _eigvec_slopes(model):
    """First components of the eigenvectors (second components are 1)."""
    w = model.omega
    rC = model.sqrtC
    return -(rC + w) / model.B, -(rC - w) / model.B


def shooting_c(model):
    """Initial chi making chi_T = 2 Psi r on the closed-form branch.

    Evaluated with exponentials rescaled by exp(-w T) so large horizons do
    not overflow.  Requires sqrt(C) = 2 Psi and B < C.
    """
    if not model.semi_explicit:
        raise ValueError("closed-form shooting requires sqrt(C) = 2 Psi")
    w, rC = model.omega, model.sqrtC
    if model.B == 0.0:
        return 2.0 * model.Psi * model.r * math.exp(-rC * model.T)
    e = math.exp(-w * model.T)
    e2 = e * e
    num = 2.0 * (2.0 * model.Psi * model.r) * e - (model.B / w) * model.mu0 * (1.0 - e2)
    den = (1.0 + e2) + (rC / w) * (1.0 - e2)
    return num / den


def _boundary_coeffs(model):
    """(a, bt): weights of the decaying/growing modes, growing one scaled by
    its terminal size.  chi_t = a e^{-w t} + bt e^{-w (T-t)}."""
    w = model.omega
    v1, v2 = _eigvec_slopes(model)
    e = math.exp(-w * model.T)
    chiT = 2.0 * model.Psi * model.r
    det = v1 - v2 * e * e
    a = (model.mu0 - v2 * e * chiT) / det
    bt = (v1 * chiT - e * model.mu0) / det
    return a, bt


def mu_chi_trajectory(model, c, t):
    """(mu_t, chi_t) from the initial point (mu0, c) on the constant-matrix
    branch, via the explicit eigen-decomposition; B = 0 falls back to the
    triangular limit."""
    if not model.semi_explicit:
        return _mu_chi_rk4(model, c, t)
    t = np.asarray(t, dtype=float)
    w, rC = model.omega, model.sqrtC
    if model.B == 0.0:
        # chi' = rC chi and mu' = -rC mu - chi: triangular, solved directly
        chi = c * np.exp(rC * t)
        mu = model.mu0 * np.exp(-rC * t) \
            - c * (np.exp(rC * t) - np.exp(-rC * t)) / (2.0 * rC)
        return mu, chi
    v1, v2 = _eigvec_slopes(model)
    # (mu0, c) = alpha v1_full + beta v2_full with v = (v_i, 1)
    det = v1 - v2
    alpha = (model.mu0 - v2 * c) / det
    beta = (v1 * c - model.mu0) / det
    e1 = np.exp(-w * t)
    e2 = np.exp(w * t)
    mu = alpha * v1 * e1 + beta * v2 * e2
    chi = alpha * e1 + beta * e2
    return mu, chi


def _mu_chi_rk4(model, c, t, n_sub=40):
    """Dense RK4 with the exact time-varying Riccati coefficient."""
    t = np.asarray(t, dtype=float)
    out_mu = np.empty_like(t)
    out_chi = np.empty_like(t)
    y = np.array([model.mu0, c])

    def rhs(s, y):
        phi = float(riccati_phi(model, s))
        return np.array([-phi * y[0] - y[1], model.B * y[0] + phi * y[1]])

    s = 0.0
    out_mu[0], out_chi[0] = y
    for k in range(1, len(t)):
        span = t[k] - s
        nh = max(1, int(math.ceil(n_sub * span / (t[-1] / max(len(t) - 1, 1)))))
        hstep = span / nh
        for _ in range(nh):
            k1 = rhs(s, y)
            k2 = rhs(s + hstep / 2, y + hstep / 2 * k1)
            k3 = rhs(s + hstep / 2, y + hstep / 2 * k2)
            k4 = rhs(s + hstep, y + hstep * k3)
            y = y + hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            s += hstep
        out_mu[k], out_chi[k] = y
    return out_mu, out_chi


def shooting_c_numeric(model, n_steps=20_000):
    """Superposition shooting for the general (non-branch) case."""
    t = np.linspace(0.0, model.T, n_steps + 1)
    _, chi0 = _mu_chi_rk4(model, 0.0, t)
    _, chi1 = _mu_chi_rk4(model, 1.0, t)
    target = 2.0 * model.Psi * model.r
    return (target - chi0[-1]) / (chi1[-1] - chi0[-1])


def psi_trajectory(model, phi, chi, mu, t):
    """Backward trapezoid quadrature of
    -psi' = (sigma^2/2) phi - chi^2/2 + B mu^2/2 with psi_T = Psi r^2."""
    integrand = model.nu * phi - 0.5 * chi ** 2 + 0.5 * model.B * mu ** 2
    psi = np.empty_like(np.asarray(t, float))
    psi[-1] = model.Psi * model.r ** 2
    dt = np.diff(t)
    steps = 0.5 * dt * (integrand[:-1] + integrand[1:])
    psi[:-1] = psi[-1] + np.cumsum(steps[::-1])[::-1]
    return psi


@dataclass
class LQFiniteSolution:
    """Closed-form (branch) solution with evaluators at arbitrary times."""

    model: LQModel
    t_grid: np.ndarray
    phi: np.ndarray
    chi: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    var: np.ndarray
    c: float

    def phi_at(self, t):
        return riccati_phi(self.model, t)

    def mu_chi_at(self, t):
        m = self.model
        if m.semi_explicit and m.B > 0.0:
            a, bt = _boundary_coeffs(m)
            v1, v2 = _eigvec_slopes(m)
            w = m.omega
            t = np.asarray(t, float)
            e1 = np.exp(-w * t)
            e2 = np.exp(-w * (m.T - t))
            return a * v1 * e1 + bt * v2 * e2, a * e1 + bt * e2
        return (np.interp(t, self.t_grid, self.mu),
                np.interp(t, self.t_grid, self.chi))

    def psi_at(self, t):
        m = self.model
        t = np.asarray(t, dtype=float)
        base = m.Psi * m.r ** 2 + m.nu * _phi_integral(m, t)
        if m.semi_explicit and m.B > 0.0:
            a, bt = _boundary_coeffs(m)
            w, rC, B = m.omega, m.sqrtC, m.B
            term_a = a * a * (w + rC) / (2.0 * B) \
                * (np.exp(-2.0 * w * t) - math.exp(-2.0 * w * m.T))
            term_b = bt * bt * (rC - w) / (2.0 * B) \
                * (1.0 - np.exp(-2.0 * w * (m.T - t)))
            return base + term_a - term_b
        return np.interp(t, self.t_grid, self.psi)

    def var_at(self, t):
        m = self.model
        t = np.asarray(t, dtype=float)
        if m.semi_explicit:
            vinf = m.nu / m.sqrtC
            return vinf + (m.sigma0 ** 2 - vinf) * np.exp(-2.0 * m.sqrtC * t)
        return np.interp(t, self.t_grid, self.var)

    def u_at(self, t, x):
        t = np.asarray(t, float)
        x = np.asarray(x, float)
        mu, chi = self.mu_chi_at(t)
        return 0.5 * self.phi_at(t) * x * x + chi * x + self.psi_at(t)

    def du_at(self, t, x):
        mu, chi = self.mu_chi_at(t)
        return self.phi_at(t) * np.asarray(x, float) + chi

    def m_at(self, t, x):
        """Gaussian density with the analytic mean and variance."""
        mu, _ = self.mu_chi_at(t)
        v = self.var_at(t)
        x = np.asarray(x, float)
        return np.exp(-0.5 * (x - mu) ** 2 / v) / np.sqrt(2.0 * math.pi * v)

    def mu_at(self, t):
        return self.mu_chi_at(t)[0]


def _phi_integral(model, t):
    """int_t^T phi_s ds; the Riccati solution is -d/ds log D for
    D(s) = sqrt(C) cosh(sqrt(C)(T-s)) + 2 Psi sinh(sqrt(C)(T-s)), so the
    integral is log(D(t)/sqrt(C)), written overflow-free."""
    if model.semi_explicit:
        return model.sqrtC * (model.T - np.asarray(t, float))
    rC, g = model.sqrtC, model.gamma_ric
    x = rC * (model.T - np.asarray(t, float))
    e2 = np.exp(-2.0 * x)
    return x + np.log(0.5 * (1.0 + e2)) + np.log1p((g / rC) * np.tanh(x))


def solve_lq(model, n_nodes=2001):
    """Tabulated LQFiniteSolution on a uniform time grid."""
    t = np.linspace(0.0, model.T, n_nodes)
    phi = riccati_phi(model, t)
    if model.semi_explicit:
        c = shooting_c(model)
        if model.B > 0.0:
            a, bt = _boundary_coeffs(model)
            v1, v2 = _eigvec_slopes(model)
            w = model.omega
            e1 = np.exp(-w * t)
            e2 = np.exp(-w * (model.T - t))
            mu = a * v1 * e1 + bt * v2 * e2
            chi = a * e1 + bt * e2
        else:
            mu, chi = mu_chi_trajectory(model, c, t)
    else:
        c = shooting_c_numeric(model)
        mu, chi = _mu_chi_rk4(model, c, t)
    psi = psi_trajectory(model, phi, chi, mu, t)
    var = _variance_path(model, phi, t)
    return LQFiniteSolution(model=model, t_grid=t, phi=phi, chi=chi, mu=mu,
                            psi=psi, var=var, c=float(c))


def _variance_path(model, phi, t):
    """Var of the optimally controlled state: v' = -2 phi v + sigma^2."""
    if model.semi_explicit:
        vinf = model.nu / model.sqrtC
        return vinf + (model.sigma0 ** 2 - vinf) * np.exp(-2.0 * model.sqrtC * t)
    v = np.empty_like(t)
    v[0] = model.sigma0 ** 2
    for k in range(1, len(t)):
        hstep = t[k] - t[k - 1]
        def rhs(s, y):
            return -2.0 * float(riccati_phi(model, s)) * y + model.sigma ** 2
        y = v[k - 1]
        s = t[k - 1]
        k1 = rhs(s, y); k2 = rhs(s + hstep / 2, y + hstep / 2 * k1)
        k3 = rhs(s + hstep / 2, y + hstep / 2 * k2); k4 = rhs(s + hstep, y + hstep * k3)
        v[k] = y + hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return v


@dataclass
class LQErgodicSolution:
    """Quadratic-Gaussian stationary solution of the ergodic LQ game."""

    model: LQModel

    @property
    def s(self):
        return self.model.s

    @property
    def mu_bar(self):
        return 0.0

    @property
    def lam(self):
        m = self.model
        return m.nu / self.s - self.mu_bar ** 2 / (2 * self.s ** 2) \
            + m.gamma_erg * self.mu_bar ** 2

    def vbar(self, x):
        return (np.asarray(x, float) - self.mu_bar) ** 2 / (2.0 * self.s)

    def dvbar(self, x):
        return (np.asarray(x, float) - self.mu_bar) / self.s

    def mbar(self, x):
        m = self.model
        z = np.asarray(x, float) - self.mu_bar
        return np.exp(-z * z / (self.s * m.sigma ** 2)) \
            / math.sqrt(math.pi * self.s * m.sigma ** 2)

    def alpha_bar(self, x):
        return self.dvbar(x)

    def pde_residuals(self, x):
        """Residuals of the stationary pair with analytic derivatives.

        HJB: lam - nu v'' + (v')^2/2 - (q x^2 + beta x mu_bar + g mu_bar^2);
        KFP: nu m'' + (v' m)'.
        """
        m = self.model
        x = np.asarray(x, float)
        z = x - self.mu_bar
        v1 = z / self.s
        v2 = 1.0 / self.s
        F = m.q * x * x + m.beta * x * self.mu_bar + m.gamma_erg * self.mu_bar ** 2
        r_hjb = self.lam - m.nu * v2 + 0.5 * v1 * v1 - F
        mb = self.mbar(x)
        mb1 = -2.0 * z / (self.s * m.sigma ** 2) * mb
        mb2 = (-2.0 / (self.s * m.sigma ** 2)
               + (2.0 * z / (self.s * m.sigma ** 2)) ** 2) * mb
        r_kfp = m.nu * mb2 + v2 * mb + v1 * mb1
        return r_hjb, r_kfp


def lq_ergodic(model):
    if model.q <= 0 or 2.0 * model.q == -model.beta:
        raise ValueError("Bardi hypotheses require q > 0 and 2q != -beta")
    return LQErgodicSolution(model=model)


def verify_turnpike_proposition(model, horizons=(5.0, 10.0, 20.0), n_t=801,
                                n_quad=4001, width_sigmas=6.0):
    """Ratios of the three turnpike estimates to the two-sided exponential.

    For each horizon, returns sup over a uniform time grid of
    LHS / (e^{-w t} + e^{-w (T-t)}) for the value gap integrated against
    mbar, the derivative gap, and |mu_t|.  Integrals use Simpson on a
    symmetric truncation of the stationary Gaussian.
    """
    erg = lq_ergodic(model)
    sig_bar = math.sqrt(erg.s * model.sigma ** 2 / 2.0)
    xs = np.linspace(-width_sigmas * sig_bar, width_sigmas * sig_bar, n_quad)
    mb = erg.mbar(xs)
    h = xs[1] - xs[0]
    wsimp = np.ones(n_quad)
    wsimp[1:-1:2] = 4.0
    wsimp[2:-1:2] = 2.0
    wsimp *= h / 3.0

    report = {}
    for T in horizons:
        mT = replace(model, T=float(T))
        sol = solve_lq(mT)
        t = np.linspace(0.0, float(T), n_t)
        w = mT.omega
        env = np.exp(-w * t) + np.exp(-w * (T - t))
        phi = sol.phi_at(t)
        mu, chi = sol.mu_chi_at(t)
        dphi = phi - mT.sqrtC
        # value gap: int |dphi x^2/2 + chi x| mbar(dx)
        val = np.abs(0.5 * np.outer(dphi, xs ** 2) + np.outer(chi, xs))
        e_u = (val * mb) @ wsimp
        dv = np.abs(np.outer(dphi, xs) + chi[:, None])
        e_du = (dv * mb) @ wsimp
        e_mu = np.abs(mu)
        report[float(T)] = {
            "u": float(np.max(e_u / env)),
            "Du": float(np.max(e_du / env)),
            "mu": float(np.max(e_mu / env)),
        }
    return report

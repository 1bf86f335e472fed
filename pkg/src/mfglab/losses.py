"""Monte Carlo loss terms of the finite-horizon deep Galerkin solver.

The interior batch is a product grid: Mt times drawn from the scaled Beta
law crossed with Mx uniform space points, flattened row-major so point
(k, l) sits at index k*Mx + l.  Each term function returns its Monte Carlo
value and, when given a nonzero ``w``, also adds w * d(term)/d(outputs) into
the upstream accumulators of the participating evaluations, so one backward
pass per net covers the whole weighted objective exactly.

The LQ coupling acts through the per-time mean estimate
mu_hat(t_k) = (2L/Mx) sum_l x_l m(t_k, x_l); its gradient path through the
density net is kept (exact reverse mode, no detaching).
"""

from dataclasses import dataclass

import numpy as np

from .models import LocalCouplingModel, LQModel
from .nets import eval_partials, eval_values
from .sampling import Domain


@dataclass
class LossWeights:
    """Penalty coefficients of the training objective."""

    hjb: float = 50.0
    kfp: float = 1.0
    init: float = 100.0
    term: float = 600.0
    norm: float = 50.0
    period: float = 25.0
    tpk_u: float = 0.0
    tpk_m: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        vals = (self.hjb, self.kfp, self.init, self.term, self.norm,
                self.period, self.tpk_u, self.tpk_m)
        if any(v < 0 for v in vals):
            raise ValueError("loss weights must be nonnegative")
        if not 0.0 <= self.delta < 0.5:
            raise ValueError("window fraction delta must lie in [0, 1/2)")


def default_weights(model):
    """Tuned coefficients per model family (turnpike weights left at 0)."""
    if isinstance(model, LQModel):
        return LossWeights(hjb=100.0, kfp=10.0, init=100.0, term=600.0,
                           norm=50.0, period=0.0)
    return LossWeights()


def model_domain(model):
    if isinstance(model, LQModel):
        return Domain("interval", 1, model.L)
    return Domain("torus", model.d)


def viscosity(model):
    return model.nu if isinstance(model, LQModel) else model.kappa


@dataclass
class InteriorBatch:
    """Product grid of Mt time points and Mx space points."""

    t: np.ndarray
    x: np.ndarray

    @property
    def Mt(self):
        return len(self.t)

    @property
    def Mx(self):
        return len(self.x)

    def points(self):
        Mt, Mx = self.Mt, self.Mx
        P = np.empty((Mt * Mx, 1 + self.x.shape[1]))
        P[:, 0] = np.repeat(self.t, Mx)
        P[:, 1:] = np.tile(self.x, (Mt, 1))
        return P


def interior_evals(u_net, m_net, batch):
    P = batch.points()
    return eval_partials(u_net, P, [1]), eval_partials(m_net, P, [1])


def lq_mean_estimates(m_ev, batch, L):
    """Per-time Monte Carlo estimate of int x m(t, x) dx over [-L, L]."""
    m = m_ev.y.reshape(batch.Mt, batch.Mx)
    return (2.0 * L / batch.Mx) * m @ batch.x[:, 0]


def hjb_term(u_ev, m_ev, model, batch, w=0.0):
    """Mean squared residual of -du/dt - visc*Lap u + |grad u|^2/2 - F[m]."""
    M = len(u_ev.y)
    visc = viscosity(model)
    ux = u_ev.dy[:, 1]
    xs = u_ev.x[:, 1]
    if isinstance(model, LQModel):
        mu_hat = lq_mean_estimates(m_ev, batch, model.L)
        F = model.coupling_mean(xs, np.repeat(mu_hat, batch.Mx))
    else:
        F = model.coupling(xs, m_ev.y)
    r = -u_ev.dy[:, 0] - visc * u_ev.d2y[:, 0] + 0.5 * ux * ux - F
    val = float(np.mean(r * r))
    if w:
        c = w * 2.0 / M * r
        u_ev.dybar[:, 0] -= c
        u_ev.d2ybar[:, 0] -= visc * c
        u_ev.dybar[:, 1] += c * ux
        if isinstance(model, LQModel):
            # dF/dmu_hat = -B (x - mu_hat); chain through the mean estimate
            dmu = (c.reshape(batch.Mt, batch.Mx)
                   * model.B * (xs - np.repeat(mu_hat, batch.Mx)).reshape(batch.Mt, batch.Mx)
                   ).sum(axis=1)
            m_ev.ybar += np.repeat(dmu, batch.Mx) * (2.0 * model.L / batch.Mx) * xs
        else:
            m_ev.ybar -= c * model.gamma
    return val


def kfp_term(u_ev, m_ev, model, w=0.0):
    """Mean squared residual of dm/dt - visc*Lap m - div(m grad u)."""
    M = len(m_ev.y)
    visc = viscosity(model)
    ux, uxx = u_ev.dy[:, 1], u_ev.d2y[:, 0]
    mx, mxx = m_ev.dy[:, 1], m_ev.d2y[:, 0]
    s = m_ev.dy[:, 0] - visc * mxx - (mx * ux + m_ev.y * uxx)
    val = float(np.mean(s * s))
    if w:
        c = w * 2.0 / M * s
        m_ev.dybar[:, 0] += c
        m_ev.d2ybar[:, 0] -= visc * c
        m_ev.dybar[:, 1] -= c * ux
        m_ev.ybar -= c * uxx
        u_ev.dybar[:, 1] -= c * mx
        u_ev.d2ybar[:, 0] -= c * m_ev.y
    return val


def init_term(m0_ev, model, w=0.0):
    """Mean squared mismatch of the density net at t = 0 against m0."""
    e = m0_ev.y - model.initial_density(m0_ev.x[:, 1])
    val = float(np.mean(e * e))
    if w:
        m0_ev.ybar += w * 2.0 / len(e) * e
    return val


def term_term(uT_ev, model, w=0.0):
    """Mean squared mismatch of the value net at t = T against G."""
    e = uT_ev.y - model.terminal_cost(uT_ev.x[:, 1])
    val = float(np.mean(e * e))
    if w:
        uT_ev.ybar += w * 2.0 / len(e) * e
    return val


def norm_term(u_ev, m_ev, volume, w=0.0):
    """|MC integral of u| + |MC integral of m - 1| over the domain."""
    M = len(u_ev.y)
    iu = volume * float(np.mean(u_ev.y))
    im = volume * float(np.mean(m_ev.y)) - 1.0
    val = abs(iu) + abs(im)
    if w:
        u_ev.ybar += w * np.sign(iu) * volume / M
        m_ev.ybar += w * np.sign(im) * volume / M
    return val


def period_term(ub_ev, mb_ev, w=0.0):
    """Mean squared wrap mismatch; evals stack the 0-side then the 1-side."""
    val = 0.0
    for ev in (ub_ev, mb_ev):
        n = len(ev.y) // 2
        d = ev.y[:n] - ev.y[n:]
        val += float(np.mean(d * d))
        if w:
            c = w * 2.0 / n * d
            ev.ybar[:n] += c
            ev.ybar[n:] -= c
    return val


# Standalone operation-level wrappers (fresh evaluations, no gradients).

def loss_hjb(u_net, m_net, model, batch):
    u_ev, m_ev = interior_evals(u_net, m_net, batch)
    return hjb_term(u_ev, m_ev, model, batch)


def loss_kfp(u_net, m_net, batch, model=None):
    u_ev, m_ev = interior_evals(u_net, m_net, batch)
    return kfp_term(u_ev, m_ev, model if model is not None else LocalCouplingModel())


def loss_init(m_net, model, x0):
    P = np.column_stack([np.zeros(len(x0)), np.asarray(x0, float).reshape(len(x0), -1)])
    return init_term(eval_values(m_net, P), model)


def loss_term(u_net, model, xT):
    xT = np.asarray(xT, float).reshape(len(xT), -1)
    P = np.column_stack([np.full(len(xT), model.T), xT])
    return term_term(eval_values(u_net, P), model)


def loss_norm(u_net, m_net, batch, volume=1.0):
    P = batch.points()
    return norm_term(eval_values(u_net, P), eval_values(m_net, P), volume)


def loss_period(u_net, m_net, t, x_lo, x_hi):
    lo = np.column_stack([t, x_lo])
    hi = np.column_stack([t, x_hi])
    stack_u = eval_values(u_net, np.vstack([lo, hi]))
    stack_m = eval_values(m_net, np.vstack([lo, hi]))
    return period_term(stack_u, stack_m)


def total_from_components(components, weights):
    """Weighted sum in a fixed term order; skipped terms contribute nothing."""
    total = (weights.hjb * components["hjb"]
             + weights.kfp * components["kfp"]
             + weights.init * components["init"]
             + weights.term * components["term"]
             + weights.norm * components["norm"]
             + weights.period * components["period"])
    if weights.tpk_u != 0.0:
        total += weights.tpk_u * components["tpk_u"]
    if weights.tpk_m != 0.0:
        total += weights.tpk_m * components["tpk_m"]
    return total

"""Turnpike penalty terms appended to the baseline objective.

Every penalty lives on the inner time window [delta*T, (1-delta)*T] and
carries the reciprocal two-sided exponential weight
1 / (exp(-omega t) + exp(-omega (T-t))).  Sampled times outside the window
contribute nothing and the divisor counts only in-window times, so the
estimator is a conditional average over the window.  Penalties are L1-type;
their subgradients (sign at 0 taken as 0) feed the same upstream-gradient
accumulators as the squared-residual terms.

Local-coupling forms compare the nets to a trained ergodic solution and keep
the extra factors (T - t) for the value penalty and t for the density
penalty.  The interval (LQ) forms carry the volume factor 2L, centre the
value net at x = 0 instead of at its spatial mean, and use the closed-form
targets ubar(x) = sqrt(C) x^2 / 2 and mu_bar = 0.
"""

import numpy as np

from .losses import lq_mean_estimates
from .nets import eval_partials, eval_values


def weight(t, T, omega):
    """Reciprocal two-sided exponential, symmetric about T/2."""
    t = np.asarray(t, dtype=float)
    return 1.0 / (np.exp(-omega * t) + np.exp(-omega * (T - t)))


def window_mask(t, T, delta):
    if not 0.0 <= delta < 0.5:
        raise ValueError("window fraction delta must lie in [0, 1/2)")
    return (t >= delta * T) & (t <= (1.0 - delta) * T)


def _sign(x):
    return np.sign(x)


def penalty_u_local_term(u_ev, batch, T, omega, delta, ubar_vals, w=0.0):
    """Window average of (T-t) * weight * spatial-L1 of u - <u> - ubar."""
    mask = window_mask(batch.t, T, delta)
    n_in = int(mask.sum())
    if n_in == 0:
        return 0.0
    Mt, Mx = batch.Mt, batch.Mx
    u = u_ev.y.reshape(Mt, Mx)
    D = u - u.mean(axis=1, keepdims=True) - ubar_vals[None, :]
    wk = (T - batch.t) * weight(batch.t, T, omega) * mask / n_in
    val = float(wk @ np.abs(D).mean(axis=1))
    if w:
        sg = _sign(D)
        bar = (w / Mx) * wk[:, None] * (sg - sg.mean(axis=1, keepdims=True))
        u_ev.ybar += bar.ravel()
    return val


def penalty_m_local_term(m_ev, batch, T, omega, delta, mbar_vals, w=0.0):
    """Window average of t * weight * spatial-L1 of m - mbar."""
    mask = window_mask(batch.t, T, delta)
    n_in = int(mask.sum())
    if n_in == 0:
        return 0.0
    Mt, Mx = batch.Mt, batch.Mx
    D = m_ev.y.reshape(Mt, Mx) - mbar_vals[None, :]
    wk = batch.t * weight(batch.t, T, omega) * mask / n_in
    val = float(wk @ np.abs(D).mean(axis=1))
    if w:
        m_ev.ybar += ((w / Mx) * wk[:, None] * _sign(D)).ravel()
    return val


def penalty_u_lq_term(u_ev, u0_ev, batch, sqrtC, L, T, omega, delta, w=0.0):
    """Interval form centred at x = 0 against ubar(x) = sqrt(C) x^2 / 2."""
    mask = window_mask(batch.t, T, delta)
    n_in = int(mask.sum())
    if n_in == 0:
        return 0.0
    Mt, Mx = batch.Mt, batch.Mx
    ubar = 0.5 * sqrtC * batch.x[:, 0] ** 2
    D = u_ev.y.reshape(Mt, Mx) - u0_ev.y[:, None] - ubar[None, :]
    wk = weight(batch.t, T, omega) * mask / n_in
    vol = 2.0 * L / Mx
    val = float(wk @ (vol * np.abs(D).sum(axis=1)))
    if w:
        sg = _sign(D)
        u_ev.ybar += (w * vol * wk[:, None] * sg).ravel()
        u0_ev.ybar -= w * vol * wk * sg.sum(axis=1)
    return val


def penalty_du_lq_term(u_ev, batch, sqrtC, L, T, omega, delta, w=0.0):
    """Interval form on the space derivative against D ubar(x) = sqrt(C) x."""
    mask = window_mask(batch.t, T, delta)
    n_in = int(mask.sum())
    if n_in == 0:
        return 0.0
    Mt, Mx = batch.Mt, batch.Mx
    D = u_ev.dy[:, 1].reshape(Mt, Mx) - sqrtC * batch.x[None, :, 0]
    wk = weight(batch.t, T, omega) * mask / n_in
    vol = 2.0 * L / Mx
    val = float(wk @ (vol * np.abs(D).sum(axis=1)))
    if w:
        bar = (w * vol * wk[:, None] * _sign(D)).ravel()
        u_ev.dybar[:, 1] += bar
    return val


def penalty_mu_lq_term(m_ev, batch, L, T, omega, delta, mu_bar=0.0, w=0.0):
    """Per-time deviation of the density-mean estimate from mu_bar."""
    mask = window_mask(batch.t, T, delta)
    n_in = int(mask.sum())
    if n_in == 0:
        return 0.0
    Mt, Mx = batch.Mt, batch.Mx
    mu_hat = lq_mean_estimates(m_ev, batch, L)
    dev = mu_hat - mu_bar
    wk = weight(batch.t, T, omega) * mask / n_in
    val = float(wk @ np.abs(dev))
    if w:
        coef = w * wk * _sign(dev)
        m_ev.ybar += np.repeat(coef, Mx) * (2.0 * L / Mx) * np.tile(batch.x[:, 0], Mt)
    return val


# Standalone wrappers evaluating the nets afresh (tests, diagnostics).

def penalty_u_local(u_net, ergodic, batch, T, delta, omega=None):
    omega = ergodic.omega if omega is None else omega
    u_ev = eval_values(u_net, batch.points())
    return penalty_u_local_term(u_ev, batch, T, omega, delta,
                                ergodic.ubar_at(batch.x[:, 0]))


def penalty_m_local(m_net, ergodic, batch, T, delta, omega=None):
    omega = ergodic.omega if omega is None else omega
    m_ev = eval_values(m_net, batch.points())
    return penalty_m_local_term(m_ev, batch, T, omega, delta,
                                ergodic.mbar_at(batch.x[:, 0]))


def penalty_u_lq(u_net, model, batch, delta, omega=None):
    omega = model.omega if omega is None else omega
    u_ev = eval_values(u_net, batch.points())
    zeros = np.column_stack([batch.t, np.zeros(batch.Mt)])
    u0_ev = eval_values(u_net, zeros)
    return penalty_u_lq_term(u_ev, u0_ev, batch, model.sqrtC, model.L,
                             model.T, omega, delta)


def penalty_du_lq(u_net, model, batch, delta, omega=None):
    omega = model.omega if omega is None else omega
    u_ev = eval_partials(u_net, batch.points(), [1])
    return penalty_du_lq_term(u_ev, batch, model.sqrtC, model.L,
                              model.T, omega, delta)


def penalty_mu_lq(m_net, model, batch, delta, omega=None, mu_bar=0.0):
    omega = model.omega if omega is None else omega
    m_ev = eval_values(m_net, batch.points())
    return penalty_mu_lq_term(m_ev, batch, model.L, model.T, omega, delta,
                              mu_bar=mu_bar)

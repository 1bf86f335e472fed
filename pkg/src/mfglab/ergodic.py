"""Deep Galerkin solver for the stationary (ergodic) torus game.

Trains a value net (identity output), a density net (exponential output,
hence positive) and a free scalar for the long-run average cost.  The scalar
enters only through the stationary HJB residual
lambda - Lap(u)/2 + |grad u|^2/2 - F(x, m); the stationary transport
residual, the normalisation penalty and the wrap penalty complete the
objective.  The trained pair is tabulated on a dense grid; the grid minimum
of the density feeds the exponential turnpike rate
omega = min(2 pi^2 min(mbar), gamma) / 2.
"""

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import losses as L
from .checkpoint import save_checkpoint
from .nets import AdamState, accumulate_grads, eval_partials, eval_values, \
    xavier_mlp, zero_grads_like
from .sampling import stream_rng
from .training import Divergence, TrainConfig, TrainReport


@dataclass
class ErgodicWeights:
    hjb: float = 50.0
    kfp: float = 1.0
    norm: float = 50.0
    period: float = 25.0

    def __post_init__(self):
        if min(self.hjb, self.kfp, self.norm, self.period) < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class ErgodicSolution:
    """Stationary solution: nets (when trained here), scalar cost, and a
    dense tabulation used by the finite-difference comparisons."""

    lam: float
    grid_x: np.ndarray
    ubar: np.ndarray
    mbar: np.ndarray
    u_net: object = None
    m_net: object = None
    omega: float = None
    gamma: float = None

    @property
    def min_mbar(self):
        return float(np.min(self.mbar))

    def ubar_at(self, x):
        if self.u_net is not None:
            return self.u_net(np.asarray(x, float).reshape(-1, 1))
        return np.interp(np.mod(x, 1.0), self.grid_x, self.ubar)

    def mbar_at(self, x):
        if self.m_net is not None:
            return self.m_net(np.asarray(x, float).reshape(-1, 1))
        return np.interp(np.mod(x, 1.0), self.grid_x, self.mbar)

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "tabulation.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "ubar", "mbar"])
            for row in zip(self.grid_x, self.ubar, self.mbar):
                w.writerow([repr(float(v)) for v in row])
        with open(os.path.join(out_dir, "ergodic.json"), "w") as fh:
            json.dump({"lambda": self.lam, "min_mbar": self.min_mbar,
                       "omega": self.omega, "gamma": self.gamma}, fh, indent=2)

    @classmethod
    def from_tabulation_csv(cls, path, json_path=None):
        xs, us, ms = [], [], []
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            next(rd)
            for row in rd:
                xs.append(float(row[0])); us.append(float(row[1])); ms.append(float(row[2]))
        lam = omega = gamma = None
        if json_path and os.path.exists(json_path):
            with open(json_path) as fh:
                d = json.load(fh)
            lam, omega, gamma = d.get("lambda"), d.get("omega"), d.get("gamma")
        return cls(lam=lam, grid_x=np.array(xs), ubar=np.array(us),
                   mbar=np.array(ms), omega=omega, gamma=gamma)


def rate_local(solution, gamma=None):
    """Exponential turnpike rate min(2 pi^2 min(mbar), gamma) / 2."""
    if hasattr(solution, "min_mbar"):
        min_mbar = solution.min_mbar
        gamma = solution.gamma if gamma is None else gamma
    else:
        min_mbar = float(solution)
    if gamma is None:
        raise ValueError("gamma required")
    if min_mbar <= 0:
        raise ValueError(f"min density must be positive, got {min_mbar}")
    return 0.5 * min(2.0 * math.pi ** 2 * min_mbar, gamma)


def ergodic_components(lam, u_ev, m_ev, pair_u, pair_m, model, weights=None,
                       lam_bar=None):
    """Loss components on a spatial batch; accumulates gradients when
    ``weights`` is given (lam_bar is a length-1 accumulator for the scalar)."""
    w = weights or ErgodicWeights(0.0, 0.0, 0.0, 0.0)
    M = len(u_ev.y)
    comp = {}

    ux, uxx = u_ev.dy[:, 0], u_ev.d2y[:, 0]
    mx, mxx = m_ev.dy[:, 0], m_ev.d2y[:, 0]
    F = model.coupling(u_ev.x[:, 0], m_ev.y)
    r = lam - 0.5 * uxx + 0.5 * ux * ux - F
    comp["hjb"] = float(np.mean(r * r))
    if w.hjb:
        c = w.hjb * 2.0 / M * r
        u_ev.d2ybar[:, 0] -= 0.5 * c
        u_ev.dybar[:, 0] += c * ux
        m_ev.ybar -= c * model.gamma
        if lam_bar is not None:
            lam_bar[0] += c.sum()

    s = -0.5 * mxx - (mx * ux + m_ev.y * uxx)
    comp["kfp"] = float(np.mean(s * s))
    if w.kfp:
        c = w.kfp * 2.0 / M * s
        m_ev.d2ybar[:, 0] -= 0.5 * c
        m_ev.dybar[:, 0] -= c * ux
        m_ev.ybar -= c * uxx
        u_ev.dybar[:, 0] -= c * mx
        u_ev.d2ybar[:, 0] -= c * m_ev.y

    comp["norm"] = L.norm_term(u_ev, m_ev, 1.0, w=w.norm)
    comp["period"] = L.period_term(pair_u, pair_m, w=w.period)
    comp["total"] = (w.hjb * comp["hjb"] + w.kfp * comp["kfp"]
                     + w.norm * comp["norm"] + w.period * comp["period"]) \
        if weights else 0.0
    return comp


def ergodic_losses(lam, u_net, m_net, model, x):
    """Operation-level wrapper: component values at a spatial batch."""
    x = np.asarray(x, float).reshape(-1, 1)
    u_ev = eval_partials(u_net, x, [0])
    m_ev = eval_partials(m_net, x, [0])
    ends = np.array([[0.0], [1.0]])
    comp = ergodic_components(lam, u_ev, m_ev, eval_values(u_net, ends),
                              eval_values(m_net, ends), model)
    comp.pop("total")
    return comp


def _weighted_total(comp, w):
    return (w.hjb * comp["hjb"] + w.kfp * comp["kfp"]
            + w.norm * comp["norm"] + w.period * comp["period"])


def ergodic_train(model, cfg, weights=None, batch_size=1024, grid_nodes=1001,
                  out_dir=None):
    """Train (lambda, u, m) on the stationary system; returns
    (ErgodicSolution, TrainReport)."""
    weights = weights or ErgodicWeights()
    rng = stream_rng(cfg.seed, 0)
    val_rng = stream_rng(cfg.seed, 1)
    init_rng = stream_rng(cfg.seed, 2)

    hidden = [cfg.width] * cfg.depth
    u_net = xavier_mlp(1, hidden, init_rng, out="identity")
    m_net = xavier_mlp(1, hidden, init_rng, out="exp")
    lam = np.zeros(1)
    adam_u = AdamState(u_net.params(), cfg.lr0, cfg.lr1, cfg.decay_span())
    adam_m = AdamState(m_net.params(), cfg.lr0, cfg.lr1, cfg.decay_span())
    adam_l = AdamState([lam], cfg.lr0, cfg.lr1, cfg.decay_span())

    ends = np.array([[0.0], [1.0]])
    report = TrainReport(columns=["iter", "hjb", "kfp", "norm", "period",
                                  "total", "val_hjb", "val_kfp", "val_norm",
                                  "val_period", "val_total"])
    t0 = time.perf_counter()

    def batch_components(generator, with_grads):
        x = generator.random((batch_size, 1))
        u_ev = eval_partials(u_net, x, [0])
        m_ev = eval_partials(m_net, x, [0])
        pu = eval_values(u_net, ends)
        pm = eval_values(m_net, ends)
        lam_bar = np.zeros(1)
        comp = ergodic_components(lam[0], u_ev, m_ev, pu, pm, model,
                                  weights=weights if with_grads else None,
                                  lam_bar=lam_bar)
        if not with_grads:
            comp["total"] = _weighted_total(comp, weights)
        return comp, (u_ev, pu), (m_ev, pm), lam_bar

    for n in range(cfg.iters):
        comp, u_evs, m_evs, lam_bar = batch_components(rng, True)
        if not np.isfinite(comp["total"]):
            raise Divergence(f"non-finite ergodic loss at iteration {n}: {comp}")
        gu = accumulate_grads(zero_grads_like(u_net.params()), u_evs)
        gm = accumulate_grads(zero_grads_like(m_net.params()), m_evs)
        adam_u.step(u_net.params(), gu)
        adam_m.step(m_net.params(), gm)
        adam_l.step([lam], [lam_bar])

        if n % cfg.log_every == 0 or n == cfg.iters - 1:
            vcomp, _, _, _ = batch_components(val_rng, False)
            report.log(iter=n, hjb=comp["hjb"], kfp=comp["kfp"],
                       norm=comp["norm"], period=comp["period"],
                       total=comp["total"], val_hjb=vcomp["hjb"],
                       val_kfp=vcomp["kfp"], val_norm=vcomp["norm"],
                       val_period=vcomp["period"], val_total=vcomp["total"])

    report.wall_seconds = time.perf_counter() - t0

    grid = np.linspace(0.0, 1.0, grid_nodes)
    sol = ErgodicSolution(
        lam=float(lam[0]), grid_x=grid,
        ubar=u_net(grid.reshape(-1, 1)), mbar=m_net(grid.reshape(-1, 1)),
        u_net=u_net, m_net=m_net, gamma=model.gamma,
    )
    sol.omega = rate_local(sol)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        save_checkpoint(os.path.join(out_dir, "checkpoint.ckpt"),
                        {"u": u_net, "m": m_net},
                        adams={"u": adam_u, "m": adam_m},
                        scalars={"lambda": float(lam[0])},
                        seed=cfg.seed, iteration=cfg.iters,
                        meta={"model": type(model).__name__, "kind": "ergodic"})
        sol.save(out_dir)
        report.to_csv(os.path.join(out_dir, "loss_log.csv"))

    return sol, report

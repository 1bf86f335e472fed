"""Training loops for the finite-horizon deep Galerkin solver.

One iteration draws a fresh mini-batch (Beta-distributed times crossed with
uniform space points, plus initial / terminal / wrap batches), assembles the
weighted objective and its exact parameter gradients through the shared
upstream-gradient buffers, and takes one Adam step per network.  Validation
components come from an independent stream at every logging interval and
never influence the schedule.  Runs are deterministic per (seed, config) on
a fixed backend.
"""

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import losses as L
from . import turnpike as tpk
from .checkpoint import save_checkpoint
from .models import LQModel
from .nets import AdamState, accumulate_grads, eval_values, xavier_mlp, zero_grads_like
from .sampling import boundary_pairs, sample_space, sample_times, stream_rng


class Divergence(RuntimeError):
    """Training or solver loss became non-finite."""


@dataclass
class TrainConfig:
    iters: int = 20_000
    width: int = 100
    depth: int = 2
    lr0: float = 1e-2
    lr1: float = 1e-5
    n_decay: int = 0          # 0: decay over exactly `iters`
    log_every: int = 1000
    seed: int = 0

    def decay_span(self):
        return self.n_decay if self.n_decay > 0 else self.iters


class TurnpikeSetup:
    """Everything the penalty terms need beyond the loss weights.

    mode 'u' uses the value-form penalties, 'du' the derivative form (LQ
    only).  For the local model supply the trained ergodic solution; for the
    LQ model the closed-form targets are built in and mu_bar defaults to 0.
    """

    def __init__(self, mode="none", omega=1.0, ergodic=None, mu_bar=0.0):
        if mode not in ("none", "u", "du"):
            raise ValueError(f"turnpike mode must be none, u or du, got {mode!r}")
        self.mode = mode
        self.omega = omega
        self.ergodic = ergodic
        self.mu_bar = mu_bar


@dataclass
class TrainReport:
    columns: list
    rows: list = field(default_factory=list)
    wall_seconds: float = 0.0
    checkpoint: str = None

    def log(self, **kv):
        self.rows.append([kv[c] for c in self.columns])

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            w.writerows([[repr(v) if isinstance(v, float) else v for v in row]
                         for row in self.rows])


COMPONENTS = ("hjb", "kfp", "init", "term", "norm", "period", "tpk_u", "tpk_m")


def _finite_components(u_net, m_net, model, domain, weights, setup, batch,
                       x0, xT, bnd, with_grads):
    """Assemble all loss components for one batch; optionally accumulate
    upstream gradients (scaled by the loss weights) and return the evals."""
    w = weights if with_grads else L.LossWeights(*(0.0,) * 8, delta=weights.delta)
    u_int, m_int = L.interior_evals(u_net, m_net, batch)
    comp = dict.fromkeys(COMPONENTS, 0.0)
    comp["hjb"] = L.hjb_term(u_int, m_int, model, batch, w=w.hjb)
    comp["kfp"] = L.kfp_term(u_int, m_int, model, w=w.kfp)

    P0 = np.column_stack([np.zeros(len(x0)), x0])
    m0_ev = eval_values(m_net, P0)
    comp["init"] = L.init_term(m0_ev, model, w=w.init)

    PT = np.column_stack([np.full(len(xT), model.T), xT])
    uT_ev = eval_values(u_net, PT)
    comp["term"] = L.term_term(uT_ev, model, w=w.term)

    comp["norm"] = L.norm_term(u_int, m_int, domain.volume, w=w.norm)

    u_evs = [u_int, uT_ev]
    m_evs = [m_int, m0_ev]
    if domain.kind == "torus":
        tb, x_lo, x_hi, _ = bnd
        stack = np.vstack([np.column_stack([tb, x_lo]), np.column_stack([tb, x_hi])])
        ub_ev = eval_values(u_net, stack)
        mb_ev = eval_values(m_net, stack)
        comp["period"] = L.period_term(ub_ev, mb_ev, w=w.period)
        u_evs.append(ub_ev)
        m_evs.append(mb_ev)

    if setup.mode != "none" and (weights.tpk_u > 0 or weights.tpk_m > 0):
        om, dl = setup.omega, weights.delta
        if isinstance(model, LQModel):
            if setup.mode == "u":
                zeros = np.column_stack([batch.t, np.zeros(batch.Mt)])
                u0_ev = eval_values(u_net, zeros)
                comp["tpk_u"] = tpk.penalty_u_lq_term(
                    u_int, u0_ev, batch, model.sqrtC, model.L, model.T, om, dl,
                    w=w.tpk_u)
                u_evs.append(u0_ev)
            else:
                comp["tpk_u"] = tpk.penalty_du_lq_term(
                    u_int, batch, model.sqrtC, model.L, model.T, om, dl, w=w.tpk_u)
            comp["tpk_m"] = tpk.penalty_mu_lq_term(
                m_int, batch, model.L, model.T, om, dl, mu_bar=setup.mu_bar,
                w=w.tpk_m)
        else:
            erg = setup.ergodic
            xs = batch.x[:, 0]
            comp["tpk_u"] = tpk.penalty_u_local_term(
                u_int, batch, model.T, om, dl, erg.ubar_at(xs), w=w.tpk_u)
            comp["tpk_m"] = tpk.penalty_m_local_term(
                m_int, batch, model.T, om, dl, erg.mbar_at(xs), w=w.tpk_m)

    total = L.total_from_components(comp, weights)
    return comp, total, u_evs, m_evs


def _draw_finite(model, domain, spec, rng):
    t = sample_times(spec, rng)
    x = sample_space(spec, rng, spec.Mx)
    batch = L.InteriorBatch(t, x)
    x0 = sample_space(spec, rng, spec.Mb)
    xT = sample_space(spec, rng, spec.Mb)
    bnd = boundary_pairs(spec, rng, spec.Mb) if domain.kind == "torus" else None
    return batch, x0, xT, bnd


def train_finite(model, spec, weights, cfg, setup=None, out_dir=None,
                 log_name="loss_log.csv"):
    """Run Adam on the weighted objective; returns (u_net, m_net, report)."""
    setup = setup or TurnpikeSetup()
    domain = L.model_domain(model)
    rng = stream_rng(cfg.seed, 0)
    val_rng = stream_rng(cfg.seed, 1)
    init_rng = stream_rng(cfg.seed, 2)

    hidden = [cfg.width] * cfg.depth
    u_net = xavier_mlp(2, hidden, init_rng, out="identity")
    m_net = xavier_mlp(2, hidden, init_rng, out="exp")
    adam_u = AdamState(u_net.params(), cfg.lr0, cfg.lr1, cfg.decay_span())
    adam_m = AdamState(m_net.params(), cfg.lr0, cfg.lr1, cfg.decay_span())

    report = TrainReport(columns=["iter", *COMPONENTS, "total", "val_total"])
    t0 = time.perf_counter()

    for n in range(cfg.iters):
        batch, x0, xT, bnd = _draw_finite(model, domain, spec, rng)
        comp, total, u_evs, m_evs = _finite_components(
            u_net, m_net, model, domain, weights, setup, batch, x0, xT, bnd,
            with_grads=True)
        if not np.isfinite(total):
            raise Divergence(f"non-finite training loss at iteration {n}: {comp}")

        gu = accumulate_grads(zero_grads_like(u_net.params()), u_evs)
        gm = accumulate_grads(zero_grads_like(m_net.params()), m_evs)
        adam_u.step(u_net.params(), gu)
        adam_m.step(m_net.params(), gm)

        if n % cfg.log_every == 0 or n == cfg.iters - 1:
            vb = _draw_finite(model, domain, spec, val_rng)
            vcomp, vtotal, _, _ = _finite_components(
                u_net, m_net, model, domain, weights, setup, *vb, with_grads=False)
            if not np.isfinite(vtotal):
                raise Divergence(f"non-finite validation loss at iteration {n}")
            report.log(iter=n, **comp, total=total, val_total=vtotal)

    report.wall_seconds = time.perf_counter() - t0

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        ckpt = os.path.join(out_dir, "checkpoint.ckpt")
        save_checkpoint(ckpt, {"u": u_net, "m": m_net},
                        adams={"u": adam_u, "m": adam_m},
                        seed=cfg.seed, iteration=cfg.iters,
                        meta={"model": type(model).__name__})
        report.checkpoint = ckpt
        report.to_csv(os.path.join(out_dir, log_name))

    return u_net, m_net, report

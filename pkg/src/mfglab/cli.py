"""Command-line driver: one executable with a subcommand per solver plus
comparison and curve extraction.

Exit codes: 0 success, 2 solver diagnostic failure (divergence, Newton or
fixed-point trouble), 3 configuration error.  ``MFG_THREADS`` caps the
linear-algebra thread pools when threadpoolctl is available.
"""

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import config as C
from . import ergodic as E
from . import evaluate as ev
from . import fdm as F
from . import lq as LQ
from .checkpoint import load_checkpoint
from .losses import model_domain
from .models import LQModel
from .sampling import Domain
from .training import Divergence, TurnpikeSetup, train_finite


def _limit_threads():
    cap = os.environ.get("MFG_THREADS")
    if not cap:
        return
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(int(cap))
    except Exception:
        pass


def _config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_meta(out_dir, solver, cfg, extra=None):
    meta = {"solver": solver, "config": cfg, "config_hash": _config_hash(cfg)}
    if extra:
        meta.update(extra)
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, default=float)


def _load_cfg(args):
    cfg = C.load_config(args.config) if args.config else {}
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def cmd_ergodic_train(args):
    cfg = _load_cfg(args)
    model = C.build_model(cfg)
    if isinstance(model, LQModel):
        raise C.ConfigError("ergodic-train solves the torus model; use model.type=local")
    tc = C.build_train_config(cfg)
    weights = E.ErgodicWeights(
        hjb=cfg.get("weights.hjb", 50.0), kfp=cfg.get("weights.kfp", 1.0),
        norm=cfg.get("weights.norm", 50.0), period=cfg.get("weights.period", 25.0))
    os.makedirs(args.out, exist_ok=True)
    sol, report = E.ergodic_train(
        model, tc, weights=weights,
        batch_size=int(cfg.get("erg.batch", 1024)),
        grid_nodes=int(cfg.get("erg.grid", 1001)), out_dir=args.out)
    _write_meta(args.out, "ergodic", cfg,
                {"lambda": sol.lam, "min_mbar": sol.min_mbar, "omega": sol.omega})
    print(f"ergodic-train: lambda={sol.lam:.6f} min_mbar={sol.min_mbar:.6f} "
          f"omega={sol.omega:.6f} wall={report.wall_seconds:.1f}s")
    return 0


def _turnpike_setup(cfg, model, mode):
    if mode == "none":
        return TurnpikeSetup()
    if isinstance(model, LQModel):
        omega = cfg.get("tpk.omega_override", model.omega)
        return TurnpikeSetup(mode, omega=omega, mu_bar=cfg.get("tpk.mu_bar", 0.0))
    if mode == "du":
        raise C.ConfigError("turnpike mode 'du' is only defined for the lq model")
    erg_dir = cfg.get("tpk.ergodic_dir")
    if not erg_dir:
        raise C.ConfigError("local turnpike runs need tpk.ergodic_dir")
    sol = E.ErgodicSolution.from_tabulation_csv(
        os.path.join(erg_dir, "tabulation.csv"),
        os.path.join(erg_dir, "ergodic.json"))
    ck = os.path.join(erg_dir, "checkpoint.ckpt")
    if os.path.exists(ck):
        nets = load_checkpoint(ck)["nets"]
        sol.u_net, sol.m_net = nets["u"], nets["m"]
    omega = cfg.get("tpk.omega_override", sol.omega)
    if omega is None:
        raise C.ConfigError("ergodic dir lacks omega; set tpk.omega_override")
    return TurnpikeSetup(mode, omega=omega, ergodic=sol)


def cmd_dgm_train(args):
    cfg = _load_cfg(args)
    if args.model:
        cfg["model.type"] = args.model
    model = C.build_model(cfg)
    mode = args.turnpike
    weights = C.build_weights(cfg, model, turnpike_mode=mode)
    spec = C.build_spec(cfg, model)
    tc = C.build_train_config(cfg)
    setup = _turnpike_setup(cfg, model, mode)
    os.makedirs(args.out, exist_ok=True)
    u_net, m_net, report = train_finite(model, spec, weights, tc, setup,
                                        out_dir=args.out)
    _write_meta(args.out, "dgm", cfg, {"turnpike": mode,
                                       "wall_seconds": report.wall_seconds})
    print(f"dgm-train[{mode}]: final total={report.rows[-1][report.columns.index('total')]:.4e} "
          f"wall={report.wall_seconds:.1f}s")
    return 0


def cmd_fdm_solve(args):
    cfg = _load_cfg(args)
    model = C.build_model(cfg)
    if isinstance(model, LQModel):
        raise C.ConfigError("fdm-solve discretises the torus model only")
    grid = F.FdmGrid(int(cfg.get("fdm.NT", 200)), int(cfg.get("fdm.Nh", 200)),
                     model.T)
    init = None
    if cfg.get("fdm.init", "flat") == "ergodic":
        path = cfg.get("fdm.ergodic_csv")
        if not path:
            raise C.ConfigError("fdm.init=ergodic needs fdm.ergodic_csv")
        sol_tab = E.ErgodicSolution.from_tabulation_csv(path)
        init = sol_tab.mbar_at(grid.x_cells)
    sol = F.fixed_point_solve(
        model, grid, damping=cfg.get("fdm.damping", 0.5),
        K=int(cfg.get("fdm.K", 200)), tol=cfg.get("fdm.tol", 1e-6),
        newton_tol=cfg.get("fdm.newton_tol", 1e-10),
        max_newton=int(cfg.get("fdm.max_newton", 30)), init=init)
    os.makedirs(args.out, exist_ok=True)
    ev.write_long_csv(os.path.join(args.out, "grids.csv"),
                      grid.t_nodes, grid.x_nodes, {"U": sol.U, "M": sol.M})
    with open(os.path.join(args.out, "diagnostics.json"), "w") as fh:
        json.dump(sol.diagnostics(), fh, indent=2)
    _write_meta(args.out, "fdm", cfg, {"converged": sol.converged})
    print(f"fdm-solve: iters={sol.iterations} converged={sol.converged} "
          f"mass_drift={sol.mass_drift:.2e}")
    return 0 if sol.converged else 2


def cmd_lq_analytic(args):
    cfg = _load_cfg(args)
    cfg.setdefault("model.type", "lq")
    model = C.build_model(cfg)
    if not isinstance(model, LQModel):
        raise C.ConfigError("lq-analytic needs model.type=lq")
    sol = LQ.solve_lq(model, n_nodes=int(cfg.get("eval.nt", 2001)))
    os.makedirs(args.out, exist_ok=True)
    import csv as _csv
    with open(os.path.join(args.out, "trajectories.csv"), "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["t", "phi", "chi", "mu", "psi"])
        for row in zip(sol.t_grid, sol.phi, sol.chi, sol.mu, sol.psi):
            w.writerow([repr(float(v)) for v in row])
    grid = ev.EvalGrid(model.T, Domain("interval", 1, model.L),
                       n_t=int(args.grid_nt or 200), n_x=int(args.grid_nx or 200))
    U, M = ev.tabulate_lq(sol, grid)
    ev.write_long_csv(os.path.join(args.out, "ugrid.csv"), grid.t, grid.x,
                      {"u": U, "m": M})
    report = LQ.verify_turnpike_proposition(model)
    with open(os.path.join(args.out, "proposition.json"), "w") as fh:
        json.dump({"omega": model.omega, "ratios": report}, fh, indent=2)
    _write_meta(args.out, "lq", cfg, {"shooting_c": sol.c})
    print(f"lq-analytic: c={sol.c:.6f} ratios={report}")
    return 0


def _load_run(run_dir, grid):
    """Tabulate any previously produced run directory on a grid."""
    with open(os.path.join(run_dir, "meta.json")) as fh:
        meta = json.load(fh)
    solver = meta["solver"]
    cfg = meta.get("config", {})
    if solver == "dgm":
        nets = load_checkpoint(os.path.join(run_dir, "checkpoint.ckpt"))["nets"]
        return ev.tabulate_nets(nets["u"], nets["m"], grid), meta
    if solver == "fdm":
        t, x, fields = ev.read_long_csv(os.path.join(run_dir, "grids.csv"))
        tmp = _GridHolder(t, x, fields["U"], fields["M"])
        return ev.tabulate_fdm(tmp, grid), meta
    if solver == "lq":
        model = C.build_model({**cfg, "model.type": "lq"})
        sol = LQ.solve_lq(model)
        return ev.tabulate_lq(sol, grid), meta
    raise C.ConfigError(f"cannot compare run of solver {solver!r}")


class _GridHolder:
    """Adapter giving read-back CSV grids the tabulate_fdm interface."""

    def __init__(self, t, x, U, M):
        self.grid = type("G", (), {"t_nodes": t, "x_nodes": x})()
        self.U = U
        self.M = M
        self.residual_history = []


def _run_grid(run_dir, args):
    with open(os.path.join(run_dir, "meta.json")) as fh:
        meta = json.load(fh)
    cfg = meta.get("config", {})
    model = C.build_model(cfg)
    lq = isinstance(model, LQModel)
    n_t = int(args.grid_nt or (2000 if lq else 200))
    n_x = int(args.grid_nx or (2000 if lq else 200))
    return ev.EvalGrid(model.T, model_domain(model), n_t=n_t, n_x=n_x), model


def cmd_compare(args):
    grid, _ = _run_grid(args.run_a, args)
    (Ua, Ma), meta_a = _load_run(args.run_a, grid)
    (Ub, Mb), meta_b = _load_run(args.run_b, grid)
    os.makedirs(args.out, exist_ok=True)
    ev.write_long_csv(os.path.join(args.out, "err_u.csv"), grid.t, grid.x,
                      {"rel_err": ev.rel_error(Ua, Ub, "map")})
    ev.write_long_csv(os.path.join(args.out, "err_m.csv"), grid.t, grid.x,
                      {"rel_err": ev.rel_error(Ma, Mb, "map")})
    scalars = {
        "u_l2": ev.rel_error(Ua, Ub, "l2"),
        "m_l2": ev.rel_error(Ma, Mb, "l2"),
        "grid": [grid.n_t, grid.n_x],
        "eps_rel": 1e-8,
        "solver_a": meta_a["solver"],
        "solver_b": meta_b["solver"],
    }
    with open(os.path.join(args.out, "scalars.json"), "w") as fh:
        json.dump(scalars, fh, indent=2)
    print(f"compare: u_l2={scalars['u_l2']:.4e} m_l2={scalars['m_l2']:.4e}")
    return 0


def cmd_curves(args):
    grid, model = _run_grid(args.run, args)
    (U, M), meta = _load_run(args.run, grid)
    extra = None
    if isinstance(model, LQModel):
        erg = LQ.lq_ergodic(model)
        ubar = erg.vbar(grid.x)
        mbar = erg.mbar(grid.x)
        extra = {"mu": ev.lq_mean_curve(M, grid)}
    else:
        if not args.ergodic:
            raise C.ConfigError("curves for the local model need --ergodic DIR")
        sol = E.ErgodicSolution.from_tabulation_csv(
            os.path.join(args.ergodic, "tabulation.csv"),
            os.path.join(args.ergodic, "ergodic.json"))
        ubar = sol.ubar_at(grid.x)
        mbar = sol.mbar_at(grid.x)
    curves = ev.turnpike_curves(U, M, grid, ubar, mbar)
    os.makedirs(args.out, exist_ok=True)
    ev.write_curves_csv(os.path.join(args.out, "curves.csv"), curves, extra)
    print(f"curves: wrote {os.path.join(args.out, 'curves.csv')}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mfglab",
                                description="Mean field game solver suite")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--grid-nt", type=int, default=None)
        sp.add_argument("--grid-nx", type=int, default=None)

    sp = sub.add_parser("ergodic-train", help="train the stationary solver")
    common(sp)
    sp.set_defaults(fn=cmd_ergodic_train)

    sp = sub.add_parser("dgm-train", help="train the finite-horizon solver")
    sp.add_argument("--model", choices=["local", "lq"])
    sp.add_argument("--turnpike", choices=["none", "u", "du"], default="none")
    common(sp)
    sp.set_defaults(fn=cmd_dgm_train)

    sp = sub.add_parser("fdm-solve", help="finite-difference reference solve")
    common(sp)
    sp.set_defaults(fn=cmd_fdm_solve)

    sp = sub.add_parser("lq-analytic", help="closed-form LQ solution and checks")
    common(sp)
    sp.set_defaults(fn=cmd_lq_analytic)

    sp = sub.add_parser("compare", help="relative errors between two runs")
    sp.add_argument("run_a")
    sp.add_argument("run_b")
    common(sp, config=False)
    sp.set_defaults(fn=cmd_compare)

    sp = sub.add_parser("curves", help="turnpike distance curves for a run")
    sp.add_argument("run")
    sp.add_argument("--ergodic", help="ergodic-train output dir (local model)")
    common(sp, config=False)
    sp.set_defaults(fn=cmd_curves)
    return p


def main(argv=None):
    _limit_threads()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except C.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 3
    except (Divergence, F.NewtonError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

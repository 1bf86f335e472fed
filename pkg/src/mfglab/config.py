"""Flat key-value configuration files.

Format: one ``dotted.key = value`` per line, ``#`` comments, blank lines
ignored.  Values are parsed as JSON scalars (numbers, true/false, quoted
strings); anything unparseable is kept as a bare string.

Recognised keys and defaults (model-dependent defaults in parentheses):

  model.type        local | lq                      (local)
  model.gamma       coupling strength               (1.0)
  model.A           potential amplitude             (50.0)
  model.c1/.c2/.c3  potential coefficients          (0.1, 1.0, 0.1)
  model.psi         terminal amplitude              (1.0)
  model.mu0         initial mean                    (0.5 local, 1.0 lq)
  model.sigma0      initial std                     (0.2)
  model.T           horizon                         (5.0 local, 10.0 lq)
  model.Q/.B/.Psi/.r/.sigma/.L   LQ parameters      (2, 2, 1, 1, 1, 3)
  seed              master seed                     (0)
  batch.Mt/.Mx/.Mb  batch sizes                     (10, 1024, 1024)
  batch.beta_a/.beta_b  time-sampling Beta law      (0.5, 0.5)
  train.iters       SGD iterations                  (20000)
  train.width/.depth  net architecture              (100, 2)
  train.lr0/.lr1    learning-rate schedule ends     (1e-2, 1e-5)
  train.decay       schedule length, 0 = iters      (0)
  train.log_every   logging interval                (1000)
  weights.hjb/.kfp/.init/.term/.norm/.period        (50,1,100,600,50,25 local;
                                                     100,10,100,600,50,0 lq)
  tpk.mode          none | u | du                   (none)
  tpk.Cu/.Cm        turnpike weights                (10, 100 local; 1, 0.1 lq)
  tpk.delta         window fraction                 (0.1 local, 0.2 lq)
  tpk.omega_override  rate override                 (unset: rate_local or sqrt(C-B))
  tpk.ergodic_dir   ergodic-train output dir (local turnpike runs)
  erg.batch         ergodic spatial batch size      (1024)
  erg.grid          ergodic tabulation nodes        (1001)
  fdm.NT/.Nh        grid resolution                 (200, 200)
  fdm.damping       Picard relaxation               (0.5)
  fdm.K             max outer iterations            (200)
  fdm.tol           outer stopping tolerance        (1e-6)
  fdm.newton_tol/.max_newton                        (1e-10, 30)
  fdm.init          flat | ergodic                  (flat)
  fdm.ergodic_csv   tabulation for fdm.init=ergodic
  eval.nt/.nx       comparison grid                 (200/200 local, 2000/2000 lq)
"""

import json

from .losses import LossWeights, model_domain
from .models import LocalCouplingModel, LQModel
from .sampling import BatchSpec
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def parse_config_text(text):
    cfg = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigError(f"line {ln}: empty key")
        try:
            cfg[key] = json.loads(val)
        except json.JSONDecodeError:
            cfg[key] = val
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e


def _num(cfg, key, default):
    v = cfg.get(key, default)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return v


def build_model(cfg):
    kind = cfg.get("model.type", "local")
    try:
        if kind == "local":
            return LocalCouplingModel(
                gamma=_num(cfg, "model.gamma", 1.0),
                potential_amplitude=_num(cfg, "model.A", 50.0),
                potential_coeffs=(_num(cfg, "model.c1", 0.1),
                                  _num(cfg, "model.c2", 1.0),
                                  _num(cfg, "model.c3", 0.1)),
                psi=_num(cfg, "model.psi", 1.0),
                mu0=_num(cfg, "model.mu0", 0.5),
                sigma0=_num(cfg, "model.sigma0", 0.2),
                T=_num(cfg, "model.T", 5.0),
            )
        if kind == "lq":
            return LQModel(
                Q=_num(cfg, "model.Q", 2.0),
                B=_num(cfg, "model.B", 2.0),
                Psi=_num(cfg, "model.Psi", 1.0),
                r=_num(cfg, "model.r", 1.0),
                sigma=_num(cfg, "model.sigma", 1.0),
                T=_num(cfg, "model.T", 10.0),
                L=_num(cfg, "model.L", 3.0),
                mu0=_num(cfg, "model.mu0", 1.0),
                sigma0=_num(cfg, "model.sigma0", 0.2),
            )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    raise ConfigError(f"model.type must be 'local' or 'lq', got {kind!r}")


def build_spec(cfg, model):
    try:
        return BatchSpec(
            Mt=int(_num(cfg, "batch.Mt", 10)),
            Mx=int(_num(cfg, "batch.Mx", 1024)),
            Mb=int(_num(cfg, "batch.Mb", 1024)),
            beta_a=_num(cfg, "batch.beta_a", 0.5),
            beta_b=_num(cfg, "batch.beta_b", 0.5),
            domain=model_domain(model),
            T=model.T,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def build_weights(cfg, model, turnpike_mode="none"):
    lq = isinstance(model, LQModel)
    try:
        return LossWeights(
            hjb=_num(cfg, "weights.hjb", 100.0 if lq else 50.0),
            kfp=_num(cfg, "weights.kfp", 10.0 if lq else 1.0),
            init=_num(cfg, "weights.init", 100.0),
            term=_num(cfg, "weights.term", 600.0),
            norm=_num(cfg, "weights.norm", 50.0),
            period=_num(cfg, "weights.period", 0.0 if lq else 25.0),
            tpk_u=_num(cfg, "tpk.Cu", 1.0 if lq else 10.0)
            if turnpike_mode != "none" else 0.0,
            tpk_m=_num(cfg, "tpk.Cm", 0.1 if lq else 100.0)
            if turnpike_mode != "none" else 0.0,
            delta=_num(cfg, "tpk.delta", 0.2 if lq else 0.1)
            if turnpike_mode != "none" else 0.0,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def build_train_config(cfg, seed=None):
    try:
        return TrainConfig(
            iters=int(_num(cfg, "train.iters", 20_000)),
            width=int(_num(cfg, "train.width", 100)),
            depth=int(_num(cfg, "train.depth", 2)),
            lr0=_num(cfg, "train.lr0", 1e-2),
            lr1=_num(cfg, "train.lr1", 1e-5),
            n_decay=int(_num(cfg, "train.decay", 0)),
            log_every=int(_num(cfg, "train.log_every", 1000)),
            seed=int(_num(cfg, "seed", 0)) if seed is None else int(seed),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e

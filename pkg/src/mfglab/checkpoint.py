"""Single-file checkpoint: one JSON header line followed by a flat
little-endian float64 payload.

The header describes every stored array (name, shape, element offset), the
network architectures, optimiser hyperparameters and counters, the master
seed and the iteration count, so a checkpoint can be reloaded without any
side information.
"""

import json

import numpy as np

from .nets import MLP, AdamState

MAGIC = "mfglab-ckpt"


def _net_arrays(name, net):
    out = []
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        out.append((f"{name}.W{i}", W))
        out.append((f"{name}.b{i}", b))
    return out


def save_checkpoint(path, nets, adams=None, scalars=None, seed=0, iteration=0, meta=None):
    """nets: {name: MLP}; adams: {name: AdamState}; scalars: {name: float}."""
    adams = adams or {}
    scalars = scalars or {}
    arrays = []
    for name, net in nets.items():
        arrays.extend(_net_arrays(name, net))
    for name, st in adams.items():
        for i, a in enumerate(st.m):
            arrays.append((f"{name}.adam_m{i}", a))
        for i, a in enumerate(st.v):
            arrays.append((f"{name}.adam_v{i}", a))

    header = {
        "format": MAGIC,
        "version": 1,
        "seed": seed,
        "iteration": iteration,
        "scalars": scalars,
        "nets": {
            name: {"sizes": net.sizes, "out": net.out} for name, net in nets.items()
        },
        "adam": {
            name: {
                "t": st.t, "lr0": st.lr0, "lr1": st.lr1, "n_decay": st.n_decay,
                "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps,
                "n_params": len(st.m),
            }
            for name, st in adams.items()
        },
        "meta": meta or {},
        "arrays": [],
    }
    offset = 0
    for name, a in arrays:
        header["arrays"].append({"name": name, "shape": list(a.shape), "offset": offset})
        offset += a.size

    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != MAGIC:
            raise ValueError(f"{path} is not a {MAGIC} file")
        payload = np.frombuffer(fh.read(), dtype="<f8")

    store = {}
    for rec in header["arrays"]:
        n = int(np.prod(rec["shape"])) if rec["shape"] else 1
        store[rec["name"]] = payload[rec["offset"]:rec["offset"] + n].reshape(rec["shape"]).copy()

    nets = {}
    for name, arch in header["nets"].items():
        n_layers = len(arch["sizes"]) - 1
        Ws = [store[f"{name}.W{i}"] for i in range(n_layers)]
        bs = [store[f"{name}.b{i}"] for i in range(n_layers)]
        nets[name] = MLP(Ws, bs, out=arch["out"])

    adams = {}
    for name, rec in header.get("adam", {}).items():
        st = AdamState([store[f"{name}.adam_m{i}"] for i in range(rec["n_params"])],
                       lr0=rec["lr0"], lr1=rec["lr1"], n_decay=rec["n_decay"],
                       beta1=rec["beta1"], beta2=rec["beta2"], eps=rec["eps"])
        st.m = [store[f"{name}.adam_m{i}"] for i in range(rec["n_params"])]
        st.v = [store[f"{name}.adam_v{i}"] for i in range(rec["n_params"])]
        st.t = rec["t"]
        adams[name] = st

    return {
        "nets": nets,
        "adams": adams,
        "scalars": header.get("scalars", {}),
        "seed": header["seed"],
        "iteration": header["iteration"],
        "meta": header.get("meta", {}),
    }

"""Fixed-architecture MLPs, Xavier initialisation, the Adam optimiser with a
linear learning-rate schedule, and the training evaluation containers that
carry values, input derivatives, and upstream-gradient accumulators."""

from dataclasses import dataclass, field

import numpy as np

from . import backend

OUT_KINDS = {"identity": backend.IDENTITY, "exp": backend.EXP}


class MLP:
    """Feed-forward net: sigmoid hidden layers, scalar identity or exp output."""

    def __init__(self, weights, biases, out="identity"):
        if out not in OUT_KINDS:
            raise ValueError(f"unknown output activation {out!r}")
        self.weights = [np.ascontiguousarray(W, dtype=float) for W in weights]
        self.biases = [np.ascontiguousarray(b, dtype=float) for b in biases]
        self.out = out
        self.kind = OUT_KINDS[out]
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != b.shape[0]:
                raise ValueError("weight/bias shape mismatch")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output dimension must be 1")

    @property
    def in_dim(self):
        return self.weights[0].shape[1]

    @property
    def sizes(self):
        return [self.in_dim] + [W.shape[0] for W in self.weights]

    def params(self):
        """Flat parameter list [W0, b0, W1, b1, ...] (views, not copies)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out

    def set_params(self, flat):
        n = len(self.weights)
        self.weights = [np.ascontiguousarray(flat[2 * i]) for i in range(n)]
        self.biases = [np.ascontiguousarray(flat[2 * i + 1]) for i in range(n)]

    def copy(self):
        return MLP([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.out)

    def __call__(self, X):
        X = _as_batch(X, self.in_dim)
        return backend.value_forward(self.weights, self.biases, self.kind, X)


def xavier_mlp(in_dim, hidden, rng, out="identity"):
    """Xavier-uniform weights (variance 2/(fan_in+fan_out)), zero biases."""
    sizes = [in_dim] + list(hidden) + [1]
    if any(s <= 0 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        Ws.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return MLP(Ws, bs, out=out)


def _as_batch(X, in_dim):
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, in_dim) if in_dim == 1 else X.reshape(1, -1)
    if X.shape[1] != in_dim:
        raise ValueError(f"input dimension {X.shape[1]} != net dimension {in_dim}")
    return X


def forward(net, X):
    return net(X)


def input_partials(net, X, sec_axes=None):
    """Value, time derivative, spatial gradient and Laplacian at each input.

    For a net on (t, x1..xd) the default treats axis 0 as time and axes 1..d
    as space; for a space-only net pass ``sec_axes=range(d)``.  Returns
    (value, d/dt or None, gradient (M,d_space), laplacian).
    """
    X = _as_batch(X, net.in_dim)
    if sec_axes is None:
        sec_axes = list(range(1, net.in_dim))
        has_time = True
    else:
        sec_axes = list(sec_axes)
        has_time = False
    y, dy, d2y, _ = backend.partials_forward_ctx(
        net.weights, net.biases, net.kind, X, sec_axes
    )
    lap = d2y.sum(axis=1)
    if has_time:
        return y, dy[:, 0], dy[:, 1:], lap
    return y, None, dy, lap


@dataclass
class NetEval:
    """One kernel evaluation of a net on a batch plus gradient accumulators.

    ``dy``/``d2y`` are None for value-only evaluations.  Loss terms add their
    weighted upstream derivatives into the ``*bar`` buffers; ``backward``
    turns the accumulated buffers into parameter gradients once.
    """

    net: MLP
    x: np.ndarray
    y: np.ndarray
    dy: np.ndarray = None
    d2y: np.ndarray = None
    ctx: tuple = None
    ybar: np.ndarray = None
    dybar: np.ndarray = None
    d2ybar: np.ndarray = None
    sec_axes: list = field(default_factory=list)

    def backward(self):
        if self.dy is None:
            return backend.value_backward(
                self.net.weights, self.net.biases, self.ctx, self.ybar
            )
        return backend.partials_backward(
            self.net.weights, self.net.biases, self.ctx,
            self.ybar, self.dybar, self.d2ybar,
        )


def eval_values(net, X):
    X = _as_batch(X, net.in_dim)
    y, ctx = backend.value_forward_ctx(net.weights, net.biases, net.kind, X)
    return NetEval(net, X, y, ctx=ctx, ybar=np.zeros_like(y))


def eval_partials(net, X, sec_axes):
    X = _as_batch(X, net.in_dim)
    sec_axes = list(sec_axes)
    y, dy, d2y, ctx = backend.partials_forward_ctx(
        net.weights, net.biases, net.kind, X, sec_axes
    )
    return NetEval(
        net, X, y, dy, d2y, ctx,
        ybar=np.zeros_like(y), dybar=np.zeros_like(dy), d2ybar=np.zeros_like(d2y),
        sec_axes=sec_axes,
    )


def accumulate_grads(total, evals):
    """Sum per-eval parameter gradients into ``total`` (list of arrays)."""
    for ev in evals:
        for (gW, gb), slot in zip(ev.backward(), range(0, len(total), 2)):
            total[slot] += gW
            total[slot + 1] += gb
    return total


def zero_grads_like(params):
    return [np.zeros_like(p) for p in params]


class AdamState:
    """Adam with bias correction and a linear learning-rate decay.

    The rate at iteration n (0-based) interpolates linearly from ``lr0`` to
    ``lr1`` over ``n_decay`` iterations and stays at ``lr1`` afterwards.
    """

    def __init__(self, params, lr0=1e-2, lr1=1e-5, n_decay=300_000,
                 beta1=0.9, beta2=0.999, eps=1e-7):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.lr0, self.lr1, self.n_decay = lr0, lr1, n_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def rate(self, n=None):
        n = self.t if n is None else n
        frac = min(n / self.n_decay, 1.0) if self.n_decay > 0 else 1.0
        return self.lr0 + (self.lr1 - self.lr0) * frac

    def step(self, params, grads):
        """Update ``params`` in place; returns the learning rate used."""
        if len(params) != len(self.m):
            raise ValueError("parameter count mismatch")
        lr = self.rate(self.t)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p.shape != g.shape:
                raise ValueError("gradient shape mismatch")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return lr

    def state_arrays(self):
        return self.m + self.v

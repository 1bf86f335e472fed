"""Pure-numpy MLP kernels: batched forward pass, analytic input derivatives,
and reverse-mode parameter gradients that also backpropagate through the
input-derivative channels.

Network layout: hidden layers with sigmoid activation followed by a scalar
output layer with identity or exponential activation.  Weights W have shape
(n_out, n_in), biases (n_out,).  A batch X has shape (M, n_in).

Derivative channels are directional along input axes.  First derivatives are
computed along every input axis; second (pure) derivatives only along the
axes listed in ``sec_axes`` (the spatial ones, summed later into a
Laplacian).  The tangent recursion per hidden layer l and axis e is

    u_l = j_{l-1} W_l^T          j_l = s1 * u_l
    v_l = k_{l-1} W_l^T          k_l = s2 * u_l^2 + s1 * v_l

with s1, s2, s3 the sigmoid derivatives at the pre-activation.  The adjoint
recursion in ``partials_backward`` is the exact transpose of the whole
forward-with-tangents computation, so parameter gradients are exact for
losses that depend on values, first derivatives, and pure second derivatives.
"""

import numpy as np

IDENTITY = 0
EXP = 1

name = "numpy"
compiled = False


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def _sig_derivs(a):
    """Sigmoid value and its first three derivatives, all from the value."""
    s = _sigmoid(a)
    s1 = s * (1.0 - s)
    s2 = s1 * (1.0 - 2.0 * s)
    s3 = s1 * (1.0 - 6.0 * s + 6.0 * s * s)
    return s, s1, s2, s3


def _out_derivs(s, kind):
    if kind == IDENTITY:
        one = np.ones_like(s)
        zero = np.zeros_like(s)
        return s.copy(), one, zero, zero
    es = np.exp(s)
    return es, es, es, es


def value_forward(Ws, bs, kind, X):
    Z = X
    for W, b in zip(Ws[:-1], bs[:-1]):
        Z = _sigmoid(Z @ W.T + b)
    s = (Z @ Ws[-1].T + bs[-1])[:, 0]
    return s if kind == IDENTITY else np.exp(s)


def value_forward_ctx(Ws, bs, kind, X):
    Zs = [X]
    S1s = []
    Z = X
    for W, b in zip(Ws[:-1], bs[:-1]):
        s, s1, _, _ = _sig_derivs(Z @ W.T + b)
        Z = s
        Zs.append(Z)
        S1s.append(s1)
    s = (Z @ Ws[-1].T + bs[-1])[:, 0]
    y, g1, _, _ = _out_derivs(s, kind)
    return y, (Zs, S1s, g1)


def value_backward(Ws, bs, ctx, ybar):
    Zs, S1s, g1 = ctx
    H = len(Ws) - 1
    sbar = ybar * g1
    gW = [None] * len(Ws)
    gb = [None] * len(Ws)
    gW[H] = sbar[None, :] @ Zs[H]
    gb[H] = np.array([sbar.sum()])
    zbar = np.outer(sbar, Ws[H][0])
    for l in range(H - 1, -1, -1):
        abar = zbar * S1s[l]
        gW[l] = abar.T @ Zs[l]
        gb[l] = abar.sum(axis=0)
        if l > 0:
            zbar = abar @ Ws[l]
    return list(zip(gW, gb))


def partials_forward_ctx(Ws, bs, kind, X, sec_axes):
    M, n_in = X.shape
    H = len(Ws) - 1
    sec_axes = list(sec_axes)
    n_sec = len(sec_axes)

    Zs = [X]
    S1s, S2s, S3s = [], [], []
    Js, Us, Vs, Ks = [], [], [], []

    Z = X
    for l in range(H):
        W, b = Ws[l], bs[l]
        z, s1, s2, s3 = _sig_derivs(Z @ W.T + b)
        if l == 0:
            U = [np.broadcast_to(W[:, e], (M, W.shape[0])) for e in range(n_in)]
            V = [np.zeros((M, W.shape[0])) for _ in range(n_sec)]
        else:
            U = [Js[l - 1][e] @ W.T for e in range(n_in)]
            V = [Ks[l - 1][i] @ W.T for i in range(n_sec)]
        J = [s1 * U[e] for e in range(n_in)]
        K = [s2 * U[sec_axes[i]] ** 2 + s1 * V[i] for i in range(n_sec)]
        Z = z
        Zs.append(Z)
        S1s.append(s1)
        S2s.append(s2)
        S3s.append(s3)
        Us.append(U)
        Js.append(J)
        Vs.append(V)
        Ks.append(K)

    wo = Ws[H][0]
    s = Z @ wo + bs[H][0]
    se = np.stack([Js[H - 1][e] @ wo for e in range(n_in)], axis=1)
    see = (
        np.stack([Ks[H - 1][i] @ wo for i in range(n_sec)], axis=1)
        if n_sec
        else np.zeros((M, 0))
    )
    y, g1, g2, g3 = _out_derivs(s, kind)
    dy = g1[:, None] * se
    d2y = g2[:, None] * se[:, sec_axes] ** 2 + g1[:, None] * see

    ctx = (Zs, S1s, S2s, S3s, Us, Js, Vs, Ks, se, see, g1, g2, g3, sec_axes)
    return y, dy, d2y, ctx


def partials_backward(Ws, bs, ctx, ybar, dybar, d2ybar):
    Zs, S1s, S2s, S3s, Us, Js, Vs, Ks, se, see, g1, g2, g3, sec_axes = ctx
    H = len(Ws) - 1
    M, n_in = Zs[0].shape
    n_sec = len(sec_axes)
    wo = Ws[H][0]

    # Output layer: y = g(s), dy_e = g1*se_e, d2y_i = g2*se_i^2 + g1*see_i.
    sbar = ybar * g1 + (dybar * se).sum(axis=1) * g2
    sebar = dybar * g1[:, None]
    if n_sec:
        sec = np.asarray(sec_axes)
        sbar += (d2ybar * (g3[:, None] * se[:, sec] ** 2 + g2[:, None] * see)).sum(axis=1)
        sebar[:, sec] += 2.0 * d2ybar * g2[:, None] * se[:, sec]
        seebar = d2ybar * g1[:, None]
    else:
        seebar = np.zeros((M, 0))

    # s = Z_H.wo + b, se_e = j_H^e.wo, see_i = k_H^i.wo
    gWo = sbar[None, :] @ Zs[H]
    for e in range(n_in):
        gWo += sebar[:, e][None, :] @ Js[H - 1][e]
    for i in range(n_sec):
        gWo += seebar[:, i][None, :] @ Ks[H - 1][i]
    gbo = np.array([sbar.sum()])

    zbar = np.outer(sbar, wo)
    jbar = [np.outer(sebar[:, e], wo) for e in range(n_in)]
    kbar = [np.outer(seebar[:, i], wo) for i in range(n_sec)]

    gW = [None] * len(Ws)
    gb = [None] * len(Ws)
    gW[H] = gWo
    gb[H] = gbo

    for l in range(H - 1, -1, -1):
        s1, s2, s3 = S1s[l], S2s[l], S3s[l]
        U, V = Us[l], Vs[l]
        # z = sig(a), j_e = s1*u_e, k_i = s2*u_{sec_i}^2 + s1*v_i
        abar = zbar * s1
        ubar = [jbar[e] * s1 for e in range(n_in)]
        for e in range(n_in):
            abar += jbar[e] * s2 * U[e]
        vbar = []
        for i in range(n_sec):
            e = sec_axes[i]
            abar += kbar[i] * (s3 * U[e] ** 2 + s2 * V[i])
            ubar[e] += kbar[i] * 2.0 * s2 * U[e]
            vbar.append(kbar[i] * s1)

        # a = Z_{l-1} W^T + b, u_e = j_{l-1,e} W^T, v_i = k_{l-1,i} W^T
        g = abar.T @ Zs[l]
        if l == 0:
            for e in range(n_in):
                g[:, e] += ubar[e].sum(axis=0)
            # k_{-1} = 0: no v contribution
        else:
            for e in range(n_in):
                g += ubar[e].T @ Js[l - 1][e]
            for i in range(n_sec):
                g += vbar[i].T @ Ks[l - 1][i]
        gW[l] = g
        gb[l] = abar.sum(axis=0)

        if l > 0:
            W = Ws[l]
            zbar = abar @ W
            jbar = [ubar[e] @ W for e in range(n_in)]
            kbar = [vbar[i] @ W for i in range(n_sec)]

    return list(zip(gW, gb))

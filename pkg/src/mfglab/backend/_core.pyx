# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of numpy_backend: fused sigmoid/tangent/adjoint loops with
BLAS dgemm for the layer products.  Same recursions, same API; results agree
with the numpy backend to floating-point roundoff."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as cexp
from scipy.linalg.cython_blas cimport dgemm

name = "cython"
compiled = True
IDENTITY = 0
EXP = 1


cdef void _mm_nt(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C,
                 double beta) noexcept nogil:
    """Row-major C (M,N) = A (M,K) @ B (N,K)^T + beta * C."""
    cdef int M = A.shape[0], K = A.shape[1], N = B.shape[0]
    cdef double alpha = 1.0
    dgemm("T", "N", &N, &M, &K, &alpha, &B[0, 0], &K, &A[0, 0], &K,
          &beta, &C[0, 0], &N)


cdef void _mm_nn(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C,
                 double beta) noexcept nogil:
    """Row-major C (M,N) = A (M,K) @ B (K,N) + beta * C."""
    cdef int M = A.shape[0], K = A.shape[1], N = B.shape[1]
    cdef double alpha = 1.0
    dgemm("N", "N", &N, &M, &K, &alpha, &B[0, 0], &N, &A[0, 0], &K,
          &beta, &C[0, 0], &N)


cdef void _mm_tn(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C,
                 double beta) noexcept nogil:
    """Row-major C (M,N) = A (K,M)^T @ B (K,N) + beta * C."""
    cdef int K = A.shape[0], M = A.shape[1], N = B.shape[1]
    cdef double alpha = 1.0
    dgemm("N", "T", &N, &M, &K, &alpha, &B[0, 0], &N, &A[0, 0], &M,
          &beta, &C[0, 0], &N)


cdef inline double _sig(double a) noexcept nogil:
    cdef double e
    if a >= 0.0:
        return 1.0 / (1.0 + cexp(-a))
    e = cexp(a)
    return e / (1.0 + e)


cdef void _affine_sig(double[:, ::1] A, double[::1] b, double[:, ::1] Z,
                      double[:, ::1] S1, double[:, ::1] S2,
                      double[:, ::1] S3) noexcept nogil:
    """A holds the pre-bias product; writes activation and derivatives."""
    cdef Py_ssize_t i, j
    cdef double s, s1
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            s = _sig(A[i, j] + b[j])
            s1 = s * (1.0 - s)
            Z[i, j] = s
            S1[i, j] = s1
            S2[i, j] = s1 * (1.0 - 2.0 * s)
            S3[i, j] = s1 * (1.0 - 6.0 * s + 6.0 * s * s)


cdef void _affine_sig_value(double[:, ::1] A, double[::1] b, double[:, ::1] Z,
                            double[:, ::1] S1) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            s = _sig(A[i, j] + b[j])
            Z[i, j] = s
            S1[i, j] = s * (1.0 - s)


cdef void _dot_vec(double[:, ::1] Z, double[::1] w, double b,
                   double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(Z.shape[0]):
        acc = b
        for j in range(Z.shape[1]):
            acc += Z[i, j] * w[j]
        out[i] = acc


def value_forward(Ws, bs, int kind, cnp.ndarray[double, ndim=2] X):
    cdef int H = len(Ws) - 1
    cdef Py_ssize_t M = X.shape[0], i
    Z = X
    cdef cnp.ndarray[double, ndim=2] A, Znew, S1
    for l in range(H):
        W = Ws[l]
        A = np.empty((M, W.shape[0]))
        _mm_nt(Z, W, A, 0.0)
        Znew = np.empty_like(A)
        S1 = np.empty_like(A)
        _affine_sig_value(A, bs[l], Znew, S1)
        Z = Znew
    y = np.empty(M)
    _dot_vec(Z, Ws[H][0], bs[H][0], y)
    cdef double[::1] yv = y
    if kind == EXP:
        for i in range(M):
            yv[i] = cexp(yv[i])
    return y


def value_forward_ctx(Ws, bs, int kind, cnp.ndarray[double, ndim=2] X):
    cdef int H = len(Ws) - 1
    cdef Py_ssize_t M = X.shape[0], i
    Zs = [X]
    S1s = []
    Z = X
    cdef cnp.ndarray[double, ndim=2] A, Znew, S1
    for l in range(H):
        W = Ws[l]
        A = np.empty((M, W.shape[0]))
        _mm_nt(Z, W, A, 0.0)
        Znew = np.empty_like(A)
        S1 = np.empty_like(A)
        _affine_sig_value(A, bs[l], Znew, S1)
        Z = Znew
        Zs.append(Z)
        S1s.append(S1)
    y = np.empty(M)
    _dot_vec(Z, Ws[H][0], bs[H][0], y)
    g1 = np.empty(M)
    cdef double[::1] yv = y, g1v = g1
    if kind == EXP:
        for i in range(M):
            yv[i] = cexp(yv[i])
            g1v[i] = yv[i]
    else:
        for i in range(M):
            g1v[i] = 1.0
    return y, (Zs, S1s, g1)


def value_backward(Ws, bs, ctx, cnp.ndarray[double, ndim=1] ybar):
    Zs, S1s, g1 = ctx
    cdef int H = len(Ws) - 1
    cdef Py_ssize_t M = ybar.shape[0], i, j
    sbar = ybar * g1
    wo = Ws[H][0]
    gW = [None] * (H + 1)
    gb = [None] * (H + 1)
    gWo = np.empty((1, Zs[H].shape[1]))
    _mm_tn(sbar.reshape(M, 1), Zs[H], gWo, 0.0)
    gW[H] = gWo
    gb[H] = np.array([sbar.sum()])
    zbar = np.outer(sbar, wo)
    cdef cnp.ndarray[double, ndim=2] abar
    for l in range(H - 1, -1, -1):
        abar = zbar * S1s[l]
        g = np.empty((abar.shape[1], Zs[l].shape[1]))
        _mm_tn(abar, Zs[l], g, 0.0)
        gW[l] = g
        gb[l] = abar.sum(axis=0)
        if l > 0:
            nxt = np.empty((M, Ws[l].shape[1]))
            _mm_nn(abar, Ws[l], nxt, 0.0)
            zbar = nxt
    return list(zip(gW, gb))


cdef void _tangent_combine(double[:, ::1] S1, double[:, ::1] U,
                           double[:, ::1] J) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(S1.shape[0]):
        for j in range(S1.shape[1]):
            J[i, j] = S1[i, j] * U[i, j]


cdef void _second_combine(double[:, ::1] S1, double[:, ::1] S2,
                          double[:, ::1] U, double[:, ::1] V,
                          double[:, ::1] K) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(S1.shape[0]):
        for j in range(S1.shape[1]):
            K[i, j] = S2[i, j] * U[i, j] * U[i, j] + S1[i, j] * V[i, j]


def partials_forward_ctx(Ws, bs, int kind, cnp.ndarray[double, ndim=2] X,
                         sec_axes):
    cdef int H = len(Ws) - 1
    cdef Py_ssize_t M = X.shape[0], i, e
    cdef int n_in = X.shape[1]
    sec = list(sec_axes)
    cdef int n_sec = len(sec)

    Zs = [X]
    S1s, S2s, S3s, Us, Js, Vs, Ks = [], [], [], [], [], [], []
    Z = X
    cdef cnp.ndarray[double, ndim=2] A, Znew, S1, S2, S3
    for l in range(H):
        W = Ws[l]
        n_l = W.shape[0]
        A = np.empty((M, n_l))
        _mm_nt(Z, W, A, 0.0)
        Znew = np.empty((M, n_l)); S1 = np.empty((M, n_l))
        S2 = np.empty((M, n_l)); S3 = np.empty((M, n_l))
        _affine_sig(A, bs[l], Znew, S1, S2, S3)
        if l == 0:
            U = [np.ascontiguousarray(np.broadcast_to(W[:, ee], (M, n_l)))
                 for ee in range(n_in)]
            V = [np.zeros((M, n_l)) for _ in range(n_sec)]
        else:
            U = []
            for ee in range(n_in):
                out = np.empty((M, n_l))
                _mm_nt(Js[l - 1][ee], W, out, 0.0)
                U.append(out)
            V = []
            for ii in range(n_sec):
                out = np.empty((M, n_l))
                _mm_nt(Ks[l - 1][ii], W, out, 0.0)
                V.append(out)
        J = []
        for ee in range(n_in):
            out = np.empty((M, n_l))
            _tangent_combine(S1, U[ee], out)
            J.append(out)
        K = []
        for ii in range(n_sec):
            out = np.empty((M, n_l))
            _second_combine(S1, S2, U[sec[ii]], V[ii], out)
            K.append(out)
        Z = Znew
        Zs.append(Z); S1s.append(S1); S2s.append(S2); S3s.append(S3)
        Us.append(U); Js.append(J); Vs.append(V); Ks.append(K)

    wo = Ws[H][0]
    s = np.empty(M)
    _dot_vec(Z, wo, bs[H][0], s)
    se = np.empty((M, n_in))
    for ee in range(n_in):
        col = np.empty(M)
        _dot_vec(Js[H - 1][ee], wo, 0.0, col)
        se[:, ee] = col
    see = np.empty((M, n_sec))
    for ii in range(n_sec):
        col = np.empty(M)
        _dot_vec(Ks[H - 1][ii], wo, 0.0, col)
        see[:, ii] = col

    y = np.empty(M)
    g1 = np.empty(M); g2 = np.empty(M); g3 = np.empty(M)
    cdef double[::1] sv = s, yv = y, g1v = g1, g2v = g2, g3v = g3
    cdef double es
    if kind == EXP:
        for i in range(M):
            es = cexp(sv[i])
            yv[i] = es; g1v[i] = es; g2v[i] = es; g3v[i] = es
    else:
        for i in range(M):
            yv[i] = sv[i]; g1v[i] = 1.0; g2v[i] = 0.0; g3v[i] = 0.0

    dy = g1[:, None] * se
    if n_sec:
        d2y = g2[:, None] * se[:, sec] ** 2 + g1[:, None] * see
    else:
        d2y = np.zeros((M, 0))
    ctx = (Zs, S1s, S2s, S3s, Us, Js, Vs, Ks, se, see, g1, g2, g3, sec)
    return y, dy, d2y, ctx


cdef void _hidden_adjoint(double[:, ::1] zbar, double[:, ::1] S1,
                          double[:, ::1] S2, double[:, ::1] S3,
                          double[:, ::1] abar) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(zbar.shape[0]):
        for j in range(zbar.shape[1]):
            abar[i, j] = zbar[i, j] * S1[i, j]


cdef void _add_j_adjoint(double[:, ::1] jbar, double[:, ::1] S1,
                         double[:, ::1] S2, double[:, ::1] U,
                         double[:, ::1] abar, double[:, ::1] ubar) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(jbar.shape[0]):
        for j in range(jbar.shape[1]):
            abar[i, j] += jbar[i, j] * S2[i, j] * U[i, j]
            ubar[i, j] = jbar[i, j] * S1[i, j]


cdef void _add_k_adjoint(double[:, ::1] kbar, double[:, ::1] S1,
                         double[:, ::1] S2, double[:, ::1] S3,
                         double[:, ::1] U, double[:, ::1] V,
                         double[:, ::1] abar, double[:, ::1] ubar,
                         double[:, ::1] vbar) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double u
    for i in range(kbar.shape[0]):
        for j in range(kbar.shape[1]):
            u = U[i, j]
            abar[i, j] += kbar[i, j] * (S3[i, j] * u * u + S2[i, j] * V[i, j])
            ubar[i, j] += kbar[i, j] * 2.0 * S2[i, j] * u
            vbar[i, j] = kbar[i, j] * S1[i, j]


def partials_backward(Ws, bs, ctx, cnp.ndarray[double, ndim=1] ybar,
                      cnp.ndarray[double, ndim=2] dybar,
                      cnp.ndarray[double, ndim=2] d2ybar):
    Zs, S1s, S2s, S3s, Us, Js, Vs, Ks, se, see, g1, g2, g3, sec = ctx
    cdef int H = len(Ws) - 1
    cdef Py_ssize_t M = ybar.shape[0]
    cdef int n_in = Zs[0].shape[1]
    cdef int n_sec = len(sec)
    wo = Ws[H][0]

    sbar = ybar * g1 + (dybar * se).sum(axis=1) * g2
    sebar = dybar * g1[:, None]
    if n_sec:
        sa = np.asarray(sec)
        sbar += (d2ybar * (g3[:, None] * se[:, sa] ** 2 + g2[:, None] * see)).sum(axis=1)
        sebar[:, sa] += 2.0 * d2ybar * g2[:, None] * se[:, sa]
        seebar = d2ybar * g1[:, None]
    else:
        seebar = np.zeros((M, 0))

    nH = Zs[H].shape[1]
    gWo = np.empty((1, nH))
    _mm_tn(sbar.reshape(M, 1), Zs[H], gWo, 0.0)
    for e in range(n_in):
        _mm_tn(np.ascontiguousarray(sebar[:, e]).reshape(M, 1), Js[H - 1][e], gWo, 1.0)
    for i in range(n_sec):
        _mm_tn(np.ascontiguousarray(seebar[:, i]).reshape(M, 1), Ks[H - 1][i], gWo, 1.0)

    gW = [None] * (H + 1)
    gb = [None] * (H + 1)
    gW[H] = gWo
    gb[H] = np.array([sbar.sum()])

    zbar = np.outer(sbar, wo)
    jbar = [np.outer(sebar[:, e], wo) for e in range(n_in)]
    kbar = [np.outer(seebar[:, i], wo) for i in range(n_sec)]

    cdef cnp.ndarray[double, ndim=2] abar, ub, vb
    for l in range(H - 1, -1, -1):
        n_l = Zs[l + 1].shape[1]
        abar = np.empty((M, n_l))
        _hidden_adjoint(zbar, S1s[l], S2s[l], S3s[l], abar)
        ubar = []
        for e in range(n_in):
            ub = np.empty((M, n_l))
            _add_j_adjoint(jbar[e], S1s[l], S2s[l], Us[l][e], abar, ub)
            ubar.append(ub)
        vbar = []
        for i in range(n_sec):
            vb = np.empty((M, n_l))
            _add_k_adjoint(kbar[i], S1s[l], S2s[l], S3s[l], Us[l][sec[i]],
                           Vs[l][i], abar, ubar[sec[i]], vb)
            vbar.append(vb)

        g = np.empty((n_l, Zs[l].shape[1]))
        _mm_tn(abar, Zs[l], g, 0.0)
        if l == 0:
            for e in range(n_in):
                g[:, e] += ubar[e].sum(axis=0)
        else:
            for e in range(n_in):
                _mm_tn(ubar[e], Js[l - 1][e], g, 1.0)
            for i in range(n_sec):
                _mm_tn(vbar[i], Ks[l - 1][i], g, 1.0)
        gW[l] = g
        gb[l] = abar.sum(axis=0)

        if l > 0:
            W = Ws[l]
            n_prev = W.shape[1]
            nxt = np.empty((M, n_prev))
            _mm_nn(abar, W, nxt, 0.0)
            zbar = nxt
            new_j = []
            for e in range(n_in):
                out = np.empty((M, n_prev))
                _mm_nn(ubar[e], W, out, 0.0)
                new_j.append(out)
            jbar = new_j
            new_k = []
            for i in range(n_sec):
                out = np.empty((M, n_prev))
                _mm_nn(vbar[i], W, out, 0.0)
                new_k.append(out)
            kbar = new_k

    return list(zip(gW, gb))

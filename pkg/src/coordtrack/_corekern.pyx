# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the coordinate-update inner loops.

The two backends perform the same arithmetic up to floating-point summation
order, so they agree to reassociation error (~1e-12 over long runs); within
either backend the multi-iteration runners reproduce repeated single-step
calls bit-exactly.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

PUSH_WEIGHT_FLOOR = 1e-300

cdef double _FLOOR = 1e-300


cdef void _mix(const double[:, ::1] A_T, const double[:, ::1] X,
               double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t K = A_T.shape[0], N = X.shape[1], k, l, n
    cdef double s
    for k in range(K):
        for n in range(N):
            s = 0.0
            for l in range(K):
                s += A_T[k, l] * X[l, n]
            out[k, n] = s


def mix(A_T, X):
    """Neighborhood combination: row k of the result is sum_l A[l,k] * X[l,:]."""
    A_T = np.ascontiguousarray(A_T, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.empty_like(X)
    _mix(A_T, X, out)
    return out


cdef void _sync_step(const double[:, ::1] A_T, double[:, ::1] W,
                     double[:, ::1] V, const double[:, ::1] R_i,
                     Py_ssize_t n, double[::1] tmp, double[::1] col) noexcept nogil:
    cdef Py_ssize_t K = A_T.shape[0], k, l
    cdef double s
    for l in range(K):
        tmp[l] = (W[l, n] + R_i[l, n]) - V[l, n]
    for k in range(K):
        s = 0.0
        for l in range(K):
            s += A_T[k, l] * tmp[l]
        col[k] = s
    for k in range(K):
        W[k, n] = col[k]
        V[k, n] = R_i[k, n]


cdef int _indep_step(const double[:, ::1] A_T, double[:, ::1] W,
                     double[:, ::1] V, double[:, ::1] P, bint use_p,
                     const double[:, ::1] R_i, const long long[::1] idx,
                     double[:, ::1] sel, double[:, ::1] W_new,
                     double[:, ::1] P_sel, double[:, ::1] P_new) noexcept nogil:
    # The selected matrix has one nonzero per agent row, so the combination is
    # scattered column-wise in O(K^2) instead of a dense O(K^2 N) product.
    cdef Py_ssize_t K = A_T.shape[0], N = W.shape[1], k, l, n
    cdef double val
    for k in range(K):
        for n in range(N):
            W_new[k, n] = 0.0 if idx[k] == n else W[k, n]
    for l in range(K):
        n = idx[l]
        val = (W[l, n] + R_i[l, n]) - V[l, n]
        for k in range(K):
            W_new[k, n] += A_T[k, l] * val
    if use_p:
        for k in range(K):
            for n in range(N):
                P_new[k, n] = 0.0 if idx[k] == n else P[k, n]
        for l in range(K):
            n = idx[l]
            val = P[l, n]
            for k in range(K):
                P_new[k, n] += A_T[k, l] * val
        for k in range(K):
            for n in range(N):
                P[k, n] = P_new[k, n]
                if P[k, n] < _FLOOR:
                    return -1
    for k in range(K):
        for n in range(N):
            if idx[k] == n:
                V[k, n] = R_i[k, n]
            W[k, n] = W_new[k, n]
    return 0


def sync_coord_step(A_T, W, V, R_i, n):
    """Shared-index coordinate update; touches only entry n of W and V, in place."""
    cdef Py_ssize_t K = W.shape[0]
    tmp = np.empty(K)
    col = np.empty(K)
    _sync_step(A_T, W, V, np.ascontiguousarray(R_i), n, tmp, col)


def indep_coord_step(A_T, W, V, P, R_i, idx):
    """Per-agent-index coordinate update (push-sum weights P optional), in place."""
    cdef Py_ssize_t K = W.shape[0], N = W.shape[1]
    sel = np.empty((K, N))
    W_new = np.empty((K, N))
    P_sel = np.empty((K, N))
    P_new = np.empty((K, N))
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    R_i = np.ascontiguousarray(R_i)
    cdef int rc
    if P is None:
        rc = _indep_step(A_T, W, V, W_new, False, R_i, idx, sel, W_new, P_sel, P_new)
    else:
        rc = _indep_step(A_T, W, V, P, True, R_i, idx, sel, W_new, P_sel, P_new)
    if rc != 0:
        raise RuntimeError(
            f"push-sum weight underflow: an entry of p dropped below {PUSH_WEIGHT_FLOOR}")


def run_sync_coord(A_T, W, V, R, idx):
    """Advance the shared-index algorithm len(idx) iterations in place."""
    cdef Py_ssize_t K = W.shape[0], T = idx.shape[0], j
    A_T = np.ascontiguousarray(A_T)
    R = np.ascontiguousarray(R)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    cdef const double[:, ::1] A_T_v = A_T
    cdef double[:, ::1] W_v = W, V_v = V
    cdef const double[:, :, ::1] R_v = R
    cdef const long long[::1] idx_v = idx
    tmp = np.empty(K)
    col = np.empty(K)
    cdef double[::1] tmp_v = tmp, col_v = col
    with nogil:
        for j in range(T):
            _sync_step(A_T_v, W_v, V_v, R_v[j], idx_v[j], tmp_v, col_v)


def run_indep_coord(A_T, W, V, P, R, idx):
    """Advance the independent-index algorithm idx.shape[0] iterations in place.

    P may be None, which gives the uncorrected (biased) scheme.
    """
    cdef Py_ssize_t K = W.shape[0], N = W.shape[1], T = idx.shape[0], j
    A_T = np.ascontiguousarray(A_T)
    R = np.ascontiguousarray(R)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    cdef const double[:, ::1] A_T_v = A_T
    cdef double[:, ::1] W_v = W, V_v = V
    cdef const double[:, :, ::1] R_v = R
    cdef const long long[:, ::1] idx_v = idx
    sel = np.empty((K, N))
    W_new = np.empty((K, N))
    P_sel = np.empty((K, N))
    P_new = np.empty((K, N))
    cdef double[:, ::1] sel_v = sel, W_new_v = W_new, P_sel_v = P_sel, P_new_v = P_new
    cdef double[:, ::1] P_v
    cdef bint use_p = P is not None
    cdef int rc = 0
    if use_p:
        P_v = P
    else:
        P_v = P_new
    with nogil:
        for j in range(T):
            rc = _indep_step(A_T_v, W_v, V_v, P_v, use_p, R_v[j], idx_v[j],
                             sel_v, W_new_v, P_sel_v, P_new_v)
            if rc != 0:
                break
    if rc != 0:
        raise RuntimeError(
            f"push-sum weight underflow: an entry of p dropped below {PUSH_WEIGHT_FLOOR}")

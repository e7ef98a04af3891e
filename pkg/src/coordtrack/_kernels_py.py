"""Pure-numpy kernels: fallback used when the compiled extension is unavailable.

The compiled module `_corekern` implements the same functions with the same
arithmetic up to floating-point summation order (agreement to ~1e-12 over long
runs); within one backend the multi-iteration runners reproduce repeated
single-step calls bit-exactly.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

PUSH_WEIGHT_FLOOR = 1e-300


def mix(A_T, X):
    """Neighborhood combination: row k of the result is sum_l A[l,k] * X[l,:]."""
    return A_T @ X


def sync_coord_step(A_T, W, V, R_i, n):
    """Shared-index coordinate update; touches only entry n of W and V, in place."""
    col = mix(A_T, (W[:, [n]] + R_i[:, [n]]) - V[:, [n]])
    W[:, n] = col[:, 0]
    V[:, n] = R_i[:, n]


def indep_coord_step(A_T, W, V, P, R_i, idx):
    """Per-agent-index coordinate update (push-sum weights P optional), in place."""
    K, N = W.shape
    M = np.zeros((K, N))
    M[np.arange(K), idx] = 1.0
    Mc = 1.0 - M
    W_new = Mc * W + mix(A_T, M * ((W + R_i) - V))
    if P is not None:
        P_new = Mc * P + mix(A_T, M * P)
        P[...] = P_new
        if np.min(P_new) < PUSH_WEIGHT_FLOOR:
            raise RuntimeError(
                f"push-sum weight underflow: an entry of p dropped below {PUSH_WEIGHT_FLOOR}")
    V[...] = Mc * V + M * R_i
    W[...] = W_new


def run_sync_coord(A_T, W, V, R, idx):
    """Advance the shared-index algorithm len(idx) iterations in place."""
    for j in range(idx.shape[0]):
        sync_coord_step(A_T, W, V, R[j], int(idx[j]))


def run_indep_coord(A_T, W, V, P, R, idx):
    """Advance the independent-index algorithm idx.shape[0] iterations in place.

    P may be None, which gives the uncorrected (biased) scheme.
    """
    for j in range(idx.shape[0]):
        indep_coord_step(A_T, W, V, P, R[j], idx[j])

"""Synchronous state machines for the dynamic-average tracking algorithms.

All agents read the frozen previous-iteration snapshot and write the next one;
there are no sequential in-place sweeps.  Full-vector recursions are composed
from the backend ``mix`` kernel; the coordinate-update recursions dispatch to
per-step (and chunked) backend kernels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import backend, selection
from .signals import SignalModel

FULL_VECTOR_ALGORITHMS = ("consensus", "diffusion", "exact_diffusion", "extra", "diging")
COORDINATE_ALGORITHMS = ("sync_coord", "indep_coord", "indep_coord_nopush")
ALGORITHMS = FULL_VECTOR_ALGORITHMS + COORDINATE_ALGORITHMS

# Scalars communicated per agent per iteration, in units of the signal dimension
# N (full-vector algorithms) or absolute (coordinate algorithms: the updated
# w-entry plus the combined signal-difference entry, plus the p-entry for the
# push-sum variant).
def scalars_per_iteration(algorithm, dimension):
    if algorithm == "diging":
        return 2 * dimension
    if algorithm in FULL_VECTOR_ALGORITHMS:
        return dimension
    if algorithm == "indep_coord":
        return 3
    if algorithm in ("sync_coord", "indep_coord_nopush"):
        return 2
    raise ValueError(f"unknown algorithm {algorithm!r}")


@dataclass
class NetworkRun:
    """One network trajectory: combination matrix, signal model, agent state."""

    A: np.ndarray
    model: SignalModel
    algorithm: str
    seed: int = 0
    mu: float = 1.0
    selection_mode: str | None = None
    iteration: int = 0
    W: np.ndarray = None
    V: np.ndarray = None
    P: np.ndarray = None
    aux: dict = field(default_factory=dict)
    frozen: np.ndarray = None
    scalars_sent: int = 0  # cumulative, per agent
    A_T: np.ndarray = field(default=None, repr=False)

    @property
    def num_agents(self):
        return self.model.num_agents

    @property
    def dimension(self):
        return self.model.dimension

    def output(self):
        """The algorithm's output variable: w, or the push-sum corrected x = w/p."""
        if self.algorithm == "indep_coord":
            if np.min(self.P) < backend.PUSH_WEIGHT_FLOOR:
                raise RuntimeError("push-sum weight underflow")
            return self.W / self.P
        return self.W

    def step(self):
        _STEPPERS[self.algorithm](self)
        return self

    def to_checkpoint(self):
        """JSON text capturing everything needed to resume bit-exactly."""
        doc = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "mu": self.mu,
            "selection_mode": self.selection_mode,
            "iteration": self.iteration,
            "scalars_sent": self.scalars_sent,
            "W": self.W.tolist(),
            "V": None if self.V is None else self.V.tolist(),
            "P": None if self.P is None else self.P.tolist(),
            "aux": {k: None if v is None else v.tolist()
                    for k, v in self.aux.items()},
            "frozen": self.frozen.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_checkpoint(cls, text, A, model):
        doc = json.loads(text)
        run = init_run(A, model, doc["algorithm"], seed=doc["seed"], mu=doc["mu"],
                       selection_mode=doc["selection_mode"])
        run.iteration = doc["iteration"]
        run.scalars_sent = doc["scalars_sent"]
        run.W = np.array(doc["W"])
        run.V = None if doc["V"] is None else np.array(doc["V"])
        run.P = None if doc["P"] is None else np.array(doc["P"])
        run.aux = {k: None if v is None else np.array(v)
                   for k, v in doc["aux"].items()}
        run.frozen = np.array(doc["frozen"], dtype=bool)
        return run


def init_run(A, model, algorithm, seed=0, mu=1.0, selection_mode=None):
    """Initialize agent state for ``algorithm``: w_0 = v_0 = r_0, p_0 = 1."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    A = np.asarray(A, dtype=float)
    if A.shape != (model.num_agents, model.num_agents):
        raise ValueError("combination matrix does not match the number of agents")
    if not 0.0 < mu <= 1.0:
        raise ValueError("step size mu must be in (0, 1]")
    run = NetworkRun(A=A, model=model, algorithm=algorithm, seed=int(seed),
                     mu=float(mu))
    run.A_T = np.ascontiguousarray(A.T)
    R0 = np.array(model.sample_all(0), dtype=float)
    run.W = R0.copy()
    run.frozen = np.zeros(model.num_agents, dtype=bool)
    if algorithm in FULL_VECTOR_ALGORITHMS:
        run.aux["r_prev"] = R0.copy()
    if algorithm == "exact_diffusion":
        run.aux["psi"] = R0.copy()
    if algorithm == "extra":
        run.aux["w_prev2"] = R0.copy()  # w_{-1} := w_0
    if algorithm == "diging":
        run.aux["y"] = np.zeros_like(R0)  # gradient tracker, 0 since w_0 = r_0
    if algorithm in COORDINATE_ALGORITHMS:
        run.V = R0.copy()
    if algorithm == "indep_coord":
        run.P = np.ones_like(R0)
    if selection_mode is None:
        selection_mode = (selection.SHARED if algorithm == "sync_coord"
                          else selection.INDEPENDENT)
    run.selection_mode = selection_mode
    return run


def _commit(run, W_new, aux_updates=None, V_new=None, P_new=None):
    """Install the next snapshot; frozen agents keep all of their own state."""
    run.aux["w_prev_iter"] = run.W.copy()
    fr = run.frozen
    if fr.any():
        W_new[fr] = run.W[fr]
        if V_new is not None:
            V_new[fr] = run.V[fr]
        if P_new is not None:
            P_new[fr] = run.P[fr]
    run.W = W_new
    if V_new is not None:
        run.V = V_new
    if P_new is not None:
        run.P = P_new
    for key, value in (aux_updates or {}).items():
        if fr.any():
            value[fr] = run.aux[key][fr]
        run.aux[key] = value
    run.iteration += 1
    run.scalars_sent += scalars_per_iteration(run.algorithm, run.dimension)


def step_dynamic_consensus(run):
    """w_{k,i} = sum_l a_{lk} w_{l,i-1} + r_{k,i} - r_{k,i-1}."""
    R = np.array(run.model.sample_all(run.iteration + 1), dtype=float)
    W_new = backend.mix(run.A_T, run.W) + (R - run.aux["r_prev"])
    _commit(run, W_new, aux_updates={"r_prev": R})


def step_dynamic_diffusion(run):
    """w_{k,i} = sum_l a_{lk} (w_{l,i-1} + r_{l,i} - r_{l,i-1}) for mu = 1."""
    if run.mu != 1.0:
        raise ValueError("the combined diffusion recursion assumes mu = 1; "
                         "use the exact_diffusion form for general mu")
    R = np.array(run.model.sample_all(run.iteration + 1), dtype=float)
    W_new = backend.mix(run.A_T, (run.W + R) - run.aux["r_prev"])
    _commit(run, W_new, aux_updates={"r_prev": R})


def step_exact_diffusion(run):
    """Adapt / correct / combine three-step recursion with step size mu."""
    R = np.array(run.model.sample_all(run.iteration + 1), dtype=float)
    psi_new = (1.0 - run.mu) * run.W + run.mu * R
    phi = (psi_new + run.W) - run.aux["psi"]
    W_new = backend.mix(run.A_T, phi)
    _commit(run, W_new, aux_updates={"psi": psi_new, "r_prev": R})


def step_extra_based(run):
    """Consensus recursion plus the two-iteration-old correction term."""
    R = np.array(run.model.sample_all(run.iteration + 1), dtype=float)
    W2 = run.aux["w_prev2"]
    W_new = (backend.mix(run.A_T, run.W) + (R - run.aux["r_prev"])
             + 0.5 * (W2 - backend.mix(run.A_T, W2)))
    _commit(run, W_new, aux_updates={"r_prev": R, "w_prev2": run.W.copy()})


def step_diging_based(run):
    """Gradient-tracking recursion; two combination rounds per iteration."""
    R = np.array(run.model.sample_all(run.iteration + 1), dtype=float)
    W_new = backend.mix(run.A_T, run.W - run.aux["y"])
    Y_new = backend.mix(
        run.A_T, run.aux["y"] + (W_new - R) - (run.W - run.aux["r_prev"]))
    _commit(run, W_new, aux_updates={"r_prev": R, "y": Y_new})


def step_sync_coordinate(run, oracle_prev_signal=False):
    """Shared random index update with the stale-signal memory v.

    ``oracle_prev_signal`` replaces v by the true previous observation
    r_{l,i-1}(n) (which a real agent cannot store); it exists only so tests can
    show that the memory variant differs from the ideal one purely through
    staleness.
    """
    i = run.iteration + 1
    draw = selection.draw_indices(run.seed, i, run.num_agents, run.dimension,
                                  run.selection_mode)
    n = int(draw.indices[0])
    R = np.array(run.model.sample_all(i), dtype=float)
    W_new = run.W.copy()
    V_new = run.V.copy()
    if oracle_prev_signal:
        R_prev = np.array(run.model.sample_all(i - 1), dtype=float)
        col = backend.mix(run.A_T, (W_new[:, [n]] + R[:, [n]]) - R_prev[:, [n]])
        W_new[:, n] = col[:, 0]
        V_new[:, n] = R[:, n]
    else:
        backend.sync_coord_step(run.A_T, W_new, V_new, R, n)
    _commit(run, W_new, V_new=V_new)


def step_indep_coordinate(run):
    """Independent per-agent indices; push-sum weights evolve like w."""
    i = run.iteration + 1
    draw = selection.draw_indices(run.seed, i, run.num_agents, run.dimension,
                                  run.selection_mode)
    R = np.array(run.model.sample_all(i), dtype=float)
    W_new = run.W.copy()
    V_new = run.V.copy()
    P_new = run.P.copy() if run.P is not None else None
    backend.indep_coord_step(run.A_T, W_new, V_new, P_new, R, draw.indices)
    _commit(run, W_new, V_new=V_new, P_new=P_new)


_STEPPERS = {
    "consensus": step_dynamic_consensus,
    "diffusion": step_dynamic_diffusion,
    "exact_diffusion": step_exact_diffusion,
    "extra": step_extra_based,
    "diging": step_diging_based,
    "sync_coord": step_sync_coordinate,
    "indep_coord": step_indep_coordinate,
    "indep_coord_nopush": step_indep_coordinate,
}

_CHUNK = 512


def fast_forward(run, iterations):
    """Advance ``iterations`` steps; coordinate algorithms use chunked kernels.

    Bit-equivalent to calling ``run.step()`` the same number of times.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if run.algorithm not in COORDINATE_ALGORITHMS or run.frozen.any():
        for _ in range(iterations):
            run.step()
        return run
    while iterations > 0:
        chunk = min(iterations, _CHUNK)
        start = run.iteration + 1
        R = np.stack([np.asarray(run.model.sample_all(start + j), dtype=float)
                      for j in range(chunk)])
        idx = selection.draw_matrix(run.seed, start, chunk, run.num_agents,
                                    run.dimension, run.selection_mode)
        if run.algorithm == "sync_coord":
            backend.run_sync_coord(run.A_T, run.W, run.V, R, idx[:, 0])
        else:
            backend.run_indep_coord(run.A_T, run.W, run.V, run.P, R, idx)
        run.aux["w_prev_iter"] = None  # not tracked inside chunks
        run.iteration += chunk
        run.scalars_sent += chunk * scalars_per_iteration(run.algorithm,
                                                          run.dimension)
        iterations -= chunk
    return run


def check_stop(run, epsilon):
    """Per-agent stopping flags: ||w_{k,i} - w_{k,i-1}|| <= epsilon.

    Flagged agents freeze their own updates from the next step on but keep
    serving their (frozen) state to neighbors.
    """
    if run.iteration < 1 or run.aux.get("w_prev_iter") is None:
        raise ValueError("check_stop requires at least one recorded step")
    delta = np.linalg.norm(run.W - run.aux["w_prev_iter"], axis=1)
    flags = delta <= epsilon
    run.frozen = run.frozen | flags
    return flags


def effective_matrix(A, draw, n):
    """Realized K x K mixing matrix for entry n under the given selection draw.

    Column stochastic: diag(1 - s) + A^T diag(s), where s_k indicates that
    agent k selected entry n.
    """
    A = np.asarray(A, dtype=float)
    s = (np.asarray(draw.indices) == n).astype(float)
    return np.diag(1.0 - s) + A.T * s


def dobrushin(M, tol=1e-9):
    """Dobrushin contraction coefficient of a column-stochastic matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(M < -tol):
        raise ValueError("matrix must be (numerically) nonnegative")
    if np.max(np.abs(M.sum(axis=0) - 1.0)) > tol:
        raise ValueError("column sums must equal 1")
    diffs = np.abs(M[:, :, None] - M[:, None, :]).sum(axis=0)
    return 0.5 * float(diffs.max())


def sample_effective_product(A, dimension, length, rng, entry=0):
    """Product of ``length`` independently sampled effective matrices for one entry."""
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    prod = np.eye(K)
    for _ in range(length):
        s = (rng.integers(0, dimension, size=K) == entry).astype(float)
        prod = (np.diag(1.0 - s) + A.T * s) @ prod
    return prod


def matrix_product_decay(A, dimension, lengths, trials, seed):
    """Mean max-norm distance of random effective-matrix products to rank-1.

    For each product length L, averages || Prod - phi 1^T ||_max over ``trials``
    independent products, with phi the column mean of the product.  Geometric
    decay of this curve is the empirical footprint of weak ergodicity.
    """
    rng = np.random.default_rng(seed)
    out = []
    for L in lengths:
        dists = []
        for _ in range(trials):
            prod = sample_effective_product(A, dimension, L, rng)
            phi = prod.mean(axis=1)
            dists.append(np.max(np.abs(prod - phi[:, None])))
        out.append(float(np.mean(dists)))
    return np.array(out)


def dobrushin_rate_estimate(A, dimension, horizon, trials, seed):
    """gamma estimate xi^(1/T): mean Dobrushin coefficient of T-step products."""
    rng = np.random.default_rng(seed)
    xs = [dobrushin(sample_effective_product(A, dimension, horizon, rng), tol=1e-6)
          for _ in range(trials)]
    xi = float(np.mean(xs))
    return xi ** (1.0 / horizon)

"""Error metrics, geometric-rate fitting, and steady-state bound checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RATE_FIT_FLOOR = 1e-13
RATE_FIT_BURN_IN = 0.10


@dataclass(frozen=True)
class MetricsRecord:
    """Per-iteration error and communication statistics for one trajectory."""

    iteration: int
    per_entry_msd: np.ndarray
    aggregate_msd: float
    max_norm_err: float
    cumulative_scalars_sent: int

    def __post_init__(self):
        if np.any(self.per_entry_msd < 0) or self.aggregate_msd < 0 or self.max_norm_err < 0:
            raise ValueError("error fields must be nonnegative")


def record(run, truth):
    """MetricsRecord of ``run`` against the exact average ``truth``.

    Uses the algorithm's output variable (the push-sum corrected ratio where
    applicable).  per_entry_msd(n) = (1/K) sum_k (out_k(n) - truth(n))^2;
    aggregate_msd is their sum; max_norm_err = max_{k,n} |out_k(n) - truth(n)|.
    """
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (run.dimension,):
        raise ValueError(
            f"truth has shape {truth.shape}, expected ({run.dimension},)")
    err = run.output() - truth
    per_entry = np.sum(err ** 2, axis=0) / run.num_agents
    return MetricsRecord(
        iteration=run.iteration,
        per_entry_msd=per_entry,
        aggregate_msd=float(np.sum(per_entry)),
        max_norm_err=float(np.max(np.abs(err))),
        cumulative_scalars_sent=run.scalars_sent,
    )


def fit_geometric_rate(series, burn_in=RATE_FIT_BURN_IN, floor=RATE_FIT_FLOOR):
    """Least-squares geometric rate of an error series.

    ``series`` is a sequence of (iteration, error) pairs.  The first ``burn_in``
    fraction is dropped, as is everything at or after the first sample below
    ``floor`` (numerical noise).  Returns (rate, r_squared) where rate is the
    exponentiated log-slope.
    """
    series = [(int(i), float(e)) for i, e in series]
    start = int(np.ceil(burn_in * len(series)))
    window = series[start:]
    for j, (_, e) in enumerate(window):
        if e < floor:
            window = window[:j]
            break
    if len(window) < 20:
        raise ValueError("need at least 20 usable samples to fit a rate")
    its = np.array([i for i, _ in window], dtype=float)
    errs = np.array([e for _, e in window])
    if np.any(errs <= 0):
        raise ValueError("error series must be strictly positive in the fit window")
    logs = np.log(errs)
    slope, intercept = np.polyfit(its, logs, 1)
    pred = slope * its + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(np.exp(slope)), r2


def steady_state_bound(lam, dimension, eps):
    """Theoretical steady-state mean-square bound 2 lam^2 (2N-1) eps / (1-lam)^2."""
    if not 0.0 <= lam < 1.0:
        raise ValueError("lam must be in [0, 1)")
    return 2.0 * lam ** 2 * (2 * dimension - 1) * eps / (1.0 - lam) ** 2


def steady_state_bound_check(series, lam, dimension, eps, slack=0.25, floor=1e-8):
    """True iff the tail of the msd series sits under the perturbation bound.

    The limsup is estimated as the maximum over the final quartile of the
    series; the bound gets a multiplicative ``slack`` plus an absolute ``floor``
    so the degenerate cases (eps = 0 or lam = 0, where the bound is exactly
    zero) reduce to requiring the error to reach numerical floor.
    """
    errs = np.array([float(e) for _, e in series])
    if errs.size < 4:
        raise ValueError("series too short to estimate a steady state")
    tail = errs[-(errs.size // 4):]
    limsup = float(np.max(tail))
    return limsup <= steady_state_bound(lam, dimension, eps) * (1.0 + slack) + floor

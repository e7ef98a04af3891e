"""Deterministic time-varying signal generators and their exact network average.

Every model is immutable after construction and ``sample``/``sample_all`` are pure
functions of (parameters, seed, agent, iteration, entry): two calls agree
bit-exactly, which is what makes trajectories replayable.
"""

from __future__ import annotations

import csv

import numpy as np


class SignalModel:
    """Base class: K agents, N-dimensional observations."""

    def __init__(self, num_agents, dimension, seed):
        if num_agents < 1 or dimension < 1:
            raise ValueError("num_agents and dimension must be positive")
        self.num_agents = int(num_agents)
        self.dimension = int(dimension)
        self.seed = int(seed)

    def _check_indices(self, k, i, n):
        if not 0 <= k < self.num_agents:
            raise IndexError(f"agent index {k} out of range [0,{self.num_agents})")
        if not 0 <= n < self.dimension:
            raise IndexError(f"entry index {n} out of range [0,{self.dimension})")
        if i < 0:
            raise IndexError("iteration must be >= 0")

    def sample_all(self, i):
        """Full K x N observation matrix at iteration i."""
        raise NotImplementedError

    def sample(self, k, i, n):
        self._check_indices(k, i, n)
        return float(self.sample_all(i)[k, n])

    def true_average(self, i):
        """Exact mean over agents (pairwise summation), the ground truth."""
        if i < 0:
            raise IndexError("iteration must be >= 0")
        vals = self.sample_all(i)
        return np.sum(vals, axis=0) / self.num_agents


class StaticSignal(SignalModel):
    """Time-invariant Gaussian observations."""

    def __init__(self, num_agents, dimension, seed):
        super().__init__(num_agents, dimension, seed)
        rng = np.random.default_rng(seed)
        self._values = rng.standard_normal((num_agents, dimension))
        self._values.setflags(write=False)

    def sample_all(self, i):
        if i < 0:
            raise IndexError("iteration must be >= 0")
        return self._values


class FixedSignal(StaticSignal):
    """Static signal with caller-supplied values (used in tests and small examples)."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        super().__init__(values.shape[0], values.shape[1], seed=0)
        self._values = values.copy()
        self._values.setflags(write=False)


class DecayingSinusoidRamp(SignalModel):
    """Per-entry decaying sinusoid plus linear ramp.

    r_{k,i}(n) = a_k(n) exp(-alpha i) sin(beta i) + b_k(n) + gamma i,
    with the ramp sign flipped from +gamma i to -gamma i at ``flip_iteration``.
    a_k(n) and b_k(n) are drawn once at construction from a single seeded
    Gaussian stream, k-major then n-minor (a first, then b).
    """

    def __init__(self, num_agents, dimension, seed,
                 alpha=0.01, beta=0.1, gamma=2.5e-4, flip_iteration=None):
        super().__init__(num_agents, dimension, seed)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.gamma = float(gamma)
        self.flip_iteration = None if flip_iteration is None else int(flip_iteration)
        rng = np.random.default_rng(seed)
        self._a = rng.standard_normal((num_agents, dimension))
        self._b = rng.standard_normal((num_agents, dimension))
        self._a.setflags(write=False)
        self._b.setflags(write=False)

    def _ramp(self, i):
        if self.flip_iteration is not None and i >= self.flip_iteration:
            return -self.gamma * i
        return self.gamma * i

    def sample_all(self, i):
        if i < 0:
            raise IndexError("iteration must be >= 0")
        osc = np.exp(-self.alpha * i) * np.sin(self.beta * i)
        return self._a * osc + self._b + self._ramp(i)

    def asymptotic_average(self, i):
        """Closed-form limit of the true average once the oscillation has decayed."""
        return np.sum(self._b, axis=0) / self.num_agents + self._ramp(i)


class PiecewiseRamp(SignalModel):
    """Slow per-entry ramps with bounded increments.

    r_{k,i}(n) = b_k(n) + s_k(n) * i with slopes s_k(n) uniform in
    [-gamma, gamma]; the slope sign flips (continuously) at ``flip_iteration``.
    Per-entry squared increments are bounded by gamma^2, so the model satisfies
    the small-perturbation hypothesis with epsilon = N * gamma^2.
    """

    def __init__(self, num_agents, dimension, seed, gamma, flip_iteration=None):
        super().__init__(num_agents, dimension, seed)
        self.gamma = float(gamma)
        self.flip_iteration = None if flip_iteration is None else int(flip_iteration)
        rng = np.random.default_rng(seed)
        self._b = rng.standard_normal((num_agents, dimension))
        self._slope = self.gamma * rng.uniform(-1.0, 1.0, (num_agents, dimension))
        self._b.setflags(write=False)
        self._slope.setflags(write=False)

    def increment_bound(self):
        """epsilon such that per-entry squared increments are <= epsilon / N."""
        return self.dimension * float(np.max(self._slope ** 2))

    def sample_all(self, i):
        if i < 0:
            raise IndexError("iteration must be >= 0")
        f = self.flip_iteration
        if f is None or i < f:
            t = float(i)
        else:
            t = float(2 * f - i)
        return self._b + self._slope * t


class ZeroAverageWalk(SignalModel):
    """Signals whose network sum is zero by construction.

    Agents 0..K-2 follow seeded Gaussian walks with geometrically decaying
    increments (so the signals converge); the last agent holds the negated sum.
    """

    def __init__(self, num_agents, dimension, seed, scale=1.0, decay=0.97):
        if num_agents < 2:
            raise ValueError("zero-average model needs at least 2 agents")
        super().__init__(num_agents, dimension, seed)
        self.scale = float(scale)
        self.decay = float(decay)
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must be in (0,1)")
        self._walks = []  # cache: walk value arrays (K-1, N) per iteration

    def _walk(self, i):
        while len(self._walks) <= i:
            j = len(self._walks)
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self.seed, spawn_key=(j,)))
            step = (self.scale * self.decay ** j
                    * rng.standard_normal((self.num_agents - 1, self.dimension)))
            prev = self._walks[-1] if self._walks else 0.0
            self._walks.append(prev + step)
        return self._walks[i]

    def sample_all(self, i):
        if i < 0:
            raise IndexError("iteration must be >= 0")
        out = np.empty((self.num_agents, self.dimension))
        walk = self._walk(i)
        out[:-1] = walk
        out[-1] = -np.sum(walk, axis=0)
        return out

    def true_average(self, i):
        if i < 0:
            raise IndexError("iteration must be >= 0")
        return np.zeros(self.dimension)


class TableSignal(SignalModel):
    """Externally generated trace loaded from CSV (header: iter,agent,coord,value)."""

    def __init__(self, table):
        table = np.asarray(table, dtype=float)
        if table.ndim != 3:
            raise ValueError("table must have shape (iterations, agents, entries)")
        super().__init__(table.shape[1], table.shape[2], seed=0)
        self._table = table.copy()
        self._table.setflags(write=False)

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            expected = {"iter", "agent", "coord", "value"}
            if reader.fieldnames is None or set(reader.fieldnames) != expected:
                raise ValueError(f"{path}: expected CSV header iter,agent,coord,value")
            for row in reader:
                rows.append((int(row["iter"]), int(row["agent"]),
                             int(row["coord"]), float(row["value"])))
        if not rows:
            raise ValueError(f"{path}: empty trace")
        iters = max(r[0] for r in rows) + 1
        K = max(r[1] for r in rows) + 1
        N = max(r[2] for r in rows) + 1
        table = np.full((iters, K, N), np.nan)
        for i, k, n, v in rows:
            table[i, k, n] = v
        if np.any(np.isnan(table)):
            raise ValueError(f"{path}: trace has missing (iter,agent,coord) cells")
        return cls(table)

    def sample_all(self, i):
        if not 0 <= i < self._table.shape[0]:
            raise IndexError(
                f"iteration {i} outside the loaded trace [0,{self._table.shape[0]})")
        return self._table[i]


_VARIANTS = {
    "static": StaticSignal,
    "decaying_sinusoid_ramp": DecayingSinusoidRamp,
    "piecewise_ramp": PiecewiseRamp,
    "zero_average": ZeroAverageWalk,
}


def make_signal(spec, num_agents):
    """Build a signal model from a config mapping (harness entry point)."""
    spec = dict(spec)
    variant = spec.pop("variant", None)
    if variant == "custom":
        return TableSignal.from_csv(spec["path"])
    if variant not in _VARIANTS:
        raise ValueError(f"unknown signal variant {variant!r}")
    dimension = spec.pop("dimension")
    seed = spec.pop("seed", 0)
    return _VARIANTS[variant](num_agents, dimension, seed, **spec)

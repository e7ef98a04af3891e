"""Network topologies, doubly stochastic combination matrices, and spectral quantities.

Combination matrices are plain ``numpy`` arrays; :func:`metropolis_weights` is the
single constructor and guarantees the symmetric doubly stochastic contract on any
connected undirected graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

ROW_SUM_TOL = 1e-12
PRIMITIVITY_MARGIN = 1e-9


def _normalize_edge(u, v):
    u, v = int(u), int(v)
    if u == v:
        raise ValueError(f"self-pair ({u},{v}) not allowed; self-influence is implicit")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Topology:
    """Undirected network of agents, indexed 0..num_agents-1."""

    num_agents: int
    edges: frozenset
    positions: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("num_agents must be positive")
        for u, v in self.edges:
            if not (0 <= u < self.num_agents and 0 <= v < self.num_agents):
                raise ValueError(f"edge ({u},{v}) out of range [0,{self.num_agents})")
            if (u, v) != _normalize_edge(u, v):
                raise ValueError(f"edge ({u},{v}) is not normalized")

    @classmethod
    def from_edges(cls, num_agents, edges, positions=None):
        return cls(num_agents, frozenset(_normalize_edge(u, v) for u, v in edges),
                   positions)

    def neighbors(self, k):
        return sorted({v if u == k else u for u, v in self.edges if k in (u, v)})

    def degree(self, k):
        return sum(1 for u, v in self.edges if k in (u, v))

    def is_connected(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.num_agents))
        g.add_edges_from(self.edges)
        return nx.is_connected(g)

    def to_json(self):
        doc = {"num_agents": self.num_agents,
               "edges": sorted([u, v] for u, v in self.edges)}
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls.from_edges(doc["num_agents"], doc["edges"])


def build_random_geometric(num_agents, radius, seed):
    """Seeded random geometric graph on the unit square.

    Agents are placed uniformly in [0,1]x[0,1]; two agents are linked iff their
    Euclidean distance is strictly below ``radius``.  The result may be
    disconnected; the caller is responsible for checking connectivity.
    """
    if num_agents < 1:
        raise ValueError("num_agents must be >= 1")
    if not (0.0 < radius):
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    pts = rng.random((num_agents, 2))
    edges = []
    for u in range(num_agents):
        d = np.hypot(pts[u, 0] - pts[u + 1:, 0], pts[u, 1] - pts[u + 1:, 1])
        for off in np.nonzero(d < radius)[0]:
            edges.append((u, u + 1 + int(off)))
    return Topology.from_edges(num_agents, edges, positions=pts)


def build_connected_geometric(num_agents, radius, seed, max_tries=100):
    """Random geometric graph, regenerated with an incremented sub-seed until connected."""
    for attempt in range(max_tries):
        topo = build_random_geometric(num_agents, radius, seed + attempt)
        if topo.is_connected():
            return topo
    raise ValueError(
        f"no connected geometric graph with K={num_agents}, radius={radius} "
        f"after {max_tries} attempts starting from seed {seed}")


def build_cycle(num_agents):
    """Cycle topology: agent k connects with agents k-1 and k+1 (mod K)."""
    if num_agents < 3:
        raise ValueError("cycle needs at least 3 agents")
    return Topology.from_edges(
        num_agents, [(k, (k + 1) % num_agents) for k in range(num_agents)])


def build_complete(num_agents):
    return Topology.from_edges(
        num_agents,
        [(u, v) for u in range(num_agents) for v in range(u + 1, num_agents)])


def metropolis_weights(topology):
    """Symmetric doubly stochastic combination matrix via the Metropolis rule.

    Off-diagonal weight for an edge (l,k) is 1/(1+max(deg l, deg k)); the
    diagonal absorbs the remainder so every row and column sums to one.
    """
    if not topology.is_connected():
        raise ValueError("metropolis_weights requires a connected topology")
    K = topology.num_agents
    deg = np.array([topology.degree(k) for k in range(K)])
    A = np.zeros((K, K))
    for u, v in topology.edges:
        w = 1.0 / (1.0 + max(deg[u], deg[v]))
        A[u, v] = w
        A[v, u] = w
    A[np.diag_indices(K)] = 1.0 - A.sum(axis=1)
    return A


def check_combination_matrix(A, topology=None, tol=ROW_SUM_TOL):
    """Raise ValueError unless A satisfies the combination-matrix contract."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("combination matrix must be square")
    if np.any(A < 0):
        raise ValueError("combination matrix must be nonnegative")
    if not np.array_equal(A, A.T):
        raise ValueError("combination matrix must be exactly symmetric")
    if np.max(np.abs(A.sum(axis=1) - 1.0)) > tol:
        raise ValueError("row sums deviate from 1")
    if np.max(np.abs(A.sum(axis=0) - 1.0)) > tol:
        raise ValueError("column sums deviate from 1")
    if not np.any(np.diag(A) > 0):
        raise ValueError("need a strictly positive diagonal entry")
    if topology is not None:
        K = topology.num_agents
        allowed = np.eye(K, dtype=bool)
        for u, v in topology.edges:
            allowed[u, v] = allowed[v, u] = True
        if np.any((A > 0) & ~allowed):
            raise ValueError("positive weight outside the edge set")


def second_eigenvalue_magnitude(A, tol=1e-12):
    """Second largest eigenvalue magnitude of a doubly stochastic matrix.

    Computed as the spectral norm of A - (1/K) 11^T by power iteration with the
    all-ones principal eigenvector projected out analytically; deterministic
    (fixed start vector).  Raises ValueError when the estimate is numerically at
    one, which signals a non-primitive matrix.
    """
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    if K == 1:
        return 0.0
    B = A - np.full((K, K), 1.0 / K)
    v = np.cos(0.7 * np.arange(K) + 0.3)
    v -= v.mean()
    nv = np.linalg.norm(v)
    if nv == 0.0:  # pragma: no cover - start vector is never uniform
        raise RuntimeError("degenerate start vector")
    v /= nv
    lam = 0.0
    for _ in range(100 * K):
        w = B @ v
        lam_new = np.linalg.norm(w)
        if lam_new < 1e-15:
            return 0.0
        v = w / lam_new
        v -= v.mean()
        nv = np.linalg.norm(v)
        if nv < 1e-15:
            return 0.0
        v /= nv
        if abs(lam_new - lam) <= tol:
            lam = lam_new
            break
        lam = lam_new
    if lam >= 1.0 - PRIMITIVITY_MARGIN:
        raise ValueError(
            f"second eigenvalue magnitude {lam} is numerically at 1: "
            "matrix is not primitive (disconnected or periodic mixing)")
    return float(lam)


def is_primitive(A):
    """True iff the directed graph of positive entries is strongly connected and aperiodic."""
    A = np.asarray(A)
    g = nx.DiGraph()
    g.add_nodes_from(range(A.shape[0]))
    g.add_edges_from(zip(*np.nonzero(A > 0)))
    return nx.is_strongly_connected(g) and nx.is_aperiodic(g)

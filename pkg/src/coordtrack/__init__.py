"""coordtrack: deterministic simulation of decentralized dynamic-average tracking.

Agents connected by an undirected network cooperatively track the instantaneous
mean of their time-varying local signals.  The package implements full-vector
consensus/diffusion baselines, gradient-tracking baselines, and randomized
coordinate-update variants with push-sum bias correction, plus the graph,
signal, metric, and experiment-harness machinery needed to study them.
"""

from . import algorithms, backend, graph, harness, metrics, selection, signals
from .algorithms import ALGORITHMS, NetworkRun, fast_forward, init_run
from .backend import BACKEND_NAME, HAS_COMPILED
from .graph import (Topology, build_complete, build_connected_geometric,
                    build_cycle, build_random_geometric, metropolis_weights,
                    second_eigenvalue_magnitude)
from .harness import ExperimentConfig, run_comparison_suite, run_experiment
from .metrics import MetricsRecord, fit_geometric_rate, record
from .signals import (DecayingSinusoidRamp, PiecewiseRamp, SignalModel,
                      StaticSignal, ZeroAverageWalk, make_signal)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "BACKEND_NAME", "HAS_COMPILED", "DecayingSinusoidRamp",
    "ExperimentConfig", "MetricsRecord", "NetworkRun", "PiecewiseRamp",
    "SignalModel", "StaticSignal", "Topology", "ZeroAverageWalk", "algorithms",
    "backend", "build_complete", "build_connected_geometric", "build_cycle",
    "build_random_geometric", "fast_forward", "fit_geometric_rate", "graph",
    "harness", "init_run", "make_signal", "metrics", "metropolis_weights",
    "record", "run_comparison_suite", "run_experiment", "second_eigenvalue_magnitude",
    "selection", "signals",
]

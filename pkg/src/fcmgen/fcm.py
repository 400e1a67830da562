"""Fuzzy cognitive map state update and simulation.

Concept vectors are 1-D float arrays with values in [0, 1]; weight matrices are
``(n, n)`` float arrays where entry ``[j, i]`` is the weight of edge j -> i.
A trajectory is a ``(steps, n)`` array whose row 0 is the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

__all__ = [
    "ActivationSpec",
    "SimulationSpec",
    "activate",
    "step_fcm",
    "simulate_fcm",
    "simulate_batch",
    "as_concept_vector",
    "as_weight_matrix",
]


@dataclass(frozen=True)
class ActivationSpec:
    kind: str = "sigmoid"
    steepness: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sigmoid", "clip"):
            raise ConfigError(f"unknown activation kind {self.kind!r}")
        if self.kind == "sigmoid" and not self.steepness > 0:
            raise ConfigError(f"sigmoid steepness must be > 0, got {self.steepness}")


@dataclass(frozen=True)
class SimulationSpec:
    max_iterations: int
    output_set: frozenset = field(default_factory=frozenset)
    threshold: float = 0.0

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.threshold < 0:
            raise ConfigError("threshold must be nonnegative")
        object.__setattr__(self, "output_set", frozenset(int(o) for o in self.output_set))


def activate(x, spec: ActivationSpec = ActivationSpec()):
    """Squash ``x`` (scalar or array) into [0, 1]."""
    if spec.kind == "clip":
        out = np.clip(x, 0.0, 1.0)
    else:
        out = 1.0 / (1.0 + np.exp(-spec.steepness * np.asarray(x, dtype=np.float64)))
    return float(out) if np.ndim(out) == 0 else out


def as_concept_vector(values, n=None) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 1 or a.size < 1:
        raise DimensionError("concept vector", n if n is not None else "1-D", a.shape)
    if n is not None and a.size != n:
        raise DimensionError("concept vector", n, a.size)
    if np.any(~np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
        raise ValueError("concept values must lie in [0, 1]")
    return a


def as_weight_matrix(weights, n=None) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionError("weight matrix", n if n is not None else "square", w.shape)
    if n is not None and w.shape[0] != n:
        raise DimensionError("weight matrix", n, w.shape[0])
    if np.any(~np.isfinite(w)) or w.min() < -1.0 or w.max() > 1.0:
        raise ValueError("weights must lie in [-1, 1]")
    return w


def _propagate(states, weights, spec):
    # states (g, n), weights (g, n, n). Explicit j-ordered accumulation so a
    # batch of one gives bit-identical results to any larger batch.
    acc = states.copy()
    for j in range(states.shape[1]):
        acc += states[:, j, None] * weights[:, j, :]
    return activate(acc, spec)


def step_fcm(state, weights, spec: ActivationSpec = ActivationSpec()) -> np.ndarray:
    """One synchronous update: ``f(a_i + sum_j a_j * W[j, i])`` for every concept i."""
    a = as_concept_vector(state)
    w = as_weight_matrix(weights, a.size)
    return _propagate(a[None, :], w[None], spec)[0]


def simulate_fcm(
    initial,
    weights,
    spec: ActivationSpec = ActivationSpec(),
    sim: SimulationSpec = SimulationSpec(max_iterations=1),
    return_stabilized: bool = False,
):
    """Iterate the map from ``initial`` for at most ``sim.max_iterations`` steps.

    Stops after the first step at which every concept in ``sim.output_set``
    moved by less than ``sim.threshold``. An empty output set never stops early.
    With ``return_stabilized`` the result is ``(trajectory, stabilized)``.
    """
    a = as_concept_vector(initial)
    w = as_weight_matrix(weights, a.size)
    out = sorted(sim.output_set)
    if out and (out[0] < 0 or out[-1] >= a.size):
        raise DimensionError("output set index", a.size, out)

    states = [a]
    stabilized = False
    cur = a[None, :]
    wb = w[None]
    for _ in range(sim.max_iterations):
        nxt = _propagate(cur, wb, spec)
        states.append(nxt[0])
        if out and np.all(np.abs(nxt[0, out] - cur[0, out]) < sim.threshold):
            stabilized = True
            break
        cur = nxt
    traj = np.vstack(states)
    return (traj, stabilized) if return_stabilized else traj


def simulate_batch(initial, weights, steps: int, spec: ActivationSpec = ActivationSpec()) -> np.ndarray:
    """Simulate many weight matrices from one initial state for exactly ``steps`` steps.

    ``weights`` has shape ``(g, n, n)``; returns ``(g, steps + 1, n)``.
    No validation beyond shapes; this is the learner's hot path.
    """
    g, n, _ = weights.shape
    out = np.empty((g, steps + 1, n))
    out[:, 0, :] = initial
    cur = out[:, 0, :]
    for s in range(1, steps + 1):
        out[:, s, :] = _propagate(cur, weights, spec)
        cur = out[:, s, :]
    return out

"""Time partitions with exact midpoints and nondecreasing local steps.

Two modes are provided. The graded grid uses the exponential node family
t_n = T (e^{n/N} - 1)/(e - 1), whose local steps grow strictly between macro
intervals; the uniform grid has equal macro steps, which is what dyadic step
labels in convergence tables correspond to. The local step tau_n is the half
macro step t_{n+1/2} - t_n; midpoints are exact averages, so the second local
step of every macro interval equals the first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["TimeGrid", "build_graded", "build_uniform", "choose_N_for_target"]


@dataclass(frozen=True)
class TimeGrid:
    """Macro nodes plus exact midpoints; tau[n] = t_half[n] - t_nodes[n]."""

    mode: str                 # "graded" | "uniform"
    t_nodes: np.ndarray       # shape (N+1,)
    t_half: np.ndarray        # shape (N,)
    tau: np.ndarray           # shape (N,) local half steps

    def __post_init__(self):
        t, th, tau = self.t_nodes, self.t_half, self.tau
        if np.any(np.diff(t) <= 0):
            raise RuntimeError("time nodes must be strictly increasing")
        if not np.allclose(th, 0.5 * (t[:-1] + t[1:]), rtol=0, atol=1e-14 * t[-1]):
            raise RuntimeError("midpoints are not exact averages")
        # local steps tau_s for s = n, n+1/2 interleaved must be nondecreasing
        if np.any(np.diff(self.local_steps()) < -1e-14 * tau.max()):
            raise RuntimeError("local time steps must be nondecreasing")
        if self.mode == "graded":
            if np.any(t[1:-1] >= 0.5 * (t[:-2] + t[2:])):
                raise RuntimeError("graded grid violates the midpoint inequality")
            if np.any(np.diff(tau) <= 0):
                raise RuntimeError("graded local steps must strictly increase")

    @property
    def N(self) -> int:
        return len(self.tau)

    @property
    def T(self) -> float:
        return float(self.t_nodes[-1])

    def local_steps(self) -> np.ndarray:
        """Interleaved sequence tau_0, tau_{1/2}, tau_1, ... of length 2N."""
        out = np.empty(2 * self.N)
        out[0::2] = self.tau                      # tau_n = t_{n+1/2} - t_n
        out[1::2] = self.t_nodes[1:] - self.t_half  # tau_{n+1/2} (= tau_n)
        return out

    @property
    def max_local_step(self) -> float:
        return float(self.tau.max())

    @property
    def step_ratio_bound(self) -> float:
        """C-hat = max_s tau_s / tau_0."""
        return float(self.tau.max() / self.tau[0])


def _from_nodes(mode: str, t: np.ndarray) -> TimeGrid:
    t_half = 0.5 * (t[:-1] + t[1:])
    return TimeGrid(mode=mode, t_nodes=t, t_half=t_half, tau=t_half - t[:-1])


def build_graded(T: float, N: int) -> TimeGrid:
    """Exponentially graded nodes t_n = T (e^{n/N} - 1)/(e - 1)."""
    if T <= 0:
        raise ValueError("T must be positive")
    if N < 2:
        raise ValueError("graded grid needs N >= 2")
    n = np.arange(N + 1)
    t = T * (np.exp(n / N) - 1.0) / (math.e - 1.0)
    t[0], t[-1] = 0.0, T  # endpoints exact
    return _from_nodes("graded", t)


def build_uniform(T: float, N: int) -> TimeGrid:
    if T <= 0:
        raise ValueError("T must be positive")
    if N < 1:
        raise ValueError("uniform grid needs N >= 1")
    return _from_nodes("uniform", np.linspace(0.0, T, N + 1))


def choose_N_for_target(T: float, tau_target: float,
                        mode: str = "uniform") -> int:
    """Smallest N whose grid has max local step <= tau_target."""
    if not (0 < tau_target < T / 2):
        raise ValueError(f"tau_target must lie in (0, T/2), got {tau_target}")
    if mode == "uniform":
        return max(2, math.ceil(T / (2.0 * tau_target) - 1e-12))
    if mode != "graded":
        raise ValueError(f"unknown time grid mode {mode!r}")
    N = 2
    while build_graded(T, N).max_local_step > tau_target:
        N += 1
    return N

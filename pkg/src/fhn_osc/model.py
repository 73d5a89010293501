"""FitzHugh-Nagumo reaction terms, parameters, and benchmark problems.

The system solved is

    u_t - gamma1 lap(u) = u (1 - u)(u - theta3) - v + s1,
    v_t - gamma2 lap(v) = eps0 (theta1 u - theta2 v - theta0) + s2,

with Robin (d/dn w = -beta w) or homogeneous Dirichlet boundary conditions.
Three benchmark problems are provided: two with manufactured smooth exact
solutions for convergence studies and one with discontinuous initial data for
stability runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Domain

__all__ = [
    "FhnParams",
    "ProblemSpec",
    "reaction_F",
    "lipschitz_constant_CF",
    "example_problem",
]


@dataclass(frozen=True)
class FhnParams:
    """Diffusivities, Robin coefficients, and reaction constants."""

    gamma1: float = 1.0
    gamma2: float = 1.0
    beta1: float = 0.0
    beta2: float = 0.0
    theta1: float = 1.0   # > 0
    theta2: float = 1.0   # >= 0
    theta3: float = 0.5   # in (0, 1)
    eps0: float = 1.0     # >= 0 recovery rate scale
    theta0: float = 0.0   # offset in the recovery equation

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("diffusivities must be nonnegative")
        if self.beta1 < 0 or self.beta2 < 0:
            raise ValueError("Robin coefficients must be nonnegative")
        if self.theta1 <= 0:
            raise ValueError("theta1 must be positive")
        if self.theta2 < 0:
            raise ValueError("theta2 must be nonnegative")
        if not (0.0 < self.theta3 < 1.0):
            raise ValueError("theta3 must lie in (0, 1)")
        if self.eps0 < 0:
            raise ValueError("eps0 must be nonnegative")

    @property
    def gamma(self) -> tuple[float, float]:
        return (self.gamma1, self.gamma2)

    @property
    def beta(self) -> tuple[float, float]:
        return (self.beta1, self.beta2)


def reaction_F(u, v, p: FhnParams):
    """Vector reaction (f1(u) - g(u,v), f2(u,v)); accepts arrays."""
    f1 = u * (1.0 - u) * (u - p.theta3) - v
    f2 = p.eps0 * (p.theta1 * u - p.theta2 * v - p.theta0)
    return f1, f2


def lipschitz_constant_CF(p: FhnParams, C_sup: float, L: int,
                          p_overlap: int, max_weight: float) -> float:
    """Closed-form Lipschitz constant of the reaction on the bounded ball.

    Diagnostic only; the constant is an upper bound for
    ||F(U) - F(V)|| <= C_F ||U - V|| when component values stay in
    [-C_sup, C_sup].
    """
    if C_sup < 0 or L < 0 or p_overlap < 0 or max_weight < 0:
        raise ValueError("all inputs must be nonnegative")
    a = L * (p_overlap + 2) * max_weight
    inner = a * C_sup**2 + 1.5 + 2.0 * (1.0 + p.theta3) ** 2
    cf2 = 2.0 * (1.0 + max(p.theta1**2, p.theta2**2)
                 + 10.0 * a * C_sup**2 * inner)
    return math.sqrt(cf2)


SourceFn = Callable[..., np.ndarray]  # s(x, y, t, u, v) -> array
ExactFn = Callable[..., np.ndarray]   # w(x, y, t) -> array


@dataclass
class ProblemSpec:
    """A fully posed initial-boundary value problem for the solver."""

    name: str
    domain: Domain
    T: float
    params: FhnParams
    bc_mode: str                      # "robin" | "dirichlet"
    u0: Callable
    v0: Callable
    source1: SourceFn | None = None
    source2: SourceFn | None = None
    exact_u: ExactFn | None = None
    exact_v: ExactFn | None = None
    dirichlet_data: tuple[ExactFn, ExactFn] | None = None
    field_scale: float = 1.0          # rough solution magnitude, for diagnostics

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("final time must be positive")
        if self.bc_mode not in ("robin", "dirichlet"):
            raise ValueError(f"unknown bc_mode {self.bc_mode!r}")

    @property
    def has_exact(self) -> bool:
        return self.exact_u is not None and self.exact_v is not None

    def sources_at(self, x, y, t: float, u, v):
        s1 = self.source1(x, y, t, u, v) if self.source1 is not None else None
        s2 = self.source2(x, y, t, u, v) if self.source2 is not None else None
        return s1, s2


def _example1() -> ProblemSpec:
    # u exact: (t^3+1) sin(2x) sin(2y), v exact: (t^3+1) sin(x) sin(y)
    # on (0, pi)^2, T = 1, diffusion only in u. The u source carries the
    # negated cubic evaluated at the *discrete* u, so the reaction term
    # cancels at solver level, not symbolically.
    params = FhnParams(gamma1=1.0, gamma2=0.0, beta1=0.0, beta2=0.0,
                       theta1=1.0, theta2=1.0, theta3=0.5)

    def exact_u(x, y, t):
        return (t**3 + 1.0) * np.sin(2.0 * x) * np.sin(2.0 * y)

    def exact_v(x, y, t):
        return (t**3 + 1.0) * np.sin(x) * np.sin(y)

    def source1(x, y, t, u, v):
        return ((8.0 * t**3 + 3.0 * t**2 + 8.0) * np.sin(2.0 * x) * np.sin(2.0 * y)
                - u * (1.0 - u) * (u - 0.5)
                + (t**3 + 1.0) * np.sin(x) * np.sin(y))

    def source2(x, y, t, u, v):
        return ((t**3 + 3.0 * t**2 + 1.0) * np.sin(x) * np.sin(y)
                - (t**3 + 1.0) * np.sin(2.0 * x) * np.sin(2.0 * y))

    return ProblemSpec(
        name="example1",
        domain=Domain(0.0, math.pi, 0.0, math.pi),
        T=1.0, params=params, bc_mode="dirichlet",
        u0=lambda x, y: exact_u(x, y, 0.0),
        v0=lambda x, y: exact_v(x, y, 0.0),
        source1=source1, source2=source2,
        exact_u=exact_u, exact_v=exact_v,
        field_scale=2.0,
    )


def _example2() -> ProblemSpec:
    # u exact: e^t cos(pi x) cos(3 pi y), v exact: e^{2t} cos(2 pi x) cos(4 pi y)
    # on (-1, 1)^2, T = 2, diffusion only in v. All exact normal derivatives
    # vanish on the boundary, so the Robin condition holds with beta = 0.
    params = FhnParams(gamma1=0.0, gamma2=1.0, beta1=0.0, beta2=0.0,
                       theta1=1.0, theta2=1.0, theta3=0.5)
    pi = math.pi

    def exact_u(x, y, t):
        return np.exp(t) * np.cos(pi * x) * np.cos(3.0 * pi * y)

    def exact_v(x, y, t):
        return np.exp(2.0 * t) * np.cos(2.0 * pi * x) * np.cos(4.0 * pi * y)

    def source1(x, y, t, u, v):
        ue = exact_u(x, y, t)
        ve = exact_v(x, y, t)
        # u_t = cubic(u) - v + s1 with u_t = ue and the cubic at the exact u
        return ue - ue * (1.0 - ue) * (ue - 0.5) + ve

    def source2(x, y, t, u, v):
        ue = exact_u(x, y, t)
        ve = exact_v(x, y, t)
        # v_t - lap v = u - v + s2; lap v = -20 pi^2 v
        return (2.0 + 20.0 * pi**2) * ve - ue + ve

    return ProblemSpec(
        name="example2",
        domain=Domain(-1.0, 1.0, -1.0, 1.0),
        T=2.0, params=params, bc_mode="robin",
        u0=lambda x, y: exact_u(x, y, 0.0),
        v0=lambda x, y: exact_v(x, y, 0.0),
        source1=source1, source2=source2,
        exact_u=exact_u, exact_v=exact_v,
        field_scale=float(np.exp(4.0)),
    )


def _example3() -> ProblemSpec:
    # Discontinuous plateau initial data on (0, 2.5)^2, weak diffusion in u,
    # none in v; homogeneous Dirichlet for u (v carries no Laplacian and
    # needs no boundary condition).
    params = FhnParams(gamma1=1e-4, gamma2=0.0, beta1=0.0, beta2=0.0,
                       theta1=0.5, theta2=1.0, theta3=1e-2, eps0=1e-2,
                       theta0=0.0)

    def u0(x, y):
        return np.where((x <= 1.25) & (y <= 1.25), 1.0, 0.0)

    def v0(x, y):
        return np.where(y >= 1.25, 0.1, 0.0)

    return ProblemSpec(
        name="example3",
        domain=Domain(0.0, 2.5, 0.0, 2.5),
        T=1.0, params=params, bc_mode="dirichlet",
        u0=u0, v0=v0,
        source1=None, source2=None,
        field_scale=1.0,
    )


def example_problem(example_id: int) -> ProblemSpec:
    """Benchmark problem by id (1, 2, or 3)."""
    builders = {1: _example1, 2: _example2, 3: _example3}
    if example_id not in builders:
        raise ValueError(f"unknown example id {example_id}; expected 1, 2 or 3")
    return builders[example_id]()

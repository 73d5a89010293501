import numpy as np
import pytest

import fhn_osc as fo
from fhn_osc.model import FhnParams, ProblemSpec


def polynomial_problem(gamma=(1.0, 1.0), slope=1.0):
    """Manufactured problem on (0,1)^2 whose solution is linear in time and a
    per-axis quartic with zero normal derivative on the boundary, so the
    homogeneous Robin (beta = 0) weak form is exact for it. The source is the
    pointwise PDE residual, which makes the scheme reproduce the solution to
    roundoff; see the exactness tests."""
    X = 1.0

    def p(x):
        return x**2 * (x - X) ** 2

    def d2p(x):
        return 2 * ((x - X) * (2 * x - X) + x * (2 * x - X) + 2 * x * (x - X))

    params = FhnParams(gamma1=gamma[0], gamma2=gamma[1])

    def exact_u(x, y, t):
        return (1.0 + slope * t) * p(x) * p(y)

    def exact_v(x, y, t):
        return 0.5 * (1.0 + slope * t) * p(x) * p(y)

    def lap(x, y, t, scale):
        return scale * (1.0 + slope * t) * (d2p(x) * p(y) + p(x) * d2p(y))

    def source1(x, y, t, u, v):
        ue, ve = exact_u(x, y, t), exact_v(x, y, t)
        f1 = ue * (1 - ue) * (ue - params.theta3) - ve
        return slope * p(x) * p(y) - gamma[0] * lap(x, y, t, 1.0) - f1

    def source2(x, y, t, u, v):
        ue, ve = exact_u(x, y, t), exact_v(x, y, t)
        f2 = params.eps0 * (params.theta1 * ue - params.theta2 * ve)
        return 0.5 * slope * p(x) * p(y) - gamma[1] * lap(x, y, t, 0.5) - f2

    return ProblemSpec(
        name="poly-linear-t", domain=fo.Domain(0, X, 0, X), T=1.0,
        params=params, bc_mode="robin",
        u0=lambda x, y: exact_u(x, y, 0.0),
        v0=lambda x, y: exact_v(x, y, 0.0),
        source1=source1, source2=source2,
        exact_u=exact_u, exact_v=exact_v,
    )


def stationary_problem(gamma=(1.0, 1.0)):
    return polynomial_problem(gamma=gamma, slope=0.0)


def constant_field_problem(uv0=(0.3, -0.2)):
    """Zero diffusion, beta = 0, spatially constant data: the whole dynamics
    is the two-dimensional reaction ODE, which scipy can integrate as an
    independent oracle."""
    params = FhnParams(gamma1=0.0, gamma2=0.0)
    return ProblemSpec(
        name="constant-ode", domain=fo.Domain(0, 1, 0, 1), T=1.0,
        params=params, bc_mode="robin",
        u0=lambda x, y: np.full_like(np.asarray(x, dtype=float), uv0[0]),
        v0=lambda x, y: np.full_like(np.asarray(x, dtype=float), uv0[1]),
    )


@pytest.fixture(scope="session")
def unit_square():
    return fo.Domain(0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def small_disc(unit_square):
    """2x2 mesh on the unit square, cubic splines, L=4 (exact products)."""
    mesh = fo.build_mesh(unit_square, 0.5)
    grid = fo.build_collocation(mesh, fo.gauss_rule(4))
    space = fo.build_spline_space(mesh, 3)
    basis = fo.orthonormalize(space, grid)
    return mesh, grid, basis


@pytest.fixture(scope="session")
def quartic_disc(unit_square):
    """4x4 mesh on the unit square, quartic splines, L=6."""
    mesh = fo.build_mesh(unit_square, 0.25)
    grid = fo.build_collocation(mesh, fo.gauss_rule(6))
    space = fo.build_spline_space(mesh, 4)
    basis = fo.orthonormalize(space, grid)
    return mesh, grid, basis


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)

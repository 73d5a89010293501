"""Predictor-corrector time stepping on the orthonormal spline basis.

Scheme structure per macro step t_n -> t_{n+1} (local half steps tau):

  predictor  three-level nonuniform stencil advancing to the midpoint
             t_{n+1/2}; reaction and sources enter explicitly at t_n.
  corrector  BDF2-on-half-steps solve for t_{n+1}; the nonlinearity is
             linearized by the two-point extrapolation 2 F^{n+1/2} - F^n.

With the orthonormal basis the mass matrix is the identity, so the predictor
in its classical form is a pure explicit update. That form is conditionally
stable: for a diffusion eigenvalue lam the explicit midpoint chain amplifies
by a factor approaching 3 per macro step once tau * lam > 1. The default
"stabilized" predictor therefore evaluates the dissipative flux at the time
interpolant of the two midpoint states (weights chosen to hit t_n exactly),
which keeps second-order accuracy, costs one cached tensor solve, and is
unconditionally stable. predictor="explicit" selects the classical update.

Operators never materialize 2D matrices: stiffness, boundary, and jump terms
are Kronecker sums of per-axis matrices, and solves diagonalize per axis.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .basis import BasisSet, build_spline_space, orthonormalize
from .mesh import CollocationGrid, Mesh, build_collocation, build_mesh, gauss_rule
from .model import FhnParams, ProblemSpec, reaction_F
from .timegrid import TimeGrid

__all__ = [
    "BlowUpError",
    "SolverError",
    "InitializationError",
    "SolverConfig",
    "StepReport",
    "State",
    "Trajectory",
    "AssembledOperators",
    "stencil_predictor_dt",
    "stencil_corrector_dt",
    "extrapolate_F",
    "assemble_operators",
    "initialize",
    "predictor_step",
    "corrector_step",
    "run",
    "discretize",
    "solve_problem",
]


class BlowUpError(RuntimeError):
    """Non-finite state encountered; signals instability."""

    def __init__(self, step: int, phase: str):
        super().__init__(f"non-finite state after {phase} at macro step {step}")
        self.step = step
        self.phase = phase


class SolverError(RuntimeError):
    """Linear solve failed or exceeded the residual tolerance."""


class InitializationError(RuntimeError):
    """Startup fixed-point iteration did not converge."""


# -- time stencils ----------------------------------------------------------


def stencil_predictor_dt(tau_n: float, tau_nm_half: float):
    """Weights (a, b, c) of the derivative stencil at t_n over the levels
    (w^{n+1/2}, w^n, w^{n-1/2}); exact on quadratics."""
    if tau_n <= 0 or tau_nm_half <= 0:
        raise ValueError("local steps must be positive")
    a = tau_nm_half / (tau_n * (tau_nm_half + tau_n))
    b = (tau_n - tau_nm_half) / (tau_n * tau_nm_half)
    c = -tau_n / (tau_nm_half * (tau_n + tau_nm_half))
    return a, b, c


def stencil_corrector_dt(tau_n: float):
    """BDF2-on-half-steps weights (w^{n+1}, w^{n+1/2}, w^n) at t_{n+1}."""
    if tau_n <= 0:
        raise ValueError("local step must be positive")
    return 1.5 / tau_n, -2.0 / tau_n, 0.5 / tau_n


def extrapolate_F(F_half: np.ndarray, F_n: np.ndarray) -> np.ndarray:
    """Two-point extrapolation to t_{n+1}: exact for linear-in-t data."""
    if np.shape(F_half) != np.shape(F_n):
        raise ValueError("extrapolation operands must have equal shapes")
    return 2.0 * np.asarray(F_half) - np.asarray(F_n)


# -- assembled operators ------------------------------------------------------


@dataclass
class _ComponentOperator:
    """gamma * [(Sx + beta Ex - Jx) (+) (Sy + beta Ey - Jy)] on one component.

    Solves of (I + theta * Op) use the eigendecomposition of the symmetric
    part of the per-axis matrices; the skew part is roundoff-sized (jump
    matrices on the C1 space), and every solve is residual checked.
    """

    gamma: float
    Gx: np.ndarray
    Gy: np.ndarray
    _eig: tuple | None = None

    def apply(self, C: np.ndarray) -> np.ndarray:
        if self.gamma == 0.0:
            return np.zeros_like(C)
        return self.gamma * (self.Gx @ C + C @ self.Gy.T)

    def _eigendecomposition(self):
        if self._eig is None:
            lx, Ux = scipy.linalg.eigh(0.5 * (self.Gx + self.Gx.T))
            ly, Uy = scipy.linalg.eigh(0.5 * (self.Gy + self.Gy.T))
            self._eig = (lx, Ux, ly, Uy)
        return self._eig

    def solve(self, theta: float, R: np.ndarray) -> np.ndarray:
        if self.gamma == 0.0 or theta == 0.0:
            return R.copy()
        lx, Ux, ly, Uy = self._eigendecomposition()
        denom = 1.0 + theta * self.gamma * (lx[:, None] + ly[None, :])
        if np.any(denom <= 0):
            raise SolverError("tensor system is singular or indefinite")
        return Ux @ ((Ux.T @ R @ Uy) / denom) @ Uy.T


class AssembledOperators:
    """Stiffness + boundary - jump operator for both components."""

    def __init__(self, basis: BasisSet, params: FhnParams,
                 residual_tol: float = 1e-10):
        self.basis = basis
        self.params = params
        self.residual_tol = residual_tol
        self.solve_count = 0
        self.comps: list[_ComponentOperator] = []
        for k, (ax, ay) in enumerate(basis.axes):
            beta = params.beta[k]
            self.comps.append(_ComponentOperator(
                gamma=params.gamma[k],
                Gx=self._axis_matrix(ax, beta),
                Gy=self._axis_matrix(ay, beta),
            ))

    @staticmethod
    def _axis_matrix(ax, beta: float) -> np.ndarray:
        S = ax.D1.T @ (ax.w[:, None] * ax.D1)
        E = np.outer(ax.Vb[0], ax.Vb[0]) + np.outer(ax.Vb[1], ax.Vb[1])
        Vbrk = ax.design(ax.breaks[1:-1]) if len(ax.breaks) > 2 else \
            np.zeros((0, ax.dim))
        J = Vbrk.T @ ax.jump_d1  # J[test, trial]
        return S + beta * E - J

    def apply(self, c: np.ndarray) -> np.ndarray:
        Cu, Cv = self.basis.split(c)
        return self.basis.join(self.comps[0].apply(Cu), self.comps[1].apply(Cv))

    def solve(self, theta: float, rhs: np.ndarray) -> np.ndarray:
        """(I + theta Op)^{-1} rhs with an enforced relative residual check."""
        self.solve_count += 1
        Ru, Rv = self.basis.split(rhs)
        sol = self.basis.join(self.comps[0].solve(theta, Ru),
                              self.comps[1].solve(theta, Rv))
        # defect correction absorbs the skew jump-matrix part if present
        for _ in range(2):
            res = rhs - sol - theta * self.apply(sol)
            rnorm = np.linalg.norm(res)
            if rnorm <= self.residual_tol * max(1.0, np.linalg.norm(rhs)):
                return sol
            Du, Dv = self.basis.split(res)
            sol = sol + self.basis.join(self.comps[0].solve(theta, Du),
                                        self.comps[1].solve(theta, Dv))
        res = rhs - sol - theta * self.apply(sol)
        rnorm = np.linalg.norm(res)
        if rnorm > self.residual_tol * max(1.0, np.linalg.norm(rhs)):
            raise SolverError(f"solve residual {rnorm:.3e} above tolerance")
        return sol

    # dense assemblies for diagnostics and dual-route tests (small cases only)

    def dense_block(self, kind: str, k: int) -> np.ndarray:
        ax, ay = self.basis.axes[k]
        Ix, Iy = np.eye(ax.dim), np.eye(ay.dim)
        if kind == "A":
            Sx = ax.D1.T @ (ax.w[:, None] * ax.D1)
            Sy = ay.D1.T @ (ay.w[:, None] * ay.D1)
            return self.params.gamma[k] * (np.kron(Sx, Iy) + np.kron(Ix, Sy))
        if kind == "B":
            Ex = np.outer(ax.Vb[0], ax.Vb[0]) + np.outer(ax.Vb[1], ax.Vb[1])
            Ey = np.outer(ay.Vb[0], ay.Vb[0]) + np.outer(ay.Vb[1], ay.Vb[1])
            gb = self.params.gamma[k] * self.params.beta[k]
            return gb * (np.kron(Ex, Iy) + np.kron(Ix, Ey))
        if kind == "J":
            Vbx = ax.design(ax.breaks[1:-1]) if len(ax.breaks) > 2 else \
                np.zeros((0, ax.dim))
            Vby = ay.design(ay.breaks[1:-1]) if len(ay.breaks) > 2 else \
                np.zeros((0, ay.dim))
            Jx = Vbx.T @ ax.jump_d1
            Jy = Vby.T @ ay.jump_d1
            return self.params.gamma[k] * (np.kron(Jx, Iy) + np.kron(Ix, Jy))
        raise ValueError(f"unknown operator block {kind!r}")


def assemble_operators(basis: BasisSet, params: FhnParams,
                       residual_tol: float = 1e-10) -> AssembledOperators:
    return AssembledOperators(basis, params, residual_tol)


# -- nonlinearity pipeline ----------------------------------------------------


class _NonFiniteField(RuntimeError):
    """Internal: pointwise nonlinearity produced inf/nan (overflow)."""


def _rhs_coeffs(problem: ProblemSpec, basis: BasisSet, t: float,
                c: np.ndarray = None, values=None) -> np.ndarray:
    """Projection of reaction + sources at time t.

    The nonlinearity is evaluated pointwise at the collocation points of the
    reconstructed field (or of externally supplied values) and projected.
    """
    X, Y = basis.grid.meshgrid()
    if values is None:
        U, V = basis.values_on_grid(c)
    else:
        U, V = values
    with np.errstate(over="ignore", invalid="ignore"):
        f1, f2 = reaction_F(U, V, problem.params)
        s1, s2 = problem.sources_at(X, Y, t, U, V)
        if s1 is not None:
            f1 = f1 + s1
        if s2 is not None:
            f2 = f2 + s2
    if not (np.all(np.isfinite(f1)) and np.all(np.isfinite(f2))):
        raise _NonFiniteField("reaction/source evaluation overflowed")
    return basis.project_values(f1, f2)


# -- configuration, state, trajectory ----------------------------------------


@dataclass
class SolverConfig:
    predictor: str = "stabilized"      # "stabilized" | "explicit"
    residual_tol: float = 1e-10
    init_tol: float = 1e-12
    init_max_iter: int = 50

    def __post_init__(self):
        if self.predictor not in ("stabilized", "explicit"):
            raise ValueError(f"unknown predictor mode {self.predictor!r}")


@dataclass
class StepReport:
    step: int
    phase: str            # "init" | "predictor" | "corrector"
    residual: float       # linear-solve residual (0 for explicit updates)
    state_norm: float     # discrete norm of the new state (coefficient 2-norm)
    iterations: int = 0


@dataclass
class State:
    """Rolling window of active coefficient vectors."""

    c_nm_half: np.ndarray | None
    c_n: np.ndarray
    c_np_half: np.ndarray | None = None
    c_np1: np.ndarray | None = None
    index: int = 0


@dataclass
class Trajectory:
    problem: ProblemSpec
    basis: BasisSet
    grid: CollocationGrid
    timegrid: TimeGrid
    times: list[float] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    coeffs: list[np.ndarray] = field(default_factory=list)
    reports: list[StepReport] = field(default_factory=list)
    wall_seconds: float = 0.0

    def add(self, t: float, label: str, c: np.ndarray):
        self.times.append(float(t))
        self.labels.append(label)
        self.coeffs.append(c)

    def norms(self) -> np.ndarray:
        """Discrete norm of the state at every stored level."""
        return np.array([np.linalg.norm(c) for c in self.coeffs])

    def at_time(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.coeffs[i]


# -- scheme phases -------------------------------------------------------------


def initialize(problem: ProblemSpec, basis: BasisSet, grid: CollocationGrid,
               tau0: float, ops: AssembledOperators | None = None,
               config: SolverConfig | None = None):
    """Startup pair (c^0, c^{1/2}).

    c^0 projects the initial data. c^{1/2} solves the implicit trapezoid
    startup equation as a fixed point; the dissipative part is solved
    directly (the contraction rate of iterating it would be tau0*lam/2, far
    above 1 for stiff modes), so Picard iteration runs on the pointwise
    reaction only and contracts at rate ~ tau0 * Lip(F) / 2.
    """
    if tau0 <= 0:
        raise ValueError("tau0 must be positive")
    config = config or SolverConfig()
    ops = ops or assemble_operators(basis, problem.params, config.residual_tol)
    if problem.bc_mode == "dirichlet" and problem.dirichlet_data is not None:
        raise ValueError("only homogeneous Dirichlet data is supported")

    X, Y = grid.meshgrid()
    u0 = np.asarray(problem.u0(X, Y), dtype=float)
    v0 = np.asarray(problem.v0(X, Y), dtype=float)
    c0 = basis.project_values(u0, v0)

    half = 0.5 * tau0
    try:
        rhs0 = _rhs_coeffs(problem, basis, 0.0, values=(u0, v0))
        const = c0 - half * ops.apply(c0) + half * rhs0

        y = c0.copy()
        for it in range(config.init_max_iter):
            rhs_half = _rhs_coeffs(problem, basis, tau0, c=y)
            y_new = ops.solve(half, const + half * rhs_half)
            delta = np.linalg.norm(y_new - y)
            y = y_new
            if delta <= config.init_tol * max(1.0, np.linalg.norm(y)):
                return c0, y
    except _NonFiniteField:
        raise InitializationError("startup iterate overflowed") from None
    raise InitializationError(
        f"startup iteration stalled after {config.init_max_iter} sweeps, "
        f"last update {delta:.3e}"
    )


def predictor_step(state: State, ops: AssembledOperators, tau_n: float,
                   tau_nm_half: float, rhs_n: np.ndarray,
                   mode: str = "stabilized") -> np.ndarray:
    """Advance to the midpoint t_{n+1/2}.

    rhs_n is the projected reaction + source at t_n. In "explicit" mode this
    is the classical update with no linear solve; "stabilized" moves the
    dissipative flux onto the interpolant of the midpoint states (see module
    docstring) at the cost of one tensor solve.
    """
    if tau_n <= 0 or tau_nm_half <= 0:
        raise ValueError("local steps must be positive")
    r = tau_n / tau_nm_half
    coeff = tau_n * (tau_n + tau_nm_half) / tau_nm_half
    lin = -(r * r - 1.0) * state.c_n + r * r * state.c_nm_half
    if mode == "explicit":
        c_half = lin + coeff * (rhs_n - ops.apply(state.c_n))
    elif mode == "stabilized":
        rhs = lin - (tau_n * r) * ops.apply(state.c_nm_half) + coeff * rhs_n
        c_half = ops.solve(tau_n, rhs)
    else:
        raise ValueError(f"unknown predictor mode {mode!r}")
    return c_half


def corrector_step(state: State, ops: AssembledOperators, tau_n: float,
                   rhs_extrap: np.ndarray) -> np.ndarray:
    """Solve (I + (2 tau/3) Op) c^{n+1} = (4/3) c^{n+1/2} - (1/3) c^n + rhs.

    rhs_extrap is the projected extrapolated nonlinearity 2 (F+s)^{n+1/2}
    - (F+s)^n.
    """
    rhs = (4.0 / 3.0) * state.c_np_half - (1.0 / 3.0) * state.c_n \
        + (2.0 * tau_n / 3.0) * rhs_extrap
    return ops.solve(2.0 * tau_n / 3.0, rhs)


def _check_finite(c: np.ndarray, step: int, phase: str):
    if not np.all(np.isfinite(c)):
        raise BlowUpError(step, phase)


def run(problem: ProblemSpec, mesh: Mesh, basis: BasisSet,
        grid: CollocationGrid, timegrid: TimeGrid,
        config: SolverConfig | None = None) -> Trajectory:
    """Full trajectory: startup, then predictor/corrector per macro step.

    Stores coefficients at every macro node and midpoint. The first corrector
    application (n = 0) uses the startup pair directly since the predictor
    needs two history levels.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    ops = assemble_operators(basis, problem.params, config.residual_tol)
    traj = Trajectory(problem=problem, basis=basis, grid=grid,
                      timegrid=timegrid)
    tg = timegrid

    c0, c_half = initialize(problem, basis, grid, tg.tau[0], ops, config)
    _check_finite(c_half, 0, "init")
    traj.add(tg.t_nodes[0], "node", c0)
    traj.add(tg.t_half[0], "mid", c_half)
    traj.reports.append(StepReport(0, "init", 0.0, float(np.linalg.norm(c_half))))

    # first corrector from the startup pair
    state = State(c_nm_half=None, c_n=c0, c_np_half=c_half, index=0)
    try:
        rhs_n = _rhs_coeffs(problem, basis, tg.t_nodes[0], c=c0)
        rhs_half = _rhs_coeffs(problem, basis, tg.t_half[0], c=c_half)
    except _NonFiniteField:
        raise BlowUpError(0, "corrector") from None
    c_next = corrector_step(state, ops, tg.tau[0], extrapolate_F(rhs_half, rhs_n))
    _check_finite(c_next, 0, "corrector")
    traj.add(tg.t_nodes[1], "node", c_next)
    traj.reports.append(StepReport(0, "corrector", 0.0,
                                   float(np.linalg.norm(c_next))))

    c_nm_half, c_n = c_half, c_next
    for n in range(1, tg.N):
        state = State(c_nm_half=c_nm_half, c_n=c_n, index=n)
        try:
            rhs_n = _rhs_coeffs(problem, basis, tg.t_nodes[n], c=c_n)
            c_np_half = predictor_step(state, ops, tg.tau[n], tg.tau[n - 1],
                                       rhs_n, config.predictor)
        except _NonFiniteField:
            raise BlowUpError(n, "predictor") from None
        _check_finite(c_np_half, n, "predictor")
        traj.add(tg.t_half[n], "mid", c_np_half)
        traj.reports.append(StepReport(n, "predictor", 0.0,
                                       float(np.linalg.norm(c_np_half))))

        state.c_np_half = c_np_half
        try:
            rhs_half = _rhs_coeffs(problem, basis, tg.t_half[n], c=c_np_half)
        except _NonFiniteField:
            raise BlowUpError(n, "corrector") from None
        c_np1 = corrector_step(state, ops, tg.tau[n],
                               extrapolate_F(rhs_half, rhs_n))
        _check_finite(c_np1, n, "corrector")
        traj.add(tg.t_nodes[n + 1], "node", c_np1)
        traj.reports.append(StepReport(n, "corrector", 0.0,
                                       float(np.linalg.norm(c_np1))))
        c_nm_half, c_n = c_np_half, c_np1

    traj.wall_seconds = time.perf_counter() - t0
    return traj


# -- discretization staging ----------------------------------------------------


def discretize(problem: ProblemSpec, n_elements: int, m: int = 4,
               L: int | None = None):
    """Mesh, collocation grid, and orthonormal basis for a problem.

    n_elements is the per-axis element count; L defaults to m + 1 so the
    discrete products are exact on the spline space. Dirichlet elimination
    applies per component only where that component actually diffuses.
    """
    if n_elements < 1:
        raise ValueError("n_elements must be positive")
    L = L if L is not None else m + 1
    side = max(problem.domain.side_x, problem.domain.side_y)
    mesh = build_mesh(problem.domain, side / n_elements + 1e-12)
    rule = gauss_rule(L)
    grid = build_collocation(mesh, rule)
    space = build_spline_space(mesh, m)
    if problem.bc_mode == "dirichlet":
        flags = (problem.params.gamma1 > 0, problem.params.gamma2 > 0)
    else:
        flags = (False, False)
    basis = orthonormalize(space, grid, dirichlet=flags)
    return mesh, grid, basis


def solve_problem(problem: ProblemSpec, n_elements: int, timegrid: TimeGrid,
                  m: int = 4, L: int | None = None,
                  config: SolverConfig | None = None) -> Trajectory:
    mesh, grid, basis = discretize(problem, n_elements, m, L)
    return run(problem, mesh, basis, grid, timegrid, config)

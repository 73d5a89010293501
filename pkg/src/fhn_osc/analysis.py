"""Error norms, convergence orders, and an independent reference solver.

The reference solver is deliberately built from different ingredients than
the main discretization: second-order centered finite differences on a vertex
grid in space and Crank-Nicolson in time, with Picard iteration on the cubic
reaction. It exists to cross-validate the spline solver, most importantly on
the discontinuous-data problem where no exact solution is available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from .model import ProblemSpec, reaction_F

__all__ = [
    "OracleError",
    "OracleSolution",
    "ErrorReport",
    "error_linf_l2",
    "convergence_order",
    "oracle_solve",
    "stability_functional",
]


class OracleError(RuntimeError):
    """Picard iteration in the reference solver failed to converge."""


@dataclass
class ErrorReport:
    """Per-component max-in-time discrete-L2 errors for one (h, tau) run."""

    h_label: float
    tau_label: float
    err_u: float
    err_v: float
    order_u: float | None = None
    order_v: float | None = None
    wall_seconds: float = 0.0


def convergence_order(coarse_err: float, fine_err: float) -> float:
    """log2 of the error ratio under one halving of h or tau."""
    if coarse_err <= 0 or fine_err <= 0:
        raise ValueError("convergence order needs strictly positive errors")
    return float(np.log2(coarse_err / fine_err))


def error_linf_l2(trajectory, exact_u=None, exact_v=None,
                  grid=None) -> tuple[float, float]:
    """Max over stored time levels of the per-component discrete L2 error.

    Both macro nodes and midpoints enter the max. The exact solution defaults
    to the one attached to the trajectory's problem.
    """
    problem = trajectory.problem
    if exact_u is None or exact_v is None:
        if not problem.has_exact:
            raise ValueError("no exact solution available for error measurement")
        exact_u, exact_v = problem.exact_u, problem.exact_v
    basis = trajectory.basis
    grid = grid if grid is not None else trajectory.grid
    X, Y = grid.meshgrid()
    w2 = grid.weights.reshape(X.shape)
    eu_max = ev_max = 0.0
    for t, c in zip(trajectory.times, trajectory.coeffs):
        U, V = basis.values_on_grid(c)
        du = U - exact_u(X, Y, t)
        dv = V - exact_v(X, Y, t)
        eu_max = max(eu_max, float(np.sqrt(np.sum(w2 * du * du))))
        ev_max = max(ev_max, float(np.sqrt(np.sum(w2 * dv * dv))))
    return eu_max, ev_max


def stability_functional(trajectory, exact_u=None, exact_v=None) -> np.ndarray:
    """Three-level squared error energy plus the weighted increment sum.

    Entry n (n = 1 .. N-1) is
        ||e^{n+1}||^2 + ||e^{n+1/2}||^2 + ||e^n||^2
        + 2 sum_{s=1/2}^{n-1/2} (tau_s^2 - tau_{s-1/2}^2)/tau_{n-1/2}^2
            * ||e^{s+1/2} - e^s||^2
    with the combined two-component discrete norm. The increment sum vanishes
    on uniform grids.
    """
    problem = trajectory.problem
    if exact_u is None or exact_v is None:
        exact_u, exact_v = problem.exact_u, problem.exact_v
    basis, grid, tg = trajectory.basis, trajectory.grid, trajectory.timegrid
    X, Y = grid.meshgrid()
    w2 = grid.weights.reshape(X.shape)

    # error fields at every stored half-index level
    errs = []
    for t, c in zip(trajectory.times, trajectory.coeffs):
        U, V = basis.values_on_grid(c)
        errs.append((U - exact_u(X, Y, t), V - exact_v(X, Y, t)))

    def nrm2(e):
        return float(np.sum(w2 * e[0] ** 2) + np.sum(w2 * e[1] ** 2))

    sq = [nrm2(e) for e in errs]
    steps = tg.local_steps()  # interleaved tau_0, tau_{1/2}, tau_1, ...
    out = []
    for n in range(1, tg.N):
        acc = sq[2 * n + 2] + sq[2 * n + 1] + sq[2 * n]
        denom = steps[2 * n - 1] ** 2
        for s_idx in range(1, 2 * n):
            wgt = (steps[s_idx] ** 2 - steps[s_idx - 1] ** 2) / denom
            if wgt != 0.0:
                diff = (errs[s_idx + 1][0] - errs[s_idx][0],
                        errs[s_idx + 1][1] - errs[s_idx][1])
                acc += 2.0 * wgt * nrm2(diff)
        out.append(acc)
    return np.asarray(out)


# ---------------------------------------------------------------------------
# finite-difference / Crank-Nicolson reference solver
# ---------------------------------------------------------------------------


@dataclass
class OracleSolution:
    """Reference solution on its own vertex grid with bilinear accessors."""

    xs: np.ndarray
    ys: np.ndarray
    u: np.ndarray  # (nx+1, ny+1)
    v: np.ndarray
    t_final: float

    def u_at(self, pts: np.ndarray) -> np.ndarray:
        return RegularGridInterpolator((self.xs, self.ys), self.u)(pts)

    def v_at(self, pts: np.ndarray) -> np.ndarray:
        return RegularGridInterpolator((self.xs, self.ys), self.v)(pts)


def _axis_lap_1d(n_nodes: int, h: float, bc: str) -> sp.csr_matrix:
    """Second-difference matrix on axis nodes; 'neumann' mirrors the ghosts,
    'dirichlet' rows stay zero on the boundary (values pinned separately)."""
    main = np.full(n_nodes, -2.0)
    off = np.ones(n_nodes - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if bc == "neumann":
        A[0, 1] = 2.0
        A[-1, -2] = 2.0
    elif bc == "dirichlet":
        A[0, :] = 0.0
        A[-1, :] = 0.0
    else:
        raise ValueError(f"unsupported oracle boundary mode {bc!r}")
    return (A / h**2).tocsr()


def oracle_solve(problem: ProblemSpec, nx: int, nt: int,
                 picard_tol: float = 1e-12, max_picard: int = 200) -> OracleSolution:
    """Reference solve on an (nx+1) x (nx+1) vertex grid with nt CN steps."""
    if problem.bc_mode == "robin" and max(problem.params.beta) != 0.0:
        raise ValueError("oracle supports Robin data only with beta = 0")
    d = problem.domain
    xs = np.linspace(d.x_min, d.x_max, nx + 1)
    ys = np.linspace(d.y_min, d.y_max, nx + 1)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    shape = X.shape
    npts = X.size

    bc = "dirichlet" if problem.bc_mode == "dirichlet" else "neumann"
    mask_boundary = np.zeros(shape, dtype=bool)
    mask_boundary[0, :] = mask_boundary[-1, :] = True
    mask_boundary[:, 0] = mask_boundary[:, -1] = True
    bmask = mask_boundary.ravel()

    Lx = _axis_lap_1d(nx + 1, hx, bc)
    Ly = _axis_lap_1d(nx + 1, hy, bc)
    lap = sp.kronsum(Ly, Lx, format="csr")  # kronsum(B, A) = A (+) B on (x, y)

    dt = problem.T / nt
    p = problem.params
    gammas = p.gamma

    solvers = []
    for g in gammas:
        if g > 0:
            M = sp.identity(npts, format="csr") - 0.5 * dt * g * lap
            if bc == "dirichlet":
                M = M.tolil()
                idx = np.where(bmask)[0]
                M[idx, :] = 0.0
                M[idx, idx] = 1.0
                M = M.tocsr()
            solvers.append(splu(M.tocsc()))
        else:
            solvers.append(None)

    u = problem.u0(X, Y).astype(float).ravel()
    v = problem.v0(X, Y).astype(float).ravel()
    if bc == "dirichlet":
        u[bmask] = 0.0
        if gammas[1] > 0:
            v[bmask] = 0.0

    def rhs_parts(t, uu, vv):
        f1, f2 = reaction_F(uu, vv, p)
        s1, s2 = problem.sources_at(X.ravel(), Y.ravel(), t, uu, vv)
        if s1 is not None:
            f1 = f1 + s1
        if s2 is not None:
            f2 = f2 + s2
        return f1, f2

    t = 0.0
    for _ in range(nt):
        f1_old, f2_old = rhs_parts(t, u, v)
        lap_u_old = gammas[0] * (lap @ u) if gammas[0] > 0 else 0.0
        lap_v_old = gammas[1] * (lap @ v) if gammas[1] > 0 else 0.0
        t_new = t + dt
        un, vn = u.copy(), v.copy()
        for it in range(max_picard):
            f1_new, f2_new = rhs_parts(t_new, un, vn)
            bu = u + 0.5 * dt * (lap_u_old + f1_old + f1_new)
            bv = v + 0.5 * dt * (lap_v_old + f2_old + f2_new)
            if solvers[0] is not None:
                if bc == "dirichlet":
                    bu[bmask] = 0.0
                u_next = solvers[0].solve(bu)
            else:
                u_next = bu
            if solvers[1] is not None:
                if bc == "dirichlet":
                    bv[bmask] = 0.0
                v_next = solvers[1].solve(bv)
            else:
                v_next = bv
            delta = max(np.max(np.abs(u_next - un)), np.max(np.abs(v_next - vn)))
            scale = max(1.0, np.max(np.abs(u_next)), np.max(np.abs(v_next)))
            un, vn = u_next, v_next
            if delta <= picard_tol * scale:
                break
        else:
            raise OracleError(
                f"Picard stalled at t={t_new:.6g}: last update {delta:.3e}"
            )
        u, v, t = un, vn, t_new

    return OracleSolution(xs=xs, ys=ys, u=u.reshape(shape),
                          v=v.reshape(shape), t_final=t)

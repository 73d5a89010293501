"""Discrete bilinear forms, norms, and projections on the collocation grid.

All volume forms are Gauss-weighted point sums over the collocation grid;
boundary and interior-face forms are 1D Gauss sums along mesh lines with the
same per-axis rule. With the default quadrature order these sums are exact
for products of members of the spline space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSet
from .mesh import CollocationGrid

__all__ = [
    "FieldValues",
    "FaceValues",
    "field_from_callables",
    "ip_scalar",
    "ip_grad",
    "norm_dot",
    "norm_grad",
    "boundary_form",
    "jump_form",
    "l2_project",
    "integration_by_parts_residual",
]


@dataclass
class FieldValues:
    """Vector-valued function sampled at the collocation points.

    u, v have shape (npts,); optional gradients gu, gv have shape (npts, 2).
    """

    u: np.ndarray
    v: np.ndarray
    gu: np.ndarray | None = None
    gv: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).ravel()
        self.v = np.asarray(self.v, dtype=float).ravel()
        if len(self.u) != len(self.v):
            raise ValueError("component sample counts differ")
        for g in (self.gu, self.gv):
            if g is not None and np.asarray(g).shape != (len(self.u), 2):
                raise ValueError("gradient table must have shape (npts, 2)")

    @property
    def n(self) -> int:
        return len(self.u)


@dataclass
class FaceValues:
    """Samples on boundary edges or interior faces for the 1D forms.

    For jump_form, normal_jump_* carries [[grad(U) . n]] per face quadrature
    point; for boundary_form only u, v are used.
    """

    u: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    normal_jump_u: np.ndarray | None = None
    normal_jump_v: np.ndarray | None = None


def field_from_callables(f_u, f_v, grid: CollocationGrid,
                         gradients=None) -> FieldValues:
    """Sample callables f(x, y) on the grid; gradients optionally supplied as
    ((ux, uy), (vx, vy)) callables."""
    x, y = grid.points[:, 0], grid.points[:, 1]
    gu = gv = None
    if gradients is not None:
        (ux, uy), (vx, vy) = gradients
        gu = np.column_stack([ux(x, y), uy(x, y)])
        gv = np.column_stack([vx(x, y), vy(x, y)])
    return FieldValues(u=f_u(x, y), v=f_v(x, y), gu=gu, gv=gv)


def _check_match(U: FieldValues, V: FieldValues, grid: CollocationGrid):
    if U.n != V.n or U.n != grid.n_points:
        raise ValueError(
            f"field/grid size mismatch: {U.n}, {V.n}, grid {grid.n_points}"
        )


def ip_scalar(U: FieldValues, V: FieldValues, grid: CollocationGrid) -> float:
    """Discrete product sum_p w_p (u1 v1 + u2 v2)."""
    _check_match(U, V, grid)
    return float(grid.weights @ (U.u * V.u + U.v * V.v))


def ip_grad(U: FieldValues, V: FieldValues, grid: CollocationGrid) -> float:
    """Discrete gradient product, both components' gradients dotted."""
    _check_match(U, V, grid)
    if U.gu is None or U.gv is None or V.gu is None or V.gv is None:
        raise ValueError("ip_grad requires gradient tables on both fields")
    s = np.einsum("p,pd,pd->", grid.weights, U.gu, V.gu)
    s += np.einsum("p,pd,pd->", grid.weights, U.gv, V.gv)
    return float(s)


def norm_dot(U: FieldValues, grid: CollocationGrid) -> float:
    return float(np.sqrt(max(ip_scalar(U, U, grid), 0.0)))


def norm_grad(U: FieldValues, grid: CollocationGrid) -> float:
    return float(np.sqrt(max(ip_grad(U, U, grid), 0.0)))


def boundary_form(U: FaceValues, V: FaceValues, grid=None) -> float:
    """1D quadrature of V . U over boundary edges.

    The scheme always calls this with U premultiplied by gamma .* beta, which
    realizes the Robin substitution for the flux term.
    """
    if U.u.size == 0:
        return 0.0
    return float(U.weights @ (U.u * V.u + U.v * V.v))


def boundary_values(basis: BasisSet, c: np.ndarray) -> FaceValues:
    """Component traces of a discrete field on all boundary quadrature points."""
    pts, wts = [], []
    for edge in basis.grid.boundary:
        pts.append(edge.points)
        wts.append(edge.weights)
    pts = np.vstack(pts)
    vals = basis.eval_at_points(c, pts)
    return FaceValues(u=vals[0], v=vals[1], weights=np.concatenate(wts))


def jump_form(U: FaceValues, V: FaceValues, grid=None) -> float:
    """1D quadrature of V . [[grad(U) . n]] over interior faces.

    Vanishes identically on the C1-conforming space; retained because the
    stepping scheme carries the term explicitly.
    """
    if U.u.size == 0:
        return 0.0
    if U.normal_jump_u is None or U.normal_jump_v is None:
        raise ValueError("jump_form requires normal gradient jumps on U")
    return float(U.weights @ (V.u * U.normal_jump_u + V.v * U.normal_jump_v))


def face_values(basis: BasisSet, c: np.ndarray) -> FaceValues:
    """Traces and normal-gradient jumps of a discrete field on interior faces."""
    comps = basis.split(c)
    vals_u, vals_v, jmp_u, jmp_v, wts = [], [], [], [], []
    for face in basis.grid.interior_faces:
        pts = face.points
        row = []
        jrow = []
        for k, C in enumerate(comps):
            ax, ay = basis.axes[k]
            if face.axis == "x":
                i = int(np.argmin(np.abs(ax.breaks[1:-1] - face.position)))
                vx = ax.design(np.array([face.position]))[0]
                vy = ay.design(pts[:, 1])
                row.append(vy @ (C.T @ vx))
                jrow.append(vy @ (C.T @ ax.jump_d1[i]))
            else:
                j = int(np.argmin(np.abs(ay.breaks[1:-1] - face.position)))
                vx = ax.design(pts[:, 0])
                vyv = ay.design(np.array([face.position]))[0]
                row.append(vx @ (C @ vyv))
                jrow.append(vx @ (C @ ay.jump_d1[j]))
        vals_u.append(row[0]); vals_v.append(row[1])
        jmp_u.append(jrow[0]); jmp_v.append(jrow[1])
        wts.append(face.weights)
    if not wts:
        z = np.zeros(0)
        return FaceValues(z, z, z, z, z)
    return FaceValues(
        u=np.concatenate(vals_u), v=np.concatenate(vals_v),
        weights=np.concatenate(wts),
        normal_jump_u=np.concatenate(jmp_u), normal_jump_v=np.concatenate(jmp_v),
    )


def l2_project(f, basis: BasisSet, grid: CollocationGrid | None = None) -> np.ndarray:
    """Coefficients of the discrete L2 projection of f = (f_u, f_v).

    f may be a pair of callables f(x, y) or a FieldValues sampled on the
    basis grid. With an orthonormal basis the Gram solve is trivial.
    """
    if isinstance(f, FieldValues):
        npx = len(basis.axes[0][0].x)
        npy = len(basis.axes[0][1].x)
        return basis.project_values(f.u.reshape(npx, npy),
                                    f.v.reshape(npx, npy))
    f_u, f_v = f
    return basis.project(f_u, f_v)


def integration_by_parts_residual(basis: BasisSet, cU: np.ndarray,
                                  cV: np.ndarray,
                                  gamma: tuple[float, float] = (1.0, 1.0)) -> float:
    """| (gamma.*lap U, V) - (<U,V> + <U,V>_face - (gamma.*grad U, grad V)) |.

    The flux form <U,V> here uses the raw one-sided normal derivative of U on
    the boundary (no Robin substitution). Diagnostic only; should vanish to
    quadrature precision for members of the spline space.
    """
    grid = basis.grid
    g = np.array(gamma, dtype=float)

    lap = basis.laplacian_on_grid(cU)
    Vv = basis.values_on_grid(cV)
    vol = sum(g[k] * np.einsum("p,p->", grid.weights,
                               (lap[k] * Vv[k]).ravel()) for k in range(2))

    gradU = basis.gradients_on_grid(cU)
    gradV = basis.gradients_on_grid(cV)
    grad_term = sum(
        g[k] * (np.einsum("p,p->", grid.weights, (gradU[k][0] * gradV[k][0]).ravel())
                + np.einsum("p,p->", grid.weights, (gradU[k][1] * gradV[k][1]).ravel()))
        for k in range(2)
    )

    # boundary flux sum over the four sides
    flux = 0.0
    for edge in grid.boundary:
        pts = edge.points
        nrm = edge.normal
        valsV, gradsU = basis.eval_at_points(cV, pts), \
            basis.eval_at_points(cU, pts, gradients=True)[1]
        for k in range(2):
            dn = gradsU[k][:, 0] * nrm[0] + gradsU[k][:, 1] * nrm[1]
            flux += g[k] * float(edge.weights @ (valsV[k] * dn))

    Uf = face_values(basis, cU)
    Vf = face_values(basis, cV)
    if Uf.u.size:
        Uf_scaled = FaceValues(
            u=Uf.u, v=Uf.v, weights=Uf.weights,
            normal_jump_u=g[0] * Uf.normal_jump_u,
            normal_jump_v=g[1] * Uf.normal_jump_v,
        )
        face_term = jump_form(Uf_scaled, Vf)
    else:
        face_term = 0.0

    return abs(vol - (flux + face_term - grad_term))

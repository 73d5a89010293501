"""C1 spline spaces on rectangular meshes and their orthonormalized bases.

The scalar approximation space is a tensor product of per-axis spline spaces
of degree m >= 3 with C1 continuity across interior breakpoints (boundary
knot multiplicity m+1, interior multiplicity m-1). The vector-valued space is
two scalar copies, one per solution component.

Orthonormalization runs per axis against the per-axis discrete inner product
(Gauss weights on subintervals). Because both the quadrature and the space
factorize over axes, tensor products of per-axis orthonormal functions are
orthonormal for the full 2D discrete product; tests verify this directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline, PPoly

from .mesh import CollocationGrid, Mesh

__all__ = [
    "IllConditionedBasisError",
    "OutOfDomainError",
    "AxisBasis",
    "SplineSpace",
    "BasisSet",
    "build_spline_space",
    "orthonormalize",
    "eval_basis",
]

COND_LIMIT = 1e14


class IllConditionedBasisError(RuntimeError):
    """Raw Gram matrix too ill-conditioned to orthonormalize reliably."""


class OutOfDomainError(ValueError):
    """Evaluation point outside the closed domain."""


def c1_knots(breaks: np.ndarray, degree: int) -> np.ndarray:
    """Clamped knot vector with interior multiplicity degree-1 (C1 splines)."""
    return np.concatenate([
        np.full(degree + 1, breaks[0]),
        np.repeat(breaks[1:-1], degree - 1),
        np.full(degree + 1, breaks[-1]),
    ])


def _gram_mgs(G: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt (plus one reorthogonalization pass) in the inner
    product <a, b> = a^T G b. Returns K with K^T G K = I."""
    d = G.shape[0]
    K = np.zeros((d, d))
    for j in range(d):
        v = np.zeros(d)
        v[j] = 1.0
        for _ in range(2):  # second pass tightens orthogonality
            for i in range(j):
                v -= (K[:, i] @ (G @ v)) * K[:, i]
        nrm2 = v @ (G @ v)
        if nrm2 <= 0:
            raise IllConditionedBasisError(
                f"Gram-Schmidt breakdown at column {j}: squared norm {nrm2:.3e}"
            )
        K[:, j] = v / np.sqrt(nrm2)
    return K


@dataclass
class AxisBasis:
    """Per-axis orthonormal C1 spline basis with tabulated values/derivatives.

    K maps orthonormal coefficients to retained raw B-spline coefficients.
    Tables V/D1/D2 are (n_axis_points, dim) in the orthonormal basis; Vb/D1b
    hold endpoint traces as rows [min, max]. jump_d1 holds one-sided first
    derivative differences at interior breakpoints (machine zero for C1).
    """

    breaks: np.ndarray
    degree: int
    dirichlet: bool
    knots: np.ndarray
    raw_dim: int
    kept: np.ndarray          # indices of retained raw functions
    K: np.ndarray             # (len(kept), dim)
    cond: float
    x: np.ndarray             # axis quadrature points
    w: np.ndarray             # axis quadrature weights
    V: np.ndarray = field(repr=False)
    D1: np.ndarray = field(repr=False)
    D2: np.ndarray = field(repr=False)
    Vb: np.ndarray = field(repr=False)
    D1b: np.ndarray = field(repr=False)
    jump_d1: np.ndarray = field(repr=False)  # (n_interior_breaks, dim)

    @property
    def dim(self) -> int:
        return self.K.shape[1]

    def _raw_design(self, x: np.ndarray, nu: int = 0) -> np.ndarray:
        spl = BSpline(self.knots, np.eye(self.raw_dim), self.degree,
                      extrapolate=False)
        if nu:
            spl = spl.derivative(nu)
        out = spl(np.asarray(x, dtype=float))
        return np.nan_to_num(out)[:, self.kept]

    def design(self, x: np.ndarray, nu: int = 0) -> np.ndarray:
        """Orthonormal design matrix, shape (len(x), dim)."""
        return self._raw_design(x, nu) @ self.K

    def design_at_break_sides(self) -> tuple[np.ndarray, np.ndarray]:
        """One-sided first-derivative tables (left, right) at interior breaks."""
        left = np.empty((len(self.breaks) - 2, len(self.kept)))
        right = np.empty_like(left)
        for col, a in enumerate(self.kept):
            coef = np.zeros(self.raw_dim)
            coef[a] = 1.0
            dp = PPoly.from_spline((self.knots, coef, self.degree)).derivative()
            for i, b in enumerate(self.breaks[1:-1]):
                j = np.searchsorted(dp.x, b, side="right") - 1  # right piece
                jl = np.searchsorted(dp.x, b, side="left") - 1  # left piece
                right[i, col] = np.polyval(dp.c[:, j], 0.0)
                left[i, col] = np.polyval(dp.c[:, jl], b - dp.x[jl])
        return left @ self.K, right @ self.K


def make_axis_basis(breaks: np.ndarray, degree: int, x: np.ndarray,
                    w: np.ndarray, dirichlet: bool = False) -> AxisBasis:
    """Build and orthonormalize one axis basis against sum_p w_p f(x_p) g(x_p)."""
    knots = c1_knots(np.asarray(breaks, dtype=float), degree)
    raw_dim = len(knots) - degree - 1
    kept = np.arange(raw_dim)
    if dirichlet:
        # clamped knots: only the first/last B-spline is nonzero at an endpoint
        kept = kept[1:-1]

    spl = BSpline(knots, np.eye(raw_dim), degree, extrapolate=False)
    raw_v = np.nan_to_num(spl(x))[:, kept]
    gram = raw_v.T @ (w[:, None] * raw_v)
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedBasisError(
            f"axis Gram condition {cond:.3e} exceeds {COND_LIMIT:.0e}; "
            f"increase the quadrature order L or refine the mesh"
        )
    K = _gram_mgs(gram)

    basis = AxisBasis(
        breaks=np.asarray(breaks, dtype=float), degree=degree,
        dirichlet=dirichlet, knots=knots, raw_dim=raw_dim, kept=kept,
        K=K, cond=cond, x=x, w=w,
        V=raw_v @ K,
        D1=np.nan_to_num(spl.derivative(1)(x))[:, kept] @ K,
        D2=np.nan_to_num(spl.derivative(2)(x))[:, kept] @ K,
        Vb=np.nan_to_num(spl(np.array([breaks[0], breaks[-1]])))[:, kept] @ K,
        D1b=np.nan_to_num(spl.derivative(1)(
            np.array([breaks[0], breaks[-1]])))[:, kept] @ K,
        jump_d1=np.empty(0),
    )
    left, right = basis.design_at_break_sides()
    # jump convention [[f']] = f'|_left * n_left + f'|_right * n_right with
    # n_left = +1, n_right = -1 at a shared face
    basis.jump_d1 = left - right
    return basis


@dataclass(frozen=True)
class SplineSpace:
    """Raw (unorthonormalized, unconstrained) tensor spline space."""

    mesh: Mesh
    degree: int

    def __post_init__(self):
        if self.degree < 3:
            raise ValueError(f"spline degree must be >= 3, got {self.degree}")

    @property
    def axis_dim_x(self) -> int:
        """Per-axis dimension (degree+1) + (n-1)(degree-1)."""
        return (self.degree + 1) + (self.mesh.nx - 1) * (self.degree - 1)

    @property
    def axis_dim_y(self) -> int:
        return (self.degree + 1) + (self.mesh.ny - 1) * (self.degree - 1)

    @property
    def dim_scalar(self) -> int:
        return self.axis_dim_x * self.axis_dim_y


def build_spline_space(mesh: Mesh, m: int) -> SplineSpace:
    """Scalar C1 spline space of per-axis degree m on the mesh lines."""
    return SplineSpace(mesh=mesh, degree=m)


class BasisSet:
    """Orthonormal vector-valued basis, organized as a u block then a v block.

    Each component k has its own pair of axis bases (Dirichlet elimination may
    shrink one component but not the other). Coefficient vectors are the
    concatenation of the row-major flattened (dim_x, dim_y) coefficient
    matrices of the two components.
    """

    def __init__(self, space: SplineSpace, grid: CollocationGrid,
                 axes: tuple[tuple[AxisBasis, AxisBasis],
                             tuple[AxisBasis, AxisBasis]]):
        self.space = space
        self.grid = grid
        self.axes = axes
        self.comp_shapes = [(ax.dim, ay.dim) for ax, ay in axes]
        self.comp_sizes = [dx * dy for dx, dy in self.comp_shapes]
        self.offsets = [0, self.comp_sizes[0]]
        self.dim = sum(self.comp_sizes)
        # projection helpers: weighted design matrices per component/axis
        self._wvx = [ (ax.w[:, None] * ax.V) for ax, _ in axes ]
        self._wvy = [ (ay.w[:, None] * ay.V) for _, ay in axes ]

    # -- coefficient layout -------------------------------------------------

    def split(self, c: np.ndarray) -> list[np.ndarray]:
        """Component coefficient matrices [(dxu, dyu), (dxv, dyv)]."""
        out = []
        for k in range(2):
            dx, dy = self.comp_shapes[k]
            off = self.offsets[k]
            out.append(c[off:off + dx * dy].reshape(dx, dy))
        return out

    def join(self, Cu: np.ndarray, Cv: np.ndarray) -> np.ndarray:
        return np.concatenate([Cu.ravel(), Cv.ravel()])

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dim)

    # -- evaluation on the collocation grid ----------------------------------

    def values_on_grid(self, c: np.ndarray) -> list[np.ndarray]:
        """[(npx, npy) u values, (npx, npy) v values] at grid points."""
        out = []
        for k, C in enumerate(self.split(c)):
            ax, ay = self.axes[k]
            out.append(ax.V @ C @ ay.V.T)
        return out

    def gradients_on_grid(self, c: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        for k, C in enumerate(self.split(c)):
            ax, ay = self.axes[k]
            out.append((ax.D1 @ C @ ay.V.T, ax.V @ C @ ay.D1.T))
        return out

    def laplacian_on_grid(self, c: np.ndarray) -> list[np.ndarray]:
        out = []
        for k, C in enumerate(self.split(c)):
            ax, ay = self.axes[k]
            out.append(ax.D2 @ C @ ay.V.T + ax.V @ C @ ay.D2.T)
        return out

    def project_values(self, fu: np.ndarray, fv: np.ndarray) -> np.ndarray:
        """Discrete L2 projection of per-point component values (npx, npy)."""
        if not (np.all(np.isfinite(fu)) and np.all(np.isfinite(fv))):
            raise ValueError("cannot project non-finite field values")
        Cu = self._wvx[0].T @ fu @ self._wvy[0]
        Cv = self._wvx[1].T @ fv @ self._wvy[1]
        return self.join(Cu, Cv)

    def project(self, f_u, f_v) -> np.ndarray:
        """Project a pair of callables f(x, y) given on physical coordinates."""
        X, Y = self.grid.meshgrid()
        return self.project_values(np.asarray(f_u(X, Y), dtype=float),
                                   np.asarray(f_v(X, Y), dtype=float))

    # -- evaluation at arbitrary points --------------------------------------

    def _check_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = self.grid.mesh.domain
        if not np.all(d.contains(pts[:, 0], pts[:, 1])):
            raise OutOfDomainError("evaluation point outside the closed domain")
        return pts

    def eval_at_points(self, c: np.ndarray, pts: np.ndarray,
                       gradients: bool = False):
        """Component values (and optionally gradients) at scattered points."""
        pts = self._check_points(pts)
        vals, grads = [], []
        for k, C in enumerate(self.split(c)):
            ax, ay = self.axes[k]
            vx, vy = ax.design(pts[:, 0]), ay.design(pts[:, 1])
            vals.append(np.einsum("pa,ab,pb->p", vx, C, vy))
            if gradients:
                dx_ = np.einsum("pa,ab,pb->p", ax.design(pts[:, 0], 1), C, vy)
                dy_ = np.einsum("pa,ab,pb->p", vx, C, ay.design(pts[:, 1], 1))
                grads.append(np.column_stack([dx_, dy_]))
        return (vals, grads) if gradients else vals

    def basis_tables(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Dense tables of all basis members at the given points.

        Returns (values, gradients) with shapes (dim, npts, 2) and
        (dim, npts, 2, 2); the trailing axes are the vector component and, for
        gradients, the spatial direction. Intended for small diagnostic cases,
        the tables are dense in the full basis.
        """
        pts = self._check_points(pts)
        npts = len(pts)
        values = np.zeros((self.dim, npts, 2))
        grads = np.zeros((self.dim, npts, 2, 2))
        for k in range(2):
            ax, ay = self.axes[k]
            vx, vy = ax.design(pts[:, 0]), ay.design(pts[:, 1])
            d1x, d1y = ax.design(pts[:, 0], 1), ay.design(pts[:, 1], 1)
            tab = np.einsum("pa,pb->abp", vx, vy).reshape(self.comp_sizes[k], npts)
            gx = np.einsum("pa,pb->abp", d1x, vy).reshape(self.comp_sizes[k], npts)
            gy = np.einsum("pa,pb->abp", vx, d1y).reshape(self.comp_sizes[k], npts)
            off = self.offsets[k]
            values[off:off + self.comp_sizes[k], :, k] = tab
            grads[off:off + self.comp_sizes[k], :, k, 0] = gx
            grads[off:off + self.comp_sizes[k], :, k, 1] = gy
        return values, grads

    def gram_matrix(self) -> np.ndarray:
        """Discrete Gram matrix of the full basis (identity up to roundoff)."""
        V, _ = self.basis_tables(self.grid.points)
        return np.einsum("kpc,jpc,p->kj", V, V, self.grid.weights)


def orthonormalize(space: SplineSpace, grid: CollocationGrid,
                   dirichlet: tuple[bool, bool] = (False, False)) -> BasisSet:
    """Orthonormal basis of the vector space against the discrete product.

    dirichlet flags request strong elimination of boundary-interpolating raw
    degrees of freedom for the corresponding component before
    orthonormalization (homogeneous Dirichlet data).
    """
    mesh = space.mesh
    axes = []
    cache: dict[tuple[str, bool], AxisBasis] = {}
    for k in range(2):
        key_x = ("x", dirichlet[k])
        if key_x not in cache:
            cache[key_x] = make_axis_basis(mesh.xs, space.degree, grid.gx,
                                           grid.gwx, dirichlet[k])
        key_y = ("y", dirichlet[k])
        if key_y not in cache:
            cache[key_y] = make_axis_basis(mesh.ys, space.degree, grid.gy,
                                           grid.gwy, dirichlet[k])
        axes.append((cache[key_x], cache[key_y]))
    return BasisSet(space, grid, (axes[0], axes[1]))


def eval_basis(basis: BasisSet, points: np.ndarray):
    """Value and gradient tables of every basis member at the given points."""
    return basis.basis_tables(points)

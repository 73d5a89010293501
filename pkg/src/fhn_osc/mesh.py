"""Rectangular meshes, Gauss rules on [0,1], and tensor-product collocation grids.

Everything downstream (discrete inner products, basis tabulation, operator
assembly) iterates over the point sets built here. The grid is a tensor
product of per-axis Gauss points, so per-axis arrays are kept alongside the
flattened 2D views.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "Domain",
    "Mesh",
    "GaussRule",
    "CollocationGrid",
    "BoundaryEdgeSet",
    "InteriorFaceSet",
    "build_mesh",
    "gauss_rule",
    "build_collocation",
]


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle (x_min, x_max) x (y_min, y_max)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate domain: [{self.x_min}, {self.x_max}] x "
                f"[{self.y_min}, {self.y_max}]"
            )

    @property
    def side_x(self) -> float:
        return self.x_max - self.x_min

    @property
    def side_y(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.side_x * self.side_y

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.side_x + self.side_y)

    def contains(self, x, y, tol: float = 1e-12) -> np.ndarray:
        return (
            (x >= self.x_min - tol)
            & (x <= self.x_max + tol)
            & (y >= self.y_min - tol)
            & (y <= self.y_max + tol)
        )


@dataclass(frozen=True)
class Mesh:
    """Uniform nx x ny partition of a Domain into axis-aligned rectangles.

    Elements are ordered row-major: element (i, j) covers
    [xs[i], xs[i+1]] x [ys[j], ys[j+1]] and has flat index i * ny + j.
    """

    domain: Domain
    xs: np.ndarray  # x breakpoints, shape (nx+1,)
    ys: np.ndarray  # y breakpoints, shape (ny+1,)

    @property
    def nx(self) -> int:
        return len(self.xs) - 1

    @property
    def ny(self) -> int:
        return len(self.ys) - 1

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def h(self) -> float:
        """Max element diagonal."""
        dx = np.diff(self.xs)
        dy = np.diff(self.ys)
        return float(np.hypot(dx.max(), dy.max()))

    def element_bounds(self, index: int) -> tuple[float, float, float, float]:
        i, j = divmod(index, self.ny)
        return self.xs[i], self.xs[i + 1], self.ys[j], self.ys[j + 1]

    def element_area(self, index: int) -> float:
        x0, x1, y0, y1 = self.element_bounds(index)
        return (x1 - x0) * (y1 - y0)

    def boundary_edges(self) -> list[tuple[int, str, tuple[float, float]]]:
        """(element index, side, outward normal) for every edge on the boundary."""
        edges = []
        for j in range(self.ny):
            edges.append((0 * self.ny + j, "west", (-1.0, 0.0)))
            edges.append(((self.nx - 1) * self.ny + j, "east", (1.0, 0.0)))
        for i in range(self.nx):
            edges.append((i * self.ny + 0, "south", (0.0, -1.0)))
            edges.append((i * self.ny + (self.ny - 1), "north", (0.0, 1.0)))
        return edges


def build_mesh(domain: Domain, h_target: float) -> Mesh:
    """Uniform mesh with per-axis count ceil(side / h_target).

    h_target must be positive and no larger than the smaller side; the
    reported mesh size Mesh.h is the actual max diagonal, not h_target.
    """
    if not np.isfinite(h_target) or h_target <= 0:
        raise ValueError(f"h_target must be positive, got {h_target}")
    if h_target > min(domain.side_x, domain.side_y) + 1e-12:
        raise ValueError(
            f"h_target={h_target} exceeds min side length "
            f"{min(domain.side_x, domain.side_y)}"
        )
    # ceil with a guard against 2.5000000001-type roundoff in side/h_target
    nx = int(np.ceil(domain.side_x / h_target - 1e-9))
    ny = int(np.ceil(domain.side_y / h_target - 1e-9))
    xs = np.linspace(domain.x_min, domain.x_max, nx + 1)
    ys = np.linspace(domain.y_min, domain.y_max, ny + 1)
    return Mesh(domain=domain, xs=xs, ys=ys)


@dataclass(frozen=True)
class GaussRule:
    """L-point Gauss-Legendre rule mapped to [0,1]; weights sum to 1."""

    L: int
    nodes: np.ndarray
    weights: np.ndarray


def gauss_rule(L: int) -> GaussRule:
    """Gauss-Legendre nodes/weights on [0,1], exact for degree <= 2L-1."""
    if not (1 <= L <= 16):
        raise ValueError(f"L must be in [1, 16], got {L}")
    x, w = roots_legendre(L)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    return GaussRule(L=L, nodes=nodes, weights=weights)


@dataclass(frozen=True)
class BoundaryEdgeSet:
    """1D quadrature along one side of the boundary.

    points has shape (nq, 2); weights are arc-length weights; normal is the
    outward unit normal shared by the whole side.
    """

    side: str
    points: np.ndarray
    weights: np.ndarray
    normal: tuple[float, float]


@dataclass(frozen=True)
class InteriorFaceSet:
    """1D quadrature along one interior mesh line shared by two element strips.

    axis is "x" for a vertical line x=const (normal pair +-e_x) and "y" for a
    horizontal line.
    """

    axis: str
    position: float
    points: np.ndarray
    weights: np.ndarray


def _axis_points(breaks: np.ndarray, rule: GaussRule) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis Gauss points and length-scaled weights over all subintervals."""
    h = np.diff(breaks)
    pts = (breaks[:-1, None] + h[:, None] * rule.nodes[None, :]).ravel()
    wts = (h[:, None] * rule.weights[None, :]).ravel()
    return pts, wts


@dataclass(frozen=True)
class CollocationGrid:
    """Tensor-product Gauss collocation points with composite weights.

    Flat arrays (points, weights, element_of) run over the full 2D point set
    in (x-major, y-minor) order, matching np.outer(wx, wy).ravel().
    """

    mesh: Mesh
    rule: GaussRule
    gx: np.ndarray  # per-axis x points, shape (nx*L,)
    gwx: np.ndarray  # per-axis x weights (include subinterval length)
    gy: np.ndarray
    gwy: np.ndarray
    points: np.ndarray = field(repr=False)  # (npts, 2)
    weights: np.ndarray = field(repr=False)  # (npts,)
    element_of: np.ndarray = field(repr=False)  # owning element flat index
    boundary: list[BoundaryEdgeSet] = field(repr=False)
    interior_faces: list[InteriorFaceSet] = field(repr=False)

    @property
    def n_points(self) -> int:
        return len(self.weights)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """X, Y arrays of shape (len(gx), len(gy))."""
        return np.meshgrid(self.gx, self.gy, indexing="ij")

    def element_weight_sums(self) -> np.ndarray:
        sums = np.zeros(self.mesh.n_elements)
        np.add.at(sums, self.element_of, self.weights)
        return sums

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum of point values (the scalar discrete integral)."""
        return float(self.weights @ np.asarray(values).ravel())


def build_collocation(mesh: Mesh, rule: GaussRule) -> CollocationGrid:
    """Tensor Gauss points per element with composite weights c_l1*c_l2*area."""
    gx, gwx = _axis_points(mesh.xs, rule)
    gy, gwy = _axis_points(mesh.ys, rule)

    X, Y = np.meshgrid(gx, gy, indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel()])
    weights = np.outer(gwx, gwy).ravel()

    ex = np.repeat(np.arange(mesh.nx), rule.L)  # element column per x point
    ey = np.repeat(np.arange(mesh.ny), rule.L)
    element_of = (ex[:, None] * mesh.ny + ey[None, :]).ravel()

    d = mesh.domain
    boundary = [
        BoundaryEdgeSet("west", np.column_stack([np.full_like(gy, d.x_min), gy]),
                        gwy.copy(), (-1.0, 0.0)),
        BoundaryEdgeSet("east", np.column_stack([np.full_like(gy, d.x_max), gy]),
                        gwy.copy(), (1.0, 0.0)),
        BoundaryEdgeSet("south", np.column_stack([gx, np.full_like(gx, d.y_min)]),
                        gwx.copy(), (0.0, -1.0)),
        BoundaryEdgeSet("north", np.column_stack([gx, np.full_like(gx, d.y_max)]),
                        gwx.copy(), (0.0, 1.0)),
    ]

    faces = []
    for x in mesh.xs[1:-1]:
        faces.append(InteriorFaceSet("x", float(x),
                                     np.column_stack([np.full_like(gy, x), gy]),
                                     gwy.copy()))
    for y in mesh.ys[1:-1]:
        faces.append(InteriorFaceSet("y", float(y),
                                     np.column_stack([gx, np.full_like(gx, y)]),
                                     gwx.copy()))

    return CollocationGrid(
        mesh=mesh, rule=rule, gx=gx, gwx=gwx, gy=gy, gwy=gwy,
        points=points, weights=weights, element_of=element_of,
        boundary=boundary, interior_faces=faces,
    )

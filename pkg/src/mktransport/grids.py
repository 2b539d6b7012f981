"""Cartesian node grids masked to the domain, and scalar fields on them.

Mask codes: 0 outside the closed domain, 1 inner boundary band (a node with
an outside 4-neighbour), 2 interior.  Fields enforce a zero trace: values at
outside nodes are forced to 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

OUTSIDE, BAND, INTERIOR = 0, 1, 2


@dataclass(frozen=True)
class Grid:
    """Uniform node grid: x_i = x0 + i*h, y_j = y0 + j*h."""

    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    @classmethod
    def from_bbox(cls, lo, hi, h) -> "Grid":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(hi <= lo) or h <= 0:
            raise InputError("bad grid box or spacing")
        nx = int(np.floor((hi[0] - lo[0]) / h + 1e-12)) + 1
        ny = int(np.floor((hi[1] - lo[1]) / h + 1e-12)) + 1
        return cls(float(lo[0]), float(lo[1]), float(h), nx, ny)

    @classmethod
    def from_shape(cls, lo, hi, shape) -> "Grid":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        nx, ny = int(shape[0]), int(shape[1])
        if nx < 2 or ny < 2:
            raise InputError("grid needs at least 2 nodes per axis")
        hx = (hi[0] - lo[0]) / (nx - 1)
        hy = (hi[1] - lo[1]) / (ny - 1)
        if abs(hx - hy) > 1e-12 * max(abs(hx), abs(hy)):
            raise InputError("grid must be square; adjust the box or shape")
        return cls(float(lo[0]), float(lo[1]), float(hx), nx, ny)

    @classmethod
    def for_boundary(cls, boundary, h, margin=None) -> "Grid":
        lo, hi = boundary.bbox
        m = 2.0 * h if margin is None else margin
        return cls.from_bbox(lo - m, hi + m, h)

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    def nodes(self) -> np.ndarray:
        """All nodes, shape (ny*nx, 2), row-major (y outer, x inner)."""
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="xy")
        return np.column_stack([gx.ravel(), gy.ravel()])

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def cell_area(self) -> float:
        return self.h * self.h


def domain_mask(grid: Grid, boundary) -> np.ndarray:
    """Mask codes per node: outside / boundary band / interior."""
    inside = boundary.contains_many(grid.nodes(), tol=0.0).reshape(grid.shape)
    mask = np.zeros(grid.shape, dtype=np.int8)
    mask[inside] = INTERIOR
    pad = np.zeros((grid.ny + 2, grid.nx + 2), dtype=bool)
    pad[1:-1, 1:-1] = inside
    has_out = (~pad[:-2, 1:-1] | ~pad[2:, 1:-1]
               | ~pad[1:-1, :-2] | ~pad[1:-1, 2:])
    mask[inside & has_out] = BAND
    return mask


class GridFunction:
    """Scalar field on a masked grid with zero trace outside the domain."""

    def __init__(self, grid: Grid, values, mask):
        values = np.asarray(values, dtype=float).reshape(grid.shape)
        self.grid = grid
        self.mask = np.asarray(mask, dtype=np.int8).reshape(grid.shape)
        self.values = np.where(self.mask > OUTSIDE, values, 0.0)

    @classmethod
    def from_callable(cls, grid: Grid, mask, func) -> "GridFunction":
        nodes = grid.nodes()
        vals = np.zeros(nodes.shape[0])
        active = (np.asarray(mask).reshape(-1) > OUTSIDE)
        if np.any(active):
            vals[active] = np.asarray(func(nodes[active]), dtype=float)
        return cls(grid, vals.reshape(grid.shape), mask)

    @classmethod
    def zeros(cls, grid: Grid, mask) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape), mask)

    @property
    def active(self) -> np.ndarray:
        return self.mask > OUTSIDE

    @property
    def interior(self) -> np.ndarray:
        return self.mask == INTERIOR

    def area(self) -> float:
        """Midpoint-rule area of the masked domain."""
        return float(self.active.sum()) * self.grid.cell_area

    def integral(self) -> float:
        return float(self.values[self.active].sum()) * self.grid.cell_area

    def sup(self) -> float:
        act = self.active
        return float(np.abs(self.values[act]).max()) if np.any(act) else 0.0

    def copy_with(self, values) -> "GridFunction":
        return GridFunction(self.grid, values, self.mask)

    def gradient(self) -> np.ndarray:
        """Node gradient, centred inside, one-sided in the boundary band.

        Outside nodes keep a zero gradient.  Shape (ny, nx, 2).
        """
        u = self.values
        h = self.grid.h
        act = self.active
        grad = np.zeros(u.shape + (2,))
        for axis, comp in ((1, 0), (0, 1)):
            fwd = np.zeros_like(u, dtype=bool)
            bwd = np.zeros_like(u, dtype=bool)
            nbr_plus = np.roll(act, -1, axis=axis)
            nbr_minus = np.roll(act, 1, axis=axis)
            if axis == 1:
                nbr_plus[:, -1] = False
                nbr_minus[:, 0] = False
            else:
                nbr_plus[-1, :] = False
                nbr_minus[0, :] = False
            central = act & nbr_plus & nbr_minus
            fwd = act & nbr_plus & ~nbr_minus
            bwd = act & ~nbr_plus & nbr_minus
            up = np.roll(u, -1, axis=axis)
            um = np.roll(u, 1, axis=axis)
            g = np.zeros_like(u)
            g[central] = (up[central] - um[central]) / (2.0 * h)
            g[fwd] = (up[fwd] - u[fwd]) / h
            g[bwd] = (u[bwd] - um[bwd]) / h
            grad[..., comp] = g
        return grad

"""The anisotropic distance to the boundary and its singular structure.

``DistanceField`` evaluates d(x) = min over boundary points y of rho0(x - y)
by a coarse sweep over the boundary table followed by golden-section
refinement of the competing local minima.  On top of that it derives the
gradient where unique, the normal distance tau to the cut locus (bisection on
the boundary, propagated inward along rays), the sampled singular set and the
inradius.

All queries are pure with respect to the immutable geometry; grid sweeps are
chunked and may be threaded without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .bodies import ConvexBody
from .boundary import BoundaryGeometry, DomainBoundary, _periodic_interp
from .errors import DomainError, SingularPointError
from .utils import circ_dist, map_chunks

_TWO_PI = 2.0 * np.pi
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class DistanceSample:
    """Distance data at a single point."""

    x: np.ndarray
    d: float
    projections: list                      # list of (arclength, boundary point)
    singular: bool
    grad_d: Optional[np.ndarray] = None
    tau: Optional[float] = None
    cut_point: Optional[np.ndarray] = None


@dataclass
class DistanceBatch:
    """Vectorised distance data on a batch of points."""

    d: np.ndarray
    s_proj: np.ndarray          # arclength of the best projection
    theta_proj: np.ndarray
    n_proj: np.ndarray          # merged projection count (capped)
    gap2: np.ndarray            # value gap to the nearest distinct minimum
    singular: np.ndarray


@dataclass
class SigmaCloud:
    """Sampled singular set with a neighbour-graph component index."""

    points: np.ndarray
    components: np.ndarray
    resolution: float
    min_boundary_distance: float


class DistanceField:
    """Minkowski distance from the boundary for a fixed body and domain."""

    def __init__(self, boundary: DomainBoundary, body: ConvexBody, *,
                 delta_proj=None, merge_tol=1e-6, validate=True):
        self.boundary = boundary
        self.body = body
        self.geometry = BoundaryGeometry(boundary, body,
                                         require_c2plus=validate)
        self.delta_proj = (1e-7 * boundary.diameter if delta_proj is None
                           else float(delta_proj))
        self.merge_tol = float(merge_tol)
        self._tau_table = None
        self._inradius = None
        self._incenter = None
        self._reversed = None
        self._setup_coarse()

    # ------------------------------------------------------------------
    # batch evaluation
    # ------------------------------------------------------------------

    def _setup_coarse(self):
        pts = self.boundary.points
        if self.body.kind == "euclidean":
            m = np.eye(2)
        elif self.body.kind == "ellipse":
            m = self.body._matrix_inv
        else:
            self._coarse_m = None
            return
        self._coarse_m = m
        self._coarse_pts32 = pts.T.astype(np.float32).copy()
        my = pts @ m.T
        self._coarse_yy32 = np.einsum("ij,ij->i", my, pts).astype(np.float32)

    def _coarse(self, x_block):
        # Quadratic-form expansion via a float32 GEMM for the closed-form
        # kinds; coarse values only select candidates (slack far above the
        # float32 noise), refinement re-evaluates in float64 by direct
        # differences.
        if self._coarse_m is not None:
            xm = (x_block @ self._coarse_m.T).astype(np.float32)
            xx = np.einsum("ij,ij->i", xm, x_block.astype(np.float32))
            q = xm @ self._coarse_pts32
            q *= -2.0
            q += xx[:, None]
            q += self._coarse_yy32[None, :]
            np.maximum(q, 0.0, out=q)
            return np.sqrt(q, out=q)
        v = x_block[:, None, :] - self.boundary.points[None, :, :]
        return self.body.polar_gauge_many(v)

    def _g_theta(self, x_flat, theta):
        pts = self.boundary._point(theta)
        return self.body.polar_gauge_many(x_flat - pts)

    def distance_many(self, x, max_candidates=6, chunk=2048,
                      refine=True) -> DistanceBatch:
        """Distance sweep over an (N, 2) batch.

        Does not enforce membership in the closed domain; callers that need
        the domain precondition use :meth:`distance`.  ``refine=False``
        returns the raw table minimum (accurate to the squared sample
        spacing), which coarse localisation passes use.
        """
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        n = x.shape[0]
        out_d = np.empty(n)
        out_s = np.empty(n)
        out_th = np.empty(n)
        out_np = np.empty(n, dtype=np.intp)
        out_gap = np.empty(n)

        def work(lo, hi):
            if refine:
                return self._distance_block(x[lo:hi], max_candidates)
            return self._distance_block_coarse(x[lo:hi])

        results = map_chunks(work, n, chunk)
        pos = 0
        for res in results:
            m = res[0].shape[0]
            out_d[pos:pos + m] = res[0]
            out_s[pos:pos + m] = res[1]
            out_th[pos:pos + m] = res[2]
            out_np[pos:pos + m] = res[3]
            out_gap[pos:pos + m] = res[4]
            pos += m
        return DistanceBatch(d=out_d, s_proj=out_s, theta_proj=out_th,
                             n_proj=out_np, gap2=out_gap,
                             singular=out_np >= 2)

    def _distance_block(self, xb, max_candidates):
        nb = self.boundary.n_samples
        g = self._coarse(xb)
        gmin = g.min(axis=1)
        local = np.empty(g.shape, dtype=bool)
        local[:, 1:-1] = (g[:, 1:-1] <= g[:, :-2]) & (g[:, 1:-1] <= g[:, 2:])
        local[:, 0] = (g[:, 0] <= g[:, -1]) & (g[:, 0] <= g[:, 1])
        local[:, -1] = (g[:, -1] <= g[:, -2]) & (g[:, -1] <= g[:, 0])
        ds = self.boundary.total_length / nb
        slack = 4.0 * ds * ds / (self.body.c1 * np.maximum(gmin, ds))
        keep = local & (g <= (gmin + slack)[:, None])

        cand_idx, valid = self._top_candidates(g, keep, max_candidates)
        theta_c, val_c = self._refine(xb, cand_idx, valid, g.shape[0],
                                      max_candidates)
        return self._collect(val_c, theta_c)

    def _distance_block_coarse(self, xb):
        g = self._coarse(xb)
        arg = np.argmin(g, axis=1)
        d = g[np.arange(g.shape[0]), arg]
        return (d, self.boundary.s_table[arg],
                self.boundary._theta_table[arg],
                np.ones(g.shape[0], dtype=np.intp),
                np.full(g.shape[0], np.inf))

    def _top_candidates(self, g, keep, cmax):
        # Up to cmax candidate sample indices per row, best values first;
        # sparse gather (few local minima per row), with a partition
        # fallback for near-continuum rows where ties explode.
        n_rows = g.shape[0]
        counts = keep.sum(axis=1)
        heavy = counts > cmax
        cand = np.zeros((n_rows, cmax), dtype=np.intp)
        valid = np.zeros((n_rows, cmax), dtype=bool)
        light = ~heavy
        if np.any(light):
            keep_l = keep & light[:, None]
            rr, cc = np.nonzero(keep_l)
            vals = g[rr, cc]
            order = np.lexsort((vals, rr))
            rr, cc = rr[order], cc[order]
            first = np.searchsorted(rr, np.arange(n_rows))
            rank = np.arange(rr.shape[0]) - first[rr]
            cand[rr, rank] = cc
            valid[rr, rank] = True
        if np.any(heavy):
            hsel = np.nonzero(heavy)[0]
            masked = np.where(keep[hsel], g[hsel], np.inf)
            part = np.argpartition(masked, cmax - 1, axis=1)[:, :cmax]
            pvals = np.take_along_axis(masked, part, axis=1)
            osmall = np.argsort(pvals, axis=1)
            cand[hsel] = np.take_along_axis(part, osmall, axis=1)
            valid[hsel] = np.isfinite(np.take_along_axis(pvals, osmall,
                                                         axis=1))
        return cand, valid

    def _refine(self, xb, cand_idx, valid, n_rows, cmax):
        """Golden-section refinement of g over per-candidate theta brackets."""
        thetas = self.boundary._theta_table
        nb = thetas.shape[0]
        idx = cand_idx
        th_mid = thetas[idx]
        th_lo = thetas[(idx - 1) % nb]
        th_hi = thetas[(idx + 1) % nb]
        th_lo = np.where(th_lo > th_mid, th_lo - _TWO_PI, th_lo)
        th_hi = np.where(th_hi < th_mid, th_hi + _TWO_PI, th_hi)

        flat_valid = valid.ravel()
        rows = np.repeat(np.arange(n_rows), cmax)[flat_valid]
        lo = th_lo.ravel()[flat_valid]
        hi = th_hi.ravel()[flat_valid]
        xv = xb[rows]

        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1 = self._g_theta(xv, x1)
        f2 = self._g_theta(xv, x2)
        for _ in range(40):
            take1 = f1 <= f2
            hi = np.where(take1, x2, hi)
            lo = np.where(take1, lo, x1)
            x1n = np.where(take1, hi - _GOLDEN * (hi - lo), x2)
            x2n = np.where(take1, x1, lo + _GOLDEN * (hi - lo))
            f1n = np.where(take1, np.inf, f2)
            f2n = np.where(take1, f1, np.inf)
            miss = ~np.isfinite(f1n)
            if np.any(miss):
                f1n[miss] = self._g_theta(xv[miss], x1n[miss])
            miss = ~np.isfinite(f2n)
            if np.any(miss):
                f2n[miss] = self._g_theta(xv[miss], x2n[miss])
            x1, x2, f1, f2 = x1n, x2n, f1n, f2n
        theta = np.mod(0.5 * (lo + hi), _TWO_PI)
        value = self._g_theta(xv, theta)

        theta_c = np.full((n_rows, cmax), np.nan)
        val_c = np.full((n_rows, cmax), np.inf)
        theta_c.ravel()[flat_valid] = theta
        val_c.ravel()[flat_valid] = value
        return theta_c, val_c

    def _collect(self, val_c, theta_c):
        n_rows, cmax = val_c.shape
        order = np.argsort(val_c, axis=1)
        val_s = np.take_along_axis(val_c, order, axis=1)
        th_s = np.take_along_axis(theta_c, order, axis=1)
        d = val_s[:, 0]
        s_all = np.where(np.isfinite(val_s),
                         self.boundary.s_of_theta(np.nan_to_num(th_s)), np.nan)
        length = self.boundary.total_length
        ds = length / self.boundary.n_samples

        tie = val_s <= (d + self.delta_proj)[:, None]
        tie &= np.isfinite(val_s)
        sep = circ_dist(s_all, s_all[:, :1], length)
        distinct = tie & ((sep > self.merge_tol) | (np.arange(cmax) == 0))
        # Count merged representatives among the ties: greedy clustering on
        # the (small, sorted) candidate list.
        n_proj = np.ones(n_rows, dtype=np.intp)
        gap2 = np.full(n_rows, np.inf)
        for j in range(1, cmax):
            is_tie = distinct[:, j]
            far = np.ones(n_rows, dtype=bool)
            for k in range(j):
                far &= (circ_dist(s_all[:, j], s_all[:, k], length)
                        > self.merge_tol) | ~np.isfinite(s_all[:, k])
            n_proj += (is_tie & far).astype(np.intp)
            cand_gap = np.where(
                np.isfinite(val_s[:, j])
                & (circ_dist(s_all[:, j], s_all[:, 0], length) > 0.5 * ds),
                val_s[:, j] - d, np.inf)
            gap2 = np.minimum(gap2, cand_gap)
        return d, s_all[:, 0], th_s[:, 0], n_proj, gap2

    # ------------------------------------------------------------------
    # scalar API
    # ------------------------------------------------------------------

    def distance(self, x) -> DistanceSample:
        """Distance and projections at a point of the closed domain."""
        x = np.asarray(x, dtype=float).reshape(2)
        if not self.boundary.contains(x):
            raise DomainError(f"point {x.tolist()} lies outside the domain")
        return self._sample(x)

    def _sample(self, x) -> DistanceSample:
        xb = x[None, :]
        g = self._coarse(xb)
        gmin = g.min()
        ds = self.boundary.total_length / self.boundary.n_samples
        slack = 4.0 * ds * ds / (self.body.c1 * max(gmin, ds))
        left = np.roll(g, 1, axis=1)
        right = np.roll(g, -1, axis=1)
        keep = (g <= left) & (g <= right) & (g <= gmin + slack)
        cmax = 16
        rows, valid = self._top_candidates(g, keep, cmax)
        theta_c, val_c = self._refine(xb, rows, valid, 1, cmax)
        val = val_c[0]
        th = theta_c[0]
        order = np.argsort(val)
        d = float(val[order[0]])
        projections = []
        seen_s = []
        length = self.boundary.total_length
        for j in order:
            if not np.isfinite(val[j]) or val[j] > d + self.delta_proj:
                break
            s_j = float(self.boundary.s_of_theta(th[j]))
            if any(circ_dist(s_j, s0, length) <= self.merge_tol
                   for s0 in seen_s):
                continue
            seen_s.append(s_j)
            point = self.boundary._point(np.array([th[j]]))[0]
            projections.append((s_j, point))
        singular = len(projections) >= 2
        grad = None
        if not singular:
            grad = self.body.polar_gauge_gradient_many(
                (x - projections[0][1])[None, :])[0] if d > 0 else None
            if d == 0.0:
                _, _, nu = self.boundary.frame(projections[0][0])
                grad = nu / self.body.gauge_many(nu[None, :])[0]
        return DistanceSample(x=x, d=d, projections=projections,
                              singular=singular, grad_d=grad)

    def gradient(self, x) -> np.ndarray:
        """Gradient of the distance; raises at multi-projection points."""
        sample = self.distance(x)
        if sample.singular:
            raise SingularPointError(
                f"distance gradient undefined at {sample.x.tolist()}: "
                f"{len(sample.projections)} projections")
        return sample.grad_d

    # ------------------------------------------------------------------
    # cut times
    # ------------------------------------------------------------------

    def _tau_upper_bound(self) -> float:
        return 1.05 * self.boundary.diameter / self.body.c1 + 1e-9

    def tau_table(self) -> np.ndarray:
        """Normal distance to the cut locus at every boundary sample.

        Simultaneous bisection of the last parameter at which the foot point
        still projects back to itself; absolute tolerance 1e-8 * diameter.
        """
        if self._tau_table is not None:
            return self._tau_table
        nb = self.boundary.n_samples
        lo = np.zeros(nb)
        hi = np.full(nb, self._tau_upper_bound())
        tol = 1e-8 * self.boundary.diameter
        # Along a ray the candidate value is exactly t, so the projection
        # predicate reduces to t - d <= slack; a slack near the evaluation
        # noise floor keeps the bias small even at focal endpoints where the
        # gap grows only like delta^(3/2).
        slack = 1e-10 * self.boundary.diameter
        while float((hi - lo).max()) > tol:
            mid = 0.5 * (lo + hi)
            pts = self.geometry.ray_points_table(mid)
            batch = self.distance_many(pts, max_candidates=4)
            ok = (mid - batch.d) <= slack
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        self._tau_table = 0.5 * (lo + hi)
        return self._tau_table

    def cut_time_boundary(self, s) -> float:
        """tau at a single boundary arclength, by bisection."""
        s = float(s)
        p, _, nu = self.boundary.frame(s)
        ray = self.body.gauge_gradient_many(nu[None, :])[0]
        lo, hi = 0.0, self._tau_upper_bound()
        tol = 1e-8 * self.boundary.diameter
        slack = 1e-10 * self.boundary.diameter
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            batch = self.distance_many((p + mid * ray)[None, :],
                                       max_candidates=4)
            if mid - batch.d[0] <= slack:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def tau_boundary_interp(self, s_values) -> np.ndarray:
        table = self.tau_table()
        return _periodic_interp(s_values, self.boundary.s_table, table,
                                self.boundary.total_length)

    def cut_time_interior(self, x):
        """(tau(x), cut point); tau = 0 and no cut point at singular points."""
        sample = self.distance(x)
        if sample.singular:
            return 0.0, None
        s0 = sample.projections[0][0]
        tau = float(max(self.tau_boundary_interp(np.array([s0]))[0] - sample.d,
                        0.0))
        _, _, nu = self.boundary.frame(s0)
        ray = self.body.gauge_gradient_many(nu[None, :])[0]
        return tau, sample.x + tau * ray

    def tau_many(self, batch: DistanceBatch) -> np.ndarray:
        """Interior tau for a distance batch (0 on singular rows)."""
        tau = self.tau_boundary_interp(batch.s_proj) - batch.d
        tau = np.maximum(tau, 0.0)
        tau[batch.singular] = 0.0
        return tau

    # ------------------------------------------------------------------
    # singular set
    # ------------------------------------------------------------------

    def singular_set(self, resolution: float) -> SigmaCloud:
        """Sample the singular set at the given grid resolution.

        Seeds come from multi-projection grid nodes, bisection across
        neighbour pairs with a projection jump, and the cut points of all
        boundary rays; candidates are kept only if a second distinct
        projection lies within 10x the tie tolerance.
        """
        h = float(resolution)
        lo, hi = self.boundary.bbox
        xs = np.arange(lo[0] - h, hi[0] + 2 * h, h)
        ys = np.arange(lo[1] - h, hi[1] + 2 * h, h)
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        nodes = np.column_stack([gx.ravel(), gy.ravel()])
        inside = self.boundary.contains_many(nodes, tol=0.0)
        nodes_in = nodes[inside]
        batch = self.distance_many(nodes_in)

        cands = [nodes_in[batch.singular]]

        # Neighbour pairs with a projection-arclength jump.
        shape = gx.shape
        s_grid = np.full(shape, np.nan).ravel()
        s_grid[inside] = batch.s_proj
        s_grid = s_grid.reshape(shape)
        in_grid = inside.reshape(shape)
        jump_tol = 4.0 * h * max(1.0, 0.5 * self.boundary._max_kappa_eu
                                 * self.boundary.diameter)
        pairs_a = []
        pairs_b = []
        length = self.boundary.total_length
        for axis in range(2):
            sa = s_grid if axis == 0 else s_grid.T
            ia = in_grid if axis == 0 else in_grid.T
            both = ia[:, :-1] & ia[:, 1:]
            jump = circ_dist(sa[:, :-1], sa[:, 1:], length) > jump_tol
            sel = both & jump
            ii, jj = np.nonzero(sel)
            if axis == 0:
                pa = np.column_stack([xs[jj], ys[ii]])
                pb = np.column_stack([xs[jj + 1], ys[ii]])
            else:
                pa = np.column_stack([xs[ii], ys[jj]])
                pb = np.column_stack([xs[ii], ys[jj + 1]])
            pairs_a.append(pa)
            pairs_b.append(pb)
        pa = np.vstack(pairs_a)
        pb = np.vstack(pairs_b)
        if pa.shape[0]:
            cands.append(self._bisect_watershed(pa, pb))

        # Cut points of boundary rays.
        tau = self.tau_table()
        cands.append(self.geometry.ray_points_table(tau))

        pts = np.vstack([c for c in cands if c.shape[0]])
        if pts.shape[0] == 0:
            return SigmaCloud(points=np.empty((0, 2)),
                              components=np.empty(0, dtype=int),
                              resolution=h, min_boundary_distance=np.nan)

        # De-duplicate on a half-resolution lattice.
        key = np.round(pts / (0.5 * h)).astype(np.int64)
        _, uniq = np.unique(key, axis=0, return_index=True)
        pts = pts[np.sort(uniq)]

        # Keep only points with a genuine second projection.
        check = self.distance_many(pts, max_candidates=6)
        good = check.gap2 <= 10.0 * self.delta_proj
        pts = pts[good]

        comps = self._components(pts, 2.0 * h)
        dists = self._euclid_boundary_distance(pts)
        return SigmaCloud(points=pts, components=comps, resolution=h,
                          min_boundary_distance=(float(dists.min())
                                                 if pts.shape[0] else np.nan))

    def _bisect_watershed(self, pa, pb):
        anchor_a = self.distance_many(pa, max_candidates=4).s_proj
        anchor_b = self.distance_many(pb, max_candidates=4).s_proj
        length = self.boundary.total_length
        lo = pa.copy()
        hi = pb.copy()
        for _ in range(24):
            mid = 0.5 * (lo + hi)
            s_mid = self.distance_many(mid, max_candidates=4).s_proj
            to_a = (circ_dist(s_mid, anchor_a, length)
                    < circ_dist(s_mid, anchor_b, length))
            lo = np.where(to_a[:, None], mid, lo)
            hi = np.where(to_a[:, None], hi, mid)
        return 0.5 * (lo + hi)

    def _components(self, pts, radius):
        if pts.shape[0] == 0:
            return np.empty(0, dtype=int)
        tree = cKDTree(pts)
        pairs = tree.query_pairs(radius, output_type="ndarray")
        parent = np.arange(pts.shape[0])

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, j in pairs:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
        roots = np.array([find(i) for i in range(pts.shape[0])])
        _, comps = np.unique(roots, return_inverse=True)
        return comps

    def _euclid_boundary_distance(self, pts):
        diffs = pts[:, None, :] - self.boundary.points[None, :, :]
        return np.sqrt((diffs ** 2).sum(axis=2)).min(axis=1)

    # ------------------------------------------------------------------
    # inradius
    # ------------------------------------------------------------------

    def inradius(self) -> float:
        """Maximum of the distance over the domain (pattern-search refined)."""
        if self._inradius is None:
            self._compute_inradius()
        return self._inradius

    def incenter(self) -> np.ndarray:
        if self._incenter is None:
            self._compute_inradius()
        return self._incenter

    def _compute_inradius(self):
        lo, hi = self.boundary.bbox
        n0 = 96
        xs = np.linspace(lo[0], hi[0], n0)
        ys = np.linspace(lo[1], hi[1], n0)
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        nodes = np.column_stack([gx.ravel(), gy.ravel()])
        mask = self.boundary.contains_many(nodes, tol=0.0)
        nodes = nodes[mask]
        d = self.distance_many(nodes, max_candidates=2).d
        best = int(np.argmax(d))
        x = nodes[best].copy()
        val = d[best]
        step = float(xs[1] - xs[0])
        tol = 1e-7 * self.boundary.diameter
        dirs = np.array([[1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0],
                         [1, 1], [1, -1], [-1, 1], [-1, -1]]) * 0.5
        while step > tol:
            trial = x[None, :] + step * dirs
            ok = self.boundary.contains_many(trial, tol=0.0)
            if np.any(ok):
                vals = np.full(dirs.shape[0], -np.inf)
                vals[ok] = self.distance_many(trial[ok], max_candidates=2).d
                k = int(np.argmax(vals))
                if vals[k] > val:
                    x = trial[k].copy()
                    val = vals[k]
                    continue
            step *= 0.5
        self._inradius = float(val)
        self._incenter = x

    def euclid_inradius(self) -> float:
        """Euclidean distance from the incenter to the boundary samples."""
        diffs = self.boundary.points - self.incenter()[None, :]
        return float(np.sqrt((diffs ** 2).sum(axis=1)).min())

    # ------------------------------------------------------------------

    def reversed_field(self) -> "DistanceField":
        """Distance with reversed gauge argument: min over y of rho0(y - x)."""
        if self._reversed is None:
            self._reversed = DistanceField(self.boundary, self.body.reflected(),
                                           delta_proj=self.delta_proj,
                                           merge_tol=self.merge_tol,
                                           validate=False)
        return self._reversed

    def __repr__(self):
        return (f"DistanceField({self.boundary.name}, body={self.body.name})")

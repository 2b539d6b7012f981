"""Closed C2 planar boundaries and their anisotropic differential geometry.

``DomainBoundary`` represents the boundary of the domain as a counterclockwise
parametric curve theta -> y(theta) with supplied first and second derivatives,
plus an arclength table.  ``BoundaryGeometry`` couples a boundary with a gauge
body and provides the inward ray field D rho(nu), the anisotropic curvature
(the tangential derivative of the Cahn-Hoffman field) and the ray map.
"""

from __future__ import annotations

import numpy as np

from .bodies import ConvexBody
from .errors import InputError, ValidationError

_TWO_PI = 2.0 * np.pi
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def rot90(v):
    """+90 degree rotation; maps the unit tangent to the inward normal."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


class DomainBoundary:
    """A simple closed counterclockwise C2 curve with an arclength table.

    Parameters are callables of theta in [0, 2*pi) returning shape (..., 2):
    ``point``, ``d1`` (first derivative) and ``d2`` (second derivative).
    """

    def __init__(self, point, d1, d2, *, n_samples=2048, name="boundary",
                 validate=True):
        if n_samples < 256:
            raise InputError("need at least 256 boundary samples")
        self.name = name
        self.n_samples = int(n_samples)
        self._point = point
        self._d1 = d1
        self._d2 = d2

        # Dense cumulative arclength, Simpson on each sub-interval.
        fine = 8 * self.n_samples
        th = np.linspace(0.0, _TWO_PI, fine + 1)
        speed = np.linalg.norm(self._d1(th), axis=-1)
        h = th[1] - th[0]
        mid_speed = np.linalg.norm(self._d1(0.5 * (th[:-1] + th[1:])), axis=-1)
        increments = (h / 6.0) * (speed[:-1] + 4.0 * mid_speed + speed[1:])
        cum = np.zeros(fine + 1)
        cum[1:] = np.cumsum(increments)
        self._theta_dense = th
        self._s_dense = cum
        self.total_length = float(cum[-1])

        # theta at uniform arclength samples, polished by Newton.
        s_targets = np.linspace(0.0, self.total_length, self.n_samples,
                                endpoint=False)
        theta0 = np.interp(s_targets, cum, th)
        self._theta_table = self._newton_theta(s_targets, theta0)
        self.s_table = s_targets
        self.points = self._point(self._theta_table)
        tang = self._d1(self._theta_table)
        self._speeds = np.linalg.norm(tang, axis=-1)
        self.tangents = tang / self._speeds[:, None]
        self.normals = rot90(self.tangents)

        diffs = self.points - np.roll(self.points, 1, axis=0)
        self._poly_edge = float(np.linalg.norm(diffs, axis=1).max())
        pts = self.points
        span = pts.max(axis=0) - pts.min(axis=0)
        self.diameter = float(np.hypot(span[0], span[1]))
        self.bbox = (pts.min(axis=0).copy(), pts.max(axis=0).copy())
        # Sagitta bound for the sampled polygon: containment tests use it so
        # that true boundary points test as inside.
        kap = np.abs(self.curvature_euclid(self._theta_table))
        self._max_kappa_eu = float(kap.max())
        self.edge_tol = max(1e-9, 0.15 * self._max_kappa_eu * self._poly_edge ** 2)

        if validate:
            self._validate()

    # -- constructors -------------------------------------------------------

    @classmethod
    def circle(cls, radius, n_samples=2048) -> "DomainBoundary":
        r = float(radius)
        if r <= 0:
            raise InputError("circle radius must be positive")

        def point(t):
            t = np.asarray(t, dtype=float)
            return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

        def d1(t):
            t = np.asarray(t, dtype=float)
            return np.stack([-r * np.sin(t), r * np.cos(t)], axis=-1)

        def d2(t):
            t = np.asarray(t, dtype=float)
            return np.stack([-r * np.cos(t), -r * np.sin(t)], axis=-1)

        return cls(point, d1, d2, n_samples=n_samples, name=f"circle(R={r})")

    @classmethod
    def ellipse(cls, a, b, n_samples=2048) -> "DomainBoundary":
        a, b = float(a), float(b)
        if a <= 0 or b <= 0:
            raise InputError("ellipse semi-axes must be positive")

        def point(t):
            t = np.asarray(t, dtype=float)
            return np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)

        def d1(t):
            t = np.asarray(t, dtype=float)
            return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1)

        def d2(t):
            t = np.asarray(t, dtype=float)
            return np.stack([-a * np.cos(t), -b * np.sin(t)], axis=-1)

        return cls(point, d1, d2, n_samples=n_samples,
                   name=f"ellipse(a={a},b={b})")

    @classmethod
    def star(cls, radius, amplitude, lobes, n_samples=2048) -> "DomainBoundary":
        """Wavy circle r(t) = R (1 + amp cos(k t)); non-convex for large amp."""
        r0, amp, k = float(radius), float(amplitude), int(lobes)
        if not 0 <= amp < 1:
            raise InputError("star amplitude must be in [0, 1)")

        def radial(t):
            return r0 * (1.0 + amp * np.cos(k * t))

        def radial1(t):
            return -r0 * amp * k * np.sin(k * t)

        def radial2(t):
            return -r0 * amp * k * k * np.cos(k * t)

        def point(t):
            t = np.asarray(t, dtype=float)
            r = radial(t)
            return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

        def d1(t):
            t = np.asarray(t, dtype=float)
            r, r1 = radial(t), radial1(t)
            return np.stack([r1 * np.cos(t) - r * np.sin(t),
                             r1 * np.sin(t) + r * np.cos(t)], axis=-1)

        def d2(t):
            t = np.asarray(t, dtype=float)
            r, r1, r2 = radial(t), radial1(t), radial2(t)
            return np.stack(
                [r2 * np.cos(t) - 2.0 * r1 * np.sin(t) - r * np.cos(t),
                 r2 * np.sin(t) + 2.0 * r1 * np.cos(t) - r * np.sin(t)],
                axis=-1)

        return cls(point, d1, d2, n_samples=n_samples,
                   name=f"star(R={r0},amp={amp},k={k})")

    @classmethod
    def from_parametric(cls, point, d1, d2, n_samples=2048,
                        name="user-curve") -> "DomainBoundary":
        return cls(point, d1, d2, n_samples=n_samples, name=name)

    # -- validation ----------------------------------------------------------

    def _validate(self):
        th = np.linspace(0.0, _TWO_PI, 512, endpoint=False)
        h = 1e-5
        p_plus = self._point(th + h)
        p_minus = self._point(th - h)
        fd1 = (p_plus - p_minus) / (2.0 * h)
        d1 = self._d1(th)
        scale = max(1.0, float(np.abs(d1).max()))
        if np.abs(fd1 - d1).max() > 1e-6 * scale * 10.0:
            raise ValidationError("first derivative inconsistent with the curve")
        fd2 = (p_plus - 2.0 * self._point(th) + p_minus) / (h * h)
        d2 = self._d2(th)
        scale2 = max(1.0, float(np.abs(d2).max()))
        if np.abs(fd2 - d2).max() > 1e-4 * scale2:
            raise ValidationError("second derivative inconsistent with the curve")
        if np.any(self._speeds <= 0):
            raise ValidationError("curve parameterisation has a stationary point")
        # Counterclockwise orientation via the shoelace area.
        pts = self.points
        area = 0.5 * float(np.sum(pts[:, 0] * np.roll(pts[:, 1], -1)
                                  - pts[:, 1] * np.roll(pts[:, 0], -1)))
        if area <= 0:
            raise ValidationError("boundary must be oriented counterclockwise")
        if self._self_intersects():
            raise ValidationError("boundary polygon self-intersects")

    def _self_intersects(self) -> bool:
        pts = self.points
        n = pts.shape[0]
        a = pts
        b = np.roll(pts, -1, axis=0)
        # All-pairs proper intersection test on sampled edges, chunked.
        idx = np.arange(n)
        for start in range(0, n, 256):
            sel = idx[start:start + 256]
            a1 = a[sel][:, None, :]
            b1 = b[sel][:, None, :]
            a2 = a[None, :, :]
            b2 = b[None, :, :]
            d1 = b1 - a1
            d2 = b2 - a2
            denom = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
            diff = a2 - a1
            t = (diff[..., 0] * d2[..., 1] - diff[..., 1] * d2[..., 0])
            u = (diff[..., 0] * d1[..., 1] - diff[..., 1] * d1[..., 0])
            with np.errstate(divide="ignore", invalid="ignore"):
                t = t / denom
                u = u / denom
            eps = 1e-9
            proper = ((np.abs(denom) > 1e-14)
                      & (t > eps) & (t < 1 - eps)
                      & (u > eps) & (u < 1 - eps))
            # Mask adjacent and identical edges.
            gap = (sel[:, None] - idx[None, :]) % n
            proper &= (gap != 0) & (gap != 1) & (gap != n - 1)
            if np.any(proper):
                return True
        return False

    # -- parameter maps ------------------------------------------------------

    def _newton_theta(self, s_targets, theta0):
        th = theta0.copy()
        for _ in range(30):
            s_val = np.interp(np.mod(th, _TWO_PI), self._theta_dense,
                              self._s_dense) + np.floor(th / _TWO_PI) * self.total_length
            speed = np.linalg.norm(self._d1(th), axis=-1)
            delta = (s_val - s_targets) / speed
            th -= delta
            if np.abs(delta).max() < 1e-14:
                break
        return np.mod(th, _TWO_PI)

    def theta_of_s(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.total_length)
        theta0 = np.interp(s, self._s_dense, self._theta_dense)
        scalar = theta0.ndim == 0
        th = self._newton_theta(np.atleast_1d(s), np.atleast_1d(theta0))
        return float(th[0]) if scalar else th

    def s_of_theta(self, theta):
        theta = np.mod(np.asarray(theta, dtype=float), _TWO_PI)
        return np.interp(theta, self._theta_dense, self._s_dense)

    # -- frames and curvature ------------------------------------------------

    def frame(self, s):
        """Point, unit tangent and inward unit normal at arclength s."""
        th = self.theta_of_s(s)
        return self.frame_theta(th)

    def frame_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        p = self._point(theta)
        d1 = self._d1(theta)
        t = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
        return p, t, rot90(t)

    def curvature_euclid(self, theta):
        """Signed Euclidean curvature (positive for convex arcs, CCW)."""
        theta = np.asarray(theta, dtype=float)
        d1 = self._d1(theta)
        d2 = self._d2(theta)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        speed = np.linalg.norm(d1, axis=-1)
        return cross / speed ** 3

    # -- membership ----------------------------------------------------------

    def contains_many(self, x, tol=None) -> np.ndarray:
        """Winding-number membership in the closed domain, on the sampled polygon.

        Points within ``tol`` (default: the polygon sagitta bound) of the
        polygon are counted as inside, so exact boundary points succeed.
        """
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        if tol is None:
            tol = self.edge_tol
        pts = self.points
        nxt = np.roll(pts, -1, axis=0)
        inside = np.zeros(x.shape[0], dtype=bool)
        near = np.zeros(x.shape[0], dtype=bool)
        block = max(64, (1 << 20) // max(1, pts.shape[0]))
        for k0 in range(0, x.shape[0], block):
            q = x[k0:k0 + block]
            x0 = pts[None, :, 0] - q[:, None, 0]
            y0 = pts[None, :, 1] - q[:, None, 1]
            x1 = nxt[None, :, 0] - q[:, None, 0]
            y1 = nxt[None, :, 1] - q[:, None, 1]
            # Crossing-number parity.
            crosses = ((y0 > 0) != (y1 > 0))
            with np.errstate(divide="ignore", invalid="ignore"):
                x_at = x0 + (x1 - x0) * np.where(crosses, -y0 / (y1 - y0), 0.0)
            hit = crosses & (x_at > 0)
            inside[k0:k0 + block] = (hit.sum(axis=1) % 2) == 1
            if tol > 0.0:
                # Distance to the polygon for the tolerance band.
                ex = x1 - x0
                ey = y1 - y0
                ll = ex * ex + ey * ey
                tpar = np.clip(-(x0 * ex + y0 * ey) / np.maximum(ll, 1e-300),
                               0.0, 1.0)
                dx = x0 + tpar * ex
                dy = y0 + tpar * ey
                dist = np.sqrt(dx * dx + dy * dy).min(axis=1)
                near[k0:k0 + block] = dist <= tol
        return inside | near

    def contains(self, x, tol=None) -> bool:
        return bool(self.contains_many(np.asarray(x, dtype=float)[None, :],
                                       tol=tol)[0])

    def __repr__(self):
        return f"DomainBoundary({self.name}, N={self.n_samples})"


class BoundaryGeometry:
    """A boundary equipped with a gauge body: rays, Cahn-Hoffman field, curvature."""

    def __init__(self, boundary: DomainBoundary, body: ConvexBody, *,
                 require_c2plus=True):
        self.boundary = boundary
        self.body = body
        if require_c2plus:
            report = body.validate_c2plus()
            if not report.passed:
                raise ValidationError(
                    f"body {body.name!r} is not admissible: {report.message}")
        self.ray_dirs = body.gauge_gradient_many(boundary.normals)
        self.n_rho = -self.ray_dirs
        self._h_s = boundary.total_length / boundary.n_samples
        self.kappa_table = self._kappa_from_table()

    def _kappa_from_table(self):
        # 5-point stencil of the Cahn-Hoffman field along the uniform
        # arclength table, projected on the tangent.
        n = self.n_rho
        h = self._h_s
        dn = (np.roll(n, 2, axis=0) - 8.0 * np.roll(n, 1, axis=0)
              + 8.0 * np.roll(n, -1, axis=0) - np.roll(n, -2, axis=0)) / (12.0 * h)
        return np.einsum("ij,ij->i", dn, self.boundary.tangents)

    # -- pointwise operations -------------------------------------------------

    def cahn_hoffman(self, s):
        """Cahn-Hoffman vector and inward ray direction at arclength s."""
        _, _, nu = self.boundary.frame(s)
        ray = self.body.gauge_gradient_many(nu[None, :]
                                            if nu.ndim == 1 else nu)
        ray = ray[0] if nu.ndim == 1 else ray
        return -ray, ray

    def _n_rho_at(self, s_values):
        _, _, nu = self.boundary.frame(np.asarray(s_values, dtype=float))
        return -self.body.gauge_gradient_many(nu)

    def curvature(self, s) -> float:
        """Anisotropic curvature at arclength s (5-point stencil, step L/N)."""
        s = float(s)
        h = self._h_s
        stencil = s + h * np.array([-2.0, -1.0, 1.0, 2.0])
        n_vals = self._n_rho_at(stencil)
        dn = (n_vals[0] - 8.0 * n_vals[1] + 8.0 * n_vals[2] - n_vals[3]) / (12.0 * h)
        _, t, _ = self.boundary.frame(s)
        return float(dn @ t)

    def curvature_many(self, s_values) -> np.ndarray:
        s_values = np.asarray(s_values, dtype=float)
        h = self._h_s
        offs = np.array([-2.0, -1.0, 1.0, 2.0]) * h
        n_vals = [self._n_rho_at(s_values + o) for o in offs]
        dn = (n_vals[0] - 8.0 * n_vals[1] + 8.0 * n_vals[2] - n_vals[3]) / (12.0 * h)
        _, t, _ = self.boundary.frame(s_values)
        return np.einsum("ij,ij->i", dn, t)

    def curvature_interp(self, s_values) -> np.ndarray:
        """Periodic linear interpolation of the curvature table."""
        return _periodic_interp(s_values, self.boundary.s_table,
                                self.kappa_table, self.boundary.total_length)

    def ray_dir_interp(self, s_values) -> np.ndarray:
        out = np.empty((np.size(s_values), 2))
        for k in range(2):
            out[:, k] = _periodic_interp(s_values, self.boundary.s_table,
                                         self.ray_dirs[:, k],
                                         self.boundary.total_length)
        return out

    def min_curvature(self):
        """Minimum anisotropic curvature over the boundary (H0 in the plane).

        Golden-section refinement around the table argmin.
        """
        idx = int(np.argmin(self.kappa_table))
        s0 = self.boundary.s_table[idx]
        lo, hi = s0 - self._h_s, s0 + self._h_s
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = self.curvature(x1), self.curvature(x2)
        for _ in range(60):
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = self.curvature(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = self.curvature(x2)
        return float(min(f1, f2, self.kappa_table[idx]))

    def ray_point(self, s, t):
        """Phi(s, t) = y(s) + t * D rho(nu(s)); unit rho0-speed in t."""
        p, _, nu = self.boundary.frame(s)
        ray = self.body.gauge_gradient_many(np.atleast_2d(nu))
        if np.ndim(s) == 0:
            return p + float(t) * ray[0]
        return p + np.asarray(t, dtype=float)[:, None] * ray

    def ray_points_table(self, t_values) -> np.ndarray:
        """Ray points from every table sample at per-sample parameters."""
        t_values = np.asarray(t_values, dtype=float)
        return self.boundary.points + t_values[:, None] * self.ray_dirs


def _periodic_interp(x, xp, fp, period):
    x = np.mod(np.asarray(x, dtype=float), period)
    xp_ext = np.concatenate([xp, [period]])
    fp_ext = np.concatenate([fp, [fp[0]]])
    return np.interp(x, xp_ext, fp_ext)

"""Convex gauge bodies: anisotropic unit balls with exact or numeric duality.

A body K is a compact convex set with 0 in its interior, described by its
gauge rho (positively 1-homogeneous, rho > 0 away from 0).  The polar gauge
rho0 is the support function of K.  Euclidean balls and ellipses use closed
forms; arbitrary user gauges get a direction table plus local refinement for
the polar side and Richardson finite differences for the gradient.

Bodies may be non-symmetric (rho(-xi) != rho(xi)); all callers must preserve
argument order in rho0(x - y).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _check_vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (2,):
        raise InputError(f"expected a 2-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"non-finite input: {v!r}")
    return v


def _unit_dirs(thetas: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)


@dataclass(frozen=True)
class C2PlusReport:
    """Result of the boundary smoothness / strict convexity check."""

    passed: bool
    min_curvature: float
    max_gradient_mismatch: float
    bad_directions: tuple = ()
    message: str = ""


class ConvexBody:
    """A planar convex body given by its gauge function.

    Use the factory classmethods :meth:`euclidean`, :meth:`ellipse` or
    :meth:`from_gauge`.  Instances are immutable after construction and safe
    for concurrent reads (direction tables are built once, up front).
    """

    def __init__(self, kind, *, matrix=None, func=None, name=None,
                 n_directions=4096):
        self.kind = kind
        self.name = name or kind
        self.n_directions = int(n_directions)
        self._matrix = None
        self._matrix_inv = None
        self._func = None
        if kind == "euclidean":
            pass
        elif kind == "ellipse":
            a = np.asarray(matrix, dtype=float)
            if a.shape != (2, 2) or not np.allclose(a, a.T, atol=1e-12):
                raise InputError("ellipse body needs a symmetric 2x2 matrix")
            evals = np.linalg.eigvalsh(a)
            if evals.min() <= 0:
                raise InputError("ellipse matrix must be positive definite")
            self._matrix = a
            self._matrix_inv = np.linalg.inv(a)
        elif kind == "user":
            if func is None:
                raise InputError("user body needs a gauge callable")
            self._func = self._vectorized(func)
        else:
            raise InputError(f"unknown body kind {kind!r}")

        # Direction table: rho on 4096 unit directions, and the boundary
        # points e/rho(e) used for the polar maximisation.
        self._thetas = np.linspace(0.0, 2.0 * np.pi, self.n_directions,
                                   endpoint=False)
        dirs = _unit_dirs(self._thetas)
        rho = self.gauge_many(dirs)
        if not np.all(np.isfinite(rho)) or rho.min() <= 0.0:
            raise InputError("gauge must be positive and finite on the unit circle")
        self._dir_rho = rho
        self._boundary_pts = dirs / rho[:, None]
        self._c1c2 = self._compute_enclosing_constants()

    # -- factories ---------------------------------------------------------

    @classmethod
    def euclidean(cls) -> "ConvexBody":
        """Unit Euclidean ball; gauge and polar gauge are both |.|"""
        return cls("euclidean")

    @classmethod
    def ellipse(cls, matrix) -> "ConvexBody":
        """Ellipse {xi : xi.A.xi <= 1} for SPD A; gauge sqrt(xi.A.xi)."""
        return cls("ellipse", matrix=matrix)

    @classmethod
    def from_gauge(cls, func, name="user", n_directions=4096) -> "ConvexBody":
        """Body from a positively 1-homogeneous gauge callable.

        ``func`` must accept arrays of shape (..., 2) and return (...); a
        scalar-only callable is wrapped automatically.
        """
        return cls("user", func=func, name=name, n_directions=n_directions)

    @staticmethod
    def _vectorized(func):
        probe = np.array([[1.0, 0.0], [0.0, 1.0]])
        try:
            out = np.asarray(func(probe), dtype=float)
            if out.shape == (2,):
                return func
        except Exception:
            pass

        def wrapped(v):
            v = np.asarray(v, dtype=float)
            flat = v.reshape(-1, 2)
            vals = np.array([float(func(row)) for row in flat])
            return vals.reshape(v.shape[:-1])

        return wrapped

    # -- gauge -------------------------------------------------------------

    def gauge(self, xi) -> float:
        """Gauge rho(xi): the scale factor placing xi on the boundary of K."""
        xi = _check_vec(xi)
        return float(self.gauge_many(xi[None, :])[0])

    def gauge_many(self, v) -> np.ndarray:
        """Vectorised gauge on an array of shape (..., 2)."""
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            return np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2)
        if self.kind == "ellipse":
            a = self._matrix
            q = (a[0, 0] * v[..., 0] ** 2
                 + 2.0 * a[0, 1] * v[..., 0] * v[..., 1]
                 + a[1, 1] * v[..., 1] ** 2)
            return np.sqrt(np.maximum(q, 0.0))
        return np.asarray(self._func(v), dtype=float)

    # -- polar gauge -------------------------------------------------------

    def polar_gauge(self, x) -> float:
        """Polar gauge rho0(x) = max over xi in K of <x, xi>."""
        x = _check_vec(x)
        return float(self.polar_gauge_many(x[None, :])[0])

    def polar_gauge_many(self, v) -> np.ndarray:
        """Vectorised polar gauge on an array of shape (..., 2)."""
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            return np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2)
        if self.kind == "ellipse":
            a = self._matrix_inv
            q = (a[0, 0] * v[..., 0] ** 2
                 + 2.0 * a[0, 1] * v[..., 0] * v[..., 1]
                 + a[1, 1] * v[..., 1] ** 2)
            return np.sqrt(np.maximum(q, 0.0))
        vals, _ = self._polar_refined(v.reshape(-1, 2))
        return vals.reshape(v.shape[:-1])

    def _support_argmax(self, flat):
        """Coarse support maximisation over the boundary point table."""
        best = np.full(flat.shape[0], -np.inf)
        arg = np.zeros(flat.shape[0], dtype=np.intp)
        block = 2048
        pts = self._boundary_pts
        for k0 in range(0, pts.shape[0], block):
            sub = pts[k0:k0 + block]
            dots = flat @ sub.T
            cand = np.argmax(dots, axis=1)
            val = dots[np.arange(flat.shape[0]), cand]
            better = val > best
            best[better] = val[better]
            arg[better] = cand[better] + k0
        return best, arg

    def _polar_refined(self, flat):
        """Support values plus maximising angles, golden-refined to ~1e-12 rad.

        Zero vectors return 0 with angle 0.
        """
        norms = np.hypot(flat[:, 0], flat[:, 1])
        nz = norms > 0.0
        vals = np.zeros(flat.shape[0])
        angs = np.zeros(flat.shape[0])
        if not np.any(nz):
            return vals, angs
        sub = flat[nz]
        _, arg = self._support_argmax(sub)
        step = 2.0 * np.pi / self.n_directions
        lo = self._thetas[arg] - step
        hi = self._thetas[arg] + step

        def q(theta):
            e = _unit_dirs(theta)
            val = np.einsum("ij,ij->i", sub, e) / self.gauge_many(e)
            return val

        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = q(x1), q(x2)
        for _ in range(48):
            take1 = f1 >= f2
            hi = np.where(take1, x2, hi)
            lo = np.where(take1, lo, x1)
            x1n = np.where(take1, hi - _GOLDEN * (hi - lo), x2)
            x2n = np.where(take1, x1, lo + _GOLDEN * (hi - lo))
            f1n = np.where(take1, np.nan, f2)
            f2n = np.where(take1, f1, np.nan)
            miss1 = np.isnan(f1n)
            if np.any(miss1):
                f1n[miss1] = q(x1n[miss1])
            miss2 = np.isnan(f2n)
            if np.any(miss2):
                f2n[miss2] = q(x2n[miss2])
            x1, x2, f1, f2 = x1n, x2n, f1n, f2n
        theta = 0.5 * (lo + hi)
        vals[nz] = q(theta)
        angs[nz] = theta
        return vals, angs

    # -- gradients ---------------------------------------------------------

    def gauge_gradient(self, xi) -> np.ndarray:
        """D rho(xi); lies on the boundary of the polar body."""
        xi = _check_vec(xi)
        if np.hypot(xi[0], xi[1]) == 0.0:
            raise DomainError("gauge gradient is undefined at the origin")
        return self.gauge_gradient_many(xi[None, :])[0]

    def gauge_gradient_many(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            n = np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2)
            return v / n[..., None]
        if self.kind == "ellipse":
            av = v @ self._matrix.T
            return av / self.gauge_many(v)[..., None]
        # Central differences with one Richardson step; the gauge is smooth
        # away from 0 so truncation is O(h^4).
        flat = v.reshape(-1, 2)
        scale = np.hypot(flat[:, 0], flat[:, 1])
        h = 1e-3 * scale
        grad = np.empty_like(flat)
        for axis in range(2):
            e = np.zeros_like(flat)
            e[:, axis] = h
            d1 = (self._func(flat + e) - self._func(flat - e)) / (2.0 * h)
            e[:, axis] = 0.5 * h
            d2 = (self._func(flat + e) - self._func(flat - e)) / h
            grad[:, axis] = (4.0 * d2 - d1) / 3.0
        return grad.reshape(v.shape)

    def polar_gauge_gradient(self, x) -> np.ndarray:
        """D rho0(x); lies on the boundary of K."""
        x = _check_vec(x)
        if np.hypot(x[0], x[1]) == 0.0:
            raise DomainError("polar gauge gradient is undefined at the origin")
        return self.polar_gauge_gradient_many(x[None, :])[0]

    def polar_gauge_gradient_many(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "euclidean":
            n = np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2)
            return v / n[..., None]
        if self.kind == "ellipse":
            av = v @ self._matrix_inv.T
            return av / self.polar_gauge_many(v)[..., None]
        # Envelope theorem: the gradient of the support function is the
        # maximising boundary point of K.
        flat = v.reshape(-1, 2)
        _, angs = self._polar_refined(flat)
        e = _unit_dirs(angs)
        pts = e / self.gauge_many(e)[:, None]
        return pts.reshape(v.shape)

    # -- constants and validation ------------------------------------------

    def _compute_enclosing_constants(self):
        if self.kind == "euclidean":
            lo = hi = 1.0
        elif self.kind == "ellipse":
            evals = np.linalg.eigvalsh(self._matrix)
            lo, hi = float(np.sqrt(evals[0])), float(np.sqrt(evals[1]))
        else:
            rho = self._dir_rho
            lo = self._refine_extremum(int(np.argmin(rho)), minimise=True)
            hi = self._refine_extremum(int(np.argmax(rho)), minimise=False)
        # Rounded outward so the sandwich holds on fresh directions.
        return (max(lo - 1e-9, 0.0), hi + 1e-9)

    def _refine_extremum(self, idx, minimise):
        step = 2.0 * np.pi / self.n_directions
        lo = self._thetas[idx] - step
        hi = self._thetas[idx] + step
        sign = 1.0 if minimise else -1.0

        def q(theta):
            return sign * float(self.gauge_many(_unit_dirs(np.array([theta]))))

        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = q(x1), q(x2)
        for _ in range(60):
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = q(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = q(x2)
        return sign * min(f1, f2)

    def enclosing_constants(self):
        """Constants (c1, c2) with c1|xi| <= rho(xi) <= c2|xi|."""
        return self._c1c2

    @property
    def c1(self) -> float:
        return self._c1c2[0]

    @property
    def c2(self) -> float:
        return self._c1c2[1]

    def validate_c2plus(self, n_samples=2048) -> C2PlusReport:
        """Check that the boundary of K is C2 with strictly positive curvature.

        Curvature is estimated by three-point circumcircles on boundary
        samples; C1 consistency compares the analytic/user gradient against
        central differences of the gauge.
        """
        thetas = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
        dirs = _unit_dirs(thetas)
        pts = dirs / self.gauge_many(dirs)[:, None]
        a = pts
        b = np.roll(pts, -1, axis=0)
        c = np.roll(pts, -2, axis=0)
        ab = b - a
        bc = c - b
        ac = c - a
        cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
        lens = (np.hypot(*ab.T) * np.hypot(*bc.T) * np.hypot(*ac.T))
        kappa = 2.0 * cross / np.maximum(lens, 1e-300)
        min_kappa = float(kappa.min())

        check_dirs = _unit_dirs(np.linspace(0.0, 2.0 * np.pi, 256,
                                            endpoint=False))
        grads = self.gauge_gradient_many(check_dirs)
        h = 1e-6
        fd = np.empty_like(grads)
        for axis in range(2):
            e = np.zeros((1, 2))
            e[0, axis] = h
            fd[:, axis] = (self.gauge_many(check_dirs + e)
                           - self.gauge_many(check_dirs - e)) / (2.0 * h)
        mismatch = np.abs(fd - grads).max(axis=1)
        max_mismatch = float(mismatch.max())

        bad = np.nonzero((kappa <= 1e-6))[0]
        bad_dirs = tuple(float(thetas[i]) for i in bad[:8])
        passed = (min_kappa > 1e-6) and (max_mismatch <= 1e-4)
        msg = "" if passed else (
            f"min curvature {min_kappa:.3e}, gradient mismatch {max_mismatch:.3e}")
        return C2PlusReport(passed=passed, min_curvature=min_kappa,
                            max_gradient_mismatch=max_mismatch,
                            bad_directions=bad_dirs, message=msg)

    def reflected(self) -> "ConvexBody":
        """The body -K, whose polar gauge is x -> rho0(-x)."""
        if self.kind in ("euclidean", "ellipse"):
            return self
        func = self._func
        return ConvexBody.from_gauge(lambda v: func(-np.asarray(v, dtype=float)),
                                     name=self.name + "-reflected",
                                     n_directions=self.n_directions)

    def __repr__(self):
        return f"ConvexBody(kind={self.kind!r}, name={self.name!r})"


def offset_ball_body(shift, n_directions=4096) -> ConvexBody:
    """Non-symmetric smooth gauge |xi| - <shift, xi| with |shift| < 1.

    Its unit ball is an off-centre ellipse, so the body is C2 with strictly
    positive curvature but rho(-xi) != rho(xi).
    """
    s = np.asarray(shift, dtype=float)
    if np.hypot(s[0], s[1]) >= 1.0:
        raise InputError("offset magnitude must be < 1 for a positive gauge")

    def func(v):
        v = np.asarray(v, dtype=float)
        return np.hypot(v[..., 0], v[..., 1]) - (v[..., 0] * s[0] + v[..., 1] * s[1])

    return ConvexBody.from_gauge(func, name="offset-ball",
                                 n_directions=n_directions)


def square_body(n_directions=4096) -> ConvexBody:
    """Sup-norm gauge max(|x1|, |x2|); fails the curvature check (flat sides)."""

    def func(v):
        v = np.asarray(v, dtype=float)
        return np.maximum(np.abs(v[..., 0]), np.abs(v[..., 1]))

    return ConvexBody.from_gauge(func, name="square", n_directions=n_directions)

"""Bounded nonnegative source fields with an explicit support descriptor."""

from __future__ import annotations

import numpy as np

from .errors import InputError, ValidationError
from .regions import Region, RegionUnion, parse_region


class SourceField:
    """A nonnegative bounded density f with supp(f) inside a region union.

    ``evaluator`` maps (..., 2) arrays to (...); it is zeroed outside the
    support automatically, so a constant evaluator plus a region list is the
    common construction.
    """

    def __init__(self, evaluator, support, *, name="source", sup_norm=None):
        if isinstance(support, Region) and not isinstance(support, RegionUnion):
            support = RegionUnion([support])
        elif not isinstance(support, RegionUnion):
            support = RegionUnion([parse_region(s) for s in support])
        self.support = support
        self.name = name
        self._evaluator = evaluator
        self._sup_norm = sup_norm

    @classmethod
    def constant(cls, value, support, name=None) -> "SourceField":
        value = float(value)
        if value < 0:
            raise InputError("source value must be nonnegative")
        return cls(lambda x: np.full(np.asarray(x).shape[:-1], value),
                   support, name=name or f"const({value})", sup_norm=value)

    @classmethod
    def zero(cls) -> "SourceField":
        return cls(lambda x: np.zeros(np.asarray(x).shape[:-1]),
                   RegionUnion([]), name="zero", sup_norm=0.0)

    def evaluate_many(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        vals = np.asarray(self._evaluator(flat), dtype=float).reshape(-1)
        inside = self.support.contains_many(flat)
        vals = np.where(inside, vals, 0.0)
        return vals.reshape(x.shape[:-1])

    def __call__(self, x) -> float:
        return float(self.evaluate_many(np.asarray(x, dtype=float)[None, :])[0])

    def sup_norm(self, extra_points=None) -> float:
        """Cached sup-norm estimate over support samples (plus extras)."""
        if self._sup_norm is None:
            pts = [self.support.boundary_points(self._sample_spacing())]
            lo, hi = self.support.bbox()
            n = 64
            xs = np.linspace(lo[0], hi[0], n)
            ys = np.linspace(lo[1], hi[1], n)
            gx, gy = np.meshgrid(xs, ys, indexing="xy")
            pts.append(np.column_stack([gx.ravel(), gy.ravel()]))
            if extra_points is not None:
                pts.append(np.asarray(extra_points, dtype=float).reshape(-1, 2))
            allpts = np.vstack(pts)
            self._sup_norm = float(self.evaluate_many(allpts).max(initial=0.0))
        return self._sup_norm

    def _sample_spacing(self):
        lo, hi = self.support.bbox()
        return max(float(max(hi[0] - lo[0], hi[1] - lo[1])) / 256.0, 1e-9)

    def validate(self, rng, n_checks=10_000):
        """f >= 0 everywhere sampled; f == 0 outside the support descriptor."""
        lo, hi = self.support.bbox()
        span = np.maximum(hi - lo, 1e-9)
        pts = lo + rng.random((n_checks, 2)) * span
        vals = np.asarray(self._evaluator(pts), dtype=float)
        if np.any(vals < 0):
            raise ValidationError("source evaluator takes negative values")
        outside = lo - 0.5 * span + rng.random((n_checks, 2)) * 2.0 * span
        mask = ~self.support.contains_many(outside)
        if np.any(self.evaluate_many(outside[mask]) != 0.0):
            raise ValidationError("source is nonzero outside its support")

    def scaled(self, alpha) -> "SourceField":
        alpha = float(alpha)
        if alpha < 0:
            raise InputError("scaling must be nonnegative")
        ev = self._evaluator
        return SourceField(lambda x: alpha * np.asarray(ev(x), dtype=float),
                           self.support, name=f"{alpha}*{self.name}",
                           sup_norm=(None if self._sup_norm is None
                                     else alpha * self._sup_norm))

    @staticmethod
    def combine(alpha, f, beta, g) -> "SourceField":
        """alpha*f + beta*g with the union support (alpha, beta >= 0)."""
        if alpha < 0 or beta < 0:
            raise InputError("combination weights must be nonnegative")
        support = RegionUnion(list(f.support) + list(g.support))

        def ev(x):
            return (alpha * f.evaluate_many(x) + beta * g.evaluate_many(x))

        return SourceField(ev, support, name=f"{alpha}*{f.name}+{beta}*{g.name}")

    def __repr__(self):
        return f"SourceField({self.name}, regions={len(self.support)})"

"""Closed primitive regions and unions: the support descriptors for sources.

Membership uses non-strict inequalities (regions are closed); an optional
``tol`` inflates a region slightly, which ray scans use so that measure-zero
sets such as single points remain detectable along a sampled ray.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

_TWO_PI = 2.0 * np.pi


def _pts(x):
    return np.asarray(x, dtype=float).reshape(-1, 2)


class Region:
    """Base class; subclasses implement vectorised membership and sampling."""

    def contains_many(self, x, tol=0.0) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol=0.0) -> bool:
        return bool(self.contains_many(np.asarray(x, dtype=float)[None, :],
                                       tol=tol)[0])

    def boundary_points(self, spacing, clip_bbox=None) -> np.ndarray:
        raise NotImplementedError

    def bbox(self):
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError


class Disk(Region):
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.radius = float(radius)
        if self.radius < 0:
            raise InputError("disk radius must be nonnegative")

    def contains_many(self, x, tol=0.0):
        x = _pts(x)
        d = np.hypot(x[:, 0] - self.center[0], x[:, 1] - self.center[1])
        return d <= self.radius + tol

    def boundary_points(self, spacing, clip_bbox=None):
        if self.radius == 0.0:
            return self.center[None, :]
        n = max(8, int(np.ceil(_TWO_PI * self.radius / spacing)))
        t = np.linspace(0.0, _TWO_PI, n, endpoint=False)
        return self.center + self.radius * np.stack([np.cos(t), np.sin(t)],
                                                    axis=-1)

    def bbox(self):
        r = self.radius
        return (self.center - r, self.center + r)

    def to_spec(self):
        return {"kind": "disk", "c": self.center.tolist(), "r": self.radius}


class HalfPlane(Region):
    """Closed half-plane <n, x> <= b."""

    def __init__(self, normal, offset):
        self.normal = np.asarray(normal, dtype=float).reshape(2)
        nn = np.hypot(self.normal[0], self.normal[1])
        if nn == 0:
            raise InputError("half-plane normal must be nonzero")
        self.normal = self.normal / nn
        self.offset = float(offset) / nn

    def contains_many(self, x, tol=0.0):
        x = _pts(x)
        return x @ self.normal <= self.offset + tol

    def boundary_points(self, spacing, clip_bbox=None):
        if clip_bbox is None:
            raise InputError("half-plane boundary sampling needs a clip box")
        lo, hi = clip_bbox
        span = float(np.hypot(hi[0] - lo[0], hi[1] - lo[1]))
        tangent = np.array([-self.normal[1], self.normal[0]])
        base = self.offset * self.normal
        n = max(2, int(np.ceil(2 * span / spacing)))
        t = np.linspace(-span, span, n)
        pts = base[None, :] + t[:, None] * tangent[None, :]
        keep = ((pts[:, 0] >= lo[0]) & (pts[:, 0] <= hi[0])
                & (pts[:, 1] >= lo[1]) & (pts[:, 1] <= hi[1]))
        return pts[keep]

    def bbox(self):
        big = 1e18
        return (np.array([-big, -big]), np.array([big, big]))

    def to_spec(self):
        return {"kind": "halfplane", "n": self.normal.tolist(),
                "b": self.offset}


class Box(Region):
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float).reshape(2)
        self.hi = np.asarray(hi, dtype=float).reshape(2)
        if np.any(self.hi < self.lo):
            raise InputError("box needs lo <= hi componentwise")

    def contains_many(self, x, tol=0.0):
        x = _pts(x)
        return ((x[:, 0] >= self.lo[0] - tol) & (x[:, 0] <= self.hi[0] + tol)
                & (x[:, 1] >= self.lo[1] - tol) & (x[:, 1] <= self.hi[1] + tol))

    def boundary_points(self, spacing, clip_bbox=None):
        corners = np.array([self.lo,
                            [self.hi[0], self.lo[1]],
                            self.hi,
                            [self.lo[0], self.hi[1]]])
        return _polyline_points(np.vstack([corners, corners[:1]]), spacing)

    def bbox(self):
        return (self.lo.copy(), self.hi.copy())

    def to_spec(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Polygon(Region):
    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise InputError("polygon needs at least 3 planar vertices")
        self.vertices = v

    def contains_many(self, x, tol=0.0):
        x = _pts(x)
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        inside = np.zeros(x.shape[0], dtype=bool)
        x0 = v[None, :, 0] - x[:, None, 0]
        y0 = v[None, :, 1] - x[:, None, 1]
        x1 = nxt[None, :, 0] - x[:, None, 0]
        y1 = nxt[None, :, 1] - x[:, None, 1]
        crosses = (y0 > 0) != (y1 > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x0 + (x1 - x0) * np.where(crosses, -y0 / (y1 - y0), 0.0)
        inside = ((crosses & (x_at > 0)).sum(axis=1) % 2) == 1
        # Closed membership: points within tol of an edge count as inside.
        ex = x1 - x0
        ey = y1 - y0
        ll = np.maximum(ex * ex + ey * ey, 1e-300)
        tpar = np.clip(-(x0 * ex + y0 * ey) / ll, 0.0, 1.0)
        dist = np.sqrt((x0 + tpar * ex) ** 2 + (y0 + tpar * ey) ** 2).min(axis=1)
        return inside | (dist <= max(tol, 1e-12))

    def boundary_points(self, spacing, clip_bbox=None):
        return _polyline_points(np.vstack([self.vertices, self.vertices[:1]]),
                                spacing)

    def bbox(self):
        return (self.vertices.min(axis=0), self.vertices.max(axis=0))

    def to_spec(self):
        return {"kind": "polygon", "pts": self.vertices.tolist()}


class Sector(Region):
    """Annular sector around ``center``: r in [r1, r2], angle in [theta1, theta2].

    Angles are taken mod 2*pi; theta2 may exceed theta1 by up to 2*pi, and
    theta2 - theta1 >= 2*pi means the full annulus.
    """

    def __init__(self, center, theta1, theta2, r1, r2):
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.theta1 = float(theta1)
        self.theta2 = float(theta2)
        if self.theta2 < self.theta1:
            raise InputError("sector needs theta2 >= theta1")
        self.r1 = float(r1)
        self.r2 = float(r2)
        if not 0 <= self.r1 <= self.r2:
            raise InputError("sector needs 0 <= r1 <= r2")

    @property
    def full_turn(self) -> bool:
        return self.theta2 - self.theta1 >= _TWO_PI - 1e-15

    def contains_many(self, x, tol=0.0):
        x = _pts(x)
        dx = x[:, 0] - self.center[0]
        dy = x[:, 1] - self.center[1]
        r = np.hypot(dx, dy)
        ok_r = (r >= self.r1 - tol) & (r <= self.r2 + tol)
        if self.full_turn:
            return ok_r
        ang = np.arctan2(dy, dx)
        rel = np.mod(ang - self.theta1, _TWO_PI)
        width = self.theta2 - self.theta1
        ang_tol = tol / np.maximum(r, max(self.r1, 1e-12))
        ok_a = (rel <= width + ang_tol) | (rel >= _TWO_PI - ang_tol)
        return ok_r & ok_a

    def boundary_points(self, spacing, clip_bbox=None):
        width = min(self.theta2 - self.theta1, _TWO_PI)
        pieces = []
        for r in (self.r1, self.r2):
            if r > 0:
                n = max(4, int(np.ceil(width * r / spacing)))
                t = np.linspace(self.theta1, self.theta1 + width, n)
                pieces.append(self.center
                              + r * np.stack([np.cos(t), np.sin(t)], axis=-1))
        if not self.full_turn:
            for th in (self.theta1, self.theta2):
                e = np.array([np.cos(th), np.sin(th)])
                n = max(2, int(np.ceil((self.r2 - self.r1) / spacing)))
                rr = np.linspace(self.r1, self.r2, n)
                pieces.append(self.center + rr[:, None] * e[None, :])
        return np.vstack(pieces) if pieces else self.center[None, :]

    def bbox(self):
        pts = self.boundary_points(max(self.r2, 1e-9) * 2e-2)
        return (pts.min(axis=0), pts.max(axis=0))

    def to_spec(self):
        return {"kind": "sector", "c": self.center.tolist(),
                "theta1": self.theta1, "theta2": self.theta2,
                "r1": self.r1, "r2": self.r2}


class RegionUnion(Region):
    """Finite union of primitive closed regions."""

    def __init__(self, members):
        members = list(members)
        for m in members:
            if not isinstance(m, Region):
                raise InputError(f"not a region: {m!r}")
        self.members = members
        self._bboxes = [m.bbox() for m in members]

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    @property
    def empty(self) -> bool:
        return len(self.members) == 0

    def contains_many(self, x, tol=0.0):
        x = _pts(x)
        out = np.zeros(x.shape[0], dtype=bool)
        if not self.members:
            return out
        lo = x.min(axis=0)
        hi = x.max(axis=0)
        for m, (blo, bhi) in zip(self.members, self._bboxes):
            if (blo[0] - tol > hi[0] or bhi[0] + tol < lo[0]
                    or blo[1] - tol > hi[1] or bhi[1] + tol < lo[1]):
                continue
            todo = ~out
            if not np.any(todo):
                break
            out[todo] = m.contains_many(x[todo], tol=tol)
        return out

    def members_near_bbox(self, lo, hi, tol=0.0):
        """Members whose bounding boxes meet the query box (for ray scans)."""
        picked = []
        for m, (blo, bhi) in zip(self.members, self._bboxes):
            if (blo[0] - tol <= hi[0] and bhi[0] + tol >= lo[0]
                    and blo[1] - tol <= hi[1] and bhi[1] + tol >= lo[1]):
                picked.append(m)
        return picked

    def boundary_points(self, spacing, clip_bbox=None):
        pieces = [m.boundary_points(spacing, clip_bbox=clip_bbox)
                  for m in self.members]
        pieces = [p for p in pieces if p.size]
        return np.vstack(pieces) if pieces else np.empty((0, 2))

    def bbox(self):
        if not self.members:
            return (np.zeros(2), np.zeros(2))
        los = np.array([b[0] for b in self._bboxes])
        his = np.array([b[1] for b in self._bboxes])
        return (los.min(axis=0), his.max(axis=0))

    def to_spec(self):
        return {"kind": "union", "members": [m.to_spec() for m in self.members]}


def _polyline_points(vertices, spacing):
    pieces = []
    for a, b in zip(vertices[:-1], vertices[1:]):
        length = float(np.hypot(*(b - a)))
        n = max(1, int(np.ceil(length / spacing)))
        t = np.linspace(0.0, 1.0, n, endpoint=False)
        pieces.append(a[None, :] + t[:, None] * (b - a)[None, :])
    return np.vstack(pieces)


def parse_region(spec) -> Region:
    """Build a region from its JSON-style dict description."""
    if isinstance(spec, Region):
        return spec
    if isinstance(spec, list):
        return RegionUnion([parse_region(s) for s in spec])
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InputError(f"region spec needs a 'kind': {spec!r}")
    kind = spec["kind"]
    try:
        if kind == "disk":
            return Disk(spec["c"], spec["r"])
        if kind == "halfplane":
            return HalfPlane(spec["n"], spec["b"])
        if kind == "box":
            return Box(spec["lo"], spec["hi"])
        if kind == "polygon":
            return Polygon(spec["pts"])
        if kind == "sector":
            return Sector(spec["c"], spec["theta1"], spec["theta2"],
                          spec["r1"], spec["r2"])
        if kind == "union":
            return RegionUnion([parse_region(s) for s in spec["members"]])
    except KeyError as exc:
        raise InputError(f"region spec missing field {exc}") from exc
    raise InputError(f"unknown region kind {kind!r}")


def spiral_staircase(outer_radius, n_slices=1024, turn_offset=1.0,
                     center=(0.0, 0.0)) -> RegionUnion:
    """Inner staircase approximation of the spiral set r >= theta + offset.

    The union of angular slices with constant inner radius sits inside the
    true spiral region; the inner-radius error is at most the slice width.
    """
    r_out = float(outer_radius)
    slices = []
    dth = _TWO_PI / int(n_slices)
    for k in range(int(n_slices)):
        t1 = k * dth
        t2 = t1 + dth
        r_in = t2 + turn_offset
        if r_in >= r_out:
            continue
        slices.append(Sector(center, t1, t2, r_in, r_out))
    return RegionUnion(slices)

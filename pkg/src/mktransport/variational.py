"""Lagrangians, the growth constant, the smallness condition and the functional.

The functional J(u) integrates h(Du) - f u over the masked grid.  Admissible
Lagrangians vanish on the boundary of K (indicator, hinge, user profile);
the power kind rho^p / p is positive there and is reserved for the p-Laplace
pipeline, so the growth-constant and J paths reject it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bodies import ConvexBody
from .distance import DistanceField
from .errors import ConfigurationError, InputError, ValidationError
from .grids import Grid, GridFunction, domain_mask
from .minimizers import minimal_minimizer_grid
from .sources import SourceField
from .transport import growth_factor

INDICATOR, HINGE, POWER, PROFILE = "indicator", "hinge", "power", "profile"


class Lagrangian:
    """h(xi) as a function of the gauge rho(xi)."""

    def __init__(self, kind, *, coefficient=None, exponent=None, profile=None):
        self.kind = kind
        self.coefficient = coefficient
        self.exponent = exponent
        self.profile = profile
        if kind == HINGE:
            if coefficient is None or coefficient < 0:
                raise InputError("hinge Lagrangian needs a coefficient >= 0")
        elif kind == POWER:
            if exponent is None or exponent <= 1:
                raise InputError("power Lagrangian needs an exponent > 1")
        elif kind == PROFILE:
            if profile is None:
                raise InputError("profile Lagrangian needs a callable g(rho)")
            g1 = float(np.asarray(profile(np.array([1.0]))))
            if abs(g1) > 1e-12:
                raise ValidationError(
                    f"profile must vanish on the unit gauge level, g(1)={g1:g}")
        elif kind != INDICATOR:
            raise InputError(f"unknown Lagrangian kind {kind!r}")

    # -- factories --------------------------------------------------------

    @classmethod
    def indicator(cls) -> "Lagrangian":
        return cls(INDICATOR)

    @classmethod
    def hinge(cls, coefficient) -> "Lagrangian":
        return cls(HINGE, coefficient=float(coefficient))

    @classmethod
    def power(cls, exponent) -> "Lagrangian":
        return cls(POWER, exponent=float(exponent))

    @classmethod
    def from_profile(cls, g) -> "Lagrangian":
        return cls(PROFILE, profile=g)

    # -- evaluation --------------------------------------------------------

    def of_rho(self, rho, tol_feasible=0.0):
        """h as a function of gauge values; indicator returns inf outside K."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == INDICATOR:
            return np.where(rho <= 1.0 + tol_feasible, 0.0, np.inf)
        if self.kind == HINGE:
            return self.coefficient * np.maximum(rho - 1.0, 0.0)
        if self.kind == POWER:
            return rho ** self.exponent / self.exponent
        return np.asarray(self.profile(rho), dtype=float)

    def evaluate_many(self, body: ConvexBody, v, tol_feasible=0.0):
        return self.of_rho(body.gauge_many(v), tol_feasible=tol_feasible)

    # -- growth constant ----------------------------------------------------

    def growth_constant(self, body: Optional[ConvexBody] = None,
                        n_radii=1000, n_directions=256,
                        rho_floor=1e-6, rho_max=1e3):
        """Largest lambda with h >= lambda (rho - 1); +inf for the indicator.

        The profile kind is sampled on a geometric rho grid in
        (1 + rho_floor, rho_max] over ``n_directions`` directions; the
        reported value is the sampled infimum (``rho_floor`` records how
        close to the unit level the sampling reaches).
        """
        if self.kind == INDICATOR:
            return np.inf
        if self.kind == HINGE:
            return float(self.coefficient)
        if self.kind == POWER:
            raise ConfigurationError(
                "power Lagrangian is reserved for the p-Laplace pipeline")
        radii = 1.0 + np.geomspace(rho_floor, rho_max - 1.0, n_radii)
        ratios = self.of_rho(radii) / (radii - 1.0)
        best = float(ratios.min())
        if body is not None:
            # h depends on xi only through rho, but sample directions anyway
            # to honour the contract for future non-radial profiles.
            thetas = np.linspace(0.0, 2.0 * np.pi, n_directions,
                                 endpoint=False)
            dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
            scale = body.gauge_many(dirs)
            xi = (radii[:, None, None] / scale[None, :, None]) * dirs[None, :, :]
            rho = body.gauge_many(xi)
            vals = self.of_rho(rho) / (rho - 1.0)
            best = min(best, float(vals.min()))
        return max(best, 0.0)

    def __repr__(self):
        extra = {INDICATOR: "", HINGE: f", L={self.coefficient}",
                 POWER: f", p={self.exponent}", PROFILE: ", g"}[self.kind]
        return f"Lagrangian({self.kind}{extra})"


@dataclass
class H3Report:
    """Smallness condition: c(H0, r) * sup f against the growth constant."""

    h0: float
    inradius: float
    c_value: float
    sup_f: float
    lhs: float
    growth: float
    passed: bool
    convex_sufficient: bool

    @property
    def margin(self) -> float:
        return self.growth - self.lhs


def check_h3(lagr: Lagrangian, source: SourceField,
             dfield: DistanceField) -> H3Report:
    """Evaluate c(H0, r_inradius) * sup|f| <= growth constant.

    H0 is the least restrictive admissible curvature threshold since the
    growth factor decreases in its first argument; the report also carries
    the simpler convex-domain sufficient condition r * sup|f| <= growth.
    """
    h0 = dfield.geometry.min_curvature()
    r = dfield.inradius()
    c_val = growth_factor(h0, r)
    sup_f = source.sup_norm()
    lam = lagr.growth_constant(dfield.body)
    lhs = c_val * sup_f
    passed = bool(lhs <= lam * (1.0 + 1e-12) + 1e-300)
    convex_ok = bool(r * sup_f <= lam * (1.0 + 1e-12) + 1e-300)
    return H3Report(h0=float(h0), inradius=float(r), c_value=float(c_val),
                    sup_f=float(sup_f), lhs=float(lhs), growth=float(lam),
                    passed=passed, convex_sufficient=convex_ok)


def functional_J(u: GridFunction, lagr: Lagrangian, body: ConvexBody,
                 source: SourceField, *, tol_feasible=None,
                 kappa_scale=1.0) -> float:
    """Midpoint-rule value of J(u) = integral of h(Du) - f u.

    Gradients are centred differences (one-sided in the boundary band).
    The indicator kind returns +inf once any active node violates
    rho(Du) <= 1 + tol_feasible; the default tolerance 5 h k accounts for
    the O(h) overshoot of centred differences near ridges.
    """
    if lagr.kind == POWER:
        raise ConfigurationError(
            "power Lagrangian is reserved for the p-Laplace pipeline")
    h = u.grid.h
    if tol_feasible is None:
        tol_feasible = 5.0 * h * max(1.0, float(kappa_scale))
    act = u.active
    grad = u.gradient()[act]
    rho = body.gauge_many(grad)
    h_vals = lagr.of_rho(rho, tol_feasible=tol_feasible)
    if np.any(np.isinf(h_vals)):
        return np.inf
    nodes = u.grid.nodes().reshape(u.grid.ny, u.grid.nx, 2)[act]
    f_vals = source.evaluate_many(nodes)
    return float(u.grid.cell_area
                 * (h_vals.sum() - (f_vals * u.values[act]).sum()))


@dataclass
class Violation:
    index: int
    kind: str
    j_value: float
    deficit: float


@dataclass
class MinimalityReport:
    trials: int
    violations: list
    j_d: float
    j_uf: float
    tol_j: float
    minimizers_agree: bool

    @property
    def passed(self) -> bool:
        return not self.violations and self.minimizers_agree


def _feasible_bump_perturbation(d_grid: GridFunction, body, center, width,
                                sign, eps):
    from .transport import Bump
    bump = Bump(center, width)
    grid = d_grid.grid
    nodes = grid.nodes().reshape(grid.ny, grid.nx, 2)
    u0 = d_grid.values + sign * eps * bump(nodes)
    u0 = np.where(d_grid.active, u0, 0.0)
    trial = d_grid.copy_with(u0)
    rho = body.gauge_many(trial.gradient()[trial.active])
    peak = float(rho.max(initial=0.0))
    if peak > 1.0:
        trial = d_grid.copy_with(u0 / peak)
    return trial


def minimality_test(dfield: DistanceField, lagr: Lagrangian,
                    source: SourceField, grid: Grid, *, trials=100,
                    rng=None, tol_rel=1e-3) -> MinimalityReport:
    """Random feasible perturbations must not beat the distance function.

    Alternates clipped bump perturbations of d with mixtures of d and the
    minimal minimizer; requires the smallness condition to hold first.
    Also checks that J agrees on the two extremal minimizers.
    """
    report = check_h3(lagr, source, dfield)
    if not report.passed:
        raise ValidationError(
            f"smallness condition fails: c*|f| = {report.lhs:g} > "
            f"growth {report.growth:g}")
    rng = np.random.default_rng(rng)
    mask = domain_mask(grid, dfield.boundary)
    nodes = grid.nodes()
    act = (mask.reshape(-1) > 0)
    d_vals = np.zeros(nodes.shape[0])
    d_vals[act] = dfield.distance_many(nodes[act]).d
    d_grid = GridFunction(grid, d_vals.reshape(grid.shape), mask)
    u_f = minimal_minimizer_grid(dfield, source, grid, mask=mask)

    kappa_scale = max(1.0, float(np.abs(dfield.geometry.kappa_table).max()))
    j_d = functional_J(d_grid, lagr, dfield.body, source,
                       kappa_scale=kappa_scale)
    j_uf = functional_J(u_f, lagr, dfield.body, source,
                        kappa_scale=kappa_scale)
    tol_j = tol_rel * abs(j_d)

    r_rho = dfield.inradius()
    r_eu = dfield.euclid_inradius()
    center0 = dfield.incenter()
    eps_choices = np.array([0.01, 0.05, 0.1]) * r_rho
    violations = []
    for k in range(trials):
        if k % 2 == 0:
            center = center0 + (rng.random(2) - 0.5) * r_eu
            width = (0.15 + 0.25 * rng.random()) * r_eu
            sign = 1.0 if rng.random() < 0.5 else -1.0
            eps = eps_choices[k % 3]
            trial = _feasible_bump_perturbation(d_grid, dfield.body, center,
                                                width, sign, eps)
            kind = "bump"
        else:
            lam = rng.random()
            trial = d_grid.copy_with(u_f.values
                                     + lam * (d_grid.values - u_f.values))
            kind = "mixture"
        j_u = functional_J(trial, lagr, dfield.body, source,
                           kappa_scale=kappa_scale)
        if j_d > j_u + tol_j:
            violations.append(Violation(index=k, kind=kind, j_value=j_u,
                                        deficit=j_d - j_u))
    agree = abs(j_uf - j_d) <= tol_j
    return MinimalityReport(trials=trials, violations=violations, j_d=j_d,
                            j_uf=j_uf, tol_j=tol_j, minimizers_agree=agree)

"""Planar Monge-Kantorovich transport geometry toolkit."""

from .bodies import ConvexBody, offset_ball_body, square_body
from .boundary import BoundaryGeometry, DomainBoundary
from .distance import DistanceField, DistanceSample
from .grids import Grid, GridFunction
from .minimizers import (RaySystem, build_ray_system, max_convolution,
                         max_convolution_grid, minimal_minimizer,
                         minimal_minimizer_grid, uniqueness_verdict)
from .regions import (Box, Disk, HalfPlane, Polygon, RegionUnion, Sector,
                      parse_region, spiral_staircase)
from .sources import SourceField
from .transport import (TransportDensity, density_bound_check, growth_factor,
                        verify_weak_identity)
from .variational import (Lagrangian, check_h3, functional_J, minimality_test)
from .plaplace import plaplace_solve, plaplace_sweep

__all__ = [
    "ConvexBody", "offset_ball_body", "square_body",
    "BoundaryGeometry", "DomainBoundary",
    "DistanceField", "DistanceSample",
    "Grid", "GridFunction",
    "RaySystem", "build_ray_system", "max_convolution",
    "max_convolution_grid", "minimal_minimizer", "minimal_minimizer_grid",
    "uniqueness_verdict",
    "Box", "Disk", "HalfPlane", "Polygon", "RegionUnion", "Sector",
    "parse_region", "spiral_staircase",
    "SourceField",
    "TransportDensity", "density_bound_check", "growth_factor",
    "verify_weak_identity",
    "Lagrangian", "check_h3", "functional_J", "minimality_test",
    "plaplace_solve", "plaplace_sweep",
]

__version__ = "0.1.0"

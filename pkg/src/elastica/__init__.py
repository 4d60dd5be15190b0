"""Discrete Euler elastica: clamped, length-constrained polygons and their smooth counterparts."""

from .errors import *  # noqa: F401,F403
from .mesh import Partition, uniform_partition, graded_partition, refine_dyadic, almost_uniformity_defect
from .polygon import Polygon, BoundaryData, ConstraintValue, bending_energy
from .arcspline import ArcSpline, planar_arcspline
from .solver import SolveOptions, initial_guess, minimize, delta_minimizer_set
from .transfer import reconstruct, sample

__version__ = "0.1.0"

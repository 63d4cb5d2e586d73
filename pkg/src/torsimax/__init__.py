"""Mean-to-max efficiency of p-torsion and distance functions."""
from .distance import EfficiencyReport, ScalarField, phi_d_infinity, phi_infinity
from .domains import DomainDescriptor, GridMask, rasterize
from .energy import HONEYCOMB_CONSTANT, EnergyReport
from .errors import TorsimaxError
from .geometry import DelaunayMesh, LatticeDomain, Triangle, delaunay_triangulate
from .torsion import SolverConfig, TorsionField, shape_functionals, solve_torsion

__all__ = [
    "HONEYCOMB_CONSTANT", "DelaunayMesh", "DomainDescriptor", "EfficiencyReport",
    "EnergyReport", "GridMask", "LatticeDomain", "ScalarField", "SolverConfig",
    "TorsimaxError", "TorsionField", "Triangle", "delaunay_triangulate",
    "phi_d_infinity", "phi_infinity", "rasterize", "shape_functionals", "solve_torsion",
]

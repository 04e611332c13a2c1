"""Reference mesh, Q2-Q1 spaces, moving-domain assembly and saddle solves."""
from .assembly import (FlatChannelAssembler, GeometrySpace, GeometryState, OperatorSet, SplineProfile,
                       assemble_moving_forms)
from .mesh import BoundarySpec, MixedSpace, ReferenceMesh, channel_mesh, rectangle_mesh
from .saddle import SaddleResult, divfree_nullspace, inf_sup_constant, pressure_mass, selection_map, solve_saddle

__all__ = [
    "BoundarySpec", "FlatChannelAssembler", "GeometrySpace", "GeometryState", "MixedSpace", "OperatorSet",
    "ReferenceMesh", "SaddleResult", "SplineProfile", "assemble_moving_forms", "channel_mesh",
    "divfree_nullspace", "inf_sup_constant", "pressure_mass", "rectangle_mesh", "selection_map", "solve_saddle",
]

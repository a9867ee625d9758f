"""Lowest-order bulk-surface virtual element operators."""

from .assembly import (
    AssemblyError,
    DiscreteOperators,
    assemble_global,
    boundary_vertices,
    dump_coo,
    solve_dirichlet,
    solve_poisson_patch,
)
from .local import (
    CellProjector,
    DegenerateElementError,
    FaceProjector,
    LocalOperators,
    cell_projector,
    face_projector,
    local_cell_matrices,
    local_face_matrices,
)

__all__ = [
    "AssemblyError",
    "CellProjector",
    "DegenerateElementError",
    "DiscreteOperators",
    "FaceProjector",
    "LocalOperators",
    "assemble_global",
    "boundary_vertices",
    "cell_projector",
    "dump_coo",
    "face_projector",
    "local_cell_matrices",
    "local_face_matrices",
    "solve_dirichlet",
    "solve_poisson_patch",
]

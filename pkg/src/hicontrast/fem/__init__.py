"""Linear finite elements: meshes, assembly, constraints, eigensolver."""

from hicontrast.fem.assembly import (
    ConstraintMap,
    SymmetricForm,
    assemble,
    element_matrices,
    integrate,
    lumped_volume,
    symmetrize,
)
from hicontrast.fem.constraints import dirichlet_elimination, periodic_identify
from hicontrast.fem.eigen import EigenPair, eig_shift_invert, factorize
from hicontrast.fem.mesh import FacetMarker, SimplicialMesh

__all__ = [
    "ConstraintMap",
    "EigenPair",
    "FacetMarker",
    "SimplicialMesh",
    "SymmetricForm",
    "assemble",
    "dirichlet_elimination",
    "eig_shift_invert",
    "element_matrices",
    "factorize",
    "integrate",
    "lumped_volume",
    "periodic_identify",
    "symmetrize",
]

"""Mixed finite elements for time-dependent (Navier-)Stokes flow and pressure-robustness studies."""

from .mesh import Mesh, alfeld_split, build_uniform_mesh, locate_point
from .spaces import (
    CROUZEIX_RAVIART,
    MINI,
    SCOTT_VOGELIUS,
    TAYLOR_HOOD,
    DiscreteField,
    DofMap,
    ElementPair,
    build_dof_map,
    element_pair,
)

__version__ = "0.1.0"

__all__ = [
    "Mesh",
    "alfeld_split",
    "build_uniform_mesh",
    "locate_point",
    "CROUZEIX_RAVIART",
    "MINI",
    "SCOTT_VOGELIUS",
    "TAYLOR_HOOD",
    "DiscreteField",
    "DofMap",
    "ElementPair",
    "build_dof_map",
    "element_pair",
]

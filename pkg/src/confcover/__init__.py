"""Conformal disk maps of disk-type surface meshes and multi-agent coverage on them."""

from .beltrami import BeltramiField, ConstraintKind, PointConstraint, cayley, cayley_inv, lbs_solve
from .coverage import AgentFleet, CoverageTrace, DensityField, LloydConfig, VoronoiPartition, lloyd_run
from .deformation import DeformationMetric, density_from_deformation, disk_difference
from .diskmap import ConformalDiskMap, DiskMapOptions, build_disk_map
from .harmonic import DiskEmbedding, boundary_circle_map, harmonic_energy, solve_harmonic
from .mesh_core import EdgeWeights, MeshError, TriangleMesh, cotangent_weights, load_mesh

__version__ = "0.1.0"

__all__ = [
    "AgentFleet", "BeltramiField", "ConformalDiskMap", "ConstraintKind", "CoverageTrace",
    "DeformationMetric", "DensityField", "DiskEmbedding", "DiskMapOptions", "EdgeWeights",
    "LloydConfig", "MeshError", "PointConstraint", "TriangleMesh", "VoronoiPartition",
    "boundary_circle_map", "build_disk_map", "cayley", "cayley_inv", "cotangent_weights",
    "density_from_deformation", "disk_difference", "harmonic_energy", "lbs_solve", "load_mesh",
    "lloyd_run", "solve_harmonic",
]

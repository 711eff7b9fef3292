"""Virtual element solver and conditioning benchmarks on polytopal meshes."""

from .errors import (DegenerateElement, NonPlanarFace, NumericalBreakdown,
                     ParseError, SingularG, SingularMassMatrix, SingularSystem,
                     SpecError, TopologyError, UnknownProblem, VemError)
from .geometry import ElementGeometry, Polygon, Polyhedron, compute_geometry
from .generators import FAMILIES, GeneratorSpec, generate
from .maps import (AffineMap, ApproachConfig, build_face_map,
                   build_inertial_map, select_maps)
from .mesh import PolytopalMesh, load_mesh, mesh_from_faces, mesh_from_polygons, save_mesh
from .local import AdrCoefficients, build_element, build_face_cache, local_bilinear
from .problems import Problem, problem_library
from .runner import ExperimentConfig, mesh_statistics, run
from .solve import assemble, energy_errors, global_matrix_cond, matrix_cond, solve

__version__ = "0.1.0"

__all__ = [
    "AdrCoefficients", "AffineMap", "ApproachConfig", "DegenerateElement",
    "ElementGeometry", "ExperimentConfig", "FAMILIES", "GeneratorSpec",
    "NonPlanarFace", "NumericalBreakdown", "ParseError", "Polygon",
    "Polyhedron", "PolytopalMesh", "Problem", "SingularG",
    "SingularMassMatrix", "SingularSystem", "SpecError", "TopologyError",
    "UnknownProblem", "VemError", "assemble", "build_element",
    "build_face_cache", "build_face_map", "build_inertial_map",
    "compute_geometry", "select_maps",
    "energy_errors", "generate", "global_matrix_cond", "load_mesh",
    "local_bilinear", "matrix_cond", "mesh_from_faces", "mesh_from_polygons",
    "mesh_statistics", "problem_library", "run", "save_mesh", "solve",
]

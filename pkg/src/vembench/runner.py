"""Configuration-driven benchmark runner.

A run sweeps (approach, degree) cells over one mesh and one manufactured (or
custom expression-defined) problem, recording worst local projector condition
numbers, the global matrix condition number, relative errors and wall times.
Reports are written as CSV and as an equivalent nested JSON document; with
``timings = "zero"`` the output is byte-identical across reruns.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError, UnknownProblem, VemError
from .generators import GeneratorSpec, generate
from .geometry import compute_geometry
from .maps import ApproachConfig, build_inertial_map
from .mesh import PolytopalMesh, load_mesh
from .local import AdrCoefficients, build_face_cache
from .problems import Problem, problem_library
from .solve import assemble, energy_errors, global_matrix_cond, solve

CSV_COMMENT = "# cond_A is computed on the Dirichlet-reduced system matrix"

_SAFE_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "pi": np.pi, "np": np,
}


@dataclass
class ExperimentConfig:
    """Flat-key experiment description (JSON or TOML file)."""

    name: str = "run"
    mesh_family: str | None = None
    mesh_path: str | None = None
    band_exp: int = 1
    domain_edge: float | None = None  # rtrm domain; defaults to 1.0e-5
    resolution: int | None = None
    splits: int | None = None
    refine_fraction: float = 0.5
    mesh_seed: int = 0
    problem: str = "test1"
    epsilon: float | None = None  # test1 domain edge; defaults to the rtrm edge
    custom: dict | None = None
    approaches: list = field(default_factory=lambda: ["mon"])
    k_min: int = 1
    k_max: int = 1
    out: str = "results"
    seed: int = 0
    cond_a_cap: int = 20_000
    compute_cond_a: bool = True
    timings: str = "wall"

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        text = open(path, "rb").read()
        if str(path).endswith(".toml"):
            try:
                import tomllib  # py311+
            except ModuleNotFoundError:
                import tomli as tomllib
            doc = tomllib.loads(text.decode())
        else:
            doc = json.loads(text.decode())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _compile_scalar(expr: str, dim: int):
    code = compile(expr, "<coefficient>", "eval")

    def f(p):
        env = dict(_SAFE_FUNCS)
        for j in range(dim):
            env[f"x{j + 1}"] = p[:, j]
        v = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(v, dtype=float), (len(p),)).copy()

    return f


def expression_problem(spec: dict) -> Problem:
    """Problem built from coefficient/solution expression strings.

    Required keys: ``dim``, ``u``, ``grad`` (list), ``f``; optional ``D``
    (matrix of expressions), ``b`` (list), ``gamma``.
    """
    try:
        dim = int(spec["dim"])
        u = _compile_scalar(spec["u"], dim)
        grads = [_compile_scalar(g, dim) for g in spec["grad"]]
        source = _compile_scalar(spec["f"], dim)
    except KeyError as exc:
        raise UnknownProblem(f"custom problem is missing key {exc}")
    if len(grads) != dim:
        raise UnknownProblem("custom problem: grad must list one expression per axis")
    d_rows = spec.get("D")
    if d_rows is None:
        diffusion = lambda p: np.broadcast_to(np.eye(dim), (len(p), dim, dim))
    else:
        entries = [[_compile_scalar(e, dim) for e in row] for row in d_rows]

        def diffusion(p):
            out = np.empty((len(p), dim, dim))
            for i in range(dim):
                for j in range(dim):
                    out[:, i, j] = entries[i][j](p)
            return out
    b_list = spec.get("b")
    if b_list is None:
        advection = lambda p: np.zeros((len(p), dim))
    else:
        b_entries = [_compile_scalar(e, dim) for e in b_list]
        advection = lambda p: np.column_stack([e(p) for e in b_entries])
    gamma = (_compile_scalar(spec["gamma"], dim) if "gamma" in spec
             else (lambda p: np.zeros(len(p))))

    def gradient(p):
        return np.column_stack([g(p) for g in grads])

    coeffs = AdrCoefficients(diffusion, advection, gamma, source)
    return Problem("custom", dim, coeffs, u, gradient, u)


def resolve_mesh(config: ExperimentConfig) -> tuple[PolytopalMesh, str]:
    if config.mesh_path:
        return load_mesh(config.mesh_path), config.mesh_path
    if not config.mesh_family:
        raise SpecError("config needs mesh_family or mesh_path")
    edge = config.domain_edge if config.domain_edge is not None else 1e-5
    spec = GeneratorSpec(
        family=config.mesh_family, band_exp=config.band_exp,
        domain_edge=edge, resolution=config.resolution,
        splits=config.splits, refine_fraction=config.refine_fraction,
        seed=config.mesh_seed)
    label = config.mesh_family
    if config.mesh_family in ("csm", "ccm"):
        label = f"{config.mesh_family}{config.band_exp}"
    return generate(spec), label


def resolve_problem(config: ExperimentConfig, dim: int) -> Problem:
    if config.problem == "custom":
        if not config.custom:
            raise UnknownProblem("problem 'custom' needs the custom table")
        prob = expression_problem(config.custom)
    else:
        epsilon = config.epsilon
        if epsilon is None:
            # the quartic problem lives on (0, eps)^2: follow the rtrm domain
            if config.mesh_family == "rtrm":
                epsilon = config.domain_edge if config.domain_edge is not None else 1e-5
            else:
                epsilon = 1.0
        prob = problem_library(config.problem, epsilon=epsilon)
    if prob.dim != dim:
        raise SpecError(f"problem {prob.name} is {prob.dim}D but the mesh is {dim}D")
    return prob


def validate_config(config: ExperimentConfig, dim: int):
    k_cap = 10 if dim == 2 else 7
    if not 1 <= config.k_min <= config.k_max <= k_cap:
        raise SpecError(f"degree range must lie in [1, {k_cap}] for {dim}D")
    for label in config.approaches:
        ApproachConfig.parse(label).validate_for_dim(dim)
    if config.timings not in ("wall", "zero"):
        raise SpecError("timings must be 'wall' or 'zero'")


CSV_COLUMNS_2D = ["mesh", "family", "approach", "k", "cond_pinabla", "cond_pi0km1",
                  "cond_pi0x1", "cond_pi0x2", "cond_face_pinabla", "cond_face_pi0",
                  "cond_A", "cond_A_exact_flag", "err_l2", "err_h1",
                  "assemble_s", "solve_s", "status"]
CSV_COLUMNS_3D = ["mesh", "family", "approach", "k", "cond_pinabla", "cond_pi0km1",
                  "cond_pi0x1", "cond_pi0x2", "cond_pi0x3", "cond_face_pinabla",
                  "cond_face_pi0", "cond_A", "cond_A_exact_flag", "err_l2", "err_h1",
                  "assemble_s", "solve_s", "status"]


def run(config: ExperimentConfig, out_dir=None) -> dict:
    """Execute the sweep; returns {"rows": [...], "csv": path, "json": path}."""
    from pathlib import Path

    mesh, mesh_label = resolve_mesh(config)
    dim = mesh.dimension
    validate_config(config, dim)
    problem = resolve_problem(config, dim)
    out = Path(out_dir if out_dir is not None else config.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for label in config.approaches:
        approach = ApproachConfig.parse(label)
        for k in range(config.k_min, config.k_max + 1):
            row = {c: "" for c in (CSV_COLUMNS_3D if dim == 3 else CSV_COLUMNS_2D)}
            row.update(mesh=mesh_label, family=config.mesh_family or "file",
                       approach=approach.label, k=k, status="ok")
            try:
                t0 = time.perf_counter()
                face_cache = (build_face_cache(mesh, approach, k)
                              if dim == 3 else None)
                system = assemble(mesh, problem.coeffs, approach, k,
                                  dirichlet=problem.dirichlet,
                                  face_cache=face_cache)
                t1 = time.perf_counter()
                solution = solve(system)
                t2 = time.perf_counter()
                err_l2, err_h1 = energy_errors(mesh, system, solution, problem)
                cond = system.conditioning
                row["cond_pinabla"] = cond.pi_nabla
                row["cond_pi0km1"] = cond.pi0_km1
                for j in range(dim):
                    row[f"cond_pi0x{j + 1}"] = cond.pi0_x[j]
                if dim == 3:
                    row["cond_face_pinabla"] = cond.face_pi_nabla
                    row["cond_face_pi0"] = cond.face_pi0
                if config.compute_cond_a:
                    cond_a, exact = global_matrix_cond(system, config.cond_a_cap)
                    row["cond_A"] = cond_a
                    row["cond_A_exact_flag"] = int(exact)
                row["err_l2"] = err_l2
                row["err_h1"] = err_h1
                if config.timings == "wall":
                    row["assemble_s"] = round(t1 - t0, 6)
                    row["solve_s"] = round(t2 - t1, 6)
                else:
                    row["assemble_s"] = 0.0
                    row["solve_s"] = 0.0
            except VemError as exc:
                row["status"] = f"failed:{type(exc).__name__}"
            rows.append(row)

    columns = CSV_COLUMNS_3D if dim == 3 else CSV_COLUMNS_2D
    csv_path = out / f"{config.name}.csv"
    with open(csv_path, "w") as fh:
        fh.write(CSV_COMMENT + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    json_path = out / f"{config.name}.json"
    with open(json_path, "w") as fh:
        json.dump({"config": config.to_dict(), "columns": columns, "runs": rows},
                  fh, indent=1)
    return {"rows": rows, "csv": str(csv_path), "json": str(json_path)}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ------------------------------------------------------------- mesh statistics

def _stat_row(values) -> dict:
    arr = np.asarray(values, dtype=float)
    return {"min": float(arr.min()), "avg": float(arr.mean()), "max": float(arr.max())}


def mesh_statistics(mesh: PolytopalMesh) -> dict:
    """Quality statistics of the original and inertially mapped entities."""
    def collect(geos):
        out = {
            "measure": _stat_row([g.measure for g in geos]),
            "diameter": _stat_row([g.diameter for g in geos]),
            "anisotropic_ratio": _stat_row([g.anisotropic_ratio for g in geos]),
        }
        key = "edge_ratio" if geos[0].edge_ratio is not None else "face_ratio"
        out[key] = _stat_row([getattr(g, key) for g in geos])
        return out

    stats = {"dimension": mesh.dimension, "n_cells": mesh.n_cells,
             "n_vertices": mesh.n_vertices, "n_edges": mesh.n_edges}
    if mesh.dimension == 2:
        orig = [compute_geometry(mesh.cell_polygon(i)) for i in range(mesh.n_cells)]
        mapped = [compute_geometry(build_inertial_map(mesh.cell_polygon(i))[1])
                  for i in range(mesh.n_cells)]
        stats["avg_vertices_per_cell"] = float(
            np.mean([len(c) for c in mesh.cells_vertices]))
        stats["cells"] = {"E": collect(orig), "E_hat": collect(mapped)}
    else:
        orig, mapped = [], []
        for i in range(mesh.n_cells):
            poly, _ = mesh.cell_polyhedron(i)
            orig.append(compute_geometry(poly))
            mapped.append(compute_geometry(build_inertial_map(poly)[1]))
        stats["n_faces"] = mesh.n_faces
        stats["avg_vertices_per_cell"] = float(
            np.mean([len(mesh.cell_vertex_ids(i)) for i in range(mesh.n_cells)]))
        stats["cells"] = {"E": collect(orig), "E_hat": collect(mapped)}
        f_orig, f_mapped = [], []
        for f in range(mesh.n_faces):
            poly2d, _, _ = mesh.face_polygon2d(f)
            f_orig.append(compute_geometry(poly2d))
            f_mapped.append(compute_geometry(build_inertial_map(poly2d)[1]))
        stats["avg_vertices_per_face"] = float(
            np.mean([len(f) for f in mesh.faces]))
        stats["faces"] = {"f": collect(f_orig), "f_hat": collect(f_mapped)}
    return stats

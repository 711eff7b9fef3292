"""Command line interface: mesh generation, benchmark runs, mesh inspection."""

from __future__ import annotations

import argparse
import sys

from .errors import VemError
from .generators import FAMILIES, GeneratorSpec, generate
from .mesh import load_mesh, save_mesh
from .runner import ExperimentConfig, mesh_statistics, run


def _cmd_generate(args) -> int:
    spec = GeneratorSpec(
        family=args.family, band_exp=args.band_exp, domain_edge=args.domain_edge,
        resolution=args.resolution, splits=args.splits,
        refine_fraction=args.refine_fraction, seed=args.seed)
    mesh = generate(spec)
    save_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_cells} cells, {mesh.n_vertices} vertices "
          f"({mesh.dimension}D)")
    return 0


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    result = run(config, out_dir=args.out)
    n_fail = sum(1 for r in result["rows"] if r["status"] != "ok")
    print(f"wrote {result['csv']} and {result['json']} "
          f"({len(result['rows'])} rows, {n_fail} failed)")
    return 0 if n_fail == 0 else 3


def _fmt_stats_block(title, block) -> list[str]:
    lines = [f"  {title}:"]
    for metric, row in block.items():
        lines.append(f"    {metric:<18} min {row['min']:10.3e}  "
                     f"avg {row['avg']:10.3e}  max {row['max']:10.3e}")
    return lines


def _cmd_inspect(args) -> int:
    mesh = load_mesh(args.mesh)
    stats = mesh_statistics(mesh)
    print(f"{args.mesh}: {stats['dimension']}D, {stats['n_cells']} cells, "
          f"{stats['n_vertices']} vertices, {stats['n_edges']} edges"
          + (f", {stats['n_faces']} faces" if "n_faces" in stats else ""))
    print(f"  avg vertices per cell: {stats['avg_vertices_per_cell']:.1f}")
    for label, block in stats["cells"].items():
        print("\n".join(_fmt_stats_block(f"cells {label}", block)))
    if "faces" in stats:
        print(f"  avg vertices per face: {stats['avg_vertices_per_face']:.1f}")
        for label, block in stats["faces"].items():
            print("\n".join(_fmt_stats_block(f"faces {label}", block)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vem-bench",
        description="Virtual element conditioning benchmarks on polytopal meshes")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a mesh family instance")
    g.add_argument("--family", required=True, choices=FAMILIES)
    g.add_argument("--band-exp", type=int, default=1, dest="band_exp")
    g.add_argument("--domain-edge", type=float, default=1.0, dest="domain_edge")
    g.add_argument("--resolution", type=int, default=None)
    g.add_argument("--splits", type=int, default=None)
    g.add_argument("--refine-fraction", type=float, default=0.5,
                   dest="refine_fraction")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    r = sub.add_parser("run", help="run a benchmark sweep from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="override the config output dir")
    r.set_defaults(func=_cmd_run)

    i = sub.add_parser("inspect-mesh", help="print quality statistics of a mesh")
    i.add_argument("mesh")
    i.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

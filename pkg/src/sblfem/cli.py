"""Command-line interface.

Subcommands: mesh (build and export), solve (one configuration), reference
(store a p+2 reference solution), sweep (full convergence study), plot
(CSV to SVG).  Exit codes: 0 success, 1 configuration error, 2 numerical
failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, SblfemError
from .harness import (
    load_config,
    make_reference,
    rows_to_csv,
    run_sweep,
    save_solution,
    solve_spec,
)
from .mesh import build_asymptotic_mesh, build_sbl_mesh, export_mesh
from .plotting import emit_plot


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sblfem",
        description="Mixed C0 hp-FEM solver for the two-parameter fourth-order "
        "singularly perturbed problem on smooth domains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mesh_p = sub.add_parser("mesh", help="build the boundary-layer mesh and export it")
    mesh_p.add_argument("-c", "--config", required=True)
    mesh_p.add_argument("--format", choices=("json", "svg"), default="json")
    mesh_p.add_argument("-o", "--out", default=None)

    solve_p = sub.add_parser("solve", help="solve one configuration")
    solve_p.add_argument("-c", "--config", required=True)
    solve_p.add_argument("-o", "--out", default=None, help="solution JSON path")
    solve_p.add_argument("--dump-matrix", default=None, help="MatrixMarket dump path")

    ref_p = sub.add_parser("reference", help="solve at degree p+2 and store the result")
    ref_p.add_argument("-c", "--config", required=True)
    ref_p.add_argument("-o", "--out", default=None)

    sweep_p = sub.add_parser("sweep", help="run the configured convergence study")
    sweep_p.add_argument("-c", "--config", required=True)
    sweep_p.add_argument("-o", "--out", default=None, help="CSV path")
    sweep_p.add_argument("--plot", default=None, help="also render the SVG plot here")
    sweep_p.add_argument("--jobs", type=int, default=1)
    sweep_p.add_argument(
        "--single-thread", action="store_true",
        help="force sequential execution for bit-stable output",
    )

    plot_p = sub.add_parser("plot", help="render a sweep CSV as an SVG plot")
    plot_p.add_argument("--csv", required=True)
    plot_p.add_argument("-o", "--out", required=True)
    return parser


def _run(args) -> int:
    if args.command == "mesh":
        spec, _, outputs = load_config(args.config)
        config = spec.config()
        base = build_asymptotic_mesh(config.curve, config.m, config.strip_fraction)
        mesh = build_sbl_mesh(base, config.kappa, config.p, config.eps1, config.eps2)
        out = args.out or outputs["mesh"]
        if args.format == "svg" and out.endswith(".json"):
            out = out[:-5] + ".svg"
        with open(out, "w") as fh:
            fh.write(export_mesh(mesh, args.format))
        print(f"wrote {mesh.n_elements}-element {mesh.regime} mesh to {out}")
        return 0

    if args.command == "solve":
        spec, _, outputs = load_config(args.config)
        sol = solve_spec(spec)
        if args.dump_matrix:
            from .assembly import assemble_system, dump_matrix

            system = assemble_system(sol.mesh, sol.dofmap_u, sol.dofmap_w, spec.config())
            dump_matrix(system, args.dump_matrix)
        out = args.out or outputs["solution"]
        save_solution(sol, spec, out)
        print(
            f"solved p={sol.p} ({sol.mesh.regime}); residual {sol.residual:.3e}; "
            f"wrote {out}"
        )
        return 0

    if args.command == "reference":
        spec, _, outputs = load_config(args.config)
        sol, payload = make_reference(spec)
        out = args.out or outputs["solution"]
        import json

        with open(out, "w") as fh:
            json.dump(payload, fh)
        print(f"reference p={sol.p} stored at {out} (residual {sol.residual:.3e})")
        return 0

    if args.command == "sweep":
        _, sweep, outputs = load_config(args.config)
        jobs = 1 if args.single_thread else max(1, args.jobs)
        rows = run_sweep(sweep, jobs=jobs)
        out = args.out or sweep.csv_path or outputs["csv"]
        csv_text = rows_to_csv(rows)
        with open(out, "w") as fh:
            fh.write(csv_text)
        print(f"wrote {len(rows)} sweep rows to {out}")
        plot_path = args.plot or sweep.plot_path
        if plot_path:
            with open(plot_path, "w") as fh:
                fh.write(emit_plot(csv_text))
            print(f"wrote convergence plot to {plot_path}")
        return 0

    if args.command == "plot":
        with open(args.csv) as fh:
            csv_text = fh.read()
        with open(args.out, "w") as fh:
            fh.write(emit_plot(csv_text))
        print(f"wrote convergence plot to {args.out}")
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3
    except SblfemError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

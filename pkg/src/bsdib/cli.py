"""Command-line interface: ``bsdib run | mesh | stability | compare``.

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 I/O error.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from threadpoolctl import threadpool_limits

from . import __version__, kernels
from .config import ConfigError, load_config
from .io import (
    MeshMismatchError,
    bulk_point_data,
    compare_runs,
    load_run,
    record_from_result,
    write_increments_csv,
    write_metadata,
    write_surface_csv,
    write_surface_mass,
    write_vtk_legacy,
)
from .kinetics import ParameterError, load_parameters, stability_check
from .mesh import (
    GradedMeshSpec,
    MeshError,
    build_graded_mesh,
    mesh_quality_report,
    serialize_mesh,
    validate_mesh,
)
from .solver import BSDIB_3D, DIB_2D, DivergenceError, FactorizationError, run_simulation, steady_state_diagnostics
from .vem import assemble_global

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("bsdib")


def _thread_limit():
    value = os.environ.get("BSDIB_THREADS")
    return int(value) if value else None


def _write_mode_outputs(directory, result, cfg):
    os.makedirs(os.path.join(directory, "snapshots"), exist_ok=True)
    mesh = result.mesh
    xy = mesh.vertices[: mesh.n_gamma, :2]
    p = result.params
    items = [("version", __version__), ("mode", result.mode), ("preset", cfg.preset or "none")]
    items += [(k, repr(v)) for k, v in p.as_dict().items()]
    items += [("D_derived", p.D_is_derived), ("mesh", cfg.mesh.describe()),
              ("n_vertices", mesh.n_vertices), ("n_surface_vertices", mesh.n_gamma)]
    ts = cfg.timestepping
    items += [("tau", repr(ts.tau)), ("T", repr(ts.T)), ("n_steps", ts.n_steps), ("seed", ts.seed),
              ("noise_eta", repr(ts.noise_eta)), ("noise_theta", repr(ts.noise_theta)),
              ("increment_norm", ts.increment_norm), ("snapshot_every", ts.snapshot_stride),
              ("backend", kernels.BACKEND), ("threads", os.environ.get("BSDIB_THREADS", "default"))]
    items += [(f"provenance.{k}", v) for k, v in sorted(cfg.provenance.items())]
    items += [(f"wall_clock.{k}", f"{v:.3f}s") for k, v in result.timings.items()]
    items += [(f"steady_state.{k}", v) for k, v in steady_state_diagnostics(result.increments).items()]
    write_metadata(os.path.join(directory, "metadata.txt"), items)
    write_increments_csv(os.path.join(directory, "increments.csv"), result.increments.times, result.increments.values)
    write_surface_mass(os.path.join(directory, "surface_mass.csv"), xy, result.ops.M_gamma)
    if "csv" in cfg.formats:
        for s in result.snapshots:
            write_surface_csv(os.path.join(directory, "snapshots", f"surface_{s.step:08d}.csv"), xy, s.eta, s.theta)
    write_surface_csv(os.path.join(directory, "final_surface.csv"), xy, result.eta, result.theta)
    if "vtk" in cfg.formats and result.mode == BSDIB_3D:
        write_vtk_legacy(os.path.join(directory, "bulk.vtk"), mesh, bulk_point_data(result))


def execute_run(cfg, out_dir, mode=None):
    """Run one configuration; returns ``{mode: SimulationResult}``."""
    mode = mode or cfg.mode
    modes = (BSDIB_3D, DIB_2D) if mode == "both" else (mode,)
    t0 = time.perf_counter()
    mesh = build_graded_mesh(cfg.mesh.spec())
    t_mesh = time.perf_counter() - t0
    ops = assemble_global(mesh)
    results = {}
    for m in modes:
        log.info("running %s on %s", m, cfg.mesh.describe())
        r = run_simulation(mesh, cfg.params, cfg.timestepping, m, ops=ops)
        r.timings = {"mesh": t_mesh, **r.timings}
        results[m] = r
        _write_mode_outputs(os.path.join(out_dir, m), r, cfg)
    if len(results) == 2:
        cmp = compare_runs(record_from_result(results[BSDIB_3D]), record_from_result(results[DIB_2D]))
        write_metadata(os.path.join(out_dir, "comparison.txt"),
                       [tuple(s.split(" = ", 1)) for s in cmp.lines()])
    return results


def _run_one(config_path, out, mode):
    """Worker for batch runs; returns an exit code."""
    limit = _thread_limit()
    with threadpool_limits(limits=limit):
        try:
            cfg = load_config(config_path)
        except ConfigError as exc:
            print(f"{config_path}: configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"{config_path}: {exc}", file=sys.stderr)
            return EXIT_IO
        out_dir = out or cfg.out or os.path.join("runs", os.path.splitext(os.path.basename(config_path))[0])
        try:
            execute_run(cfg, out_dir, mode)
        except (DivergenceError, FactorizationError) as exc:
            print(f"{config_path}: {exc}", file=sys.stderr)
            return EXIT_DIVERGENCE
        except OSError as exc:
            print(f"{config_path}: cannot write outputs: {exc}", file=sys.stderr)
            return EXIT_IO
    print(f"{config_path}: outputs in {out_dir}")
    return EXIT_OK


def cmd_run(args):
    if len(args.config) > 1 and args.out:
        outs = [os.path.join(args.out, os.path.splitext(os.path.basename(c))[0]) for c in args.config]
    else:
        outs = [args.out] * len(args.config)
    if args.jobs > 1 and len(args.config) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_one, args.config, outs, [args.mode] * len(args.config)))
    else:
        codes = [_run_one(c, o, args.mode) for c, o in zip(args.config, outs)]
    return max(codes)


def parse_mesh_spec(text):
    """``L=50,nx=128,fine_layers=2,coarse_levels=5`` (commas or newlines) or a file holding it."""
    if os.path.isfile(text):
        with open(text) as fh:
            text = fh.read()
    fields = {}
    for item in text.replace("\n", ",").split(","):
        item = item.split("#", 1)[0].strip()
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"bad mesh spec item {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        if k == "L":
            fields[k] = float(v)
        elif k in ("nx", "fine_layers", "coarse_levels"):
            fields[k] = int(v)
        else:
            raise ConfigError(f"unknown mesh spec key {k!r}")
    if "nx" not in fields:
        raise ConfigError("mesh spec needs nx")
    fields.setdefault("L", 50.0)
    try:
        return GradedMeshSpec(**fields)
    except MeshError as exc:
        raise ConfigError(str(exc)) from None


def cmd_mesh(args):
    try:
        spec = parse_mesh_spec(args.spec)
        mesh = build_graded_mesh(spec)
    except (ConfigError, MeshError, ValueError) as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    validate_mesh(mesh)
    print(f"vertices = {mesh.n_vertices}")
    print(f"surface_vertices = {mesh.n_gamma}")
    print(f"faces = {mesh.n_faces}")
    print(f"cells = {mesh.n_cells}")
    if args.report:
        for k, v in mesh_quality_report(mesh).summary().items():
            print(f"{k} = {v}")
    if args.out:
        try:
            if args.out.endswith(".vtk"):
                write_vtk_legacy(args.out, mesh, {})
            else:
                with open(args.out, "wb") as fh:
                    fh.write(serialize_mesh(mesh))
        except OSError as exc:
            print(f"cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_stability(args):
    try:
        with open(args.params) as fh:
            params = load_parameters(fh.read())
        report = stability_check(params)
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    print("\n".join(report.lines()))
    return EXIT_OK


def cmd_compare(args):
    try:
        a, b = load_run(args.a), load_run(args.b)
    except (OSError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    if a.seed is not None and b.seed is not None and a.seed != b.seed:
        log.warning("runs use different seeds (%s vs %s)", a.seed, b.seed)
    try:
        cmp = compare_runs(a, b)
    except MeshMismatchError as exc:
        print(f"compare error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("\n".join(cmp.lines()))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="bsdib", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one or more configurations")
    run.add_argument("--config", action="append", required=True, help="config file (repeat for a batch)")
    run.add_argument("--mode", choices=("3d", "2d", "both"), default=None)
    run.add_argument("--out", help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="parallel batch workers")
    run.set_defaults(func=cmd_run)

    mesh = sub.add_parser("mesh", help="build, validate and export a graded mesh")
    mesh.add_argument("--spec", required=True, help="'L=50,nx=32,fine_layers=2,coarse_levels=3' or a file")
    mesh.add_argument("--out", help="binary mesh file, or legacy VTK if it ends in .vtk")
    mesh.add_argument("--report", action="store_true", help="print quality measures")
    mesh.set_defaults(func=cmd_mesh)

    stab = sub.add_parser("stability", help="stability of the equilibrium without diffusion")
    stab.add_argument("--params", required=True)
    stab.set_defaults(func=cmd_stability)

    cmp = sub.add_parser("compare", help="compare two run directories")
    cmp.add_argument("--a", required=True)
    cmp.add_argument("--b", required=True)
    cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

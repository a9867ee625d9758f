"""Time the pure-Python and compiled kernels side by side.

    python benchmarks/bench_kernels.py [--nx 32] [--repeat 5]

Reports the best wall time per kernel and the speed-up of the compiled one.
"""

import argparse
import timeit

import numpy as np

from bsdib import kernels
from bsdib.kinetics import ModelParameters
from bsdib.mesh import GradedMeshSpec, build_graded_mesh
from bsdib.solver import TimeSteppingConfig, run_simulation


def _cases(mesh, n_rhs):
    cv_ptr, cv = mesh.cell_vertex_csr()
    cell_args = (mesh.vertices, mesh.face_ptr, mesh.face_verts, mesh.cell_ptr, mesh.cell_faces,
                 mesh.cell_orient, cv_ptr, cv)
    face_args = (mesh.vertices, mesh.face_ptr, mesh.face_verts, np.arange(mesh.n_faces, dtype=np.int64))

    rng = np.random.default_rng(0)
    ng, nb = mesh.n_gamma, mesh.n_vertices - mesh.n_gamma
    p = ModelParameters(B=66, C=3, gamma=0.2, psi_eta=0.2, psi_theta=0.2).packed()
    bt, qt = rng.normal(size=nb) * 1e-2, rng.normal(size=nb) * 1e-2
    eta, theta = rng.random(ng), rng.random(ng)
    Mo, Mg = rng.uniform(0.5, 1, nb), rng.uniform(0.5, 1, ng)
    outs = [np.empty(nb), np.empty(nb), np.empty(ng), np.empty(ng)]

    def rhs(k):
        for _ in range(n_rhs):
            k.imex_rhs(bt, qt, eta, theta, Mo, Mg, p, 2e-3, True, *outs)

    return {
        "cell assembly": lambda k: k.cell_matrices(*cell_args),
        "face assembly": lambda k: k.face_matrices(*face_args),
        f"imex rhs x{n_rhs}": rhs,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=200, help="time steps for the end-to-end run")
    args = ap.parse_args(argv)

    levels = {8: 2, 16: 3, 32: 3, 64: 4, 128: 5}.get(args.nx, 3)
    mesh = build_graded_mesh(GradedMeshSpec(L=50.0, nx=args.nx, fine_layers=2, coarse_levels=levels))
    backends = {"python": kernels.get_backend("python")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled kernels not built; timing the Python backend only")

    print(f"mesh nx={args.nx}: {mesh.n_vertices} vertices, {mesh.n_cells} cells, {mesh.n_faces} faces")
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speed-up':>10}")
    cases = _cases(mesh, n_rhs=100)
    cfg = TimeSteppingConfig(tau=2e-3, T=args.steps * 2e-3, seed=0)
    params = ModelParameters(B=66, C=3, gamma=0.2, psi_eta=0.2, psi_theta=0.2)
    cases[f"run {args.steps} steps"] = lambda k: run_simulation(mesh, params, cfg, "3d", backend=k)
    for name, fn in cases.items():
        times = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for b, k in backends.items()}
        speed = f"{times['python'] / times['cython']:>9.1f}x" if "cython" in times else ""
        print(f"{name:<22}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times.values()) + speed)


if __name__ == "__main__":
    main()

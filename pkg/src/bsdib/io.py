"""Run outputs: surface CSV snapshots, legacy VTK bulk fields, run records and comparisons."""

import os
from dataclasses import dataclass

import numpy as np

from .solver import BSDIB_3D, pattern_indicators

PATTERN_STD_THRESHOLD = 1e-3
CSV_HEADER = "x,y,eta,theta"
VTK_POLYHEDRON = 42


class OutputError(OSError):
    pass


class MeshMismatchError(ValueError):
    pass


def _g(v):
    return format(float(v), ".17g")


def write_surface_csv(path, xy, eta, theta):
    """One row per surface vertex, ``x,y,eta,theta``, 17 significant digits."""
    xy = np.asarray(xy, dtype=float)
    if not (len(xy) == len(eta) == len(theta)):
        raise ValueError("coordinate and field lengths differ")
    rows = [CSV_HEADER]
    rows.extend(f"{_g(x)},{_g(y)},{_g(e)},{_g(t)}" for (x, y), e, t in zip(xy[:, :2], eta, theta))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def read_surface_csv(path):
    """Inverse of :func:`write_surface_csv`: ``(xy, eta, theta)``."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {CSV_HEADER!r}, got {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, 4))
    return data[:, :2], data[:, 2], data[:, 3]


def write_vtk_legacy(path, mesh, point_data, title="bsdib bulk fields"):
    """ASCII legacy ``UNSTRUCTURED_GRID`` with polyhedron cells and scalar point data.

    ``point_data`` maps names to arrays with one value per mesh vertex.
    """
    nv = mesh.n_vertices
    for name, arr in point_data.items():
        if len(arr) != nv:
            raise ValueError(f"point data {name!r} has {len(arr)} values for {nv} vertices")
    cells = []
    for c in range(mesh.n_cells):
        faces, _ = mesh.cell(c)
        stream = [len(faces)]
        for f in faces:
            fv = mesh.face(f)
            stream.append(len(fv))
            stream.extend(int(i) for i in fv)
        cells.append(stream)
    size = sum(len(s) + 1 for s in cells)
    out = ["# vtk DataFile Version 4.2", title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    out.extend(" ".join(_g(v) for v in p) for p in mesh.vertices)
    out.append(f"CELLS {mesh.n_cells} {size}")
    out.extend(" ".join(map(str, [len(s), *s])) for s in cells)
    out.append(f"CELL_TYPES {mesh.n_cells}")
    out.extend([str(VTK_POLYHEDRON)] * mesh.n_cells)
    if point_data:
        out.append(f"POINT_DATA {nv}")
        for name, arr in point_data.items():
            out.append(f"SCALARS {name} double 1")
            out.append("LOOKUP_TABLE default")
            out.extend(_g(v) for v in arr)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


@dataclass
class VtkGrid:
    points: np.ndarray
    cells: list  # per cell: list of faces, each a list of point ids
    cell_types: np.ndarray
    point_data: dict


def read_vtk_legacy(path):
    """Strict reader for the files produced by :func:`write_vtk_legacy`."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    if not tokens[0].startswith("# vtk DataFile Version"):
        raise ValueError("not a legacy VTK file")
    if tokens[2].strip() != "ASCII" or tokens[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise ValueError("expected an ASCII unstructured grid")
    words = " ".join(tokens[4:]).split()
    pos = 0

    def take(n):
        nonlocal pos
        out = words[pos:pos + n]
        if len(out) < n:
            raise ValueError("truncated VTK file")
        pos += n
        return out

    kw, n, _ = take(3)
    if kw != "POINTS":
        raise ValueError(f"expected POINTS, got {kw}")
    points = np.array(take(3 * int(n)), dtype=float).reshape(-1, 3)
    kw, nc, size = take(3)
    if kw != "CELLS":
        raise ValueError(f"expected CELLS, got {kw}")
    raw = np.array(take(int(size)), dtype=np.int64)
    cells, k = [], 0
    for _ in range(int(nc)):
        length = raw[k]
        stream = raw[k + 1:k + 1 + length]
        k += length + 1
        nf, j, faces = stream[0], 1, []
        for _ in range(nf):
            m = stream[j]
            faces.append(stream[j + 1:j + 1 + m].tolist())
            j += m + 1
        if j != length:
            raise ValueError("inconsistent polyhedron face stream")
        cells.append(faces)
    kw, nt = take(2)
    if kw != "CELL_TYPES" or int(nt) != int(nc):
        raise ValueError("bad CELL_TYPES section")
    types = np.array(take(int(nt)), dtype=np.int64)
    point_data = {}
    if pos < len(words):
        kw, npd = take(2)
        if kw != "POINT_DATA" or int(npd) != len(points):
            raise ValueError("bad POINT_DATA section")
        while pos < len(words):
            kw, name, _dtype, _ncomp = take(4)
            if kw != "SCALARS" or take(2) != ["LOOKUP_TABLE", "default"]:
                raise ValueError("expected SCALARS with the default lookup table")
            point_data[name] = np.array(take(len(points)), dtype=float)
    return VtkGrid(points, cells, types, point_data)


@dataclass
class RunRecord:
    """Surface outcome of one run, as held in memory or reloaded from an output directory."""

    mode: str
    xy: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    weights: np.ndarray
    increments: np.ndarray
    times: np.ndarray
    seed: int = None


def record_from_result(result):
    mesh = result.mesh
    ng = mesh.n_gamma
    return RunRecord(
        mode=result.mode,
        xy=mesh.vertices[:ng, :2].copy(),
        eta=result.eta.copy(),
        theta=result.theta.copy(),
        weights=result.ops.M_gamma.copy(),
        increments=np.asarray(result.increments.values),
        times=np.asarray(result.increments.times),
        seed=result.config.seed,
    )


def write_increments_csv(path, times, values):
    with open(path, "w", newline="\n") as fh:
        fh.write("step,t,increment\n")
        for i, (t, v) in enumerate(zip(times, values), start=1):
            fh.write(f"{i},{_g(t)},{_g(v)}\n")


def read_increments_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1], data[:, 2]


def write_surface_mass(path, xy, weights):
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y,mass\n")
        for (x, y), w in zip(xy, weights):
            fh.write(f"{_g(x)},{_g(y)},{_g(w)}\n")


def load_run(directory):
    """Rebuild a :class:`RunRecord` from a run output directory."""
    try:
        xy, eta, theta = read_surface_csv(os.path.join(directory, "final_surface.csv"))
        mass = np.loadtxt(os.path.join(directory, "surface_mass.csv"), delimiter=",", skiprows=1, ndmin=2)
        times, incs = read_increments_csv(os.path.join(directory, "increments.csv"))
        meta = read_metadata(os.path.join(directory, "metadata.txt"))
    except FileNotFoundError as exc:
        raise OutputError(f"incomplete run directory {directory!r}: {exc.filename} missing") from None
    if not np.array_equal(mass[:, :2], xy):
        raise ValueError(f"{directory}: surface mass and snapshot coordinates disagree")
    seed = int(meta["seed"]) if "seed" in meta else None
    return RunRecord(meta.get("mode", "?"), xy, eta, theta, mass[:, 2], incs, times, seed)


def write_metadata(path, items):
    with open(path, "w", newline="\n") as fh:
        for k, v in items:
            fh.write(f"{k} = {v}\n")


def read_metadata(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def verdict(std):
    return "patterned" if std >= PATTERN_STD_THRESHOLD else "homogeneous"


@dataclass
class Comparison:
    indicators_a: dict
    indicators_b: dict
    verdict_a: str
    verdict_b: str
    relative_l2_distance: float
    level_difference: float  # difference of mass-weighted eta means
    final_increment_a: float
    final_increment_b: float

    def lines(self):
        out = []
        for tag, ind, v, inc in (("a", self.indicators_a, self.verdict_a, self.final_increment_a),
                                 ("b", self.indicators_b, self.verdict_b, self.final_increment_b)):
            out.append(f"{tag}.verdict = {v}")
            out.extend(f"{tag}.eta_{k} = {val:.10g}" for k, val in ind.items())
            out.append(f"{tag}.final_increment = {inc:.6g}")
        out.append(f"relative_l2_distance = {self.relative_l2_distance:.10g}")
        out.append(f"level_difference = {self.level_difference:.10g}")
        return out


def compare_runs(a, b):
    """Side-by-side indicators and verdicts of two runs on the same surface mesh.

    ``a`` and ``b`` may be simulation results or :class:`RunRecord` objects.
    """
    a = a if isinstance(a, RunRecord) else record_from_result(a)
    b = b if isinstance(b, RunRecord) else record_from_result(b)
    if a.xy.shape != b.xy.shape or not np.allclose(a.xy, b.xy, rtol=0, atol=1e-12 * max(1.0, np.abs(a.xy).max())):
        raise MeshMismatchError("runs were computed on different surface meshes")
    w = a.weights
    ia = pattern_indicators(a.eta, w)
    ib = pattern_indicators(b.eta, w)
    diff = np.sqrt(np.dot(w, (a.eta - b.eta) ** 2))
    scale = max(np.sqrt(np.dot(w, a.eta**2)), np.sqrt(np.dot(w, b.eta**2)))
    rel = float(diff / scale) if scale > 0 else 0.0
    return Comparison(
        indicators_a=ia,
        indicators_b=ib,
        verdict_a=verdict(ia["std"]),
        verdict_b=verdict(ib["std"]),
        relative_l2_distance=rel,
        level_difference=ia["mass_weighted_mean"] - ib["mass_weighted_mean"],
        final_increment_a=float(a.increments[-1]) if len(a.increments) else 0.0,
        final_increment_b=float(b.increments[-1]) if len(b.increments) else 0.0,
    )


def bulk_point_data(result):
    """``{"b": ..., "q": ...}`` on every mesh vertex for a 3D result, else ``{}``."""
    if result.mode != BSDIB_3D:
        return {}
    b, q = result.bulk_fields()
    return {"b": b, "q": q}

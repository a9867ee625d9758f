import numpy as np
import pytest

from bsdib.io import (
    CSV_HEADER,
    MeshMismatchError,
    RunRecord,
    compare_runs,
    read_surface_csv,
    read_vtk_legacy,
    record_from_result,
    verdict,
    write_surface_csv,
    write_vtk_legacy,
)
from bsdib.mesh import build_uniform_mesh
from bsdib.presets import PRESETS
from bsdib.solver import TimeSteppingConfig, run_simulation


def test_csv_constant_fields(unit_cube, tmp_path):
    xy = unit_cube.vertices[: unit_cube.n_gamma, :2]
    path = tmp_path / "s.csv"
    write_surface_csv(path, xy, np.full(4, 0.25), np.full(4, 0.5))
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 5
    assert {l.split(",", 2)[2] for l in lines[1:]} == {"0.25,0.5"}


def test_csv_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    xy = rng.uniform(0, 50, (100, 2))
    eta, theta = rng.normal(size=100) * 1e-7, rng.normal(size=100)
    eta[0], theta[0] = np.nextafter(1.0, 2.0), -0.0
    path = tmp_path / "s.csv"
    write_surface_csv(path, xy, eta, theta)
    xy2, eta2, theta2 = read_surface_csv(path)
    assert np.array_equal(xy, xy2) and np.array_equal(eta, eta2) and np.array_equal(theta, theta2)


def test_csv_length_mismatch(tmp_path):
    with pytest.raises(ValueError):
        write_surface_csv(tmp_path / "x.csv", np.zeros((3, 2)), np.zeros(2), np.zeros(3))


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="expected header"):
        read_surface_csv(path)


def test_vtk_single_cube(unit_cube, tmp_path):
    path = tmp_path / "c.vtk"
    write_vtk_legacy(path, unit_cube, {"b": np.arange(8.0), "q": np.ones(8)})
    g = read_vtk_legacy(path)
    assert len(g.points) == 8 and len(g.cells) == 1
    assert list(g.cell_types) == [42]
    assert len(g.cells[0]) == 6 and all(len(f) == 4 for f in g.cells[0])
    np.testing.assert_array_equal(g.point_data["b"], np.arange(8.0))
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version")
    assert "DATASET UNSTRUCTURED_GRID" in text


def test_vtk_graded_mesh(small_mesh, tmp_path):
    path = tmp_path / "g.vtk"
    b = np.linspace(0, 1, small_mesh.n_vertices)
    write_vtk_legacy(path, small_mesh, {"b": b, "q": 1 - b})
    g = read_vtk_legacy(path)
    assert len(g.points) == small_mesh.n_vertices
    assert len(g.cells) == small_mesh.n_cells
    np.testing.assert_array_equal(g.points, small_mesh.vertices)
    assert max(len(c) for c in g.cells) == 9
    for c, faces in enumerate(g.cells):
        fl, _ = small_mesh.cell(c)
        assert [list(small_mesh.face(f)) for f in fl] == faces
    np.testing.assert_array_equal(g.point_data["q"], 1 - b)


def test_vtk_rejects_wrong_length(unit_cube, tmp_path):
    with pytest.raises(ValueError):
        write_vtk_legacy(tmp_path / "x.vtk", unit_cube, {"b": np.zeros(3)})


def test_writers_are_pure(small_mesh, tmp_path):
    b = np.sin(np.arange(small_mesh.n_vertices))
    for k in range(2):
        write_vtk_legacy(tmp_path / f"{k}.vtk", small_mesh, {"b": b, "q": b})
    assert (tmp_path / "0.vtk").read_bytes() == (tmp_path / "1.vtk").read_bytes()


def _record(eta, n=9, **kw):
    side = int(np.sqrt(n))
    g = np.linspace(0, 1, side)
    xy = np.array([(x, y) for y in g for x in g])
    return RunRecord("3d", xy, np.asarray(eta, float), np.zeros(n), np.ones(n), np.array([1.0, 0.5]), np.array([0.1, 0.2]), **kw)


def test_compare_identical():
    r = _record(np.linspace(0, 1, 9))
    c = compare_runs(r, r)
    assert c.relative_l2_distance == 0 and c.level_difference == 0
    assert c.indicators_a == c.indicators_b
    assert c.verdict_a == "patterned"


def test_compare_levels_and_verdicts():
    a, b = _record(np.full(9, 1.47)), _record(np.zeros(9))
    c = compare_runs(a, b)
    assert (c.verdict_a, c.verdict_b) == ("homogeneous", "homogeneous")
    assert np.isclose(c.level_difference, 1.47)
    assert np.isclose(c.relative_l2_distance, 1.0)
    assert any(line.startswith("relative_l2_distance = ") for line in c.lines())


def test_compare_mesh_mismatch():
    with pytest.raises(MeshMismatchError):
        compare_runs(_record(np.zeros(9)), _record(np.zeros(16), n=16))


def test_verdict_threshold():
    assert verdict(1e-3) == "patterned"
    assert verdict(9.99e-4) == "homogeneous"


def test_record_from_result(small_mesh, small_ops):
    r = run_simulation(small_mesh, PRESETS["D3"].parameters(), TimeSteppingConfig(tau=2e-3, T=0.01), ops=small_ops)
    rec = record_from_result(r)
    assert len(rec.xy) == (8 + 1) ** 2
    assert compare_runs(r, rec).relative_l2_distance == 0

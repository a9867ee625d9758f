import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsdib.mesh import (
    FaceTag,
    GradedMeshSpec,
    MeshError,
    VertexTag,
    build_graded_mesh,
    build_uniform_mesh,
    deserialize_mesh,
    extract_surface_mesh,
    mesh_quality_report,
    serialize_mesh,
    validate_mesh,
)


def count_oracle(nx, fine_layers, coarse_levels):
    """Plane-by-plane enumeration: (vertices, cells, hanging nodes, vertices per plane)."""
    planes = [(nx + 1) ** 2] * (fine_layers + 1)
    cells = fine_layers * nx * nx
    hanging = 0
    for k in range(1, coarse_levels + 1):
        n_below, n_here = nx >> (k - 1), nx >> k
        planes.append((n_here + 1) ** 2)
        cells += n_here * n_here
        # midpoints and centres of the 2x2-split bottom faces
        hanging += (n_below + 1) ** 2 - (n_here + 1) ** 2
    return sum(planes), cells, hanging, planes


def vertices_per_plane(mesh):
    z = np.round(mesh.vertices[:, 2], 9)
    _, counts = np.unique(z, return_counts=True)
    return counts.tolist()


def test_single_cube():
    m = build_graded_mesh(GradedMeshSpec(L=1.0, nx=1, fine_layers=1, coarse_levels=0))
    assert (m.n_vertices, m.n_faces, m.n_cells, m.n_gamma) == (8, 6, 1, 4)
    u = build_uniform_mesh(1.0, 1)
    assert u.equals(m)


def test_graded_142_counts(graded_142):
    m = graded_142
    assert vertices_per_plane(m) == [25, 25, 9, 4]
    assert m.n_cells == 16 + 4 + 1
    v, c, _, planes = count_oracle(4, 1, 2)
    assert (m.n_vertices, m.n_cells) == (v, c)
    assert planes == [25, 25, 9, 4]


def test_ennahedra_combinatorics(graded_142):
    m = graded_142
    z0 = m.vertices[:, 2]
    for c in range(m.n_cells):
        faces, _ = m.cell(c)
        nv = len(m.cell_vertices(c))
        bottom = z0[m.cell_vertices(c)].min()
        if bottom >= 0.25 - 1e-12:  # on top of the single fine layer
            assert (nv, len(faces)) == (13, 9)
        else:
            assert (nv, len(faces)) == (8, 6)


@pytest.mark.parametrize("nx,fl,cl", [(4, 1, 2), (8, 2, 2), (16, 2, 3), (32, 2, 3), (8, 3, 0)])
def test_counts_match_oracle(nx, fl, cl):
    m = build_graded_mesh(GradedMeshSpec(L=50.0, nx=nx, fine_layers=fl, coarse_levels=cl))
    v, c, _, planes = count_oracle(nx, fl, cl)
    assert (m.n_vertices, m.n_cells, m.n_gamma) == (v, c, (nx + 1) ** 2)
    assert vertices_per_plane(m) == planes


def test_full_scale_mesh_counts():
    m = build_graded_mesh(GradedMeshSpec(L=50.0, nx=128, fine_layers=2, coarse_levels=5))
    v, c, _, _ = count_oracle(128, 2, 5)
    assert m.n_gamma == 129 * 129
    assert m.n_vertices == v == 55632
    assert m.n_cells == c == 38224
    assert 5.0e4 <= m.n_vertices <= 6.0e4
    s = extract_surface_mesh(m)
    assert len(s.face_ptr) - 1 == 128 * 128


def test_uniform_counts():
    m = build_uniform_mesh(50.0, 2)
    assert (m.n_cells, m.n_vertices, m.n_gamma) == (8, 27, 9)
    validate_mesh(m)


def test_uniform_large_closed_form():
    # counts only: the full 128^3 mesh is built elsewhere on demand
    assert 129**3 == 2146689


def test_uniform_equals_graded_without_coarsening():
    a = build_uniform_mesh(3.0, 3)
    b = build_graded_mesh(GradedMeshSpec(L=3.0, nx=3, fine_layers=3, coarse_levels=0))
    assert a.equals(b)


def test_quality_report(uniform2, graded_142):
    q = mesh_quality_report(uniform2)
    np.testing.assert_allclose(q.cell_volumes, 0.125, rtol=1e-14)
    assert q.hanging_nodes == 0
    q = mesh_quality_report(graded_142)
    assert abs(q.cell_volumes.sum() - 1.0) <= 1e-12
    assert q.hanging_nodes == count_oracle(4, 1, 2)[2]


def test_quality_report_hanging_nodes_full_scale():
    m = build_graded_mesh(GradedMeshSpec(L=50.0, nx=128, fine_layers=2, coarse_levels=5))
    assert mesh_quality_report(m).hanging_nodes == count_oracle(128, 2, 5)[2] == 129**2 - 5**2


def test_surface_mesh(unit_cube, graded_142):
    s = extract_surface_mesh(unit_cube)
    assert len(s.face_ptr) - 1 == 1
    s = extract_surface_mesh(graded_142)
    assert len(s.face_ptr) - 1 == 16
    assert abs(s.total_area() - 1.0) <= 1e-14
    assert np.all(s.vertices[:, 2] == 0.0)


def test_surface_extraction_rejects_lifted_vertex(unit_cube):
    m = deserialize_mesh(serialize_mesh(unit_cube))
    m.vertices[0, 2] = 1e-3
    with pytest.raises(MeshError):
        extract_surface_mesh(m)


@pytest.mark.parametrize("spec", [
    GradedMeshSpec(L=1.0, nx=4, fine_layers=1, coarse_levels=2),
    GradedMeshSpec(L=50.0, nx=16, fine_layers=2, coarse_levels=3),
    GradedMeshSpec(L=7.0, nx=8, fine_layers=1, coarse_levels=1),
])
def test_invariants(spec):
    m = build_graded_mesh(spec)
    validate_mesh(m)
    # watertightness
    use = np.bincount(m.cell_faces, minlength=m.n_faces)
    boundary = m.face_tags != FaceTag.INTERIOR
    assert np.all(use[boundary] == 1) and np.all(use[~boundary] == 2)
    q = mesh_quality_report(m)
    assert abs(q.cell_volumes.sum() - spec.L**3) <= 1e-12 * spec.L**3
    gam = m.face_tags == FaceTag.GAMMA
    assert abs(q.face_areas[gam].sum() - spec.L**2) <= 1e-12 * spec.L**2
    on = np.flatnonzero(m.vertex_tags == VertexTag.ON_GAMMA)
    off = np.flatnonzero(m.vertex_tags != VertexTag.ON_GAMMA)
    assert on.max() < off.min()


@settings(max_examples=20, deadline=None)
@given(levels=st.integers(0, 3), extra=st.integers(0, 1), fine=st.integers(1, 3), L=st.floats(0.5, 100.0))
def test_random_specs_are_valid(levels, extra, fine, L):
    nx = 2 ** (levels + extra)
    spec = GradedMeshSpec(L=L, nx=nx, fine_layers=fine, coarse_levels=levels)
    try:
        spec.layer_heights()
    except MeshError:
        return
    m = build_graded_mesh(spec)
    validate_mesh(m)
    assert m.n_vertices == count_oracle(nx, fine, levels)[0]
    assert np.isclose(m.vertices[:, 2].max(), L, rtol=1e-14)


def test_spec_errors():
    with pytest.raises(MeshError):
        GradedMeshSpec(L=1.0, nx=6, fine_layers=1, coarse_levels=2)
    with pytest.raises(MeshError):
        GradedMeshSpec(L=1.0, nx=4, fine_layers=0, coarse_levels=0)
    with pytest.raises(MeshError):
        # the fine layers alone already fill the box
        build_graded_mesh(GradedMeshSpec(L=1.0, nx=2, fine_layers=3, coarse_levels=1))


def test_top_layer_stretch():
    spec = GradedMeshSpec(L=50.0, nx=128, fine_layers=2, coarse_levels=5)
    h = spec.layer_heights()
    assert np.isclose(sum(h), 50.0, rtol=1e-15)
    np.testing.assert_allclose(h[:-1], np.array([1, 1, 2, 4, 8, 16]) * 50 / 128)


@pytest.mark.parametrize("mesh_fixture", ["unit_cube", "graded_142"])
def test_serialization_roundtrip(mesh_fixture, request):
    m = request.getfixturevalue(mesh_fixture)
    data = serialize_mesh(m)
    assert data.startswith(b"BSMESH1\n")
    assert deserialize_mesh(data).equals(m)


def test_serialization_roundtrip_graded_8():
    m = build_graded_mesh(GradedMeshSpec(L=50.0, nx=8, fine_layers=2, coarse_levels=2))
    assert deserialize_mesh(serialize_mesh(m)).equals(m)


def test_deserialize_errors(graded_142):
    data = serialize_mesh(graded_142)
    with pytest.raises(MeshError, match="unexpected end of stream"):
        deserialize_mesh(data[: len(data) // 2])
    with pytest.raises(MeshError, match="malformed header"):
        deserialize_mesh(b"BSMESH1\nnv=abc\n")
    with pytest.raises(MeshError):
        deserialize_mesh(b"NOTAMESH" + data[8:])

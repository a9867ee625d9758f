"""Graded polyhedral meshes of the cube ``[0, L]^3``.

The graded mesh stacks ``fine_layers`` layers of ``nx x nx`` cubes on the
bottom face, then ``coarse_levels`` layers whose horizontal edge doubles at
every level. A coarse element sits on four elements of the level below, so
its bottom face is split into four squares and its lateral faces are
pentagons: the 13-vertex, 9-face "ennahedron". The topmost layer is
stretched vertically so the stack height is exactly ``L``.

Vertices are numbered plane by plane from ``z = 0`` upward, so the bottom
surface vertices come first and the top (Dirichlet) vertices come last.
"""

import io
import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geometry import diameter, polygon_area_vector, polyhedron_moments

MAGIC = b"BSMESH1\n"


class MeshError(ValueError):
    """Raised for invalid mesh specifications or broken mesh data."""


class FaceTag(IntEnum):
    INTERIOR = 0
    GAMMA = 1
    GAMMA_T = 2
    GAMMA_L = 3


class VertexTag(IntEnum):
    OTHER = 0
    ON_GAMMA = 1
    ON_GAMMA_T = 2


@dataclass(frozen=True)
class GradedMeshSpec:
    L: float
    nx: int
    fine_layers: int = 2
    coarse_levels: int = 0

    def __post_init__(self):
        if not self.L > 0:
            raise MeshError(f"edge length must be positive, got {self.L}")
        if self.nx < 1:
            raise MeshError(f"nx must be >= 1, got {self.nx}")
        if self.fine_layers < 1:
            raise MeshError("fine_layers must be >= 1")
        if self.coarse_levels < 0:
            raise MeshError("coarse_levels must be >= 0")
        if self.nx % (2**self.coarse_levels):
            raise MeshError(
                f"nx={self.nx} is not divisible by 2**coarse_levels={2**self.coarse_levels}"
            )

    def layer_heights(self):
        """Vertical extent of every layer, bottom to top (top one stretched)."""
        h = self.L / self.nx
        heights = [h] * self.fine_layers + [h * 2**k for k in range(1, self.coarse_levels + 1)]
        below = sum(heights[:-1])
        if below >= self.L * (1 - 1e-12):
            raise MeshError(
                f"layers below the top one already reach height {below:g} >= L={self.L:g}"
            )
        heights[-1] = self.L - below
        return heights

    def plane_resolutions(self):
        """Grid subdivisions per horizontal direction on every vertex plane."""
        return [self.nx] * (self.fine_layers + 1) + [
            self.nx // 2**k for k in range(1, self.coarse_levels + 1)
        ]


@dataclass(eq=False)
class PolyhedralMesh:
    """Polyhedral mesh in flat (CSR) storage.

    Face ``f`` is the vertex cycle ``face_verts[face_ptr[f]:face_ptr[f+1]]``;
    cell ``c`` owns faces ``cell_faces[cell_ptr[c]:cell_ptr[c+1]]`` with
    ``cell_orient`` = +1 when the cycle normal points out of the cell.
    """

    vertices: np.ndarray
    face_ptr: np.ndarray
    face_verts: np.ndarray
    cell_ptr: np.ndarray
    cell_faces: np.ndarray
    cell_orient: np.ndarray
    face_tags: np.ndarray
    vertex_tags: np.ndarray
    L: float
    _cell_vertices: tuple = field(default=None, repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.face_ptr) - 1

    @property
    def n_cells(self):
        return len(self.cell_ptr) - 1

    @property
    def n_gamma(self):
        return int(np.count_nonzero(self.vertex_tags == VertexTag.ON_GAMMA))

    @property
    def n_gamma_t(self):
        return int(np.count_nonzero(self.vertex_tags == VertexTag.ON_GAMMA_T))

    def face(self, f):
        return self.face_verts[self.face_ptr[f] : self.face_ptr[f + 1]]

    def cell(self, c):
        s = slice(self.cell_ptr[c], self.cell_ptr[c + 1])
        return self.cell_faces[s], self.cell_orient[s]

    def cell_vertex_csr(self):
        """``(ptr, verts)`` listing the distinct vertices of every cell in first-seen order."""
        if self._cell_vertices is None:
            ptr = [0]
            verts = []
            for c in range(self.n_cells):
                seen = {}
                for f in self.cell(c)[0]:
                    for v in self.face(f):
                        seen.setdefault(int(v), None)
                verts.extend(seen)
                ptr.append(len(verts))
            self._cell_vertices = (np.array(ptr, dtype=np.int64), np.array(verts, dtype=np.int64))
        return self._cell_vertices

    def cell_vertices(self, c):
        ptr, verts = self.cell_vertex_csr()
        return verts[ptr[c] : ptr[c + 1]]

    def equals(self, other):
        return (
            self.L == other.L
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.face_ptr, other.face_ptr)
            and np.array_equal(self.face_verts, other.face_verts)
            and np.array_equal(self.cell_ptr, other.cell_ptr)
            and np.array_equal(self.cell_faces, other.cell_faces)
            and np.array_equal(self.cell_orient, other.cell_orient)
            and np.array_equal(self.face_tags, other.face_tags)
            and np.array_equal(self.vertex_tags, other.vertex_tags)
        )


@dataclass(frozen=True)
class SurfaceMesh:
    """Polygons of the bottom face; vertex ids index the first ``n_gamma`` bulk vertices."""

    vertices: np.ndarray  # (n_gamma, 3)
    face_ptr: np.ndarray
    face_verts: np.ndarray
    face_diameters: np.ndarray
    bulk_face_ids: np.ndarray

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.face_ptr) - 1

    def face(self, f):
        return self.face_verts[self.face_ptr[f] : self.face_ptr[f + 1]]

    def total_area(self):
        return sum(
            np.linalg.norm(polygon_area_vector(self.vertices[self.face(f)])) for f in range(self.n_faces)
        )


def build_graded_mesh(spec):
    """Build the graded cube mesh described by a :class:`GradedMeshSpec`."""
    heights = spec.layer_heights()
    res = spec.plane_resolutions()
    L = float(spec.L)
    n_planes = len(res)
    zs = np.concatenate([[0.0], np.cumsum(heights)])
    zs[-1] = L

    # vertices, plane by plane
    voff = [0]
    coords = []
    for p, n in enumerate(res):
        g = np.arange(n + 1) * (L / n)
        g[-1] = L
        X, Y = np.meshgrid(g, g)  # row index j (y), column index i (x)
        coords.append(np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, zs[p])]))
        voff.append(voff[-1] + (n + 1) ** 2)
    vertices = np.vstack(coords)
    vertex_tags = np.zeros(len(vertices), dtype=np.uint8)
    vertex_tags[: voff[1]] = VertexTag.ON_GAMMA
    vertex_tags[voff[-2] :] = VertexTag.ON_GAMMA_T

    def vid(p, i, j):
        return voff[p] + j * (res[p] + 1) + i

    faces = []
    face_tags = []

    def lateral_tag(on_boundary):
        return FaceTag.GAMMA_L if on_boundary else FaceTag.INTERIOR

    # horizontal faces: square (i, j) of plane p, normal +z
    hoff = []
    for p, n in enumerate(res):
        hoff.append(len(faces))
        tag = FaceTag.GAMMA if p == 0 else FaceTag.GAMMA_T if p == n_planes - 1 else FaceTag.INTERIOR
        for j in range(n):
            for i in range(n):
                faces.append((vid(p, i, j), vid(p, i + 1, j), vid(p, i + 1, j + 1), vid(p, i, j + 1)))
                face_tags.append(tag)

    cell_lists = []
    for lay in range(n_planes - 1):
        pb, pt = lay, lay + 1
        nb, nt = res[pb], res[pt]
        r = nb // nt  # 1 (conforming) or 2 (coarsening)

        def bottom_run(i0, j0, di, dj):
            return [vid(pb, r * i0 + k * di, r * j0 + k * dj) for k in range(r + 1)]

        # x-normal lateral faces at top-grid column I, spanning row J
        xoff = len(faces)
        for J in range(nt):
            for I in range(nt + 1):
                faces.append(tuple(bottom_run(I, J, 0, 1) + [vid(pt, I, J + 1), vid(pt, I, J)]))
                face_tags.append(lateral_tag(I in (0, nt)))
        # y-normal lateral faces at top-grid row J, spanning column I
        yoff = len(faces)
        for J in range(nt + 1):
            for I in range(nt):
                run = bottom_run(I, J, 1, 0)
                faces.append(tuple([run[0], vid(pt, I, J), vid(pt, I + 1, J)] + run[:0:-1]))
                face_tags.append(lateral_tag(J in (0, nt)))

        for J in range(nt):
            for I in range(nt):
                fl = [hoff[pt] + J * nt + I]
                ol = [1]
                for b in range(r):
                    for a in range(r):
                        fl.append(hoff[pb] + (r * J + b) * nb + r * I + a)
                        ol.append(-1)
                fl += [
                    xoff + J * (nt + 1) + I,
                    xoff + J * (nt + 1) + I + 1,
                    yoff + J * nt + I,
                    yoff + (J + 1) * nt + I,
                ]
                ol += [-1, 1, -1, 1]
                cell_lists.append((fl, ol))

    face_ptr = np.zeros(len(faces) + 1, dtype=np.int64)
    face_ptr[1:] = np.cumsum([len(f) for f in faces])
    face_verts = np.fromiter((v for f in faces for v in f), dtype=np.int64, count=face_ptr[-1])
    cell_ptr = np.zeros(len(cell_lists) + 1, dtype=np.int64)
    cell_ptr[1:] = np.cumsum([len(c[0]) for c in cell_lists])
    cell_faces = np.fromiter((f for c in cell_lists for f in c[0]), dtype=np.int64, count=cell_ptr[-1])
    cell_orient = np.fromiter((o for c in cell_lists for o in c[1]), dtype=np.int8, count=cell_ptr[-1])

    return PolyhedralMesh(
        vertices=vertices,
        face_ptr=face_ptr,
        face_verts=face_verts,
        cell_ptr=cell_ptr,
        cell_faces=cell_faces,
        cell_orient=cell_orient,
        face_tags=np.asarray(face_tags, dtype=np.uint8),
        vertex_tags=vertex_tags,
        L=L,
    )


def build_uniform_mesh(L, nx):
    """Uniform ``nx^3`` cube mesh with the same numbering and tagging conventions."""
    if nx < 1:
        raise MeshError(f"nx must be >= 1, got {nx}")
    return build_graded_mesh(GradedMeshSpec(L=L, nx=nx, fine_layers=nx, coarse_levels=0))


def extract_surface_mesh(mesh):
    """Collect the GAMMA faces of ``mesh`` as a :class:`SurfaceMesh`."""
    ids = np.flatnonzero(mesh.face_tags == FaceTag.GAMMA)
    ng = mesh.n_gamma
    tol = 1e-10 * mesh.L
    ptr = [0]
    verts = []
    diams = []
    for f in ids:
        cyc = mesh.face(f)
        P = mesh.vertices[cyc]
        if np.any(np.abs(P[:, 2]) > tol):
            raise MeshError(f"GAMMA face {f} has a vertex off the plane z = 0")
        if cyc.max() >= ng:
            raise MeshError(f"GAMMA face {f} references a vertex outside the surface block")
        verts.extend(cyc)
        ptr.append(len(verts))
        diams.append(diameter(P))
    return SurfaceMesh(
        vertices=mesh.vertices[:ng].copy(),
        face_ptr=np.array(ptr, dtype=np.int64),
        face_verts=np.array(verts, dtype=np.int64),
        face_diameters=np.array(diams),
        bulk_face_ids=ids,
    )


def validate_mesh(mesh):
    """Check the structural invariants; raise :class:`MeshError` on the first failure."""
    L = mesh.L
    tol = 1e-10 * L
    nv, nf, nc = mesh.n_vertices, mesh.n_faces, mesh.n_cells
    if mesh.face_verts.size and (mesh.face_verts.min() < 0 or mesh.face_verts.max() >= nv):
        raise MeshError("face vertex index out of range")
    if mesh.cell_faces.size and (mesh.cell_faces.min() < 0 or mesh.cell_faces.max() >= nf):
        raise MeshError("cell face index out of range")

    area_vec = np.zeros((nf, 3))
    for f in range(nf):
        cyc = mesh.face(f)
        if len(cyc) < 3 or len(set(cyc.tolist())) != len(cyc):
            raise MeshError(f"face {f} is not a simple polygon")
        P = mesh.vertices[cyc]
        av = polygon_area_vector(P)
        a = np.linalg.norm(av)
        if a <= tol * L:
            raise MeshError(f"face {f} has zero area")
        n = av / a
        if np.abs((P - P.mean(axis=0)) @ n).max() > tol:
            raise MeshError(f"face {f} is not planar")
        # weak convexity (collinear hanging vertices allowed) implies simplicity
        e = np.roll(P, -1, axis=0) - P
        turn = np.cross(np.roll(e, 1, axis=0), e) @ n
        if turn.min() < -tol * L:
            raise MeshError(f"face {f} is not convex")
        area_vec[f] = av

    usage = np.bincount(mesh.cell_faces, minlength=nf)
    boundary = mesh.face_tags != FaceTag.INTERIOR
    if np.any(usage[boundary] != 1):
        raise MeshError("a boundary face is not owned by exactly one cell")
    if np.any(usage[~boundary] != 2):
        raise MeshError("an interior face is not shared by exactly two cells")

    total = 0.0
    for c in range(nc):
        fl, ol = mesh.cell(c)
        if np.linalg.norm((ol[:, None] * area_vec[fl]).sum(axis=0)) > tol * L:
            raise MeshError(f"cell {c} is not closed (inconsistent face orientation)")
        vol = _cell_volume(mesh, c)
        if vol <= 0:
            raise MeshError(f"cell {c} has non-positive volume")
        total += vol
    if abs(total - L**3) > 1e-12 * L**3:
        raise MeshError(f"cell volumes sum to {total!r}, expected {L**3!r}")
    for tag in (FaceTag.GAMMA, FaceTag.GAMMA_T):
        a = np.linalg.norm(area_vec[mesh.face_tags == tag], axis=1).sum()
        if abs(a - L**2) > 1e-12 * L**2:
            raise MeshError(f"{tag.name} area {a!r} differs from L^2")

    z = mesh.vertices[:, 2]
    expected = np.where(np.abs(z) <= tol, VertexTag.ON_GAMMA, np.where(np.abs(z - L) <= tol, VertexTag.ON_GAMMA_T, VertexTag.OTHER))
    if not np.array_equal(expected, mesh.vertex_tags):
        raise MeshError("vertex tags disagree with coordinates")
    ng, nt = mesh.n_gamma, mesh.n_gamma_t
    if np.any(mesh.vertex_tags[:ng] != VertexTag.ON_GAMMA):
        raise MeshError("surface vertices are not numbered first")
    if nt and np.any(mesh.vertex_tags[nv - nt :] != VertexTag.ON_GAMMA_T):
        raise MeshError("top vertices are not numbered last")


def _cell_vertex_cycles(mesh, c):
    verts = mesh.cell_vertices(c)
    local = {int(v): k for k, v in enumerate(verts)}
    fl, ol = mesh.cell(c)
    return verts, [[local[int(v)] for v in mesh.face(f)] for f in fl], ol


def _cell_volume(mesh, c):
    verts, cycles, ol = _cell_vertex_cycles(mesh, c)
    return polyhedron_moments(mesh.vertices[verts], cycles, ol)[0]


@dataclass
class QualityReport:
    cell_volumes: np.ndarray
    face_areas: np.ndarray
    cell_diameters: np.ndarray
    face_diameters: np.ndarray
    hanging_nodes: int
    min_aspect: float
    max_aspect: float

    def summary(self):
        return {
            "cells": len(self.cell_volumes),
            "faces": len(self.face_areas),
            "total_volume": float(self.cell_volumes.sum()),
            "min_cell_volume": float(self.cell_volumes.min()),
            "max_cell_diameter": float(self.cell_diameters.max()),
            "hanging_nodes": self.hanging_nodes,
            "min_aspect": self.min_aspect,
            "max_aspect": self.max_aspect,
        }


def _face_area_vectors(mesh):
    fp = mesh.face_ptr
    sizes = np.diff(fp)
    P = mesh.vertices[mesh.face_verts]
    nxt = np.arange(len(mesh.face_verts)) + 1
    nxt[fp[1:] - 1] = fp[:-1]
    return 0.5 * np.add.reduceat(np.cross(P, P[nxt]), fp[:-1], axis=0), sizes


def mesh_quality_report(mesh):
    """Per-element measures, diameters, aspect ratios and the hanging-node count.

    A vertex hangs when, in some cell containing it, the faces through it span
    fewer than three normal directions (it sits inside an edge or a face of
    that cell rather than at a corner).
    """
    from . import kernels

    cv_ptr, cv = mesh.cell_vertex_csr()
    _, _, vols, cdiam = kernels.cell_matrices(
        mesh.vertices, mesh.face_ptr, mesh.face_verts, mesh.cell_ptr, mesh.cell_faces,
        mesh.cell_orient, cv_ptr, cv,
    )
    _, _, areas, fdiam = kernels.face_matrices(
        mesh.vertices, mesh.face_ptr, mesh.face_verts, np.arange(mesh.n_faces, dtype=np.int64)
    )
    X = mesh.vertices[cv]
    ext = np.maximum.reduceat(X, cv_ptr[:-1], axis=0) - np.minimum.reduceat(X, cv_ptr[:-1], axis=0)
    aspect = ext.max(axis=1) / ext.min(axis=1)

    av, sizes = _face_area_vectors(mesh)
    normals = av / np.linalg.norm(av, axis=1)[:, None]
    # every (cell, face, vertex) incidence contributes n n^T to the Gram matrix of its (cell, vertex) pair
    cell_of = np.repeat(np.arange(mesh.n_cells), np.diff(mesh.cell_ptr))
    faces = mesh.cell_faces
    reps = sizes[faces]
    inc_cell = np.repeat(cell_of, reps)
    inc_face = np.repeat(faces, reps)
    offs = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
    inc_vert = mesh.face_verts[mesh.face_ptr[inc_face] + offs]
    keys, inv = np.unique(inc_cell * mesh.n_vertices + inc_vert, return_inverse=True)
    n = normals[inc_face]
    G = np.zeros((len(keys), 3, 3))
    np.add.at(G, inv, n[:, :, None] * n[:, None, :])
    flat = np.abs(np.linalg.det(G)) < 1e-8
    hanging = np.unique(keys[flat] % mesh.n_vertices)
    return QualityReport(
        cell_volumes=np.asarray(vols),
        face_areas=np.asarray(areas),
        cell_diameters=np.asarray(cdiam),
        face_diameters=np.asarray(fdiam),
        hanging_nodes=int(len(hanging)),
        min_aspect=float(aspect.min()),
        max_aspect=float(aspect.max()),
    )


def serialize_mesh(mesh):
    """Encode ``mesh`` in the versioned little-endian ``BSMESH1`` format."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    header = (
        f"nv={mesh.n_vertices} nf={mesh.n_faces} nc={mesh.n_cells} "
        f"n_gamma={mesh.n_gamma} L={mesh.L!r}\n"
    )
    buf.write(header.encode("ascii"))
    buf.write(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
    for f in range(mesh.n_faces):
        cyc = mesh.face(f)
        buf.write(np.concatenate([[len(cyc)], cyc]).astype("<i4").tobytes())
    for c in range(mesh.n_cells):
        fl, ol = mesh.cell(c)
        signed = (fl + 1) * ol.astype(np.int64)
        buf.write(np.concatenate([[len(fl)], signed]).astype("<i4").tobytes())
    buf.write(np.asarray(mesh.face_tags, dtype=np.uint8).tobytes())
    buf.write(np.asarray(mesh.vertex_tags, dtype=np.uint8).tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise MeshError("unexpected end of stream")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def line(self):
        end = self.data.find(b"\n", self.pos)
        if end < 0:
            raise MeshError("unexpected end of stream")
        out = self.data[self.pos : end]
        self.pos = end + 1
        return out

    def ints(self, n):
        return np.frombuffer(self.take(4 * n), dtype="<i4").astype(np.int64)


def deserialize_mesh(data):
    """Inverse of :func:`serialize_mesh`."""
    r = _Reader(bytes(data))
    if r.take(len(MAGIC)) != MAGIC:
        raise MeshError("malformed header: bad magic")
    try:
        fields = dict(tok.split("=", 1) for tok in r.line().decode("ascii").split())
        nv, nf, nc, ng = (int(fields[k]) for k in ("nv", "nf", "nc", "n_gamma"))
        L = float(fields["L"])
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise MeshError(f"malformed header: {exc}") from None
    if min(nv, nf, nc, ng) < 0:
        raise MeshError("malformed header: negative count")

    vertices = np.frombuffer(r.take(24 * nv), dtype="<f8").reshape(nv, 3).astype(np.float64)
    face_ptr = [0]
    face_verts = []
    for _ in range(nf):
        (m,) = r.ints(1)
        if m < 3:
            raise MeshError("malformed face record")
        face_verts.append(r.ints(m))
        face_ptr.append(face_ptr[-1] + m)
    cell_ptr = [0]
    signed = []
    for _ in range(nc):
        (m,) = r.ints(1)
        if m < 4:
            raise MeshError("malformed cell record")
        signed.append(r.ints(m))
        cell_ptr.append(cell_ptr[-1] + m)
    face_tags = np.frombuffer(r.take(nf), dtype=np.uint8).copy()
    vertex_tags = np.frombuffer(r.take(nv), dtype=np.uint8).copy()
    if r.pos != len(r.data):
        raise MeshError("trailing bytes after mesh payload")

    face_verts = np.concatenate(face_verts) if face_verts else np.zeros(0, dtype=np.int64)
    signed = np.concatenate(signed) if signed else np.zeros(0, dtype=np.int64)
    if face_verts.size and (face_verts.min() < 0 or face_verts.max() >= nv):
        raise MeshError("vertex index out of range")
    if signed.size and (np.any(signed == 0) or np.abs(signed).max() > nf):
        raise MeshError("face index out of range")
    if face_tags.max(initial=0) > max(FaceTag) or vertex_tags.max(initial=0) > max(VertexTag):
        raise MeshError("tag value out of range")
    mesh = PolyhedralMesh(
        vertices=vertices,
        face_ptr=np.array(face_ptr, dtype=np.int64),
        face_verts=face_verts,
        cell_ptr=np.array(cell_ptr, dtype=np.int64),
        cell_faces=np.abs(signed) - 1,
        cell_orient=np.sign(signed).astype(np.int8),
        face_tags=face_tags,
        vertex_tags=vertex_tags,
        L=L,
    )
    if mesh.n_gamma != ng:
        raise MeshError("header n_gamma disagrees with vertex tags")
    return mesh

"""Polyhedral meshes with oriented incidence and global frames."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np

PLANARITY_TOL = 1e-9


class MeshError(ValueError):
    """Raised when mesh input violates a structural or geometric invariant."""


def _least_aligned_axis(vec):
    return np.eye(3)[int(np.argmin(np.abs(vec)))]


def edge_frame(tangent):
    """Right-handed ``(n_E1, n_E2)`` completing ``t_E``."""
    axis = _least_aligned_axis(tangent)
    n1 = axis - (axis @ tangent) * tangent
    n1 /= np.linalg.norm(n1)
    return np.stack([n1, np.cross(tangent, n1)])


def face_frame(normal):
    """Tangents ``(t_F1, t_F2)`` with ``t_F1 x t_F2 = n_F``."""
    axis = _least_aligned_axis(normal)
    t1 = axis - (axis @ normal) * normal
    t1 /= np.linalg.norm(t1)
    return np.stack([t1, np.cross(normal, t1)])


def newell_normal(points):
    center = points.mean(axis=0)
    rel = points - center
    return 0.5 * np.cross(rel, np.roll(rel, -1, axis=0)).sum(axis=0)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable polyhedral mesh.

    Build with :meth:`from_arrays`; derived geometry is computed once there.
    """

    vertices: np.ndarray
    faces: tuple
    cells: tuple
    edges: np.ndarray = field(repr=False)
    face_edges: tuple = field(repr=False)
    face_edge_sign: tuple = field(repr=False)
    cell_face_sign: tuple = field(repr=False)
    face_normal: np.ndarray = field(repr=False)
    face_tangents: np.ndarray = field(repr=False)
    face_center: np.ndarray = field(repr=False)
    face_diameter: np.ndarray = field(repr=False)
    face_area: np.ndarray = field(repr=False)
    edge_normals: np.ndarray = field(repr=False)
    cell_center: np.ndarray = field(repr=False)
    cell_diameter: np.ndarray = field(repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def h(self) -> float:
        return float(self.cell_diameter.max())

    @cached_property
    def edge_tangent(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return d / self.edge_length[:, None]

    @cached_property
    def edge_length(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    @cached_property
    def edge_midpoint(self):
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    def face_edge_normal(self, f, e):
        """In-plane normal ``n_FE = n_F x t_E`` (not sign corrected)."""
        return np.cross(self.face_normal[f], self.edge_tangent[e])

    @cached_property
    def cell_edges(self):
        return tuple(
            np.unique(np.concatenate([self.face_edges[f] for f in faces])) for faces in self.cells
        )

    @cached_property
    def cell_vertices(self):
        return tuple(
            np.unique(np.concatenate([self.faces[f] for f in faces])) for faces in self.cells
        )

    @cached_property
    def face_cells(self):
        out = [[] for _ in range(self.n_faces)]
        for t, faces in enumerate(self.cells):
            for f in faces:
                out[f].append(t)
        return tuple(tuple(c) for c in out)

    @cached_property
    def cell_volume(self):
        vols = []
        for t, faces in enumerate(self.cells):
            v0 = self.vertices[[self.faces[f][0] for f in faces]]
            dots = np.einsum("fi,fi->f", v0, self.face_normal[faces])
            vols.append((self.cell_face_sign[t] * self.face_area[faces] * dots).sum() / 3.0)
        return np.array(vols)

    # construction -----------------------------------------------------------------
    @classmethod
    def from_arrays(cls, vertices, faces, cells) -> "Mesh":
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an array of 3D points")
        faces = tuple(np.asarray(loop, dtype=int) for loop in faces)
        cells = tuple(np.asarray(c, dtype=int) for c in cells)
        nv = len(vertices)
        for f, loop in enumerate(faces):
            if len(loop) < 3 or len(set(loop.tolist())) != len(loop):
                raise MeshError(f"face {f}: loop needs at least 3 distinct vertices")
            if loop.min() < 0 or loop.max() >= nv:
                raise MeshError(f"face {f}: vertex index out of range")
        for t, c in enumerate(cells):
            if len(c) < 4 or len(set(c.tolist())) != len(c):
                raise MeshError(f"cell {t}: needs at least 4 distinct faces")
            if c.min() < 0 or c.max() >= len(faces):
                raise MeshError(f"cell {t}: face index out of range")

        edge_id = {}
        face_edges = []
        for loop in faces:
            ids = []
            for a, b in zip(loop, np.roll(loop, -1)):
                key = (min(a, b), max(a, b))
                ids.append(edge_id.setdefault(key, len(edge_id)))
            face_edges.append(np.array(ids, dtype=int))
        edges = np.array(sorted(edge_id, key=edge_id.get), dtype=int).reshape(-1, 2)

        used_v = np.zeros(nv, bool)
        used_v[np.concatenate(faces)] = True
        if not used_v.all():
            raise MeshError(f"vertex {int(np.argmin(used_v))}: dangling (in no face)")
        face_use = np.zeros(len(faces), int)
        for c in cells:
            face_use[c] += 1
        if (face_use == 0).any():
            raise MeshError(f"face {int(np.argmin(face_use))}: dangling (in no cell)")
        if (face_use > 2).any():
            raise MeshError(f"face {int(np.argmax(face_use))}: shared by more than two cells")

        lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
        if (lengths <= 0).any():
            raise MeshError(f"edge {int(np.argmin(lengths))}: zero length")
        tangents = (vertices[edges[:, 1]] - vertices[edges[:, 0]]) / lengths[:, None]

        normals, centers, diams, areas, tframes = [], [], [], [], []
        for f, loop in enumerate(faces):
            pts = vertices[loop]
            nvec = newell_normal(pts)
            area = np.linalg.norm(nvec)
            diam = max(np.linalg.norm(p - q) for p in pts for q in pts)
            if area <= 1e-14 * diam**2:
                raise MeshError(f"face {f}: degenerate (zero area)")
            n = nvec / area
            center = pts.mean(axis=0)
            dev = np.abs((pts - center) @ n).max()
            if dev > PLANARITY_TOL * diam:
                raise MeshError(f"face {f}: not planar (deviation {dev:.3e}, h_F {diam:.3e})")
            normals.append(n)
            centers.append(center)
            diams.append(diam)
            areas.append(area)
            tframes.append(face_frame(n))
        normals = np.array(normals)
        centers = np.array(centers)

        face_edge_sign = []
        for f, ids in enumerate(face_edges):
            nfe = np.cross(normals[f], tangents[ids])
            mids = 0.5 * (vertices[edges[ids, 0]] + vertices[edges[ids, 1]])
            s = np.einsum("ei,ei->e", mids - centers[f], nfe)
            face_edge_sign.append(np.where(s > 0, 1, -1))

        cell_center, cell_diam, cell_sign = [], [], []
        for t, c in enumerate(cells):
            count = {}
            for f in c:
                for e in face_edges[f]:
                    count[e] = count.get(e, 0) + 1
            bad = [e for e, n in count.items() if n != 2]
            if bad:
                raise MeshError(f"cell {t}: not watertight at edge {bad[0]}")
            verts = np.unique(np.concatenate([faces[f] for f in c]))
            pts = vertices[verts]
            xt = pts.mean(axis=0)
            diff = pts[:, None] - pts[None]
            cell_center.append(xt)
            cell_diam.append(np.sqrt((diff**2).sum(-1).max()))
            s = np.einsum("fi,fi->f", centers[c] - xt, normals[c])
            if (np.abs(s) <= 1e-12 * cell_diam[-1]).any():
                raise MeshError(f"cell {t}: centroid lies on a face plane")
            cell_sign.append(np.where(s > 0, 1, -1))

        mesh = cls(
            vertices=vertices,
            faces=faces,
            cells=cells,
            edges=edges,
            face_edges=tuple(face_edges),
            face_edge_sign=tuple(face_edge_sign),
            cell_face_sign=tuple(cell_sign),
            face_normal=normals,
            face_tangents=np.array(tframes),
            face_center=centers,
            face_diameter=np.array(diams),
            face_area=np.array(areas),
            edge_normals=np.array([edge_frame(t) for t in tangents]).reshape(-1, 2, 3),
            cell_center=np.array(cell_center),
            cell_diameter=np.array(cell_diam),
        )
        for f, ts in enumerate(mesh.face_cells):
            if len(ts) == 2:
                s = [mesh.cell_face_sign[t][list(mesh.cells[t]).index(f)] for t in ts]
                if s[0] == s[1]:
                    raise MeshError(f"face {f}: both neighbouring cells claim the same side")
        return mesh

    def transformed(self, fn) -> "Mesh":
        """Mesh with vertices mapped by ``fn`` (must keep faces planar)."""
        return Mesh.from_arrays(fn(self.vertices), self.faces, self.cells)

    def submesh(self, t) -> "Mesh":
        """One-cell mesh holding cell ``t``."""
        faces = [self.faces[f] for f in self.cells[t]]
        verts = np.unique(np.concatenate(faces))
        remap = {int(v): i for i, v in enumerate(verts)}
        loops = [[remap[int(v)] for v in loop] for loop in faces]
        return Mesh.from_arrays(self.vertices[verts], loops, [list(range(len(loops)))])


# I/O ------------------------------------------------------------------------------
def load_mesh(content) -> Mesh:
    """Parse the JSON mesh format from bytes, text or an already-decoded dict."""
    if isinstance(content, (bytes, bytearray)):
        content = content.decode()
    data = json.loads(content) if isinstance(content, str) else content
    try:
        return Mesh.from_arrays(data["vertices"], data["faces"], data["cells"])
    except KeyError as exc:
        raise MeshError(f"missing key {exc.args[0]!r} in mesh file") from None


def read_mesh(path) -> Mesh:
    with open(path, "rb") as fh:
        return load_mesh(fh.read())


def dump_mesh(mesh: Mesh) -> str:
    data = {
        "vertices": mesh.vertices.tolist(),
        "faces": [loop.tolist() for loop in mesh.faces],
        "cells": [c.tolist() for c in mesh.cells],
    }
    return json.dumps(data)


def write_mesh(mesh: Mesh, path):
    with open(path, "w") as fh:
        fh.write(dump_mesh(mesh))


# generators -----------------------------------------------------------------------
def build_cartesian_mesh(n: int, lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> Mesh:
    """Uniform ``n x n x n`` hexahedral mesh of an axis-aligned box."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    grid = [np.linspace(lo[a], hi[a], n + 1) for a in range(3)]
    vid = lambda i, j, l: i + (n + 1) * (j + (n + 1) * l)  # noqa: E731
    vertices = np.array([[grid[0][i], grid[1][j], grid[2][l]]
                         for l, j, i in product(range(n + 1), repeat=3)])
    faces, face_id = [], {}

    def add(key, loop):
        face_id[key] = len(faces)
        faces.append(loop)

    for l, j, i in product(range(n + 1), repeat=3):
        if j < n and l < n:
            add(("x", i, j, l), [vid(i, j, l), vid(i, j + 1, l), vid(i, j + 1, l + 1), vid(i, j, l + 1)])
        if i < n and l < n:
            add(("y", i, j, l), [vid(i, j, l), vid(i, j, l + 1), vid(i + 1, j, l + 1), vid(i + 1, j, l)])
        if i < n and j < n:
            add(("z", i, j, l), [vid(i, j, l), vid(i + 1, j, l), vid(i + 1, j + 1, l), vid(i, j + 1, l)])
    cells = []
    for l, j, i in product(range(n), repeat=3):
        cells.append([face_id[k] for k in (
            ("x", i, j, l), ("x", i + 1, j, l), ("y", i, j, l),
            ("y", i, j + 1, l), ("z", i, j, l), ("z", i, j, l + 1))])
    return Mesh.from_arrays(vertices, faces, cells)


def reference_tetrahedron() -> Mesh:
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    faces = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]
    return Mesh.from_arrays(verts, faces, [[0, 1, 2, 3]])


def perturbed_hexahedron(seed: int = 0, amount: float = 0.15) -> Mesh:
    """Unit cube under a random projective map, which keeps faces planar."""
    rng = np.random.default_rng(seed)
    a = np.eye(3) + amount * rng.uniform(-1, 1, (3, 3))
    b = amount * rng.uniform(-1, 1, 3)
    c = 0.5 * amount * rng.uniform(-1, 1, 3)

    def fn(x):
        return (x @ a.T + b) / (1.0 + x @ c)[:, None]

    return build_cartesian_mesh(1).transformed(fn)


def rotation_matrix(seed: int = 0) -> np.ndarray:
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    return q * np.sign(np.linalg.det(q))


# validation report ------------------------------------------------------------------
def validate_mesh(mesh: Mesh) -> list:
    """Per-cell report: Euler characteristic, planarity, orientation checksum."""
    report = []
    for t, faces in enumerate(mesh.cells):
        nv = len(mesh.cell_vertices[t])
        ne = len(mesh.cell_edges[t])
        euler = nv - ne + len(faces)
        planarity = max(
            float(np.abs((mesh.vertices[mesh.faces[f]] - mesh.face_center[f]) @ mesh.face_normal[f]).max()
                  / mesh.face_diameter[f])
            for f in faces
        )
        flux = (mesh.cell_face_sign[t][:, None] * mesh.face_area[faces, None]
                * mesh.face_normal[faces]).sum(axis=0)
        h = mesh.cell_diameter[t]
        dist = np.abs(np.einsum("fi,fi->f", mesh.face_center[faces] - mesh.cell_center[t],
                                mesh.face_normal[faces])).min()
        report.append({
            "cell": t,
            "vertices": nv,
            "edges": ne,
            "faces": len(faces),
            "euler": euler,
            "flagged": euler != 2,
            "planarity": planarity,
            "orientation_checksum": float(np.linalg.norm(flux) / h**2),
            "regularity": float(dist / h),
        })
    return report

"""Structured triangulation of the unit disk.

The mesh is built ring by ring: ring ``i`` (radius ``i / n_rings``) carries
``10 * i`` equally spaced vertices and consecutive rings are stitched by
merging their angular sequences. Outer-ring vertices are projected onto the
unit circle so boundary normals are not polluted by float drift.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, TopologyError

POINTS_PER_RING = 10
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class DiskMesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counterclockwise
    boundary_vertices: np.ndarray  # sorted vertex indices on |x| = 1
    h_target: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs."""
        if "edges" not in self._cache:
            t = self.triangles
            e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            self._cache["edges"] = np.unique(np.sort(e, axis=1), axis=0)
        return self._cache["edges"]

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def mean_edge_length(self) -> float:
        return float(self.edge_lengths().mean())

    def write_text(self, path) -> None:
        """Dump as plain text: vertex count, vertices, triangle count, triangles."""
        with open(path, "w") as fh:
            fh.write(f"{self.n_vertices}\n")
            for x, y in self.vertices.tolist():
                fh.write(f"{x!r} {y!r}\n")
            fh.write(f"{self.n_triangles}\n")
            for a, b, c in self.triangles:
                fh.write(f"{a} {b} {c}\n")


def _stitch(inner, outer):
    """Triangulate the strip between two closed rings of vertex indices."""
    tris = []
    if len(inner) == 1:
        c = inner[0]
        n = len(outer)
        for k in range(n):
            tris.append((c, outer[k], outer[(k + 1) % n]))
        return tris
    na, nb = len(inner), len(outer)
    j = k = 0
    while j < na or k < nb:
        advance_outer = k < nb and (j >= na or (k + 1) * na <= (j + 1) * nb)
        if advance_outer:
            tris.append((inner[j % na], outer[k % nb], outer[(k + 1) % nb]))
            k += 1
        else:
            tris.append((inner[j % na], outer[k % nb], inner[(j + 1) % na]))
            j += 1
    return tris


def build_disk_mesh(radial_resolution: int) -> DiskMesh:
    """Quasi-uniform triangulation of the unit disk with mesh size ~ 2/radial_resolution."""
    if int(radial_resolution) != radial_resolution or radial_resolution < 4:
        raise ConfigurationError(f"radial_resolution must be an integer >= 4, got {radial_resolution}")
    n_rings = int(radial_resolution) // 2
    coords = [np.zeros((1, 2))]
    rings = [[0]]
    offset = 1
    for i in range(1, n_rings + 1):
        n = POINTS_PER_RING * i
        theta = 2.0 * np.pi * np.arange(n) / n
        r = i / n_rings
        coords.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
        rings.append(list(range(offset, offset + n)))
        offset += n
    vertices = np.concatenate(coords)

    tris = []
    for i in range(1, n_rings + 1):
        tris.extend(_stitch(rings[i - 1], rings[i]))
    triangles = np.array(tris, dtype=np.int64)

    # explicit projection of the outer ring
    outer = np.array(rings[-1])
    vertices[outer] /= np.linalg.norm(vertices[outer], axis=1)[:, None]

    p = vertices[triangles]
    area = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (
        p[:, 1, 1] - p[:, 0, 1]
    )
    flip = area < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    radius = np.linalg.norm(vertices, axis=1)
    boundary = np.flatnonzero(np.abs(radius - 1.0) <= BOUNDARY_TOL)
    return DiskMesh(vertices, triangles, boundary, 2.0 / radial_resolution)


def boundary_edges(mesh: DiskMesh) -> np.ndarray:
    """Boundary edges as an (n, 2) array chained into one counterclockwise loop.

    Each row ``(a, b)`` is oriented so the domain lies to the left, hence the
    outward normal of the edge is the tangent rotated clockwise.
    """
    if "boundary_edges" in mesh._cache:
        return mesh._cache["boundary_edges"]
    t = mesh.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if counts.max() > 2:
        raise TopologyError("edge shared by more than two triangles")
    bnd = directed[counts[inv] == 1]
    succ = {}
    for a, b in bnd:
        if a in succ:
            raise TopologyError("boundary vertex with two outgoing edges")
        succ[int(a)] = int(b)
    start = int(bnd[0, 0])
    loop = []
    a = start
    for _ in range(len(bnd)):
        b = succ[a]
        loop.append((a, b))
        a = b
        if a == start:
            break
    if len(loop) != len(bnd) or a != start:
        raise TopologyError("boundary is not a single closed loop")
    out = np.array(loop, dtype=np.int64)
    mesh._cache["boundary_edges"] = out
    return out


def boundary_normals(mesh: DiskMesh, edges: np.ndarray | None = None) -> np.ndarray:
    """Unit outward normals of the boundary edges."""
    if edges is None:
        edges = boundary_edges(mesh)
    d = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    n = np.column_stack([d[:, 1], -d[:, 0]])
    return n / np.linalg.norm(n, axis=1)[:, None]

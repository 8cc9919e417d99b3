"""Structured triangulations of a rectangle and their barycentric dual cells."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["StructuredTriMesh", "DualGeometry", "build_uniform", "dual_geometry", "write_mesh"]

# local edges of a triangle as (i, j, opposite)
_LOCAL_EDGES = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


@dataclass(frozen=True, eq=False)
class StructuredTriMesh:
    """Uniform triangulation of ``[x0, x1] x [y0, y1]`` with ``a`` cells per side.

    Vertices are numbered row by row, ``index = j * (a + 1) + i`` for the
    point ``(x0 + i dx, y0 + j dy)``.  Every cell is cut along its diagonal
    from the lower-left to the upper-right corner.
    """

    domain: tuple
    a: int
    vertices: np.ndarray
    triangles: np.ndarray

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def spacing(self):
        (x0, x1), (y0, y1) = self.domain
        return (x1 - x0) / self.a, (y1 - y0) / self.a

    @property
    def h(self):
        """Largest element diameter (the cell diagonal)."""
        return float(np.hypot(*self.spacing))

    @property
    def area(self):
        (x0, x1), (y0, y1) = self.domain
        return (x1 - x0) * (y1 - y0)

    @cached_property
    def triangle_areas(self):
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def basis_gradients(self):
        """(n_triangles, 3, 2) constant gradients of the three hat functions."""
        p = self.vertices[self.triangles]
        grads = np.empty((self.n_triangles, 3, 2))
        two_area = 2 * self.triangle_areas
        for loc in range(3):
            q, r = p[:, (loc + 1) % 3], p[:, (loc + 2) % 3]
            # rotate the opposite edge by -90 degrees
            grads[:, loc, 0] = (q[:, 1] - r[:, 1]) / two_area
            grads[:, loc, 1] = (r[:, 0] - q[:, 0]) / two_area
        return grads

    def gradient(self, values):
        """Per-triangle gradient of the P1 function with the given nodal values."""
        values = np.asarray(values, dtype=float)
        return np.einsum("tk,tkd->td", values[self.triangles], self.basis_gradients)

    def grid(self, values):
        """Nodal values reshaped to ``(a + 1, a + 1)``, one row per grid line y = const."""
        return np.asarray(values).reshape(self.a + 1, self.a + 1)


def build_uniform(domain, a):
    """Uniform mesh of the rectangle ``((x0, x1), (y0, y1))`` with ``2 a**2`` triangles."""
    a = int(a)
    if a < 1:
        raise ValueError(f"need at least one subdivision per side, got a={a}")
    (x0, x1), (y0, y1) = ((float(u), float(v)) for u, v in domain)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {domain!r}")
    xs = np.linspace(x0, x1, a + 1)
    ys = np.linspace(y0, y1, a + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(a), np.arange(a), indexing="ij")
    v00 = (j * (a + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + a + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * a * a, 3), dtype=np.int64)
    triangles[0::2], triangles[1::2] = lower, upper
    return StructuredTriMesh(domain=((x0, x1), (y0, y1)), a=a, vertices=vertices, triangles=triangles)


@dataclass(frozen=True, eq=False)
class DualGeometry:
    """Barycentric dual cells of a triangulation.

    The interface between the cells of vertices ``i`` and ``j`` inside a
    triangle ``K`` is the segment from the midpoint of edge ``ij`` to the
    barycenter of ``K``.  Interfaces are stored once per (triangle, local
    edge) with the orientation ``i -> j``; ``normal`` is the unit normal
    exterior to cell ``i``, so the reversed pair uses ``-normal``.
    """

    cell_measure: np.ndarray
    tri: np.ndarray
    i: np.ndarray
    j: np.ndarray
    length: np.ndarray
    normal: np.ndarray
    adjacency: tuple

    def segments(self, i, j):
        """List of ``(triangle, measure, normal exterior to D_i)`` for the ordered pair."""
        out = []
        for sign, mask in ((1.0, (self.i == i) & (self.j == j)), (-1.0, (self.i == j) & (self.j == i))):
            for e in np.flatnonzero(mask):
                out.append((int(self.tri[e]), float(self.length[e]), sign * self.normal[e]))
        return out


def dual_geometry(mesh):
    tris = mesh.triangles
    p = mesh.vertices[tris]
    bary = p.mean(axis=1)
    areas = mesh.triangle_areas
    if np.any(areas <= 0):
        raise ValueError("mesh has triangles with nonpositive signed area")

    cell = np.zeros(mesh.n_vertices)
    np.add.at(cell, tris.ravel(), np.repeat(areas / 3, 3))

    parts = []
    for li, lj, _ in _LOCAL_EDGES:
        pi, pj = p[:, li], p[:, lj]
        seg = bary - 0.5 * (pi + pj)
        length = np.hypot(seg[:, 0], seg[:, 1])
        nrm = np.column_stack([seg[:, 1], -seg[:, 0]]) / length[:, None]
        flip = np.einsum("td,td->t", nrm, pj - pi) < 0
        nrm[flip] *= -1
        parts.append((tris[:, li], tris[:, lj], length, nrm))
    n_tri = mesh.n_triangles
    tri_idx = np.tile(np.arange(n_tri), 3)
    ii = np.concatenate([q[0] for q in parts])
    jj = np.concatenate([q[1] for q in parts])
    length = np.concatenate([q[2] for q in parts])
    normal = np.concatenate([q[3] for q in parts])

    pairs = np.unique(np.sort(np.column_stack([ii, jj]), axis=1), axis=0)
    nbrs = [[] for _ in range(mesh.n_vertices)]
    for u, v in pairs:
        nbrs[u].append(int(v))
        nbrs[v].append(int(u))
    adjacency = tuple(np.array(sorted(n), dtype=np.int64) for n in nbrs)
    return DualGeometry(cell_measure=cell, tri=tri_idx, i=ii, j=jj, length=length,
                        normal=normal, adjacency=adjacency)


def write_mesh(mesh, path):
    """Plain-text dump: vertex count, ``x y`` lines, triangle count, index triples."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"{mesh.n_triangles}\n")
        for t in mesh.triangles:
            fh.write(" ".join(str(int(v)) for v in t) + "\n")

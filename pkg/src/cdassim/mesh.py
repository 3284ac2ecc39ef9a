"""Structured triangulations of the unit square with alternating diagonals.

The mesh is the uniform n-by-n grid of square cells, each split into two
triangles by one diagonal whose direction alternates in a checkerboard
pattern. Full connectivity (interior faces with both incident triangles,
boundary edges with owner and outward normal) is precomputed as numpy
arrays so assembly can run vectorized. Metric data (areas, edge lengths)
is stored in closed form from the grid structure, which keeps the exact
invariants of the uniform mesh free of rounding noise.
"""

import math

import numpy as np

INFLOW = -1
TANGENTIAL = 0
OUTFLOW = 1

_CLASS_NAMES = {INFLOW: "inflow", TANGENTIAL: "tangential", OUTFLOW: "outflow"}


class Mesh:
    """Uniform alternating-diagonal triangulation of the unit square.

    Attributes
    ----------
    n : int
        Cells per side.
    h : float
        Mesh size, the maximal element diameter sqrt(2)/n.
    coords : (N, 2) float array
        Node coordinates; node (ix, iy) has index iy*(n+1) + ix.
    triangles : (T, 3) int array
        Vertex indices, counterclockwise. The two triangles of cell
        (i, j) are stored at 2*(j*n + i) and 2*(j*n + i) + 1.
    tri_areas : (T,) float array
        Element areas, (1/n)^2 / 2 for every element.
    face_nodes, face_left, face_right, face_length, face_normal
        Interior face connectivity. The unit normal points from the
        left triangle into the right one.
    bedge_nodes, bedge_owner, bedge_length, bedge_normal
        Boundary edge connectivity with outward unit normals.
    boundary_class : (B,) int array or None
        Per-edge INFLOW/TANGENTIAL/OUTFLOW labels, set by
        classify_boundary.
    """

    def __init__(self, n: int):
        if n < 2:
            raise ValueError(f"mesh needs at least 2 cells per side, got n={n}")
        self.n = int(n)
        self.h = math.sqrt(2.0) / n
        self.cell_width = 1.0 / n

        self._build_nodes()
        self._build_triangles()
        self._build_faces()
        self.boundary_class = None
        self._barycenters = None

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def _build_nodes(self) -> None:
        n = self.n
        side = np.arange(n + 1, dtype=float) / n
        xx, yy = np.meshgrid(side, side)  # row index = iy
        self.coords = np.column_stack([xx.ravel(), yy.ravel()])

    def _build_triangles(self) -> None:
        n = self.n
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        ii = ii.ravel()
        jj = jj.ravel()  # cell (i, j), flattened j-major: cell index j*n + i

        a = jj * (n + 1) + ii          # lower-left
        b = jj * (n + 1) + ii + 1      # lower-right
        c = (jj + 1) * (n + 1) + ii + 1  # upper-right
        d = (jj + 1) * (n + 1) + ii    # upper-left

        even = (ii + jj) % 2 == 0
        tris = np.empty((2 * n * n, 3), dtype=np.int64)
        # (i+j) even: "/" diagonal a-c; odd: "\" diagonal b-d
        tris[0::2] = np.where(even[:, None],
                              np.column_stack([a, b, c]),
                              np.column_stack([a, b, d]))
        tris[1::2] = np.where(even[:, None],
                              np.column_stack([a, c, d]),
                              np.column_stack([b, c, d]))
        self.triangles = tris
        self.tri_areas = np.full(len(tris), self.cell_width ** 2 / 2.0)

    def _build_faces(self) -> None:
        n = self.n
        tris = self.triangles
        num_tri = len(tris)

        # Directed edges in counterclockwise order, triangle-major.
        directed = np.stack(
            [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1
        ).reshape(-1, 2)
        owner = np.repeat(np.arange(num_tri), 3)
        key = np.sort(directed, axis=1)

        order = np.lexsort((key[:, 1], key[:, 0]))
        sorted_key = key[order]
        same = np.all(sorted_key[1:] == sorted_key[:-1], axis=1)
        first_of_pair = np.flatnonzero(same)

        # lexsort is stable, so within a pair the lower triangle index
        # comes first; that one is the "left" triangle and the stored
        # endpoints follow its counterclockwise direction.
        left_pos = order[first_of_pair]
        right_pos = order[first_of_pair + 1]
        self.face_nodes = directed[left_pos]
        self.face_left = owner[left_pos]
        self.face_right = owner[right_pos]

        single = np.ones(len(order), dtype=bool)
        single[first_of_pair] = False
        single[first_of_pair + 1] = False
        bpos = order[single]
        self.bedge_nodes = directed[bpos]
        self.bedge_owner = owner[bpos]

        # Structural lengths: a face is a cell diagonal iff its endpoints
        # differ in both grid indices; boundary edges are always axis edges.
        ix = self.face_nodes % (n + 1)
        iy = self.face_nodes // (n + 1)
        diag = (ix[:, 0] != ix[:, 1]) & (iy[:, 0] != iy[:, 1])
        self.face_length = np.where(diag, math.sqrt(2.0) / n, self.cell_width)
        self.bedge_length = np.full(len(self.bedge_nodes), self.cell_width)

        self.face_normal = self._right_normals(self.face_nodes)
        self.bedge_normal = self._right_normals(self.bedge_nodes)

    def _right_normals(self, edge_nodes: np.ndarray) -> np.ndarray:
        """Unit normals to the right of each directed edge (out of the
        counterclockwise triangle the direction was taken from)."""
        d = self.coords[edge_nodes[:, 1]] - self.coords[edge_nodes[:, 0]]
        length = np.hypot(d[:, 0], d[:, 1])
        return np.column_stack([d[:, 1] / length, -d[:, 0] / length])

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.coords)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def tri_coords(self) -> np.ndarray:
        """Vertex coordinates per element, shape (T, 3, 2)."""
        return self.coords[self.triangles]

    def barycenters(self) -> np.ndarray:
        """Element barycenters, shape (T, 2); cached."""
        if self._barycenters is None:
            self._barycenters = self.tri_coords().mean(axis=1)
        return self._barycenters


def build_mesh(n: int) -> Mesh:
    """Build the n-by-n alternating-diagonal triangulation of the unit square.

    Parameters
    ----------
    n : int
        Cells per side, at least 2.
    """
    return Mesh(n)


def classify_boundary(mesh: Mesh, beta) -> Mesh:
    """Label boundary edges as inflow/outflow/tangential for a convection field.

    The labels are exact for axis-aligned beta because boundary normals
    have exact 0/±1 components. Stores the labels on the mesh and
    returns it.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (2,) or not np.all(np.isfinite(beta)):
        raise ValueError(f"beta must be a finite 2-vector, got {beta!r}")
    if beta[0] == 0.0 and beta[1] == 0.0:
        raise ValueError("beta = (0, 0) gives no convection direction to classify by")

    s = mesh.bedge_normal @ beta
    mesh.boundary_class = np.where(s > 0, OUTFLOW, np.where(s < 0, INFLOW, TANGENTIAL))
    return mesh


def write_mesh_dump(mesh: Mesh, path) -> None:
    """Write the plain-text mesh dump: header "n nodes triangles", then
    node lines "idx x y", then triangle lines "idx v0 v1 v2"."""
    lines = [f"{mesh.n} {mesh.num_nodes} {mesh.num_triangles}"]
    for i, (x, y) in enumerate(mesh.coords):
        lines.append(f"{i} {float(x)!r} {float(y)!r}")
    for t, (v0, v1, v2) in enumerate(mesh.triangles):
        lines.append(f"{t} {v0} {v1} {v2}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")

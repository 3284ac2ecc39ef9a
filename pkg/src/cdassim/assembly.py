"""Bilinear forms and load vectors over the P1 nodal basis.

Assembles the convection-diffusion form with its boundary consistency
term, the gradient-jump penalty on interior faces, the dual stabilizer,
and the scaled data-fit mass matrix on the measurement region.  All
P1 integrals with constant coefficients use closed forms; load vectors
use a fixed 6-point triangle rule exact to degree 4.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp


class EmptyRegionError(RuntimeError):
    """Raised when no element barycenter falls inside a region."""


# ============================================================
# Regions
# ============================================================

@dataclass(frozen=True)
class Disk:
    """Circular region given by center and radius."""

    center: Tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    def contains(self, x, y):
        dx = np.asarray(x) - self.center[0]
        dy = np.asarray(y) - self.center[1]
        return dx * dx + dy * dy <= self.radius**2

    def y_interval(self):
        lo = max(0.0, self.center[1] - self.radius)
        hi = min(1.0, self.center[1] + self.radius)
        return lo, hi


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle (x_lo, x_hi) x (y_lo, y_hi)."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError("rectangle bounds must satisfy lo < hi")
        if self.x_hi <= 0 or self.x_lo >= 1 or self.y_hi <= 0 or self.y_lo >= 1:
            raise ValueError("rectangle does not meet the unit square")

    def contains(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return (self.x_lo <= x) & (x <= self.x_hi) & (self.y_lo <= y) & (y <= self.y_hi)

    def y_interval(self):
        return max(0.0, self.y_lo), min(1.0, self.y_hi)


@dataclass(frozen=True)
class RectangleUnion:
    """Union of axis-aligned rectangles."""

    parts: Tuple[Rectangle, ...]

    def __post_init__(self):
        if len(self.parts) == 0:
            raise ValueError("union needs at least one rectangle")

    def contains(self, x, y):
        inside = self.parts[0].contains(x, y)
        for part in self.parts[1:]:
            inside = inside | part.contains(x, y)
        return inside

    def y_interval(self):
        intervals = [part.y_interval() for part in self.parts]
        return min(lo for lo, _ in intervals), max(hi for _, hi in intervals)


RegionSpec = Union[Disk, Rectangle, RectangleUnion]


# ============================================================
# Problem data
# ============================================================

@dataclass(frozen=True)
class ProblemConfig:
    """Coefficients and constants of the stabilized formulation."""

    mu: float
    beta: Tuple[float, float]
    gamma: float = 1e-5
    gamma_star: float = 1.0
    zeta: float = 2.0
    omega: Optional[RegionSpec] = None

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValueError("mu must be positive")
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (2,) or not np.all(np.isfinite(beta)):
            raise ValueError("beta must be a finite 2-vector")
        if not np.linalg.norm(beta) > 0:
            raise ValueError("beta must be nonzero")
        if not 0.0 <= self.zeta <= 2.0:
            raise ValueError("zeta must lie in [0, 2]")

    @property
    def beta_norm(self):
        return float(np.hypot(self.beta[0], self.beta[1]))


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form solution with pointwise u, gradient, and Laplacian."""

    kind: str
    u: Callable = field(repr=False)
    grad: Callable = field(repr=False)
    lap: Callable = field(repr=False)

    def source(self, config):
        """Right-hand side f = -mu lap(u) + beta . grad(u)."""
        b1, b2 = config.beta

        def f(x, y):
            gx, gy = self.grad(x, y)
            return -config.mu * self.lap(x, y) + b1 * gx + b2 * gy

        return f


def product_sine():
    """u = 2 sin(5 pi x) sin(5 pi y), normalized to unit L2 norm."""
    c = 5.0 * np.pi

    def u(x, y):
        return 2.0 * np.sin(c * x) * np.sin(c * y)

    def grad(x, y):
        return (
            2.0 * c * np.cos(c * x) * np.sin(c * y),
            2.0 * c * np.sin(c * x) * np.cos(c * y),
        )

    def lap(x, y):
        return -2.0 * c**2 * u(x, y)

    return ExactSolution("product_sine", u, grad, lap)


def layer():
    """u = sin(3 pi x) + tanh(100 (y - 1/2)), a sharp interior layer."""
    c = 3.0 * np.pi

    def u(x, y):
        return np.sin(c * x) + np.tanh(100.0 * (y - 0.5))

    def grad(x, y):
        t = np.tanh(100.0 * (y - 0.5))
        return (c * np.cos(c * x), 100.0 * (1.0 - t * t))

    def lap(x, y):
        t = np.tanh(100.0 * (y - 0.5))
        return -c * c * np.sin(c * x) - 20000.0 * t * (1.0 - t * t)

    return ExactSolution("layer", u, grad, lap)


def linear(a, b, c):
    """u = a + b x + c y, in the kernel of every stabilizer."""

    def u(x, y):
        return a + b * x + c * np.asarray(y)

    def grad(x, y):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.full(shape, float(b)), np.full(shape, float(c))

    def lap(x, y):
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    return ExactSolution("linear", u, grad, lap)


# ============================================================
# Element geometry
# ============================================================

def element_gradients(mesh):
    """Constant P1 basis gradients per triangle, shape (T, 3, 2)."""
    pts = mesh.tri_coords()
    edges = pts[:, [2, 0, 1]] - pts[:, [1, 2, 0]]  # edge opposite each vertex
    grads = np.stack([-edges[..., 1], edges[..., 0]], axis=-1)
    return grads / (2.0 * mesh.tri_areas)[:, None, None]


def _triplets_to_csr(rows, cols, data, n):
    """Sum triplets into CSR with a stable, reproducible reduction.

    Duplicates are merged by a stable lexicographic sort so that equal
    contribution sequences reduce to bitwise-equal entries; symmetric
    local blocks therefore assemble into exactly symmetric matrices.
    """
    r = rows.ravel()
    c = cols.ravel()
    d = data.ravel()
    order = np.lexsort((c, r))
    r, c, d = r[order], c[order], d[order]
    first = np.empty(len(r), dtype=bool)
    first[0] = True
    first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    starts = np.nonzero(first)[0]
    merged = np.add.reduceat(d, starts)
    return sp.csr_matrix((merged, (r[starts], c[starts])), shape=(n, n))


def _element_scatter(mesh, local):
    """Scatter-add (T, 3, 3) element blocks into a CSR matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1)
    cols = np.tile(tri, (1, 3))
    return _triplets_to_csr(rows, cols, local, mesh.num_nodes)


def _stiffness(mesh):
    grads = element_gradients(mesh)
    local = np.einsum("tid,tjd,t->tij", grads, grads, mesh.tri_areas)
    return _element_scatter(mesh, local)


# ============================================================
# Bilinear forms
# ============================================================

def assemble_a(mesh, config):
    """Convection-diffusion form a_h with its boundary consistency term.

    Entry (i, j) is
    (beta . grad phi_j, phi_i) + mu (grad phi_j, grad phi_i)
    - <mu grad phi_j . n, phi_i> on the outer boundary, with the
    gradient trace taken from the owner triangle.

    Parameters
    ----------
    mesh : Mesh
        Triangulation of the unit square.
    config : ProblemConfig
        Supplies mu and beta.

    Returns
    -------
    scipy.sparse.csr_matrix
        Square matrix of size num_nodes.
    """
    grads = element_gradients(mesh)
    beta = np.asarray(config.beta, dtype=float)

    bdotg = grads @ beta  # (T, 3)
    conv = np.broadcast_to(
        (bdotg * (mesh.tri_areas / 3.0)[:, None])[:, None, :],
        (mesh.num_triangles, 3, 3),
    )
    stiff = np.einsum("tid,tjd,t->tij", grads, grads, config.mu * mesh.tri_areas)
    A = _element_scatter(mesh, conv + stiff)

    # boundary consistency: rows are the edge endpoints, columns the
    # three basis functions of the owner triangle
    owner = mesh.bedge_owner
    gn = np.einsum("ejd,ed->ej", grads[owner], mesh.bedge_normal)  # (E, 3)
    coef = -config.mu * 0.5 * mesh.bedge_length  # integral of an endpoint hat
    data = np.repeat((coef[:, None] * gn)[:, None, :], 2, axis=1)  # (E, 2, 3)
    rows = np.repeat(mesh.bedge_nodes, 3, axis=1)
    cols = np.tile(mesh.triangles[owner], (1, 2)).reshape(-1, 2, 3)
    A = A + _triplets_to_csr(rows, cols, data, mesh.num_nodes)
    return A.tocsr()


def assemble_s_Omega(mesh, config):
    """Gradient-jump penalty on interior faces.

    Each face F contributes gamma h_F^2 (mu + |beta| h_F) times the
    outer product of the normal-gradient jump vectors of the incident
    basis functions; the extra h_F relative to the integrand is the
    face length.

    Returns
    -------
    scipy.sparse.csr_matrix
        Symmetric positive semidefinite matrix of size num_nodes.
    """
    grads = element_gradients(mesh)
    hF = mesh.face_length
    weight = config.gamma * hF**2 * (config.mu + config.beta_norm * hF)

    gl = np.einsum("fjd,fd->fj", grads[mesh.face_left], mesh.face_normal)
    gr = np.einsum("fjd,fd->fj", grads[mesh.face_right], mesh.face_normal)

    # combine the patch's basis functions into one jump per distinct
    # node: the two face endpoints plus the two opposite vertices
    nodes_l = mesh.triangles[mesh.face_left]
    nodes_r = mesh.triangles[mesh.face_right]
    e0 = mesh.face_nodes[:, 0][:, None]
    e1 = mesh.face_nodes[:, 1][:, None]
    opp_l = (nodes_l != e0) & (nodes_l != e1)
    opp_r = (nodes_r != e0) & (nodes_r != e1)
    nodes = np.column_stack([
        mesh.face_nodes,
        nodes_l[opp_l],
        nodes_r[opp_r],
    ])  # (F, 4)
    jumps = np.column_stack([
        np.sum(gl * (nodes_l == e0), axis=1) - np.sum(gr * (nodes_r == e0), axis=1),
        np.sum(gl * (nodes_l == e1), axis=1) - np.sum(gr * (nodes_r == e1), axis=1),
        np.sum(gl * opp_l, axis=1),
        -np.sum(gr * opp_r, axis=1),
    ])  # (F, 4)

    local = weight[:, None, None] * jumps[:, :, None] * jumps[:, None, :]
    rows = np.repeat(nodes, 4, axis=1)
    cols = np.tile(nodes, (1, 4))
    return _triplets_to_csr(rows, cols, local, mesh.num_nodes)


def assemble_s_star(mesh, config):
    """Dual stabilizer gamma_star (boundary mass + stiffness + jumps).

    The boundary weight is |beta| + mu / h_E per edge, applied through
    the exact P1 edge mass matrix; the volume terms are the global
    stiffness scaled by mu and the same jump penalty as the primal
    stabilizer.

    Returns
    -------
    scipy.sparse.csr_matrix
        Symmetric positive semidefinite matrix of size num_nodes.
    """
    hE = mesh.bedge_length
    coef = (config.beta_norm + config.mu / hE) * hE / 6.0
    block = np.array([[2.0, 1.0], [1.0, 2.0]])
    local = coef[:, None, None] * block
    rows = np.repeat(mesh.bedge_nodes, 2, axis=1)
    cols = np.tile(mesh.bedge_nodes, (1, 2))
    boundary = _triplets_to_csr(rows, cols, local, mesh.num_nodes)

    total = boundary + config.mu * _stiffness(mesh) + assemble_s_Omega(mesh, config)
    return (config.gamma_star * total).tocsr()


def included_elements(mesh, region):
    """Indices of elements whose barycenter lies in the region."""
    bary = mesh.barycenters()
    inside = region.contains(bary[:, 0], bary[:, 1])
    idx = np.nonzero(inside)[0]
    if idx.size == 0:
        raise EmptyRegionError("no element barycenter lies in the region")
    return idx


def assemble_mass(mesh, include=None):
    """P1 mass matrix, optionally restricted to a set of elements.

    Parameters
    ----------
    mesh : Mesh
    include : array of element indices, optional
        Defaults to all elements.

    Returns
    -------
    scipy.sparse.csr_matrix
    """
    if include is None:
        include = np.arange(mesh.num_triangles)
    block = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    local = mesh.tri_areas[include, None, None] * block
    tri = mesh.triangles[include]
    rows = np.repeat(tri, 3, axis=1)
    cols = np.tile(tri, (1, 3))
    return _triplets_to_csr(rows, cols, local, mesh.num_nodes)


def data_penalty_coefficient(mu, beta, h, zeta):
    """Scalar weight |beta| / h + mu h^(-zeta) of the data-fit term."""
    beta_norm = float(np.hypot(beta[0], beta[1]))
    return beta_norm / h + mu * h ** (-zeta)


def assemble_s_omega(mesh, config):
    """Scaled mass matrix on the measurement region.

    The region is approximated by the union of elements whose barycenter
    it contains; the scalar weight uses the global mesh size 1/n.

    Returns
    -------
    scipy.sparse.csr_matrix

    Raises
    ------
    EmptyRegionError
        If no element barycenter lies in config.omega.
    """
    if config.omega is None:
        raise ValueError("config.omega is required for the data-fit term")
    include = included_elements(mesh, config.omega)
    coef = data_penalty_coefficient(config.mu, config.beta, mesh.cell_width, config.zeta)
    return (coef * assemble_mass(mesh, include)).tocsr()


# ============================================================
# Right-hand sides
# ============================================================

# 6-point triangle rule, exact to degree 4 (weights sum to 1)
_QUAD_A = (0.445948490915965, 0.091576213509771)
_QUAD_W = (0.223381589678011, 0.109951743655322)
_BARY4 = np.array(
    [perm for a, _ in zip(_QUAD_A, _QUAD_W) for perm in (
        (1.0 - 2.0 * a, a, a), (a, 1.0 - 2.0 * a, a), (a, a, 1.0 - 2.0 * a))]
)
_W4 = np.repeat(_QUAD_W, 3)


def assemble_load(mesh, config, exact):
    """Load vector (f, phi_i) with f = -mu lap(u) + beta . grad(u).

    Uses the fixed degree-4 rule per element; exact when f is a
    polynomial of degree at most 3.

    Returns
    -------
    numpy.ndarray
        Vector of length num_nodes.
    """
    f = exact.source(config)
    pts = np.einsum("qk,tkd->tqd", _BARY4, mesh.tri_coords())
    fv = f(pts[..., 0], pts[..., 1])  # (T, q)
    local = mesh.tri_areas[:, None] * (fv * _W4) @ _BARY4  # (T, 3)
    F = np.zeros(mesh.num_nodes)
    np.add.at(F, mesh.triangles.ravel(), local.ravel())
    return F


def assemble_data_rhs(mesh, config, data_values):
    """Data-fit right-hand side s_omega(data, phi_i).

    Parameters
    ----------
    mesh : Mesh
    config : ProblemConfig
        Must carry the measurement region.
    data_values : dict
        Nodal values of the measured field, keyed by node index; must
        cover every node of every included element.

    Returns
    -------
    numpy.ndarray
        Vector S_omega . (data extended by zero).

    Raises
    ------
    ValueError
        If an included element has a node without a data value.
    """
    include = included_elements(mesh, config.omega)
    needed = np.unique(mesh.triangles[include])
    missing = [int(i) for i in needed if i not in data_values]
    if missing:
        raise ValueError(f"missing data values at nodes {missing[:5]}")
    full = np.zeros(mesh.num_nodes)
    for node, value in data_values.items():
        full[node] = value
    return assemble_s_omega(mesh, config) @ full

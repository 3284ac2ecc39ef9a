"""Crosswind-decay weight functions and all error functionals.

The weight phi = psi1 psi2 couples an exponential decay along the flow
with a crosswind cutoff that is 1 on a strip and decays at rate
(lambda sqrt(h))^-1 outside it.  The norm evaluators measure regional
L2 and H1 errors, the weighted triple norms of the convergence
estimates, and the stabilization norm of the discrete system.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .assembly import EmptyRegionError, element_gradients

DOWNSTREAM = "downstream"
UPSTREAM = "upstream"


class WeightConstructionError(RuntimeError):
    """Raised when the margin does not fit inside the data strip."""


@dataclass(frozen=True)
class WeightSpec:
    """Geometry of the weight: direction, decay constant, strip bounds."""

    direction: str
    lam: float
    y_ring_lo: float
    y_ring_hi: float
    omega_beta: Tuple[float, float]

    def __post_init__(self):
        if self.direction not in (DOWNSTREAM, UPSTREAM):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        lo, hi = self.omega_beta
        if not (lo < self.y_ring_lo < self.y_ring_hi < hi):
            raise ValueError("strip bounds must nest strictly inside omega_beta")


@dataclass(frozen=True)
class WeightField:
    """Pointwise evaluators of phi, grad phi, and |phi|."""

    spec: WeightSpec
    h: float

    def _psi2(self, y):
        y = np.asarray(y, dtype=float)
        inv = 1.0 / (self.spec.lam * math.sqrt(self.h))
        above = np.exp((self.spec.y_ring_hi - y) * inv)
        below = np.exp((y - self.spec.y_ring_lo) * inv)
        return np.where(
            y > self.spec.y_ring_hi, above,
            np.where(y >= self.spec.y_ring_lo, 1.0, below),
        )

    def abs_phi(self, x, y):
        return np.exp(-np.asarray(x, dtype=float)) * self._psi2(y)

    def phi(self, x, y):
        sign = 1.0 if self.spec.direction == DOWNSTREAM else -1.0
        return sign * self.abs_phi(x, y)

    def grad_phi(self, x, y):
        """Gradient of phi; one-sided from below on the two kink lines."""
        y = np.asarray(y, dtype=float)
        phi = self.phi(x, y)
        inv = 1.0 / (self.spec.lam * math.sqrt(self.h))
        dy_factor = np.where(
            y > self.spec.y_ring_hi, -inv,
            np.where(y > self.spec.y_ring_lo, 0.0, inv),
        )
        return -phi, dy_factor * phi


def build_weight(config, h: float, lam: float = 1.0) -> WeightField:
    """Construct the weight field for a mesh size and decay constant.

    The strip bounds move in from the y-interval swept by the data
    region by the margin 3 lambda sqrt(h) ln(1/h), so that the weight
    has decayed to h^3 at the interval's edge.

    Parameters
    ----------
    config : ProblemConfig
        Supplies beta (axis-aligned) and the data region omega.
    h : float
        Global mesh size 1/n.
    lam : float
        Crosswind decay constant.

    Returns
    -------
    WeightField

    Raises
    ------
    WeightConstructionError
        If the margin is at least half the strip width, which happens
        when the mesh is too coarse for the requested lambda.
    """
    if config.beta[1] != 0.0 or config.beta[0] == 0.0:
        raise ValueError("weight construction requires beta = (beta1, 0)")
    if config.omega is None:
        raise ValueError("config.omega is required to place the weight")
    direction = DOWNSTREAM if config.beta[0] > 0 else UPSTREAM
    y_lo, y_hi = config.omega.y_interval()
    margin = 3.0 * lam * math.sqrt(h) * math.log(1.0 / h)
    if margin >= 0.5 * (y_hi - y_lo):
        raise WeightConstructionError(
            f"margin {margin:.3f} does not fit in strip of width {y_hi - y_lo:.3f}; "
            "refine the mesh or lower lambda"
        )
    spec = WeightSpec(
        direction=direction, lam=lam,
        y_ring_lo=y_lo + margin, y_ring_hi=y_hi - margin,
        omega_beta=(y_lo, y_hi),
    )
    return WeightField(spec=spec, h=h)


# ============================================================
# Quadrature rules for error functionals
# ============================================================

# 7-point triangle rule, exact to degree 5 (weights sum to 1)
_BARY5 = np.array(
    [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)]
    + [perm for a in (0.470142064105115, 0.101286507323456) for perm in (
        (1.0 - 2.0 * a, a, a), (a, 1.0 - 2.0 * a, a), (a, a, 1.0 - 2.0 * a))]
)
_W5 = np.concatenate([
    [0.225],
    np.repeat([0.132394152788506, 0.125939180544827], 3),
])

# 3-point Gauss rule on [0, 1], exact to degree 5
_EDGE_T = np.array([0.5 * (1.0 - math.sqrt(0.6)), 0.5, 0.5 * (1.0 + math.sqrt(0.6))])
_EDGE_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def _region_elements(mesh, region):
    if region is None:
        return np.arange(mesh.num_triangles)
    bary = mesh.barycenters()
    idx = np.nonzero(region.contains(bary[:, 0], bary[:, 1]))[0]
    if idx.size == 0:
        raise EmptyRegionError("no element barycenter lies in the error region")
    return idx


def _element_points(mesh, include):
    pts = np.einsum("qk,tkd->tqd", _BARY5, mesh.tri_coords()[include])
    return pts[..., 0], pts[..., 1]


def l2_error(mesh, u_h, exact, region=None) -> float:
    """Regional L2 error of a nodal field against an exact solution.

    Elements are included when their barycenter lies in the region;
    region None means the whole domain.  Integrals use the fixed
    degree-5 rule.

    Returns
    -------
    float
    """
    include = _region_elements(mesh, region)
    x, y = _element_points(mesh, include)
    vals = np.einsum("tk,qk->tq", u_h[mesh.triangles[include]], _BARY5)
    diff = vals - exact.u(x, y)
    total = np.sum(mesh.tri_areas[include] * (diff**2 @ _W5))
    return float(math.sqrt(total))


def h1_semi_error(mesh, u_h, exact, region=None) -> float:
    """Regional H1-seminorm error; the discrete gradient is elementwise constant."""
    include = _region_elements(mesh, region)
    grads = element_gradients(mesh)[include]
    gh = np.einsum("tk,tkd->td", u_h[mesh.triangles[include]], grads)
    x, y = _element_points(mesh, include)
    gx, gy = exact.grad(x, y)
    diff = (gh[:, 0, None] - gx) ** 2 + (gh[:, 1, None] - gy) ** 2
    total = np.sum(mesh.tri_areas[include] * (diff @ _W5))
    return float(math.sqrt(total))


def triple_norm(mesh, v, weight: WeightField, config, direction: str) -> float:
    """Weighted triple norm of a nodal field.

    Downstream combines the weighted L2 norm, the mu-scaled weighted
    gradient, and the weighted outflow trace; upstream drops the
    gradient term and uses the inflow trace.

    Parameters
    ----------
    mesh : Mesh
    v : ndarray
        Nodal vector.
    weight : WeightField
        Must have been built for the same direction.
    config : ProblemConfig
    direction : str
        "downstream" or "upstream".

    Returns
    -------
    float

    Raises
    ------
    ValueError
        If the direction does not match the weight or the sign of beta1.
    """
    if direction not in (DOWNSTREAM, UPSTREAM):
        raise ValueError(f"unknown direction {direction!r}")
    if weight.spec.direction != direction:
        raise ValueError("weight was built for the other direction")
    if (config.beta[0] > 0) != (direction == DOWNSTREAM):
        raise ValueError("direction is inconsistent with the sign of beta1")

    beta = np.asarray(config.beta, dtype=float)
    beta_norm = config.beta_norm

    x, y = _element_points(mesh, np.arange(mesh.num_triangles))
    vals = np.einsum("tk,qk->tq", v[mesh.triangles], _BARY5)
    aphi = weight.abs_phi(x, y)
    total = beta_norm * np.sum(mesh.tri_areas * ((vals**2 * aphi) @ _W5))

    if direction == DOWNSTREAM:
        grads = element_gradients(mesh)
        gv = np.einsum("tk,tkd->td", v[mesh.triangles], grads)
        gv2 = np.sum(gv**2, axis=1)
        total += config.mu * np.sum(mesh.tri_areas * gv2 * (aphi @ _W5))

    sign = mesh.bedge_normal @ beta
    part = sign > 0 if direction == DOWNSTREAM else sign < 0
    if np.any(part):
        nodes = mesh.bedge_nodes[part]
        p0 = mesh.coords[nodes[:, 0]]
        p1 = mesh.coords[nodes[:, 1]]
        pts = p0[:, None, :] + _EDGE_T[None, :, None] * (p1 - p0)[:, None, :]
        vedge = v[nodes[:, 0]][:, None] * (1.0 - _EDGE_T) + v[nodes[:, 1]][:, None] * _EDGE_T
        aphi_e = weight.abs_phi(pts[..., 0], pts[..., 1])
        integrand = (vedge**2 * aphi_e) @ _EDGE_W
        total += np.sum(np.abs(sign[part]) * mesh.bedge_length[part] * integrand)

    return float(math.sqrt(total))


def stab_norm(mesh, u_vec, z_vec, S, S_star) -> float:
    """Stabilization norm (u^T S u + z^T S* z)^(1/2) of a discrete pair.

    Raises
    ------
    ValueError
        If either quadratic form is negative beyond roundoff, which
        indicates a defective stabilizer matrix.
    """
    qu = float(u_vec @ (S @ u_vec))
    qz = float(z_vec @ (S_star @ z_vec))
    floor = -1e-12 * max(1.0, float(u_vec @ u_vec), float(z_vec @ z_vec))
    if qu < floor or qz < floor:
        raise ValueError(f"negative stabilizer quadratic form: {qu:.3e}, {qz:.3e}")
    return float(math.sqrt(max(qu, 0.0) + max(qz, 0.0)))

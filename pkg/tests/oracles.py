"""Independent quadrature-based oracles for the assembly and norm tests.

Everything here is deliberately written the slow way: dense matrices,
Python loops over elements, basis coefficients from a 3x3 linear solve
per triangle, and a tensor-product Gauss rule pushed through the Duffy
map.  None of the closed forms used by the package appear below.
"""

import numpy as np


def triangle_rule(m=6):
    """Quadrature on the reference triangle {x>=0, y>=0, x+y<=1}.

    Maps an m x m tensor Gauss-Legendre grid on the unit square through
    the Duffy transform (x, y) = (a, b(1-a)), picking up the Jacobian
    factor (1-a).  Exact for polynomials of total degree <= 2m - 2.
    """
    t, w = np.polynomial.legendre.leggauss(m)
    a = 0.5 * (t + 1.0)
    wa = 0.5 * w
    A, B = np.meshgrid(a, a, indexing="ij")
    WA, WB = np.meshgrid(wa, wa, indexing="ij")
    pts = np.column_stack([A.ravel(), (B * (1.0 - A)).ravel()])
    wts = (WA * WB * (1.0 - A)).ravel()
    return pts, wts


def edge_rule(m=6):
    """Gauss-Legendre rule on [0, 1]; exact to degree 2m - 1."""
    t, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (t + 1.0), 0.5 * w


def p1_coefficients(tri_pts):
    """Affine coefficients of the three hat functions on one triangle.

    Returns C of shape (3, 3) with hat k equal to
    C[k, 0] + C[k, 1] x + C[k, 2] y.
    """
    V = np.column_stack([np.ones(3), tri_pts[:, 0], tri_pts[:, 1]])
    return np.linalg.inv(V).T


def physical_rule(tri_pts, m=6):
    """Push the reference rule to a physical triangle."""
    ref, w = triangle_rule(m)
    v0, v1, v2 = tri_pts
    pts = v0 + np.outer(ref[:, 0], v1 - v0) + np.outer(ref[:, 1], v2 - v0)
    e1, e2 = v1 - v0, v2 - v0
    area2 = abs(e1[0] * e2[1] - e1[1] * e2[0])
    return pts, w * area2


def oracle_a(mesh, mu, beta):
    """Dense convection-diffusion matrix with boundary consistency."""
    beta = np.asarray(beta, float)
    N = mesh.num_nodes
    A = np.zeros((N, N))
    for t in range(mesh.num_triangles):
        loc = mesh.triangles[t]
        tri_pts = mesh.coords[loc]
        C = p1_coefficients(tri_pts)
        grads = C[:, 1:]
        pts, w = physical_rule(tri_pts)
        vals = C[:, 0][:, None] + grads @ pts.T  # (3, q)
        conv = grads @ beta  # (3,)
        for i in range(3):
            for j in range(3):
                A[loc[i], loc[j]] += np.sum(w * conv[j] * vals[i])
                A[loc[i], loc[j]] += mu * grads[i] @ grads[j] * w.sum()
    s, sw = edge_rule()
    for e in range(len(mesh.bedge_nodes)):
        p0, p1 = mesh.coords[mesh.bedge_nodes[e]]
        length = np.linalg.norm(p1 - p0)
        normal = mesh.bedge_normal[e]
        loc = mesh.triangles[mesh.bedge_owner[e]]
        C = p1_coefficients(mesh.coords[loc])
        grads = C[:, 1:]
        pts = p0 + np.outer(s, p1 - p0)
        vals = C[:, 0][:, None] + grads @ pts.T
        for i in range(3):
            for j in range(3):
                A[loc[i], loc[j]] -= mu * (grads[j] @ normal) * length * np.sum(sw * vals[i])
    return A


def oracle_s_Omega(mesh, mu, beta, gamma):
    """Dense gradient-jump penalty matrix, face by face."""
    beta_norm = np.linalg.norm(beta)
    N = mesh.num_nodes
    S = np.zeros((N, N))
    for f in range(len(mesh.face_nodes)):
        normal = mesh.face_normal[f]
        hF = mesh.face_length[f]
        jumps = np.zeros(N)
        loc_l = mesh.triangles[mesh.face_left[f]]
        loc_r = mesh.triangles[mesh.face_right[f]]
        grads_l = p1_coefficients(mesh.coords[loc_l])[:, 1:]
        grads_r = p1_coefficients(mesh.coords[loc_r])[:, 1:]
        for k in range(3):
            jumps[loc_l[k]] += grads_l[k] @ normal
            jumps[loc_r[k]] -= grads_r[k] @ normal
        S += gamma * hF**2 * (mu + beta_norm * hF) * np.outer(jumps, jumps)
    return S


def oracle_s_star(mesh, mu, beta, gamma, gamma_star):
    """Dense dual stabilizer: boundary mass + stiffness + jump penalty."""
    beta_norm = np.linalg.norm(beta)
    N = mesh.num_nodes
    S = mu * oracle_stiffness(mesh)
    s, sw = edge_rule()
    for e in range(len(mesh.bedge_nodes)):
        nodes = mesh.bedge_nodes[e]
        p0, p1 = mesh.coords[nodes]
        length = np.linalg.norm(p1 - p0)
        coef = beta_norm + mu / length
        vals = np.vstack([1.0 - s, s])  # traces of the endpoint hats
        for i in range(2):
            for j in range(2):
                S[nodes[i], nodes[j]] += coef * length * np.sum(sw * vals[i] * vals[j])
    S += oracle_s_Omega(mesh, mu, beta, gamma)
    return gamma_star * S


def oracle_stiffness(mesh):
    N = mesh.num_nodes
    K = np.zeros((N, N))
    for t in range(mesh.num_triangles):
        loc = mesh.triangles[t]
        grads = p1_coefficients(mesh.coords[loc])[:, 1:]
        _, w = physical_rule(mesh.coords[loc])
        K[np.ix_(loc, loc)] += (grads @ grads.T) * w.sum()
    return K


def oracle_mass(mesh, include=None):
    """Dense mass matrix, optionally over a subset of elements."""
    N = mesh.num_nodes
    M = np.zeros((N, N))
    elements = range(mesh.num_triangles) if include is None else include
    for t in elements:
        loc = mesh.triangles[t]
        C = p1_coefficients(mesh.coords[loc])
        pts, w = physical_rule(mesh.coords[loc])
        vals = C[:, 0][:, None] + C[:, 1:] @ pts.T
        M[np.ix_(loc, loc)] += (vals * w) @ vals.T
    return M


def oracle_load(mesh, f):
    """Load vector (f, phi_i) by the high-order reference rule."""
    F = np.zeros(mesh.num_nodes)
    for t in range(mesh.num_triangles):
        loc = mesh.triangles[t]
        C = p1_coefficients(mesh.coords[loc])
        pts, w = physical_rule(mesh.coords[loc])
        vals = C[:, 0][:, None] + C[:, 1:] @ pts.T
        fv = f(pts[:, 0], pts[:, 1])
        F[loc] += vals @ (w * fv)
    return F


def oracle_l2_region(mesh, nodal, u, include=None, weight=None):
    """Integral of (u_h - u)^2 (times an optional weight) over elements."""
    total = 0.0
    elements = range(mesh.num_triangles) if include is None else include
    for t in elements:
        loc = mesh.triangles[t]
        C = p1_coefficients(mesh.coords[loc])
        pts, w = physical_rule(mesh.coords[loc])
        vals = C[:, 0][:, None] + C[:, 1:] @ pts.T
        diff = nodal[loc] @ vals - u(pts[:, 0], pts[:, 1])
        wq = w if weight is None else w * weight(pts[:, 0], pts[:, 1])
        total += np.sum(wq * diff**2)
    return total


def oracle_h1_region(mesh, nodal, grad_u, include=None):
    """Integral of |grad u_h - grad u|^2 over elements."""
    total = 0.0
    elements = range(mesh.num_triangles) if include is None else include
    for t in elements:
        loc = mesh.triangles[t]
        grads = p1_coefficients(mesh.coords[loc])[:, 1:]
        pts, w = physical_rule(mesh.coords[loc])
        gh = nodal[loc] @ grads  # constant (2,)
        gx, gy = grad_u(pts[:, 0], pts[:, 1])
        total += np.sum(w * ((gh[0] - gx) ** 2 + (gh[1] - gy) ** 2))
    return total

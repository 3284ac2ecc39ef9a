"""Coupled saddle-point system: assembly into blocks, solve, conditioning.

The discrete method couples the primal unknown with a Lagrange
multiplier through the 2N x 2N block matrix [[A, -S*], [S, A^T]].
A sparse LU factorization solves it directly; the Euclidean condition
number is estimated by power iteration on M^T M together with inverse
iteration through the same factorization.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

_RESIDUAL_REL = 1e-8
_MAX_REFINE = 3
_MAX_POWER_ITER = 10**4


class SingularSystemError(RuntimeError):
    """Raised when the factorization fails or cannot reach the residual target."""


class EstimationFailureError(RuntimeError):
    """Raised when a power iteration fails to converge; carries its last iterate."""

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class SaddleSystem:
    """Immutable block system [[A, -S*], [S, A^T]] with right-hand side (F, G)."""

    A: sp.csr_matrix
    S: sp.csr_matrix
    S_star: sp.csr_matrix
    F: np.ndarray
    G: np.ndarray
    N: int
    matrix: sp.csr_matrix


@dataclass(frozen=True)
class Solution:
    """Primal and dual nodal vectors with the achieved residual norm."""

    u_h: np.ndarray
    z_h: np.ndarray
    residual_norm: float


def build_system(A, S, S_star, F, G) -> SaddleSystem:
    """Assemble the coupled system from the four blocks.

    Parameters
    ----------
    A : sparse matrix
        Convection-diffusion block.
    S : sparse matrix
        Primal stabilizer s_Omega + s_omega.
    S_star : sparse matrix
        Dual stabilizer.
    F, G : ndarray
        Load and data right-hand sides.

    Returns
    -------
    SaddleSystem

    Raises
    ------
    ValueError
        On dimension mismatch or non-finite entries.
    """
    N = A.shape[0]
    for name, block in (("A", A), ("S", S), ("S_star", S_star)):
        if block.shape != (N, N):
            raise ValueError(f"block {name} has shape {block.shape}, expected {(N, N)}")
        if not np.all(np.isfinite(block.data)):
            raise ValueError(f"block {name} contains non-finite entries")
    for name, vec in (("F", F), ("G", G)):
        if np.shape(vec) != (N,):
            raise ValueError(f"vector {name} has shape {np.shape(vec)}, expected {(N,)}")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"vector {name} contains non-finite entries")

    matrix = sp.bmat([[A, -S_star], [S, A.T]], format="csr")
    return SaddleSystem(
        A=A.tocsr(), S=S.tocsr(), S_star=S_star.tocsr(),
        F=np.asarray(F, float), G=np.asarray(G, float), N=N, matrix=matrix,
    )


def _factorize(system: SaddleSystem):
    try:
        return splu(system.matrix.tocsc())
    except RuntimeError as err:
        raise SingularSystemError(f"sparse LU factorization failed: {err}") from err


def solve(system: SaddleSystem) -> Solution:
    """Solve the coupled system by sparse LU with iterative refinement.

    Refines until the Euclidean residual is at most 1e-8 times the
    right-hand side norm.

    Returns
    -------
    Solution

    Raises
    ------
    SingularSystemError
        If the factorization fails or refinement cannot reach the
        residual target; the formulation guarantees an invertible
        matrix, so this signals a configuration bug.
    """
    lu = _factorize(system)
    rhs = np.concatenate([system.F, system.G])
    target = _RESIDUAL_REL * np.linalg.norm(rhs)

    x = lu.solve(rhs)
    residual = rhs - system.matrix @ x
    res_norm = np.linalg.norm(residual)
    for _ in range(_MAX_REFINE):
        if res_norm <= target:
            break
        x = x + lu.solve(residual)
        residual = rhs - system.matrix @ x
        res_norm = np.linalg.norm(residual)
    if not res_norm <= target:
        raise SingularSystemError(
            f"residual {res_norm:.3e} above target {target:.3e} after refinement"
        )
    return Solution(u_h=x[: system.N], z_h=x[system.N :], residual_norm=float(res_norm))


def _power_iteration(apply_op, start, tol, label):
    """Generic power iteration; returns the converged Rayleigh quotient."""
    v = start / np.linalg.norm(start)
    ray = None
    for _ in range(_MAX_POWER_ITER):
        w, ray_new = apply_op(v)
        if ray is not None and abs(ray_new - ray) <= tol * abs(ray_new):
            return ray_new
        ray = ray_new
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise EstimationFailureError(f"{label} iteration hit a zero vector", v)
        v = w / norm
    raise EstimationFailureError(
        f"{label} iteration did not converge within {_MAX_POWER_ITER} steps", v
    )


def condition_number(system: SaddleSystem, tol: float = 1e-4) -> float:
    """Estimate the Euclidean condition number of the system matrix.

    Runs power iteration on M^T M for the largest singular value and
    inverse iteration through the LU factors for the smallest, each
    until the Rayleigh quotient is stationary to the given relative
    tolerance.

    Parameters
    ----------
    system : SaddleSystem
    tol : float
        Relative stagnation tolerance of the Rayleigh quotients.

    Returns
    -------
    float
        Estimate of sigma_max / sigma_min.

    Raises
    ------
    EstimationFailureError
        If either iteration exceeds 10^4 steps; the exception carries
        the last iterate.
    """
    M = system.matrix
    lu = _factorize(system)
    rng = np.random.Generator(np.random.Philox(key=[2**61, system.N]))
    start = rng.standard_normal(2 * system.N)

    def forward(v):
        half = M @ v
        return M.T @ half, half @ half  # Rayleigh quotient of M^T M

    def inverse(v):
        half = lu.solve(v, trans="T")
        return lu.solve(half), half @ half  # Rayleigh quotient of (M M^T)^{-1}

    sigma_max_sq = _power_iteration(forward, start, tol, "largest singular value")
    inv_sigma_min_sq = _power_iteration(inverse, start, tol, "smallest singular value")
    return float(np.sqrt(sigma_max_sq * inv_sigma_min_sq))

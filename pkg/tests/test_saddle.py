import numpy as np
import pytest
import scipy.sparse as sp

import cdassim.saddle as saddle_mod
from cdassim.assembly import (
    Disk,
    ProblemConfig,
    Rectangle,
    assemble_a,
    assemble_data_rhs,
    assemble_load,
    assemble_mass,
    assemble_s_Omega,
    assemble_s_omega,
    assemble_s_star,
    included_elements,
    linear,
    product_sine,
)
from cdassim.mesh import build_mesh, classify_boundary
from cdassim.saddle import (
    EstimationFailureError,
    build_system,
    condition_number,
    solve,
)

SIDE_OMEGA = Rectangle(0.0, 0.2, 0.4, 0.6)
DISK_OMEGA = Disk((0.5, 0.5), 0.1)


def _system(n, mu, omega, exact, beta=(1.0, 0.0)):
    mesh = classify_boundary(build_mesh(n), beta)
    config = ProblemConfig(mu=mu, beta=beta, omega=omega)
    A = assemble_a(mesh, config)
    S = assemble_s_Omega(mesh, config) + assemble_s_omega(mesh, config)
    S_star = assemble_s_star(mesh, config)
    F = assemble_load(mesh, config, exact)
    nodes = np.unique(mesh.triangles[included_elements(mesh, omega)])
    data = {int(i): float(exact.u(*mesh.coords[i])) for i in nodes}
    G = assemble_data_rhs(mesh, config, data)
    return build_system(A, S, S_star, F, G), mesh


# ============================================================
# System construction
# ============================================================

def test_build_system_dimensions():
    system, _ = _system(2, 1e-2, SIDE_OMEGA, linear(1.0, 0.0, 0.0))
    assert system.N == 9
    assert system.matrix.shape == (18, 18)


def test_block_layout():
    system, _ = _system(4, 1e-2, SIDE_OMEGA, linear(1.0, 0.0, 0.0))
    N = system.N
    M = system.matrix.toarray()
    assert np.array_equal(M[:N, :N], system.A.toarray())
    assert np.array_equal(M[:N, N:], -system.S_star.toarray())
    assert np.array_equal(M[N:, :N], system.S.toarray())
    assert np.array_equal(M[N:, N:], system.A.toarray().T)


def test_zero_stabilizers_block_diagonal():
    mesh = build_mesh(2)
    config = ProblemConfig(mu=1e-2, beta=(1.0, 0.0))
    A = assemble_a(mesh, config)
    Z = sp.csr_matrix((mesh.num_nodes, mesh.num_nodes))
    F = np.zeros(mesh.num_nodes)
    system = build_system(A, Z, Z, F, F)
    N = mesh.num_nodes
    M = system.matrix.toarray()
    assert np.all(M[:N, N:] == 0.0)
    assert np.all(M[N:, :N] == 0.0)


def test_dimension_mismatch():
    mesh = build_mesh(2)
    config = ProblemConfig(mu=1e-2, beta=(1.0, 0.0))
    A = assemble_a(mesh, config)
    Z = sp.csr_matrix((mesh.num_nodes, mesh.num_nodes))
    with pytest.raises(ValueError):
        build_system(A, Z, Z, np.zeros(4), np.zeros(mesh.num_nodes))
    with pytest.raises(ValueError):
        build_system(A, sp.csr_matrix((3, 3)), Z,
                     np.zeros(mesh.num_nodes), np.zeros(mesh.num_nodes))


def test_non_finite_rejected():
    mesh = build_mesh(2)
    config = ProblemConfig(mu=1e-2, beta=(1.0, 0.0))
    A = assemble_a(mesh, config)
    Z = sp.csr_matrix((mesh.num_nodes, mesh.num_nodes))
    bad = np.zeros(mesh.num_nodes)
    bad[0] = np.nan
    with pytest.raises(ValueError):
        build_system(A, Z, Z, bad, np.zeros(mesh.num_nodes))


# ============================================================
# Solve
# ============================================================

@pytest.mark.parametrize("mu", [1.0, 1e-6])
def test_linear_solution_recovered(mu):
    exact = linear(1.0, 2.0, 3.0)
    system, mesh = _system(8, mu, SIDE_OMEGA, exact)
    sol = solve(system)
    u = exact.u(mesh.coords[:, 0], mesh.coords[:, 1])
    assert np.abs(sol.u_h - u).max() <= 1e-9
    assert np.abs(sol.z_h).max() <= 1e-9


def test_zero_rhs_zero_solution():
    system, mesh = _system(4, 1e-2, SIDE_OMEGA, linear(1.0, 0.0, 0.0))
    zero = np.zeros(system.N)
    system0 = build_system(system.A, system.S, system.S_star, zero, zero)
    sol = solve(system0)
    assert np.all(sol.u_h == 0.0)
    assert np.all(sol.z_h == 0.0)


def test_matches_dense_oracle():
    system, _ = _system(16, 1e-6, DISK_OMEGA, product_sine())
    sol = solve(system)
    dense = np.linalg.solve(system.matrix.toarray(),
                            np.concatenate([system.F, system.G]))
    x = np.concatenate([sol.u_h, sol.z_h])
    assert np.linalg.norm(x - dense) <= 1e-8 * np.linalg.norm(dense)


def test_residual_contract():
    system, _ = _system(16, 1e-6, DISK_OMEGA, product_sine())
    sol = solve(system)
    rhs = np.concatenate([system.F, system.G])
    assert sol.residual_norm <= 1e-8 * np.linalg.norm(rhs)
    # first block row holds the discrete equation A u - S* z = F
    first = system.A @ sol.u_h - system.S_star @ sol.z_h - system.F
    assert np.abs(first).max() <= 1e-8


def test_solve_deterministic():
    system, _ = _system(8, 1e-6, SIDE_OMEGA, product_sine())
    a = solve(system)
    b = solve(system)
    assert np.array_equal(a.u_h, b.u_h)
    assert np.array_equal(a.z_h, b.z_h)


def test_dual_norm_decreases_under_refinement():
    values = []
    for n in (16, 32, 64, 128):
        system, mesh = _system(n, 1e-6, DISK_OMEGA, product_sine())
        sol = solve(system)
        mass = assemble_mass(mesh)
        values.append(float(np.sqrt(sol.z_h @ (mass @ sol.z_h))))
    for coarse, fine in zip(values, values[1:]):
        assert fine <= 1.1 * coarse


# ============================================================
# Condition number
# ============================================================

def test_condition_number_identity():
    N = 30
    eye = sp.identity(N, format="csr")
    zero = sp.csr_matrix((N, N))
    system = build_system(eye, zero, zero, np.zeros(N), np.zeros(N))
    assert np.isclose(condition_number(system), 1.0, rtol=1e-3)


def test_condition_number_vs_dense_svd():
    system, _ = _system(4, 1e-2, SIDE_OMEGA, product_sine())
    estimate = condition_number(system)
    sv = np.linalg.svd(system.matrix.toarray(), compute_uv=False)
    exact = sv[0] / sv[-1]
    assert abs(estimate - exact) <= 0.05 * exact


def test_condition_number_deterministic():
    system, _ = _system(4, 1e-2, SIDE_OMEGA, product_sine())
    assert condition_number(system) == condition_number(system)


def test_estimation_failure_carries_iterate(monkeypatch):
    monkeypatch.setattr(saddle_mod, "_MAX_POWER_ITER", 1)
    system, _ = _system(4, 1e-2, SIDE_OMEGA, product_sine())
    with pytest.raises(EstimationFailureError) as info:
        saddle_mod.condition_number(system)
    assert info.value.last_iterate.shape == (2 * system.N,)

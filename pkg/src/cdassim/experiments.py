"""Experiment driver: refinement sweeps, noise injection, rates, CSV.

Each configured case pins a data region, the error-measurement regions
downstream and upstream of it, and an exact solution.  A sweep runs the
full pipeline per (n, mu) pair and collects one row of diagnostics; a
failure inside a single run is recorded as a marker row instead of
aborting the sweep.
"""

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .assembly import (
    Disk,
    EmptyRegionError,
    ExactSolution,
    ProblemConfig,
    Rectangle,
    RectangleUnion,
    RegionSpec,
    assemble_a,
    assemble_data_rhs,
    assemble_load,
    assemble_mass,
    assemble_s_Omega,
    assemble_s_omega,
    assemble_s_star,
    included_elements,
    layer,
    product_sine,
)
from .mesh import build_mesh, classify_boundary, write_mesh_dump
from .saddle import (
    EstimationFailureError,
    SingularSystemError,
    build_system,
    condition_number,
    solve,
)
from .weights import (
    DOWNSTREAM,
    UPSTREAM,
    WeightConstructionError,
    build_weight,
    h1_semi_error,
    l2_error,
    stab_norm,
    triple_norm,
)

CSV_HEADER = (
    "case,n,h,mu,peclet,noise_exponent,seed,l2_down,l2_up,h1_down,h1_up,"
    "l2_global,triple_norm,stab_norm,z_l2,cond_estimate,wall_time_ms"
)

_NOISE_EXPONENTS = (2.0, 1.0, 0.5)


class InsufficientDataError(RuntimeError):
    """Raised when a rate fit has fewer than three usable levels."""


@dataclass(frozen=True)
class NoiseSpec:
    """Amplitude law of the nodal data perturbation.

    exponent None means clean data; p in {2, 1, 0.5} draws each nodal
    perturbation uniformly from [-h^p, h^p].
    """

    exponent: Optional[float] = None

    def __post_init__(self):
        if self.exponent is not None and self.exponent not in _NOISE_EXPONENTS:
            raise ValueError(f"noise exponent must be one of {_NOISE_EXPONENTS}")


@dataclass(frozen=True)
class CaseSpec:
    """Geometry and exact solution of one experiment family."""

    omega: RegionSpec
    exact_factory: Callable[[], ExactSolution] = None
    down: Optional[Rectangle] = None
    up: Optional[Rectangle] = None

    def exact(self) -> ExactSolution:
        return self.exact_factory()


CASES: Dict[str, CaseSpec] = {
    "disk": CaseSpec(
        omega=Disk((0.5, 0.5), 0.1),
        exact_factory=product_sine,
        down=Rectangle(0.6, 1.0, 0.45, 0.55),
        up=Rectangle(0.0, 0.4, 0.45, 0.55),
    ),
    "side_down": CaseSpec(
        omega=Rectangle(0.0, 0.2, 0.4, 0.6),
        exact_factory=product_sine,
        down=Rectangle(0.2, 1.0, 0.45, 0.55),
    ),
    "side_up": CaseSpec(
        omega=Rectangle(0.8, 1.0, 0.4, 0.6),
        exact_factory=product_sine,
        up=Rectangle(0.0, 0.8, 0.45, 0.55),
    ),
    "layer": CaseSpec(
        omega=RectangleUnion((
            Rectangle(0.1, 0.3, 0.1, 0.3),
            Rectangle(0.7, 0.9, 0.1, 0.3),
            Rectangle(0.1, 0.3, 0.7, 0.9),
            Rectangle(0.7, 0.9, 0.7, 0.9),
        )),
        exact_factory=layer,
    ),
}


@dataclass(frozen=True)
class ExperimentPlan:
    """Full description of one sweep over mesh sizes and diffusities."""

    case: str
    mesh_sizes: Tuple[int, ...]
    mus: Tuple[float, ...]
    beta1: float = 1.0
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0
    gamma: float = 1e-5
    gamma_star: float = 1.0
    zeta: float = 2.0
    lam: float = 1.0
    cond: bool = False
    output_path: Optional[str] = None
    mesh_dump: Optional[str] = None

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; choose from {sorted(CASES)}")
        sizes = tuple(self.mesh_sizes)
        if len(sizes) == 0 or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("mesh_sizes must be nonempty and strictly ascending")
        if len(self.mus) == 0 or any(not mu > 0 for mu in self.mus):
            raise ValueError("all mu values must be positive")
        if self.beta1 == 0.0:
            raise ValueError("beta1 must be nonzero")


@dataclass(frozen=True)
class ExperimentRow:
    """One line of the results CSV."""

    case: str
    n: int
    h: float
    mu: float
    peclet: float
    noise_exponent: float
    seed: int
    l2_down: float
    l2_up: float
    h1_down: float
    h1_up: float
    l2_global: float
    triple_norm: float
    stab_norm: float
    z_l2: float
    cond_estimate: Optional[float]
    wall_time_ms: float


def inject_noise(mesh, omega, exact, spec: NoiseSpec, seed: int, n: int, mu: float):
    """Nodal data values on the measurement region, optionally perturbed.

    Perturbations come from a counter-based generator keyed by (seed, n)
    with one draw per node index, so a node's value is reproducible
    across rebuilds and independent of which other nodes lie in omega.

    Returns
    -------
    dict
        Node index -> measured value, covering every node of every
        omega-included element.
    """
    include = included_elements(mesh, omega)
    nodes = np.unique(mesh.triangles[include])
    values = exact.u(mesh.coords[nodes, 0], mesh.coords[nodes, 1]).astype(float)
    if spec.exponent is not None:
        rng = np.random.Generator(np.random.Philox(key=[seed, n]))
        draws = rng.random(mesh.num_nodes)
        amplitude = (1.0 / n) ** spec.exponent
        values = values + (2.0 * draws[nodes] - 1.0) * amplitude
    return {int(node): float(v) for node, v in zip(nodes, values)}


def _clamped_lambda(plan: ExperimentPlan, omega, h: float) -> float:
    """Largest usable lambda not above the plan's, so the margin fits."""
    y_lo, y_hi = omega.y_interval()
    limit = 0.45 * (y_hi - y_lo) / (3.0 * math.sqrt(h) * math.log(1.0 / h))
    return min(plan.lam, limit)


def _write_solution_dump(values, path) -> None:
    lines = [str(len(values))]
    lines.extend(f"{i} {float(v)!r}" for i, v in enumerate(values))
    with open(path, "w", encoding="utf-8", newline="\n") as stream:
        stream.write("\n".join(lines) + "\n")


def _failed_row(plan, n, mu, elapsed_ms) -> ExperimentRow:
    nan = float("nan")
    return ExperimentRow(
        case=plan.case, n=n, h=1.0 / n, mu=mu, peclet=abs(plan.beta1) * (1.0 / n) / mu,
        noise_exponent=plan.noise.exponent or 0.0, seed=plan.seed,
        l2_down=nan, l2_up=nan, h1_down=nan, h1_up=nan, l2_global=nan,
        triple_norm=nan, stab_norm=nan, z_l2=nan,
        cond_estimate=None, wall_time_ms=elapsed_ms,
    )


def _single_run(plan: ExperimentPlan, case: CaseSpec, exact, n: int, mu: float) -> ExperimentRow:
    h = 1.0 / n
    beta = (plan.beta1, 0.0)
    mesh = classify_boundary(build_mesh(n), beta)
    config = ProblemConfig(
        mu=mu, beta=beta, gamma=plan.gamma, gamma_star=plan.gamma_star,
        zeta=plan.zeta, omega=case.omega,
    )

    A = assemble_a(mesh, config)
    S = assemble_s_Omega(mesh, config) + assemble_s_omega(mesh, config)
    S_star = assemble_s_star(mesh, config)
    F = assemble_load(mesh, config, exact)
    data = inject_noise(mesh, case.omega, exact, plan.noise, plan.seed, n, mu)
    G = assemble_data_rhs(mesh, config, data)

    system = build_system(A, S, S_star, F, G)
    sol = solve(system)

    ih_u = exact.u(mesh.coords[:, 0], mesh.coords[:, 1])
    err_vec = ih_u - sol.u_h

    direction = DOWNSTREAM if plan.beta1 > 0 else UPSTREAM
    weight = build_weight(config, h, _clamped_lambda(plan, case.omega, h))
    mass = assemble_mass(mesh)

    cond_estimate = None
    if plan.cond:
        try:
            cond_estimate = condition_number(system)
        except EstimationFailureError:
            cond_estimate = float("nan")

    if plan.mesh_dump is not None:
        write_mesh_dump(mesh, f"{plan.mesh_dump}_n{n}.mesh.txt")
        _write_solution_dump(sol.u_h, f"{plan.mesh_dump}_n{n}_mu{mu:g}.u.txt")

    return ExperimentRow(
        case=plan.case, n=n, h=h, mu=mu, peclet=abs(plan.beta1) * h / mu,
        noise_exponent=plan.noise.exponent or 0.0, seed=plan.seed,
        l2_down=l2_error(mesh, sol.u_h, exact, case.down) if case.down else 0.0,
        l2_up=l2_error(mesh, sol.u_h, exact, case.up) if case.up else 0.0,
        h1_down=h1_semi_error(mesh, sol.u_h, exact, case.down) if case.down else 0.0,
        h1_up=h1_semi_error(mesh, sol.u_h, exact, case.up) if case.up else 0.0,
        l2_global=l2_error(mesh, sol.u_h, exact, None),
        triple_norm=triple_norm(mesh, err_vec, weight, config, direction),
        stab_norm=stab_norm(mesh, err_vec, sol.z_h, S, S_star),
        z_l2=float(math.sqrt(max(sol.z_h @ (mass @ sol.z_h), 0.0))),
        cond_estimate=cond_estimate,
        wall_time_ms=0.0,  # patched by run_case
    )


def run_case(plan: ExperimentPlan):
    """Run the sweep described by a plan and return its rows.

    Rows appear in plan order: outer loop over mu, inner loop over mesh
    size.  A failed run contributes a marker row with NaN diagnostics.
    When the plan carries an output path the rows are also written as
    CSV; a mesh-dump prefix additionally writes mesh and solution dumps
    per run.

    Returns
    -------
    list of ExperimentRow
    """
    case = CASES[plan.case]
    exact = case.exact()
    rows = []
    for mu in plan.mus:
        for n in plan.mesh_sizes:
            start = time.perf_counter()
            try:
                row = _single_run(plan, case, exact, n, mu)
            except (ValueError, np.linalg.LinAlgError, EmptyRegionError,
                    SingularSystemError, WeightConstructionError):
                row = _failed_row(plan, n, mu, 0.0)
            elapsed_ms = (time.perf_counter() - start) * 1000.0
            rows.append(_with_time(row, elapsed_ms))
    if plan.output_path is not None:
        emit_csv(rows, plan.output_path)
    return rows


def _with_time(row: ExperimentRow, elapsed_ms: float) -> ExperimentRow:
    return replace(row, wall_time_ms=elapsed_ms)


def fit_rate(rows, field: str, levels: Optional[int] = None) -> float:
    """Least-squares slope of log(error) against log(h).

    Rows with nonpositive or non-finite values of the field are dropped.
    By default every usable level enters the fit; a levels argument
    restricts it to that many finest meshes.

    Returns
    -------
    float
        Positive values are convergence orders.

    Raises
    ------
    InsufficientDataError
        With fewer than three usable distinct mesh sizes.
    """
    pts = []
    for row in rows:
        value = getattr(row, field)
        if value is not None and np.isfinite(value) and value > 0:
            pts.append((row.h, value))
    pts.sort(key=lambda p: p[0])
    if levels is not None:
        pts = pts[:levels]
    if len({h for h, _ in pts}) < 3:
        raise InsufficientDataError(
            f"need at least 3 usable levels for {field}, have {len(pts)}"
        )
    log_h = np.log([h for h, _ in pts])
    log_e = np.log([e for _, e in pts])
    return float(np.polyfit(log_h, log_e, 1)[0])


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit_csv(rows, path) -> None:
    """Write rows to CSV with the fixed header and shortest round-trip floats."""
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join(
            _format(getattr(row, name)) for name in CSV_HEADER.split(",")
        ))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as stream:
            stream.write("\n".join(lines) + "\n")
    except OSError as err:
        raise OSError(f"cannot write CSV to {path}: {err}") from err

"""IVR Module
Online stage: the coupled system of a chosen formulation, its dual Schur
complement, and the explicit partitioned time loop that recovers the interface
Lagrange multiplier at every step."""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from janus.assembly import SubdomainOperators, assemble_source, check_interface_data, dirichlet_data
from janus.constants import (
    FF_FLM,
    FORMULATIONS,
    FR_FLM,
    FR_RLM,
    RR_FLM,
    RR_RLM,
    SCHUR_ASYMMETRY_TOL,
    SINGULAR_CONDITION,
)
from janus.fom import InstabilityError
from janus.numerics import (
    LuFactorization,
    Matrix,
    NotSpdError,
    SpdFactorization,
    Vector,
    cond2,
    dense_solve,
    lu_factor,
    lu_solve,
    spd_factor,
    spd_solve,
)
from janus.pod import CompositeBasis, RomOperators, project_operators
from janus.problem import TimeGrid

logger = logging.getLogger("ivr")

SCHUR_SYMMETRY_TOL = 1e-10
FULL = "full"
REDUCED = "reduced"

# tag: (side models, multiplier space, default multiplier side)
_TAGS = {
    FF_FLM: ((False, False), FULL, 1),
    RR_RLM: ((True, True), REDUCED, 1),
    RR_FLM: ((True, True), FULL, 1),
    FR_FLM: ((False, True), FULL, 1),
    FR_RLM: ((False, True), REDUCED, 2),
}


class SingularSchurError(RuntimeError):
    """Raised when the Schur complement cannot be solved."""

    def __init__(self, condition: float, message: Optional[str] = None) -> None:
        self.condition = condition
        super().__init__(message or f"Singular Schur complement (cond2={condition:.3e})")


@dataclass(frozen=True)
class Formulation:
    """Which sides are reduced and where the Lagrange multiplier lives"""

    tag: str
    reduced: Tuple[bool, bool]
    multiplier: str
    side: int

    def __post_init__(self) -> None:
        if self.multiplier not in (FULL, REDUCED):
            raise ValueError(f"Unknown multiplier space {self.multiplier}")
        if self.side not in (1, 2):
            raise ValueError(f"Multiplier side must be 1 or 2, got {self.side}")
        if self.multiplier == REDUCED and not self.reduced[self.side - 1]:
            raise ValueError(f"{self.tag}: a reduced multiplier needs a ROM on side {self.side}")

    @classmethod
    def from_tag(cls, tag: str, side: Optional[int] = None) -> "Formulation":
        """Formulation for one of the tags FF_fLM, RR_rLM, RR_fLM, FR_fLM, FR_rLM"""
        if tag not in _TAGS:
            raise ValueError(f"Unknown formulation {tag}, expected one of {FORMULATIONS}")
        reduced, multiplier, default_side = _TAGS[tag]
        return cls(tag=tag, reduced=reduced, multiplier=multiplier, side=side or default_side)

    @property
    def trace_compatible(self) -> bool:
        """Every multiplier is the interface trace of an admissible state of side k"""
        side_reduced = self.reduced[self.side - 1]
        return side_reduced if self.multiplier == REDUCED else not side_reduced


@dataclass(frozen=True)
class SchurSystem:
    """Dual Schur complement S and its factorization"""

    matrix: Matrix
    condition: float
    asymmetry: float
    cholesky: Optional[SpdFactorization] = None
    lu: Optional[LuFactorization] = None
    failure: Optional[str] = None

    @property
    def spd(self) -> bool:
        """True when the Cholesky factorization succeeded"""
        return self.cholesky is not None

    @property
    def singular(self) -> bool:
        """True when S is numerically singular or neither factorization can be used"""
        # numerical rank below full at the matrix_rank tolerance n * eps * sigma_max
        if not np.isfinite(self.condition) or self.condition * max(self.matrix.shape[0], 1) > SINGULAR_CONDITION:
            return True
        if self.cholesky is not None:
            return False
        return self.lu is None or not np.all(np.diag(self.lu.lu))

    def solve(self, rhs: Vector) -> Vector:
        """S^{-1} rhs"""
        if self.singular:
            raise SingularSchurError(condition=self.condition)
        if self.cholesky is not None:
            return spd_solve(self.cholesky, rhs)
        if self.lu is None:
            raise SingularSchurError(condition=self.condition)
        return lu_solve(self.lu, rhs)


@dataclass(frozen=True)
class SideSystem:
    """One subdomain in online coordinates"""

    ops: SubdomainOperators
    basis: Optional[CompositeBasis]
    rom: RomOperators
    mass_factor: SpdFactorization
    weights: Matrix  # M^-1 G^T


@dataclass(frozen=True)
class CoupledState:
    """Per-side coefficients ordered (interface, interior), multiplier and time"""

    coefficients: Tuple[Vector, Vector]
    multiplier: Vector
    time: float
    step: int = 0


@dataclass(frozen=True)
class RightHandSide:
    """Right-hand side blocks s_1, s_2 and s_gamma"""

    sides: Tuple[Vector, Vector]
    interface: Vector
    dirichlet: Tuple[Vector, Vector]

    @property
    def norms(self) -> Tuple[float, float, float]:
        """Euclidean norms of s_1, s_2 and s_gamma"""
        return (
            float(np.linalg.norm(self.sides[0])),
            float(np.linalg.norm(self.sides[1])),
            float(np.linalg.norm(self.interface)),
        )


@dataclass(frozen=True)
class StepOutcome:
    """Quantities computed during one step"""

    state: CoupledState
    rhs: RightHandSide
    multiplier: Vector
    velocities: Tuple[Vector, Vector]


@dataclass
class SimulationResult:  # pylint: disable=too-many-instance-attributes
    """Sampled lifted states and per-step diagnostics of one online run.

    States are full subdomain vectors in local DoF order, one column per
    sampled step. Multipliers are in full-order interface coordinates.
    """

    tag: str
    dims: Dict[str, int]
    times: Vector
    steps: np.ndarray
    states: Tuple[Matrix, Matrix]
    multipliers: Matrix
    step_times: Vector
    residual_norms: Vector
    rhs_norms: Matrix
    condition: float
    spd: bool
    offline_seconds: float = 0.0
    online_seconds: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def state_at(self, column: int) -> Tuple[Vector, Vector]:
        """Lifted states of both sides for one sample"""
        return self.states[0][:, column], self.states[1][:, column]


class CoupledSystem:
    """A coupled FOM-FOM, ROM-ROM or ROM-FOM system ready for partitioned time stepping"""

    def __init__(
        self,
        formulation: Formulation,
        sides: Tuple[SideSystem, SideSystem],
        multiplier_basis: Optional[Matrix],
        schur: SchurSystem,
        offline_seconds: float = 0.0,
    ) -> None:
        self.formulation = formulation
        self.sides = sides
        self.multiplier_basis = multiplier_basis
        self.schur = schur
        self.offline_seconds = offline_seconds
        self.logger = logging.getLogger("ivr")

    @property
    def tag(self) -> str:
        """Formulation tag"""
        return self.formulation.tag

    @property
    def dims(self) -> Dict[str, int]:
        """Coefficient counts per side and multiplier size"""
        return {
            "d1_gamma": self.sides[0].rom.d_interface,
            "d1_0": self.sides[0].rom.d_interior,
            "d2_gamma": self.sides[1].rom.d_interface,
            "d2_0": self.sides[1].rom.d_interior,
            "multiplier": int(self.schur.matrix.shape[0]),
        }

    def lift_multiplier(self, multiplier: Vector) -> Vector:
        """Multiplier in full-order interface coordinates"""
        if self.multiplier_basis is None:
            return np.array(multiplier)
        return self.multiplier_basis @ multiplier

    def saddle_point(self) -> Matrix:
        """Monolithic block matrix [[M1, 0, G1^T], [0, M2, -G2^T], [G1, -G2, 0]]"""
        rom1, rom2 = self.sides[0].rom, self.sides[1].rom
        d1, d2, m = rom1.dim, rom2.dim, self.schur.matrix.shape[0]
        matrix = np.zeros((d1 + d2 + m, d1 + d2 + m))
        matrix[:d1, :d1] = rom1.mass
        matrix[d1 : d1 + d2, d1 : d1 + d2] = rom2.mass
        matrix[:d1, d1 + d2 :] = rom1.constraint.T
        matrix[d1 : d1 + d2, d1 + d2 :] = -rom2.constraint.T
        matrix[d1 + d2 :, :d1] = rom1.constraint
        matrix[d1 + d2 :, d1 : d1 + d2] = -rom2.constraint
        return matrix

    def monolithic_velocity(self, rhs: RightHandSide) -> Tuple[Vector, Vector, Vector]:
        """(u1_dot, u2_dot, multiplier) from a simultaneous solve of the block system"""
        d1 = self.sides[0].rom.dim
        d2 = self.sides[1].rom.dim
        solution = dense_solve(
            self.saddle_point(), np.concatenate([rhs.sides[0], rhs.sides[1], rhs.interface])
        )
        return solution[:d1], solution[d1 : d1 + d2], solution[d1 + d2 :]

    def initial_state(self, t0: float = 0.0) -> CoupledState:
        """Orthogonal projection of the interpolated initial condition"""
        coefficients = []
        for side in self.sides:
            sub = side.ops.sub
            coords = sub.coords[sub.free]
            values = np.asarray(side.ops.fields.initial(coords[:, 0], coords[:, 1]), dtype=np.float64)
            coefficients.append(side.rom.project(np.broadcast_to(values, (sub.n_free,)).copy()))
        m = self.schur.matrix.shape[0]
        return CoupledState(coefficients=(coefficients[0], coefficients[1]), multiplier=np.zeros(m), time=t0)


def _side_system(
    ops: SubdomainOperators, basis: Optional[CompositeBasis], multiplier_basis: Optional[Matrix]
) -> SideSystem:
    rom = project_operators(ops, basis, multiplier_basis)
    factor = spd_factor(rom.mass)
    weights = spd_solve(factor, rom.constraint.T)
    return SideSystem(ops=ops, basis=basis, rom=rom, mass_factor=factor, weights=weights)


def build_schur(sides: Tuple[SideSystem, SideSystem]) -> SchurSystem:
    """S = G1 M1^-1 G1^T + G2 M2^-1 G2^T, factored when SPD"""
    raw = sum(side.rom.constraint @ side.weights for side in sides)
    scale = float(np.max(np.abs(raw))) if raw.size else 0.0
    asymmetry = float(np.max(np.abs(raw - raw.T))) / scale if scale > 0.0 else 0.0
    if asymmetry > SCHUR_ASYMMETRY_TOL:
        logger.warning("Schur complement asymmetry %.3e exceeds %.1e", asymmetry, SCHUR_ASYMMETRY_TOL)
    matrix = 0.5 * (raw + raw.T)
    condition = cond2(matrix) if scale > 0.0 else float("inf")

    try:
        cholesky = spd_factor(matrix, tol=SCHUR_SYMMETRY_TOL)
        logger.info("Schur complement of size %d is SPD, cond2=%.3e", matrix.shape[0], condition)
        return SchurSystem(matrix=matrix, condition=condition, asymmetry=asymmetry, cholesky=cholesky)
    except NotSpdError as e:
        logger.warning(
            "Schur complement is not SPD (pivot %d), cond2=%.3e; falling back to LU", e.pivot, condition
        )
        failure = str(e)

    schur = SchurSystem(matrix=matrix, condition=condition, asymmetry=asymmetry, failure=failure)
    if not schur.singular:
        schur = replace(schur, lu=lu_factor(matrix))
    if schur.singular:
        logger.warning("Schur complement is singular, cond2=%.3e", condition)
    return schur


def build_coupled_system(
    form: Formulation,
    ops: Tuple[SubdomainOperators, SubdomainOperators],
    bases: Tuple[Optional[CompositeBasis], Optional[CompositeBasis]],
) -> CoupledSystem:
    """Projected operators of both sides and the Schur complement of the formulation"""
    start = time.perf_counter()
    for i in range(2):
        if form.reduced[i] and bases[i] is None:
            raise ValueError(f"{form.tag}: side {i + 1} is a ROM but has no basis")
        if not ops[i].fields.autonomous:
            raise ValueError("The online stage requires autonomous advection and diffusion")

    multiplier_basis = None
    if form.multiplier == REDUCED:
        multiplier_basis = bases[form.side - 1].interface  # type: ignore[union-attr]

    sides = (
        _side_system(ops[0], bases[0] if form.reduced[0] else None, multiplier_basis),
        _side_system(ops[1], bases[1] if form.reduced[1] else None, multiplier_basis),
    )
    schur = build_schur(sides)
    if not form.trace_compatible:
        logger.info("%s is not trace compatible, cond2(S)=%.3e", form.tag, schur.condition)
    if ops[0].fields.homogeneous and ops[1].fields.homogeneous:
        logger.debug("%s: homogeneous data, all Dirichlet terms vanish", form.tag)
    return CoupledSystem(
        formulation=form,
        sides=sides,
        multiplier_basis=multiplier_basis,
        schur=schur,
        offline_seconds=time.perf_counter() - start,
    )


def compute_rhs(
    system: CoupledSystem, state: CoupledState, dt: float, t0: float = 0.0, dt_back: Optional[float] = None
) -> RightHandSide:
    """s_i = B_i^T f_i - F_i u_i - B_i^T (M_iGamma g_dot_i + F_iGamma g_i) and s_gamma"""
    t = state.time
    sides: List[Vector] = []
    data: List[Tuple[Vector, Vector]] = []
    for side, coefficients in zip(system.sides, state.coefficients):
        rom, sub, fields = side.rom, side.ops.sub, side.ops.fields
        rhs = -rom.flux @ coefficients
        if fields.homogeneous:
            g = g_dot = np.zeros(sub.n_dirichlet)
        else:
            g, g_dot = dirichlet_data(sub, fields, t, dt, t0, dt_back)
            rhs += rom.project(assemble_source(sub, fields, t))
            rhs -= rom.mass_coupling @ g_dot + rom.flux_coupling @ g
        sides.append(rhs)
        data.append((g, g_dot))

    (g1, g1_dot), (g2, g2_dot) = data
    sub1, sub2 = system.sides[0].ops.sub, system.sides[1].ops.sub
    if not (system.sides[0].ops.fields.homogeneous and system.sides[1].ops.fields.homogeneous):
        check_interface_data(sub1, sub2, (g1, g2))
        check_interface_data(sub1, sub2, (g1_dot, g2_dot))
    interface = -(
        system.sides[0].rom.constraint_dirichlet @ g1_dot - system.sides[1].rom.constraint_dirichlet @ g2_dot
    )
    return RightHandSide(sides=(sides[0], sides[1]), interface=interface, dirichlet=(g1, g2))


def solve_multiplier(system: CoupledSystem, rhs: RightHandSide) -> Vector:
    """Solves S lambda = G1 M1^-1 s1 - G2 M2^-1 s2 - s_gamma"""
    side1, side2 = system.sides
    b = side1.weights.T @ rhs.sides[0] - side2.weights.T @ rhs.sides[1] - rhs.interface
    return system.schur.solve(b)


def velocities(system: CoupledSystem, rhs: RightHandSide, multiplier: Vector) -> Tuple[Vector, Vector]:
    """Decoupled subdomain solves M1 u1_dot = s1 - G1^T lambda and M2 u2_dot = s2 + G2^T lambda"""
    side1, side2 = system.sides
    u1_dot = spd_solve(side1.mass_factor, rhs.sides[0] - side1.rom.constraint.T @ multiplier)
    u2_dot = spd_solve(side2.mass_factor, rhs.sides[1] + side2.rom.constraint.T @ multiplier)
    return u1_dot, u2_dot


def step(
    system: CoupledSystem, state: CoupledState, dt: float, t0: float = 0.0, dt_back: Optional[float] = None
) -> StepOutcome:
    """One forward Euler step of the partitioned system; dt_back is the length of the previous step"""
    rhs = compute_rhs(system, state, dt, t0, dt_back)
    multiplier = solve_multiplier(system, rhs)
    u1_dot, u2_dot = velocities(system, rhs, multiplier)
    coefficients = (state.coefficients[0] + dt * u1_dot, state.coefficients[1] + dt * u2_dot)
    if not (np.all(np.isfinite(coefficients[0])) and np.all(np.isfinite(coefficients[1]))):
        raise InstabilityError(step=state.step + 1)
    updated = CoupledState(
        coefficients=coefficients, multiplier=multiplier, time=state.time + dt, step=state.step + 1
    )
    return StepOutcome(state=updated, rhs=rhs, multiplier=multiplier, velocities=(u1_dot, u2_dot))


def lift(
    system: CoupledSystem, state: CoupledState, dt: Optional[float] = None, t0: float = 0.0
) -> Tuple[Vector, Vector]:
    """Full subdomain vectors (B_gamma u_gamma, B_0 u_0, g_i) in local DoF order"""
    lifted = []
    for side, coefficients in zip(system.sides, state.coefficients):
        sub = side.ops.sub
        values = np.empty(sub.num_nodes)
        values[sub.free] = side.rom.lift(coefficients)
        values[sub.dirichlet] = dirichlet_data(sub, side.ops.fields, state.time, dt, t0)[0]
        lifted.append(values)
    return lifted[0], lifted[1]


def interface_residual(system: CoupledSystem, rates: Tuple[Vector, Vector]) -> Tuple[Vector, float]:
    """Full-order interface velocity mismatch u1_gamma_dot - u2_gamma_dot and its max norm"""
    residual = system.sides[0].rom.lift_interface(rates[0]) - system.sides[1].rom.lift_interface(rates[1])
    return residual, float(np.max(np.abs(residual))) if residual.size else 0.0


def run(
    system: CoupledSystem,
    grid: TimeGrid,
    sample_stride: int = 1,
    initial: Optional[CoupledState] = None,
) -> SimulationResult:
    """Partitioned forward Euler over the whole time grid"""
    t0 = float(grid.times[0])
    state = initial or system.initial_state(t0)
    sample_steps = grid.sample_steps(sample_stride)
    step_sizes, rate_steps = grid.step_sizes, grid.rate_steps
    n1, n2 = (side.ops.sub.num_nodes for side in system.sides)
    n_gamma = system.sides[0].ops.sub.n_gamma
    states = (np.empty((n1, sample_steps.size)), np.empty((n2, sample_steps.size)))
    multipliers = np.zeros((n_gamma, sample_steps.size))
    residual_norms = np.empty(grid.num_steps)
    rhs_norms = np.empty((grid.num_steps, 3))

    lifted = lift(system, state, float(step_sizes[0]), t0)
    states[0][:, 0], states[1][:, 0] = lifted
    column = 1

    start = time.perf_counter()
    for n in range(grid.num_steps):
        dt = float(step_sizes[n])
        outcome = step(system, state, dt, t0, float(rate_steps[n]))
        state = CoupledState(
            coefficients=outcome.state.coefficients,
            multiplier=outcome.multiplier,
            time=float(grid.times[n + 1]),
            step=n + 1,
        )
        residual_norms[n] = interface_residual(system, outcome.velocities)[1]
        rhs_norms[n] = outcome.rhs.norms
        if column < sample_steps.size and sample_steps[column] == n + 1:
            lifted = lift(system, state, dt, t0)
            states[0][:, column], states[1][:, column] = lifted
            multipliers[:, column] = system.lift_multiplier(outcome.multiplier)
            column += 1
    online = time.perf_counter() - start

    system.logger.info(
        "%s: %d steps in %.2fs, max interface residual %.3e",
        system.tag,
        grid.num_steps,
        online,
        float(np.max(residual_norms)) if residual_norms.size else 0.0,
    )
    return SimulationResult(
        tag=system.tag,
        dims=system.dims,
        times=grid.times[sample_steps].copy(),
        steps=sample_steps,
        states=states,
        multipliers=multipliers,
        step_times=grid.times[1:].copy(),
        residual_norms=residual_norms,
        rhs_norms=rhs_norms,
        condition=system.schur.condition,
        spd=system.schur.spd,
        offline_seconds=system.offline_seconds,
        online_seconds=online,
    )

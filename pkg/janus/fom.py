"""FOM Module
Monolithic single-domain solver used as snapshot generator and accuracy
benchmark, and the restriction of its trajectories to the subdomains."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from janus.assembly import (
    BlockOperator,
    FieldSpec,
    assemble_flux,
    assemble_mass,
    assemble_source,
    dirichlet_data,
)
from janus.constants import CFL_WARNING_FACTOR, STRICT_CFL
from janus.mesh import SubdomainMesh
from janus.numerics import Matrix, SpdFactorization, Vector, spd_factor, spd_solve
from janus.pod import SnapshotSet
from janus.problem import ProblemConfig, TimeGrid, cfl_time_step

logger = logging.getLogger("fom")

PROGRESS_FRACTION = 0.1


class InstabilityError(RuntimeError):
    """Raised when an explicit update produces non-finite values."""

    def __init__(self, step: int, message: Optional[str] = None) -> None:
        self.step = step
        super().__init__(message or f"Non-finite state at step {step}")


@dataclass(frozen=True)
class Trajectory:
    """Full-domain states, one column per stored step, in geometric node order"""

    times: Vector
    steps: np.ndarray
    states: Matrix
    dt: float
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.states.ndim != 2 or self.states.shape[1] != self.times.size:
            raise ValueError(
                f"States of shape {self.states.shape} do not match {self.times.size} times"
            )
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0.0):
            raise ValueError("Trajectory times must be strictly increasing")

    @property
    def num_states(self) -> int:
        """Number of stored states"""
        return int(self.times.size)

    def snapshots(self, include_initial: bool = False) -> Matrix:
        """Stored states, without the initial state unless asked for"""
        if include_initial:
            return self.states
        return self.states[:, self.steps > 0]

    def at_step(self, step: int) -> Vector:
        """State stored for a given step index"""
        matches = np.flatnonzero(self.steps == step)
        if matches.size == 0:
            raise ValueError(f"Step {step} was not stored")
        return self.states[:, matches[0]]


def check_time_step(dt: float, cfl_dt: float, strict: bool = STRICT_CFL) -> None:
    """Warns (or fails when strict) if dt exceeds the CFL estimate"""
    if dt <= CFL_WARNING_FACTOR * cfl_dt:
        return
    message = f"Time step {dt:.4e} exceeds {CFL_WARNING_FACTOR} x CFL estimate {cfl_dt:.4e}"
    if strict:
        raise ValueError(message)
    logger.warning(message)


class SingleDomainModel:
    """Forward Euler model M u_dot = f - F u - (M_DGamma g_dot + F_DGamma g) on one (sub)domain"""

    def __init__(self, sub: SubdomainMesh, fields: FieldSpec, t0: float = 0.0) -> None:
        self.sub = sub
        self.fields = fields
        self.logger = logging.getLogger("fom")
        self.mass: BlockOperator = assemble_mass(sub)
        self.flux: BlockOperator = assemble_flux(sub, fields, t0)
        self.mass_factor: SpdFactorization = spd_factor(self.mass.free)
        self.logger.debug("Factored mass matrix with %d unknowns", sub.n_free)

    def initial_state(self, t0: float = 0.0, dt: Optional[float] = None) -> Vector:
        """Interpolated initial condition with Dirichlet values g(t0)"""
        coords = self.sub.coords
        state = np.asarray(self.fields.initial(coords[:, 0], coords[:, 1]), dtype=np.float64).copy()
        state[self.sub.dirichlet] = dirichlet_data(self.sub, self.fields, t0, dt, t0)[0]
        return state

    def flux_at(self, t: float) -> BlockOperator:
        """Flux operator, reassembled only for time dependent fields"""
        if self.fields.autonomous:
            return self.flux
        return assemble_flux(self.sub, self.fields, t)

    def velocity(  # pylint: disable=too-many-arguments
        self, state: Vector, t: float, dt: float, t0: float = 0.0, dt_back: Optional[float] = None
    ) -> Vector:
        """u_dot on the unknown DoFs; dt_back is the length of the step that ended at t"""
        sub = self.sub
        flux = self.flux_at(t)
        rhs = -flux.free @ state[sub.free]
        if not self.fields.homogeneous:
            g, g_dot = dirichlet_data(sub, self.fields, t, dt, t0, dt_back)
            rhs += assemble_source(sub, self.fields, t)
            rhs -= self.mass.coupling @ g_dot + flux.coupling @ g
        return spd_solve(self.mass_factor, rhs)

    def advance(  # pylint: disable=too-many-arguments
        self, state: Vector, t: float, dt: float, t0: float = 0.0, dt_back: Optional[float] = None
    ) -> Vector:
        """One forward Euler step from t to t + dt"""
        updated = state.copy()
        updated[self.sub.free] += dt * self.velocity(state, t, dt, t0, dt_back)
        updated[self.sub.dirichlet] = dirichlet_data(self.sub, self.fields, t + dt, dt, t0)[0]
        return updated


def _to_geometric(sub: SubdomainMesh, local: Vector) -> Vector:
    out = np.empty(sub.mesh.num_nodes)
    out[sub.nodes] = local
    return out


def run_single_domain(
    cfg: ProblemConfig,
    sample_stride: Optional[int] = None,
    strict_cfl: bool = STRICT_CFL,
    grid: Optional[TimeGrid] = None,
) -> Trajectory:
    """Forward Euler on the undivided domain with a discontinuous diffusion coefficient.

    States are stored every sample_stride steps, always including step 0 and
    the final step.
    """
    mesh = cfg.build_mesh()
    sub = cfg.whole(mesh)
    grid = grid or cfg.time_grid(mesh)
    stride = sample_stride or cfg.sample_stride
    dt = cfg.time_step(mesh)
    check_time_step(dt, cfl_time_step(mesh, cfg.fields, cfg.cfl_safety), strict_cfl)

    model = SingleDomainModel(sub, cfg.fields, float(grid.times[0]))
    sample_steps = grid.sample_steps(stride)
    states = np.empty((mesh.num_nodes, sample_steps.size))
    t0 = float(grid.times[0])

    state = model.initial_state(t0, float(grid.step_sizes[0]))
    states[:, 0] = _to_geometric(sub, state)
    column = 1
    progress = max(int(grid.num_steps * PROGRESS_FRACTION), 1)

    logger.info(
        "Single domain run %s: %d nodes, %d steps of dt=%.4e, storing %d states",
        cfg.name,
        mesh.num_nodes,
        grid.num_steps,
        dt,
        sample_steps.size,
    )
    step_sizes, rate_steps = grid.step_sizes, grid.rate_steps
    for n in range(grid.num_steps):
        t, step_dt = float(grid.times[n]), float(step_sizes[n])
        state = model.advance(state, t, step_dt, t0, float(rate_steps[n]))
        if not np.all(np.isfinite(state)):
            raise InstabilityError(step=n + 1)
        if column < sample_steps.size and sample_steps[column] == n + 1:
            states[:, column] = _to_geometric(sub, state)
            column += 1
        if (n + 1) % progress == 0:
            logger.info("%s: step %d/%d (t=%.4f)", cfg.name, n + 1, grid.num_steps, grid.times[n + 1])

    return Trajectory(
        times=grid.times[sample_steps].copy(),
        steps=sample_steps,
        states=states,
        dt=dt,
        provenance={"name": cfg.name, "kappa": list(cfg.fields.kappa), "nx": cfg.nx, "dt": dt},
    )


def restrict_to_subdomains(
    traj: Trajectory,
    subs: Tuple[SubdomainMesh, SubdomainMesh],
    include_initial: bool = False,
) -> Tuple[SnapshotSet, SnapshotSet]:
    """Per subdomain snapshot matrices X_i in local DoF order"""
    columns = traj.snapshots(include_initial)
    sets = []
    for sub in subs:
        if columns.shape[0] != sub.mesh.num_nodes:
            raise ValueError(
                f"Trajectory has {columns.shape[0]} rows but subdomain {sub.index} "
                f"belongs to a mesh with {sub.mesh.num_nodes} nodes"
            )
        sets.append(SnapshotSet(sub=sub, full=columns[sub.nodes], provenance=dict(traj.provenance)))
    return sets[0], sets[1]

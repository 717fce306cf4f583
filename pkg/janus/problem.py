"""Problem Module
Problem configurations: the solid body rotation benchmark, manufactured
solutions used for verification and the explicit time step helpers."""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from janus.assembly import FieldSpec, SubdomainOperators, assemble_constraint, assemble_operators
from janus.mesh import (
    UNIT_SQUARE,
    Mesh,
    Rectangle,
    SubdomainMesh,
    build_uniform_mesh,
    partition_at,
    whole_domain,
)
from janus.numerics import Vector

logger = logging.getLogger("problem")

DEFAULT_CFL_SAFETY = 0.075
LEVEQUE_RADIUS = 0.15
TIME_GRID_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Step times t_0 < t_1 < ... < t_N with a truncated last step landing on t_N = T_f"""

    times: Vector

    @classmethod
    def uniform(cls, final_time: float, dt: float, start: float = 0.0) -> "TimeGrid":
        """Grid with N = ceil((T_f - t_0) / dt) steps"""
        if dt <= 0.0 or final_time <= start:
            raise ValueError(f"Invalid time grid: dt={dt}, interval=({start}, {final_time})")
        ratio = (final_time - start) / dt
        steps = max(int(np.ceil(ratio * (1.0 - TIME_GRID_TOL))), 1)
        times = start + dt * np.arange(steps + 1, dtype=np.float64)
        times[-1] = final_time
        return cls(times=times)

    @property
    def num_steps(self) -> int:
        """Number of time steps N"""
        return int(self.times.size - 1)

    @property
    def step_sizes(self) -> Vector:
        """Step lengths t_{n+1} - t_n"""
        return np.diff(self.times)

    @property
    def rate_steps(self) -> Vector:
        """Backward difference spacing t_n - t_{n-1} at the start of each step, t_1 - t_0 for the first"""
        sizes = self.step_sizes
        return np.concatenate([sizes[:1], sizes[:-1]])

    def sample_steps(self, stride: int) -> np.ndarray:
        """Step indices 0, stride, 2 stride, ... always including the last step"""
        if stride < 1:
            raise ValueError(f"Sample stride must be at least 1, got {stride}")
        steps = np.arange(0, self.num_steps + 1, stride)
        if steps[-1] != self.num_steps:
            steps = np.append(steps, self.num_steps)
        return steps


@dataclass(frozen=True)
class ProblemConfig:
    """A complete problem: mesh parameters, fields, time interval and sampling"""

    nx: int
    ny: int
    fields: FieldSpec
    final_time: float
    dt: Optional[float] = None
    cfl_safety: float = DEFAULT_CFL_SAFETY
    sample_stride: int = 1
    x_split: float = 0.5
    rect: Rectangle = UNIT_SQUARE
    name: str = "problem"

    def __post_init__(self) -> None:
        if self.final_time <= 0.0:
            raise ValueError(f"Final time must be positive, got {self.final_time}")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError(f"Time step must be positive, got {self.dt}")
        if self.sample_stride < 1:
            raise ValueError(f"Snapshot stride must be at least 1, got {self.sample_stride}")

    def build_mesh(self) -> Mesh:
        """Uniform mesh of the problem rectangle"""
        return build_uniform_mesh(self.nx, self.ny, self.rect)

    def partition(self, mesh: Optional[Mesh] = None) -> Tuple[SubdomainMesh, SubdomainMesh]:
        """The two subdomains"""
        return partition_at(mesh or self.build_mesh(), self.x_split, self.fields.dirichlet_sides)

    def whole(self, mesh: Optional[Mesh] = None) -> SubdomainMesh:
        """The undivided domain"""
        return whole_domain(mesh or self.build_mesh(), self.fields.dirichlet_sides)

    def time_step(self, mesh: Optional[Mesh] = None) -> float:
        """Configured dt, or the CFL step when none is configured"""
        if self.dt is not None:
            return self.dt
        return cfl_time_step(mesh or self.build_mesh(), self.fields, self.cfl_safety)

    def time_grid(self, mesh: Optional[Mesh] = None) -> TimeGrid:
        """Step times from 0 to final_time"""
        return TimeGrid.uniform(self.final_time, self.time_step(mesh))

    def with_kappa(self, kappa1: float, kappa2: float) -> "ProblemConfig":
        """Same problem with other diffusion coefficients"""
        return replace(self, fields=replace(self.fields, kappa=(kappa1, kappa2)))

    def coupled_operators(
        self, mesh: Optional[Mesh] = None
    ) -> Tuple[Tuple[SubdomainMesh, SubdomainMesh], Tuple[SubdomainOperators, SubdomainOperators]]:
        """Subdomains and their assembled operators with the interface constraint"""
        subs = self.partition(mesh or self.build_mesh())
        constraints = assemble_constraint(*subs)
        ops = (
            assemble_operators(subs[0], self.fields, constraints[0]),
            assemble_operators(subs[1], self.fields, constraints[1]),
        )
        return subs, ops


@dataclass(frozen=True)
class ManufacturedProblem:
    """A problem with a known exact solution"""

    config: ProblemConfig
    exact: Callable[[Vector, Vector, float], Vector]
    metadata: Dict[str, float] = field(default_factory=dict)


def cfl_time_step(mesh: Mesh, fields: FieldSpec, safety: float = DEFAULT_CFL_SAFETY, t: float = 0.0) -> float:
    """Explicit step dt = safety / (max|a| / h + 4 max(kappa) / h^2), max|a| sampled at the nodes"""
    if not 0.0 < safety <= 1.0:
        raise ValueError(f"CFL safety factor must lie in (0, 1], got {safety}")
    ax, ay = fields.advection(mesh.coords[:, 0], mesh.coords[:, 1], t)
    speed = float(np.max(np.hypot(ax, ay))) if np.size(ax) else 0.0
    denominator = speed / mesh.h + 4.0 * max(fields.kappa) / mesh.h**2
    if denominator <= 0.0:
        raise ValueError("CFL step undefined without transport and diffusion")
    logger.debug("CFL step with safety %.3g: max|a|=%.4g, h=%.4g", safety, speed, mesh.h)
    return safety / denominator


def rotation_field(x: Vector, y: Vector, _t: float = 0.0) -> Tuple[Vector, Vector]:
    """Counterclockwise solid body rotation about (0.5, 0.5)"""
    return 0.5 - y, x - 0.5


def leveque_initial_condition(x: Vector, y: Vector, radius: float = LEVEQUE_RADIUS) -> Vector:
    """Slotted cylinder, cone and smooth hump"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    u = np.zeros(np.broadcast(x, y).shape)

    d_cylinder = np.hypot(x - 0.5, y - 0.75) / radius
    slot = (np.abs(x - 0.5) < 0.025) & (y < 0.85)
    u = np.where((d_cylinder <= 1.0) & ~slot, 1.0, u)

    d_cone = np.hypot(x - 0.5, y - 0.25) / radius
    u = np.where(d_cone <= 1.0, 1.0 - d_cone, u)

    d_hump = np.hypot(x - 0.25, y - 0.5) / radius
    u = np.where(d_hump <= 1.0, 0.25 * (1.0 + np.cos(np.pi * np.minimum(d_hump, 1.0))), u)
    return u


def solid_body_rotation_config(
    kappa1: float,
    kappa2: float,
    nx: int,
    dt: Optional[float] = None,
    final_time: float = 2.0 * np.pi,
    sample_stride: int = 1,
    cfl_safety: float = DEFAULT_CFL_SAFETY,
) -> ProblemConfig:
    """Rotation of the LeVeque bodies on the unit square with homogeneous Dirichlet data"""
    fields = FieldSpec(
        kappa=(kappa1, kappa2),
        advection=rotation_field,
        initial=leveque_initial_condition,
        interface_x=0.5,
    )
    return ProblemConfig(
        nx=nx,
        ny=nx,
        fields=fields,
        final_time=final_time,
        dt=dt,
        cfl_safety=cfl_safety,
        sample_stride=sample_stride,
        x_split=0.5,
        name=f"rotation_k{kappa1:g}_{kappa2:g}",
    )


def _smooth_part(x: Vector, y: Vector) -> Vector:
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _manufactured(
    kappa: float, velocity: Tuple[float, float], nx: int, final_time: float, safety: float, name: str
) -> ManufacturedProblem:
    ax, ay = velocity

    def spatial(x: Vector, y: Vector) -> Vector:
        return _smooth_part(x, y) + x + 2.0 * y

    def exact(x: Vector, y: Vector, t: float) -> Vector:
        return np.exp(-t) * spatial(x, y)

    def rate(x: Vector, y: Vector, t: float) -> Vector:
        return -exact(x, y, t)

    def source(x: Vector, y: Vector, t: float) -> Vector:
        grad_x = np.pi * np.cos(np.pi * x) * np.sin(np.pi * y) + 1.0
        grad_y = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y) + 2.0
        laplacian = -2.0 * np.pi**2 * _smooth_part(x, y)
        return np.exp(-t) * (-spatial(x, y) - kappa * laplacian + ax * grad_x + ay * grad_y)

    def advection(x: Vector, _y: Vector, _t: float) -> Tuple[Vector, Vector]:
        return np.full_like(x, ax), np.full_like(x, ay)

    fields = FieldSpec(
        kappa=(kappa, kappa),
        advection=advection,
        initial=lambda x, y: exact(x, y, 0.0),
        source=source,
        dirichlet=exact,
        dirichlet_rate=rate,
    )
    config = ProblemConfig(nx=nx, ny=nx, fields=fields, final_time=final_time, cfl_safety=safety, name=name)
    return ManufacturedProblem(config=config, exact=exact, metadata={"kappa": kappa, "ax": ax, "ay": ay})


@dataclass(frozen=True)
class _ManufacturedParams:
    kappa: float
    velocity: Tuple[float, float]
    final_time: float
    safety: float


MANUFACTURED = {
    "diffusion": _ManufacturedParams(kappa=1.0, velocity=(0.0, 0.0), final_time=0.05, safety=0.25),
    "advection_diffusion": _ManufacturedParams(kappa=0.05, velocity=(1.0, 0.5), final_time=0.2, safety=0.25),
}


def manufactured_problem(problem_id: str, nx: int = 8) -> ManufacturedProblem:
    """Problem with exact solution u = exp(-t) (sin(pi x) sin(pi y) + x + 2y).

    The Dirichlet data is nonzero and time dependent on every side, so every
    partial Dirichlet coupling contributes.
    """
    if problem_id not in MANUFACTURED:
        raise ValueError(f"Unknown manufactured problem {problem_id}, expected one of {sorted(MANUFACTURED)}")
    params = MANUFACTURED[problem_id]
    return _manufactured(
        kappa=params.kappa,
        velocity=params.velocity,
        nx=nx,
        final_time=params.final_time,
        safety=params.safety,
        name=problem_id,
    )

"""Baseline Module
Single-domain POD-Galerkin ROM, the reference point for the partitioned ROMs."""

import logging
from typing import Optional, Sequence, Union

import numpy as np

from janus.assembly import assemble_source, dirichlet_data
from janus.fom import InstabilityError, SingleDomainModel, Trajectory
from janus.numerics import Matrix, Vector, spd_factor, spd_solve, svd_thin
from janus.pod import select_dim
from janus.problem import ProblemConfig, TimeGrid


class SingleDomainRom:
    """POD-Galerkin ROM of the undivided domain with the Dirichlet lift as reference state"""

    def __init__(self, model: SingleDomainModel, basis: Matrix) -> None:
        if basis.shape[0] != model.sub.n_free:
            raise ValueError(f"Basis has {basis.shape[0]} rows, expected {model.sub.n_free}")
        self.model = model
        self.basis = basis
        self.mass = basis.T @ model.mass.free @ basis
        self.flux = basis.T @ model.flux.free @ basis
        self.mass_coupling = basis.T @ model.mass.coupling
        self.flux_coupling = basis.T @ model.flux.coupling
        self.mass_factor = spd_factor(self.mass)
        self.logger = logging.getLogger("pod")

    @property
    def dim(self) -> int:
        """Number of modes"""
        return int(self.basis.shape[1])

    @classmethod
    def from_trajectory(
        cls,
        cfg: ProblemConfig,
        traj: Union[Trajectory, Sequence[Trajectory]],
        delta: Optional[float] = None,
        dim: Optional[int] = None,
    ) -> "SingleDomainRom":
        """POD of the adjusted whole-domain snapshots (initial state excluded) of one or more runs"""
        model = SingleDomainModel(cfg.whole(), cfg.fields)
        sub = model.sub
        runs = [traj] if isinstance(traj, Trajectory) else list(traj)
        if not runs:
            raise ValueError("No snapshot trajectories given")
        snapshots = np.hstack([t.snapshots()[sub.nodes][sub.free] for t in runs])
        svd = svd_thin(snapshots)
        if dim is None:
            if delta is None:
                raise ValueError("Either a dimension or an energy threshold is required")
            dim = select_dim(svd.sigma, delta)
        if dim > svd.rank:
            raise ValueError(f"Requested dimension {dim} exceeds the snapshot rank {svd.rank}")
        return cls(model, svd.u[:, :dim])

    def velocity(  # pylint: disable=too-many-arguments
        self, coefficients: Vector, t: float, dt: float, t0: float = 0.0, dt_back: Optional[float] = None
    ) -> Vector:
        """Reduced velocity"""
        rhs = -self.flux @ coefficients
        fields = self.model.fields
        if not fields.homogeneous:
            g, g_dot = dirichlet_data(self.model.sub, fields, t, dt, t0, dt_back)
            rhs += self.basis.T @ assemble_source(self.model.sub, fields, t)
            rhs -= self.mass_coupling @ g_dot + self.flux_coupling @ g
        return spd_solve(self.mass_factor, rhs)

    def run(self, grid: TimeGrid, sample_stride: int = 1) -> Trajectory:
        """Forward Euler on the reduced system, lifted to the full domain at sampled steps"""
        sub = self.model.sub
        t0 = float(grid.times[0])
        step_sizes, rate_steps = grid.step_sizes, grid.rate_steps
        full = self.model.initial_state(t0, float(step_sizes[0]))
        coefficients = self.basis.T @ full[sub.free]
        sample_steps = grid.sample_steps(sample_stride)
        states = np.empty((sub.mesh.num_nodes, sample_steps.size))

        def lifted(values: Vector, t: float, dt: float) -> Vector:
            local = np.empty(sub.num_nodes)
            local[sub.free] = self.basis @ values
            local[sub.dirichlet] = dirichlet_data(sub, self.model.fields, t, dt, t0)[0]
            out = np.empty(sub.mesh.num_nodes)
            out[sub.nodes] = local
            return out

        states[:, 0] = lifted(coefficients, t0, float(step_sizes[0]))
        column = 1
        for n in range(grid.num_steps):
            t, dt = float(grid.times[n]), float(step_sizes[n])
            coefficients = coefficients + dt * self.velocity(coefficients, t, dt, t0, float(rate_steps[n]))
            if not np.all(np.isfinite(coefficients)):
                raise InstabilityError(step=n + 1)
            if column < sample_steps.size and sample_steps[column] == n + 1:
                states[:, column] = lifted(coefficients, float(grid.times[n + 1]), dt)
                column += 1

        self.logger.info("Single domain ROM with %d modes: %d steps", self.dim, grid.num_steps)
        return Trajectory(
            times=grid.times[sample_steps].copy(),
            steps=sample_steps,
            states=states,
            dt=float(step_sizes[0]),
            provenance={"kind": "single_domain_rom", "dim": self.dim},
        )

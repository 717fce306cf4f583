"""Metrics Module
Relative errors against the single-domain benchmark in the broken discrete L2
norm, and interface traces."""

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from janus.assembly import SubdomainOperators, assemble_mass
from janus.fom import Trajectory
from janus.ivr import SimulationResult
from janus.mesh import SubdomainMesh
from janus.numerics import Matrix, Vector


class BrokenNorm:
    """||{v1, v2}||_V^2 = v1^T M_1,D v1 + v2^T M_2,D v2 on the unknown DoFs"""

    def __init__(self, subs: Sequence[SubdomainMesh], masses: Sequence[Matrix]) -> None:
        if len(subs) != len(masses):
            raise ValueError("One mass matrix per subdomain is required")
        self.subs = tuple(subs)
        self.masses = tuple(masses)

    @classmethod
    def from_subdomains(cls, subs: Sequence[SubdomainMesh]) -> "BrokenNorm":
        """Norm built from freshly assembled mass matrices"""
        return cls(subs, [assemble_mass(sub).free for sub in subs])

    @classmethod
    def from_operators(cls, ops: Sequence[SubdomainOperators]) -> "BrokenNorm":
        """Norm reusing already assembled mass matrices"""
        return cls([o.sub for o in ops], [o.mass.free for o in ops])

    def __call__(self, states: Sequence[Vector]) -> float:
        total = 0.0
        for sub, mass, state in zip(self.subs, self.masses, states):
            if state.shape[0] != sub.num_nodes:
                raise ValueError(f"State of length {state.shape[0]} for a subdomain of {sub.num_nodes} nodes")
            free = state[sub.free]
            total += float(free @ mass @ free)
        return float(np.sqrt(max(total, 0.0)))


@dataclass(frozen=True)
class ErrorSeries:
    """Relative error over time of one partitioned run"""

    tag: str
    times: Vector
    values: Vector
    dims: Dict[str, int] = field(default_factory=dict)

    @property
    def final(self) -> float:
        """Error at the last sampled time"""
        return float(self.values[-1])


def restrict_state(state: Vector, sub: SubdomainMesh) -> Vector:
    """Full-domain state (geometric order) restricted to a subdomain in local DoF order"""
    if state.shape[0] != sub.mesh.num_nodes:
        raise ValueError(f"State has {state.shape[0]} entries, mesh has {sub.mesh.num_nodes} nodes")
    return state[sub.nodes]


def relative_error(
    norm: BrokenNorm, partitioned: Sequence[Vector], benchmark: Sequence[Vector]
) -> float:
    """||partitioned - benchmark||_V / ||benchmark||_V"""
    reference = norm(benchmark)
    if reference == 0.0:
        raise ValueError("Benchmark has zero norm")
    return norm([p - b for p, b in zip(partitioned, benchmark)]) / reference


def error_series(
    result: SimulationResult,
    benchmark: Trajectory,
    subs: Tuple[SubdomainMesh, SubdomainMesh],
    norm: BrokenNorm,
) -> ErrorSeries:
    """Relative error at every step sampled by both the partitioned run and the benchmark"""
    common = np.intersect1d(result.steps, benchmark.steps)
    if common.size == 0:
        raise ValueError("The partitioned run and the benchmark share no sampled step")
    values = np.empty(common.size)
    times = np.empty(common.size)
    for k, n in enumerate(common):
        column = int(np.flatnonzero(result.steps == n)[0])
        reference = benchmark.at_step(int(n))
        values[k] = relative_error(
            norm,
            result.state_at(column),
            [restrict_state(reference, subs[0]), restrict_state(reference, subs[1])],
        )
        times[k] = result.times[column]
    return ErrorSeries(tag=result.tag, times=times, values=values, dims=dict(result.dims))


def interface_trace(state: Vector, sub: SubdomainMesh) -> Tuple[Vector, Vector]:
    """(y, u) along the interface line, bottom to top, endpoints included"""
    line = sub.interface_line
    return sub.coords[line, 1], np.asarray(state)[line]

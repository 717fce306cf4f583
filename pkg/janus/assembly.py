"""Assembly Module
Q1 finite element operators of one subdomain in (interface, interior, Dirichlet)
block form, the interface constraint matrices and the Dirichlet data terms."""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from janus.constants import INTERFACE_DATA_TOL, SIDES
from janus.mesh import SubdomainMesh
from janus.numerics import Matrix, Vector

logger = logging.getLogger("assembly")

ScalarField = Callable[[Vector, Vector, float], Vector]
VectorField = Callable[[Vector, Vector, float], Tuple[Vector, Vector]]
InitialField = Callable[[Vector, Vector], Vector]

BLOCKS = ("gamma", "interior", "dirichlet")

# 2x2 Gauss rule on the reference square [0, 1]^2
_G = 0.5 / np.sqrt(3.0)
_XI, _ETA = (a.ravel() for a in np.meshgrid([0.5 - _G, 0.5 + _G], [0.5 - _G, 0.5 + _G]))
GAUSS_POINTS = np.column_stack([_XI, _ETA])
SHAPE = np.column_stack([(1 - _XI) * (1 - _ETA), _XI * (1 - _ETA), _XI * _ETA, (1 - _XI) * _ETA])
SHAPE_GRAD = np.stack(
    [
        np.column_stack([-(1 - _ETA), 1 - _ETA, _ETA, -_ETA]),
        np.column_stack([-(1 - _XI), -_XI, _XI, 1 - _XI]),
    ],
    axis=-1,
)
# Element stiffness of the Laplacian, independent of h in 2D
REFERENCE_STIFFNESS = 0.25 * np.einsum("qrk,qsk->rs", SHAPE_GRAD, SHAPE_GRAD)
REFERENCE_MASS = 0.25 * SHAPE.T @ SHAPE
LINE_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


def no_advection(x: Vector, _y: Vector, _t: float) -> Tuple[Vector, Vector]:
    """Zero velocity field"""
    return np.zeros_like(x), np.zeros_like(x)


def zero_field(x: Vector, _y: Vector, _t: float = 0.0) -> Vector:
    """Zero scalar field"""
    return np.zeros_like(x)


@dataclass(frozen=True)
class FieldSpec:
    """Coefficients and data of the advection-diffusion problem.

    The diffusion is piecewise constant: kappa[0] left of ``interface_x`` and
    kappa[1] right of it. ``dirichlet_rate`` is the analytic time derivative of
    ``dirichlet``; when absent it is approximated by a backward difference.
    """

    kappa: Tuple[float, float]
    advection: VectorField = no_advection
    initial: InitialField = zero_field
    source: Optional[ScalarField] = None
    dirichlet: Optional[ScalarField] = None
    dirichlet_rate: Optional[ScalarField] = None
    interface_x: float = 0.5
    dirichlet_sides: Tuple[str, ...] = SIDES
    autonomous: bool = True

    def __post_init__(self) -> None:
        if len(self.kappa) != 2 or min(self.kappa) <= 0.0:
            raise ValueError(f"Diffusion coefficients must be two positive values, got {self.kappa}")

    @property
    def homogeneous(self) -> bool:
        """True when both the source and the Dirichlet data vanish identically"""
        return self.source is None and self.dirichlet is None

    def kappa_at(self, x: npt.ArrayLike) -> Vector:
        """Diffusion coefficient at the given abscissas"""
        return np.where(np.asarray(x) < self.interface_x, self.kappa[0], self.kappa[1])


@dataclass(frozen=True)
class BlockOperator:
    """A subdomain matrix in local DoF order with named block access"""

    sub: SubdomainMesh
    matrix: Matrix

    def _range(self, name: str) -> slice:
        if name not in BLOCKS:
            raise ValueError(f"Unknown block {name}, expected one of {BLOCKS}")
        return getattr(self.sub, name)

    def block(self, p: str, q: str) -> Matrix:
        """Block (p, q) with p, q in {gamma, interior, dirichlet}"""
        return self.matrix[self._range(p), self._range(q)]

    @property
    def free(self) -> Matrix:
        """The (gamma, interior) x (gamma, interior) part, i.e. the D block"""
        return self.matrix[self.sub.free, self.sub.free]

    @property
    def coupling(self) -> Matrix:
        """The partial (gamma, interior) x Dirichlet part"""
        return self.matrix[self.sub.free, self.sub.dirichlet]

    def geometric(self) -> Matrix:
        """The matrix permuted back to geometric node order of the subdomain nodes"""
        order = np.argsort(self.sub.nodes)
        return self.matrix[np.ix_(order, order)]


@dataclass(frozen=True)
class ConstraintBlocks:
    """Interface constraint matrices G_gamma (n_gamma x n_gamma) and G_Gamma (n_gamma x n_Gamma)"""

    gamma: Matrix
    dirichlet: Matrix


@dataclass(frozen=True)
class SubdomainOperators:
    """All assembled operators of one subdomain"""

    sub: SubdomainMesh
    fields: FieldSpec
    mass: BlockOperator
    flux: BlockOperator
    constraint: Optional[ConstraintBlocks]
    time: float = 0.0


def _element_points(sub: SubdomainMesh) -> Tuple[Vector, Vector]:
    """Physical Gauss point coordinates, shape (elements, 4)"""
    corner = sub.coords[sub.elements[:, 0]]
    h = sub.mesh.h
    x = corner[:, :1] + h * GAUSS_POINTS[None, :, 0]
    y = corner[:, 1:] + h * GAUSS_POINTS[None, :, 1]
    return x, y


def _scatter(sub: SubdomainMesh, local: npt.NDArray[np.float64]) -> Matrix:
    n = sub.num_nodes
    matrix = np.zeros((n, n))
    rows = np.broadcast_to(sub.elements[:, :, None], local.shape)
    cols = np.broadcast_to(sub.elements[:, None, :], local.shape)
    np.add.at(matrix, (rows, cols), local)
    return matrix


def assemble_mass(sub: SubdomainMesh) -> BlockOperator:
    """Consistent Q1 mass matrix"""
    h = sub.mesh.h
    local = np.broadcast_to(h * h * REFERENCE_MASS, (len(sub.elements), 4, 4))
    logger.debug("Assembled mass of subdomain %d (%d nodes)", sub.index, sub.num_nodes)
    return BlockOperator(sub=sub, matrix=_scatter(sub, local))


def element_advection(sub: SubdomainMesh, fields: FieldSpec, t: float) -> npt.NDArray[np.float64]:
    """Element advection matrices A_rs = -integral of N_s a . grad N_r"""
    x, y = _element_points(sub)
    ax, ay = fields.advection(x, y, t)
    velocity = np.stack(np.broadcast_arrays(ax, ay), axis=-1)
    directional = np.einsum("eqk,qrk->eqr", velocity, SHAPE_GRAD)
    return -(sub.mesh.h / 4.0) * np.einsum("eqr,qs->ers", directional, SHAPE)


def assemble_flux(sub: SubdomainMesh, fields: FieldSpec, t: float = 0.0) -> BlockOperator:
    """Total flux matrix, entry (r, s) = integral of (kappa grad N_s - a N_s) . grad N_r"""
    kappa = fields.kappa_at(sub.element_centers()[:, 0])
    local = kappa[:, None, None] * REFERENCE_STIFFNESS[None] + element_advection(sub, fields, t)
    logger.debug("Assembled flux of subdomain %d at t=%.6g", sub.index, t)
    return BlockOperator(sub=sub, matrix=_scatter(sub, local))


def _line_constraint(sub: SubdomainMesh) -> ConstraintBlocks:
    h = sub.mesh.h
    n_gamma, n_free = sub.n_gamma, sub.n_free
    gamma = np.zeros((n_gamma, n_gamma))
    dirichlet = np.zeros((n_gamma, sub.n_dirichlet))
    line = sub.interface_line
    for a, b in zip(line[:-1], line[1:]):
        edge = (a, b)
        for p in range(2):
            row = edge[p]
            if row >= n_gamma:
                continue
            for q in range(2):
                col = edge[q]
                if col < n_gamma:
                    gamma[row, col] += h * LINE_MASS[p, q]
                else:
                    dirichlet[row, col - n_free] += h * LINE_MASS[p, q]
    return ConstraintBlocks(gamma=gamma, dirichlet=dirichlet)


def assemble_constraint(
    sub1: SubdomainMesh, sub2: SubdomainMesh
) -> Tuple[ConstraintBlocks, ConstraintBlocks]:
    """1D P1 interface mass matrices of both subdomains' traces"""
    if sub1.n_gamma != sub2.n_gamma or sub1.interface_line.size != sub2.interface_line.size:
        raise ValueError(
            f"Interface node count mismatch: {sub1.n_gamma} vs {sub2.n_gamma} free interface nodes"
        )
    if sub1.interface_line.size == 0:
        raise ValueError("Subdomains have no interface")
    coords1 = sub1.coords[sub1.interface_line]
    coords2 = sub2.coords[sub2.interface_line]
    if not np.allclose(coords1, coords2, rtol=0.0, atol=1e-14):
        raise ValueError("Interface grids do not match")
    if not np.array_equal(sub1.interface_line < sub1.n_gamma, sub2.interface_line < sub2.n_gamma):
        raise ValueError("Interface node classification differs between subdomains")

    return _line_constraint(sub1), _line_constraint(sub2)


def assemble_operators(
    sub: SubdomainMesh,
    fields: FieldSpec,
    constraint: Optional[ConstraintBlocks] = None,
    t: float = 0.0,
) -> SubdomainOperators:
    """Mass, flux and constraint of one subdomain"""
    return SubdomainOperators(
        sub=sub,
        fields=fields,
        mass=assemble_mass(sub),
        flux=assemble_flux(sub, fields, t),
        constraint=constraint,
        time=t,
    )


def _check_length(name: str, values: Vector, expected: int) -> Vector:
    array = np.asarray(values, dtype=np.float64)
    if array.shape != (expected,):
        raise ValueError(f"{name} has shape {array.shape}, expected ({expected},)")
    return array


def boundary_rhs(ops: SubdomainOperators, g: Vector, g_dot: Vector) -> Tuple[Vector, Vector]:
    """Dirichlet contributions Q_pGamma = M_pGamma g_dot + F_pGamma g for p = gamma, interior"""
    n_dirichlet = ops.sub.n_dirichlet
    g = _check_length("g", g, n_dirichlet)
    g_dot = _check_length("g_dot", g_dot, n_dirichlet)
    q = ops.mass.coupling @ g_dot + ops.flux.coupling @ g
    return q[ops.sub.gamma], q[ops.sub.interior]


def constraint_rhs(
    c1: ConstraintBlocks, c2: ConstraintBlocks, g1_dot: Vector, g2_dot: Vector
) -> Vector:
    """Q_gamma,Gamma = G_1,Gamma g1_dot - G_2,Gamma g2_dot"""
    g1_dot = _check_length("g1_dot", g1_dot, c1.dirichlet.shape[1])
    g2_dot = _check_length("g2_dot", g2_dot, c2.dirichlet.shape[1])
    return c1.dirichlet @ g1_dot - c2.dirichlet @ g2_dot


def assemble_source(sub: SubdomainMesh, fields: FieldSpec, t: float) -> Vector:
    """Load vector integral of f N_r on the unknown DoFs"""
    if fields.source is None:
        return np.zeros(sub.n_free)
    x, y = _element_points(sub)
    values = np.broadcast_to(fields.source(x, y, t), x.shape)
    h = sub.mesh.h
    local = 0.25 * h * h * values @ SHAPE
    load = np.zeros(sub.num_nodes)
    np.add.at(load, sub.elements, local)
    return load[sub.free]


def dirichlet_data(  # pylint: disable=too-many-arguments
    sub: SubdomainMesh,
    fields: FieldSpec,
    t: float,
    dt: Optional[float] = None,
    t0: float = 0.0,
    dt_back: Optional[float] = None,
) -> Tuple[Vector, Vector]:
    """Nodal Dirichlet values g(t) and rates g_dot(t) on the subdomain's Dirichlet nodes.

    Without an analytic rate, g_dot is the backward difference over the step
    that ends at t (dt_back, defaulting to dt), and at the initial time the
    first forward difference over dt (g_dot^0 = g_dot^1).
    """
    coords = sub.coords[sub.dirichlet]
    x, y = coords[:, 0], coords[:, 1]
    if fields.dirichlet is None:
        zeros = np.zeros(sub.n_dirichlet)
        return zeros, zeros.copy()

    g = np.broadcast_to(fields.dirichlet(x, y, t), x.shape).astype(np.float64)
    if fields.dirichlet_rate is not None:
        return g, np.broadcast_to(fields.dirichlet_rate(x, y, t), x.shape).astype(np.float64)
    if dt is None or dt <= 0.0:
        raise ValueError("A positive dt is required to difference Dirichlet data without an analytic rate")
    if t <= t0:
        later = fields.dirichlet(x, y, t + dt)
        return g, (later - g) / dt
    back = dt_back or dt
    earlier = fields.dirichlet(x, y, t - back)
    return g, (g - earlier) / back


def check_interface_data(
    sub1: SubdomainMesh,
    sub2: SubdomainMesh,
    data: Sequence[Vector],
    tol: float = INTERFACE_DATA_TOL,
) -> None:
    """Checks both subdomains' Dirichlet data agree at the shared interface endpoints.

    ``data`` holds one Dirichlet vector per subdomain (values or rates).
    """
    values1, values2 = data
    line1, line2 = sub1.interface_line, sub2.interface_line
    for local1, local2 in zip(line1, line2):
        if local1 < sub1.n_free:
            continue
        v1 = values1[local1 - sub1.n_free]
        v2 = values2[local2 - sub2.n_free]
        if abs(v1 - v2) > tol:
            y = sub1.coords[local1, 1]
            raise ValueError(
                f"Dirichlet data disagree at interface endpoint y={y:.6g}: {v1:.6e} vs {v2:.6e}"
            )

"""Mesh Module
Uniform quadrilateral meshes of a rectangle, their split into two subdomains at a
vertical grid line and the (interface, interior, Dirichlet) DoF orderings."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np
import numpy.typing as npt

from janus.constants import GRID_TOL, SIDES

logger = logging.getLogger("mesh")

IntArray = npt.NDArray[np.int64]
Rectangle = Tuple[Tuple[float, float], Tuple[float, float]]
UNIT_SQUARE: Rectangle = ((0.0, 1.0), (0.0, 1.0))


class NodeKind(Enum):
    """Node classification inside a subdomain"""

    INTERFACE = "interface"
    INTERIOR = "interior"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of square Q1 elements.

    Nodes are numbered lexicographically by (row, column), i.e. node (i, j)
    sits at column i and row j and has index j * (nx + 1) + i. Element
    connectivity is counterclockwise starting at the lower left corner.
    """

    nx: int
    ny: int
    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    coords: npt.NDArray[np.float64]
    elements: IntArray
    h: float

    @property
    def num_nodes(self) -> int:
        """Number of nodes"""
        return (self.nx + 1) * (self.ny + 1)

    @property
    def num_elements(self) -> int:
        """Number of elements"""
        return self.nx * self.ny

    def node_index(self, i: int, j: int) -> int:
        """Geometric index of the node at column i, row j"""
        return j * (self.nx + 1) + i


@dataclass(frozen=True)
class SubdomainMesh:
    """One subdomain of a partitioned mesh.

    ``nodes`` lists the geometric node indices in local DoF order: interface
    nodes first (bottom to top), then interior nodes, then Dirichlet nodes.
    ``elements`` is the element connectivity expressed in local DoF indices.
    """

    mesh: Mesh
    index: int
    nodes: IntArray
    n_gamma: int
    n_interior: int
    n_dirichlet: int
    elements: IntArray
    element_ids: IntArray
    interface_line: IntArray
    local_index: IntArray
    normal: Tuple[float, float]

    @property
    def num_nodes(self) -> int:
        """Total number of subdomain nodes"""
        return int(self.nodes.size)

    @property
    def n_free(self) -> int:
        """Number of unknown (non-Dirichlet) DoFs, n_D = n_gamma + n_0"""
        return self.n_gamma + self.n_interior

    @property
    def coords(self) -> npt.NDArray[np.float64]:
        """Node coordinates in local DoF order"""
        return self.mesh.coords[self.nodes]

    def element_centers(self) -> npt.NDArray[np.float64]:
        """Barycenters of the subdomain elements"""
        return self.coords[self.elements].mean(axis=1)

    @property
    def gamma(self) -> slice:
        """Local range of interface DoFs"""
        return slice(0, self.n_gamma)

    @property
    def interior(self) -> slice:
        """Local range of interior DoFs"""
        return slice(self.n_gamma, self.n_free)

    @property
    def free(self) -> slice:
        """Local range of unknown DoFs"""
        return slice(0, self.n_free)

    @property
    def dirichlet(self) -> slice:
        """Local range of Dirichlet DoFs"""
        return slice(self.n_free, self.num_nodes)

    def kind(self, local: int) -> NodeKind:
        """Classification of a local DoF"""
        if local < self.n_gamma:
            return NodeKind.INTERFACE
        if local < self.n_free:
            return NodeKind.INTERIOR
        return NodeKind.DIRICHLET

    def to_local(self, geometric: npt.ArrayLike) -> IntArray:
        """Maps geometric node indices to local DoF indices (-1 when absent)"""
        return self.local_index[np.asarray(geometric, dtype=np.int64)]


def build_uniform_mesh(nx: int, ny: int, rect: Rectangle = UNIT_SQUARE) -> Mesh:
    """Builds a uniform nx x ny mesh of square elements on a rectangle"""
    if nx < 1 or ny < 1:
        raise ValueError(f"Element counts must be positive, got nx={nx}, ny={ny}")

    (x0, x1), (y0, y1) = rect
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny
    if hx <= 0.0 or hy <= 0.0:
        raise ValueError(f"Degenerate rectangle {rect}")
    if abs(hx - hy) > GRID_TOL * max(hx, hy):
        raise ValueError(f"Elements must be squares, got hx={hx} and hy={hy}")

    xs = x0 + hx * np.arange(nx + 1)
    ys = y0 + hy * np.arange(ny + 1)
    grid_x, grid_y = np.meshgrid(xs, ys)
    coords = np.column_stack([grid_x.ravel(), grid_y.ravel()])

    cols, rows = np.meshgrid(np.arange(nx), np.arange(ny))
    lower_left = (rows * (nx + 1) + cols).ravel()
    elements = np.column_stack(
        [lower_left, lower_left + 1, lower_left + nx + 2, lower_left + nx + 1]
    ).astype(np.int64)

    return Mesh(
        nx=nx,
        ny=ny,
        x_range=(float(x0), float(x1)),
        y_range=(float(y0), float(y1)),
        coords=coords,
        elements=elements,
        h=float(hx),
    )


def _check_sides(dirichlet_sides: Sequence[str]) -> frozenset:
    unknown = set(dirichlet_sides) - set(SIDES)
    if unknown:
        raise ValueError(f"Unknown boundary sides {sorted(unknown)}; expected a subset of {SIDES}")
    return frozenset(dirichlet_sides)


def _is_dirichlet(mesh: Mesh, i: int, j: int, sides: frozenset) -> bool:
    return (
        (i == 0 and "left" in sides)
        or (i == mesh.nx and "right" in sides)
        or (j == 0 and "bottom" in sides)
        or (j == mesh.ny and "top" in sides)
    )


def _build_subdomain(  # pylint: disable=too-many-locals
    mesh: Mesh,
    index: int,
    node_columns: range,
    element_columns: range,
    interface_column: int | None,
    sides: frozenset,
) -> SubdomainMesh:
    interface, interior, dirichlet = [], [], []
    for j in range(mesh.ny + 1):
        for i in node_columns:
            node = mesh.node_index(i, j)
            if _is_dirichlet(mesh, i, j, sides):
                dirichlet.append(node)
            elif i == interface_column:
                interface.append(node)
            else:
                interior.append(node)

    nodes = np.array(interface + interior + dirichlet, dtype=np.int64)
    local_index = np.full(mesh.num_nodes, -1, dtype=np.int64)
    local_index[nodes] = np.arange(nodes.size)

    element_ids = np.array(
        [j * mesh.nx + i for j in range(mesh.ny) for i in element_columns], dtype=np.int64
    )
    elements = local_index[mesh.elements[element_ids]]

    if interface_column is None:
        line = np.zeros(0, dtype=np.int64)
    else:
        line = local_index[[mesh.node_index(interface_column, j) for j in range(mesh.ny + 1)]]

    return SubdomainMesh(
        mesh=mesh,
        index=index,
        nodes=nodes,
        n_gamma=len(interface),
        n_interior=len(interior),
        n_dirichlet=len(dirichlet),
        elements=elements,
        element_ids=element_ids,
        interface_line=line,
        local_index=local_index,
        normal=(1.0, 0.0),
    )


def whole_domain(mesh: Mesh, dirichlet_sides: Sequence[str] = SIDES) -> SubdomainMesh:
    """The undivided domain as a single 'subdomain' without interface"""
    sides = _check_sides(dirichlet_sides)
    return _build_subdomain(mesh, 0, range(mesh.nx + 1), range(mesh.nx), None, sides)


def partition_at(
    mesh: Mesh, x_split: float, dirichlet_sides: Sequence[str] = SIDES
) -> Tuple[SubdomainMesh, SubdomainMesh]:
    """Splits the mesh at the vertical grid line x = x_split.

    Interface nodes are duplicated into both subdomains. Interface endpoints on
    a Dirichlet side are classified as Dirichlet nodes. The interface normal
    points from the first subdomain toward the second.
    """
    sides = _check_sides(dirichlet_sides)
    position = (x_split - mesh.x_range[0]) / mesh.h
    column = int(round(position))
    if abs(position - column) * mesh.h >= GRID_TOL * mesh.h:
        raise ValueError(f"x_split={x_split} does not lie on a grid line (h={mesh.h})")
    if not 1 <= column <= mesh.nx - 1:
        raise ValueError(f"x_split={x_split} must be an interior grid line")

    first = _build_subdomain(mesh, 1, range(column + 1), range(column), column, sides)
    second = _build_subdomain(
        mesh, 2, range(column, mesh.nx + 1), range(column, mesh.nx), column, sides
    )

    logger.info(
        "Partitioned %dx%d mesh at x=%.4g: %d + %d nodes, n_gamma=%d, n_0=(%d, %d)",
        mesh.nx,
        mesh.ny,
        x_split,
        first.num_nodes,
        second.num_nodes,
        first.n_gamma,
        first.n_interior,
        second.n_interior,
    )
    return first, second

"""POD Module
Offline stage: snapshot sets split into interface and interior rows, energy
based dimension selection, composite reduced bases and Galerkin projection of
the subdomain operators."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.linalg import block_diag

from janus.assembly import SubdomainOperators
from janus.mesh import SubdomainMesh
from janus.numerics import Matrix, SvdResult, Vector, numerical_rank, svd_thin

logger = logging.getLogger("pod")

DIM_RULE_RATIO = 2.0 / 3.0


@dataclass(frozen=True)
class SnapshotSet:
    """Snapshot matrices of one subdomain, one column per snapshot.

    ``full`` has all subdomain rows in local DoF order. ``adjusted`` drops the
    Dirichlet rows and is the vertical stack of ``interface`` over ``interior``.
    """

    sub: SubdomainMesh
    full: Matrix
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.full.ndim != 2 or self.full.shape[0] != self.sub.num_nodes:
            raise ValueError(
                f"Snapshot matrix has shape {self.full.shape}, expected {self.sub.num_nodes} rows"
            )

    @property
    def num_snapshots(self) -> int:
        """Number of snapshots r_i"""
        return int(self.full.shape[1])

    @property
    def adjusted(self) -> Matrix:
        """X_D: Dirichlet rows removed"""
        return self.full[self.sub.free]

    @property
    def interface(self) -> Matrix:
        """X_gamma"""
        return self.full[self.sub.gamma]

    @property
    def interior(self) -> Matrix:
        """X_0"""
        return self.full[self.sub.interior]

    @property
    def dirichlet(self) -> Matrix:
        """Rows deleted by the adjustment"""
        return self.full[self.sub.dirichlet]

    @classmethod
    def concatenate(cls, sets: Sequence["SnapshotSet"]) -> "SnapshotSet":
        """Column-wise union of snapshot sets of the same subdomain"""
        if not sets:
            raise ValueError("No snapshot sets to concatenate")
        sub = sets[0].sub
        if any(s.sub.num_nodes != sub.num_nodes or s.sub.index != sub.index for s in sets):
            raise ValueError("Snapshot sets belong to different subdomains")
        provenance = {"runs": [s.provenance for s in sets]}
        return cls(sub=sub, full=np.hstack([s.full for s in sets]), provenance=provenance)


@dataclass(frozen=True)
class CompositeBasis:
    """Separate POD bases for the interface and interior DoFs of one subdomain"""

    interface: Matrix
    interior: Matrix
    sigma_interface: Vector
    sigma_interior: Vector
    d_max_interface: int
    delta_interior: Optional[float] = None
    delta_interface: Optional[float] = None
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def d_interface(self) -> int:
        """d_gamma"""
        return int(self.interface.shape[1])

    @property
    def d_interior(self) -> int:
        """d_0"""
        return int(self.interior.shape[1])

    @property
    def dim(self) -> int:
        """Total composite basis size"""
        return self.d_interface + self.d_interior

    @classmethod
    def identity(cls, n_gamma: int, n_interior: int) -> "CompositeBasis":
        """Full rank identity basis"""
        return cls(
            interface=np.eye(n_gamma),
            interior=np.eye(n_interior),
            sigma_interface=np.ones(n_gamma),
            sigma_interior=np.ones(n_interior),
            d_max_interface=n_gamma,
        )


@dataclass(frozen=True)
class RomOperators:
    """Operators of one subdomain in the coordinates used by the online stage.

    For a FOM side the bases are None and the blocks are the assembled ones.
    ``constraint`` maps the side's coordinates to the multiplier space and has
    zero interior columns; ``constraint_dirichlet`` is the projected G_Gamma.
    """

    interface_basis: Optional[Matrix]
    interior_basis: Optional[Matrix]
    mass: Matrix
    flux: Matrix
    mass_coupling: Matrix
    flux_coupling: Matrix
    constraint: Matrix
    constraint_dirichlet: Matrix
    d_interface: int
    d_interior: int

    @property
    def reduced(self) -> bool:
        """True for a ROM side"""
        return self.interface_basis is not None

    @property
    def dim(self) -> int:
        """Number of coefficients"""
        return self.d_interface + self.d_interior

    @property
    def constraint_interface(self) -> Matrix:
        """Constraint restricted to the interface coefficients"""
        return self.constraint[:, : self.d_interface]

    def block(self, matrix: Matrix, p: str, q: str) -> Matrix:
        """Block (p, q) of a projected square operator, p, q in {gamma, interior}"""
        ranges = {"gamma": slice(0, self.d_interface), "interior": slice(self.d_interface, self.dim)}
        return matrix[ranges[p], ranges[q]]

    def project(self, values: Vector) -> Vector:
        """Coefficients of a vector on the unknown DoFs (orthogonal projection)"""
        if not self.reduced:
            return np.array(values, dtype=np.float64)
        n_gamma = self.interface_basis.shape[0]
        return np.concatenate(
            [self.interface_basis.T @ values[:n_gamma], self.interior_basis.T @ values[n_gamma:]]
        )

    def lift(self, coefficients: Vector) -> Vector:
        """Full-order values on the unknown DoFs"""
        if not self.reduced:
            return np.array(coefficients, dtype=np.float64)
        d = self.d_interface
        return np.concatenate(
            [self.interface_basis @ coefficients[:d], self.interior_basis @ coefficients[d:]]
        )

    def lift_interface(self, coefficients: Vector) -> Vector:
        """Full-order interface values"""
        if not self.reduced:
            return np.array(coefficients[: self.d_interface], dtype=np.float64)
        return self.interface_basis @ coefficients[: self.d_interface]


def select_dim(sigma: Vector, delta: float) -> int:
    """Smallest d with sum_{i<=d} sigma_i^2 >= (1 - delta) sum sigma_i^2"""
    sigma = np.asarray(sigma, dtype=np.float64)
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"Energy threshold must lie in [0, 1), got {delta}")
    if sigma.size == 0:
        raise ValueError("No singular values")
    rank = numerical_rank(sigma)
    if rank == 0:
        raise ValueError("All singular values are zero")
    energy = np.cumsum(sigma[:rank] ** 2)
    return int(np.searchsorted(energy, (1.0 - delta) * energy[-1], side="left")) + 1


def energy_curve(sigma: Vector) -> Vector:
    """Captured energy for d = 1, ..., len(sigma)"""
    energy = np.cumsum(np.asarray(sigma, dtype=np.float64) ** 2)
    if energy.size == 0 or energy[-1] <= 0.0:
        raise ValueError("All singular values are zero")
    return energy / energy[-1]


def snapshot_energy(sigma: Vector, d: int) -> float:
    """Fraction of the snapshot energy captured by the first d modes"""
    if not 1 <= d <= len(sigma):
        raise ValueError(f"Dimension {d} outside 1..{len(sigma)}")
    return float(min(energy_curve(sigma)[d - 1], 1.0))


def interface_dim_rule(d_interior: int, d_max_interface: int) -> int:
    """d_gamma = min(ceil(2/3 d_0), d_max_gamma)"""
    return int(min(np.ceil(DIM_RULE_RATIO * d_interior - 1e-12), d_max_interface))


def _truncate(svd: SvdResult, d: int, name: str) -> Matrix:
    if d > svd.rank:
        raise ValueError(f"Requested {name} dimension {d} exceeds the snapshot rank {svd.rank}")
    return svd.u[:, :d]


@dataclass(frozen=True)
class PodDecomposition:
    """SVDs of the interface and interior snapshot rows of one subdomain"""

    interface: SvdResult
    interior: SvdResult
    provenance: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_snapshots(cls, snaps: SnapshotSet) -> "PodDecomposition":
        """SVD of X_gamma and X_0"""
        return cls(
            interface=svd_thin(snaps.interface),
            interior=svd_thin(snaps.interior),
            provenance=dict(snaps.provenance),
        )

    def basis(  # pylint: disable=too-many-arguments
        self,
        delta_interior: Optional[float] = None,
        delta_interface: Optional[float] = None,
        d_interior: Optional[int] = None,
        d_interface: Optional[int] = None,
    ) -> CompositeBasis:
        """Composite basis from energy thresholds or explicit dimensions.

        The interior size comes from d_interior or delta_interior. The interface
        size comes from d_interface, delta_interface or, when neither is given,
        the rule d_gamma = min(ceil(2/3 d_0), d_max_gamma).
        """
        d_max = self.interface.rank
        if d_interior is None:
            if delta_interior is None:
                raise ValueError("Either an interior dimension or an energy threshold is required")
            d_interior = select_dim(self.interior.sigma, delta_interior) if self.interior.rank else 0
        if d_interface is None:
            if delta_interface is not None:
                d_interface = select_dim(self.interface.sigma, delta_interface)
            else:
                d_interface = max(interface_dim_rule(d_interior, d_max), min(1, d_max))

        basis = CompositeBasis(
            interface=_truncate(self.interface, d_interface, "interface"),
            interior=_truncate(self.interior, d_interior, "interior"),
            sigma_interface=self.interface.sigma,
            sigma_interior=self.interior.sigma,
            d_max_interface=d_max,
            delta_interior=delta_interior,
            delta_interface=delta_interface,
            provenance=dict(self.provenance),
        )
        logger.info(
            "Composite basis: d_0=%d (energy %.6f), d_gamma=%d (energy %.6f), d_max_gamma=%d",
            basis.d_interior,
            snapshot_energy(self.interior.sigma, d_interior) if d_interior else 0.0,
            basis.d_interface,
            snapshot_energy(self.interface.sigma, d_interface) if d_interface else 0.0,
            d_max,
        )
        return basis


def build_composite_basis(
    snaps: SnapshotSet,
    delta_interior: Optional[float] = None,
    delta_interface: Optional[float] = None,
    d_interior: Optional[int] = None,
    d_interface: Optional[int] = None,
) -> CompositeBasis:
    """POD bases Phi_0 and Phi_gamma from the leading left singular vectors of X_0 and X_gamma"""
    return PodDecomposition.from_snapshots(snaps).basis(
        delta_interior=delta_interior,
        delta_interface=delta_interface,
        d_interior=d_interior,
        d_interface=d_interface,
    )


def project_operators(
    ops: SubdomainOperators,
    basis: Optional[CompositeBasis],
    multiplier_basis: Optional[Matrix] = None,
) -> RomOperators:
    """Galerkin projection of one subdomain's operators.

    ``basis`` is None for a FOM side. ``multiplier_basis`` is None when the
    multiplier lives in the full interface trace space, otherwise its columns
    span the reduced multiplier space (Phi_k,gamma).
    """
    sub = ops.sub
    if ops.constraint is None:
        raise ValueError(f"Subdomain {sub.index} has no interface constraint")
    g_gamma = ops.constraint.gamma
    g_dirichlet = ops.constraint.dirichlet

    mass, flux = ops.mass.free, ops.flux.free
    mass_coupling, flux_coupling = ops.mass.coupling, ops.flux.coupling
    interface_basis = interior_basis = None
    if basis is None:
        d_interface, d_interior = sub.n_gamma, sub.n_interior
        g_projected = g_gamma
    else:
        if basis.interface.shape[0] != sub.n_gamma or basis.interior.shape[0] != sub.n_interior:
            raise ValueError(
                f"Basis rows ({basis.interface.shape[0]}, {basis.interior.shape[0]}) do not match "
                f"subdomain {sub.index} sizes ({sub.n_gamma}, {sub.n_interior})"
            )
        interface_basis, interior_basis = basis.interface, basis.interior
        d_interface, d_interior = basis.d_interface, basis.d_interior
        stacked = block_diag(interface_basis, interior_basis)
        mass = stacked.T @ mass @ stacked
        flux = stacked.T @ flux @ stacked
        mass_coupling = stacked.T @ mass_coupling
        flux_coupling = stacked.T @ flux_coupling
        g_projected = g_gamma @ interface_basis

    if multiplier_basis is not None:
        if multiplier_basis.shape[0] != sub.n_gamma:
            raise ValueError(
                f"Multiplier basis has {multiplier_basis.shape[0]} rows, expected {sub.n_gamma}"
            )
        g_projected = multiplier_basis.T @ g_projected
        g_dirichlet = multiplier_basis.T @ g_dirichlet

    constraint = np.hstack([g_projected, np.zeros((g_projected.shape[0], d_interior))])
    return RomOperators(
        interface_basis=interface_basis,
        interior_basis=interior_basis,
        mass=np.array(mass),
        flux=np.array(flux),
        mass_coupling=np.array(mass_coupling),
        flux_coupling=np.array(flux_coupling),
        constraint=constraint,
        constraint_dirichlet=np.array(g_dirichlet),
        d_interface=d_interface,
        d_interior=d_interior,
    )

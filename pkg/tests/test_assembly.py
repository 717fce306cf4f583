"""Tests for janus.assembly module"""
import numpy as np
import pytest

from janus.assembly import (
    FieldSpec,
    assemble_constraint,
    assemble_flux,
    assemble_mass,
    assemble_operators,
    assemble_source,
    boundary_rhs,
    check_interface_data,
    constraint_rhs,
    dirichlet_data,
)
from janus.mesh import build_uniform_mesh, partition_at, whole_domain

UNIT_DIFFUSION = FieldSpec(kappa=(1.0, 1.0))
CCW = [0, 1, 3, 2]


def constant_advection(x, _y, _t):
    """a = (1, 0.5)"""
    return np.full_like(x, 1.0), np.full_like(x, 0.5)


def single_element():
    """The unit square as one element without Dirichlet nodes"""
    return whole_domain(build_uniform_mesh(1, 1), dirichlet_sides=())


class TestAssembleMass:
    """Tests for assemble_mass function"""

    def test_element_mass(self):
        """Test the exact Q1 element mass matrix"""
        mass = assemble_mass(single_element()).geometric()[np.ix_(CCW, CCW)]
        expected = np.array([[4, 2, 1, 2], [2, 4, 2, 1], [1, 2, 4, 2], [2, 1, 2, 4]]) / 36.0
        np.testing.assert_allclose(mass, expected, atol=1e-15)

    def test_total_mass_is_area(self):
        """Test the entries of a half-domain mass matrix sum to its area"""
        first, second = partition_at(build_uniform_mesh(4, 4), 0.5)
        assert assemble_mass(first).matrix.sum() == pytest.approx(0.5)
        assert assemble_mass(second).matrix.sum() == pytest.approx(0.5)

    def test_free_block_spd(self):
        """Test M_D of a 2x2-element subdomain is SPD"""
        first, _ = partition_at(build_uniform_mesh(4, 2, ((0.0, 1.0), (0.0, 0.5))), 0.5)
        assert first.mesh.h == pytest.approx(0.25)
        mass = assemble_mass(first)
        assert np.all(np.linalg.eigvalsh(mass.free) > 0.0)
        assert np.all(np.linalg.eigvalsh(mass.block("gamma", "gamma")) > 0.0)

    def test_reordering_round_trip(self):
        """Test permuting to geometric order and back is the identity"""
        first, _ = partition_at(build_uniform_mesh(4, 4), 0.5)
        mass = assemble_mass(first)
        rank = np.argsort(np.argsort(first.nodes))
        np.testing.assert_array_equal(mass.geometric()[np.ix_(rank, rank)], mass.matrix)

    def test_unknown_block(self):
        """Test an unknown block name"""
        with pytest.raises(ValueError, match="Unknown block"):
            assemble_mass(single_element()).block("gamma", "corner")


class TestAssembleFlux:
    """Tests for assemble_flux function"""

    def test_element_stiffness(self):
        """Test the Q1 Laplacian element matrix"""
        flux = assemble_flux(single_element(), UNIT_DIFFUSION).geometric()[np.ix_(CCW, CCW)]
        expected = np.array([[4, -1, -2, -1], [-1, 4, -1, -2], [-2, -1, 4, -1], [-1, -2, -1, 4]]) / 6.0
        np.testing.assert_allclose(flux, expected, atol=1e-15)

    def test_diffusion_only_is_symmetric(self):
        """Test the flux without advection is symmetric"""
        first, _ = partition_at(build_uniform_mesh(6, 6), 0.5)
        flux = assemble_flux(first, UNIT_DIFFUSION).matrix
        np.testing.assert_allclose(flux, flux.T, atol=1e-14)

    def test_interior_rows_annihilate_constants(self):
        """Test rows of interior test functions sum to zero for constant advection"""
        sub = whole_domain(build_uniform_mesh(3, 3))
        fields = FieldSpec(kappa=(0.1, 0.1), advection=constant_advection)
        flux = assemble_flux(sub, fields).matrix
        np.testing.assert_allclose(flux[sub.free].sum(axis=1), 0.0, atol=1e-14)

    def test_advection_part_is_skew_on_interior(self):
        """Test the advection part is skew-symmetric between interior test functions"""
        sub = whole_domain(build_uniform_mesh(4, 4))
        fields = FieldSpec(kappa=(1.0, 1.0), advection=constant_advection)
        advection = assemble_flux(sub, fields).free - assemble_flux(sub, UNIT_DIFFUSION).free
        np.testing.assert_allclose(advection, -advection.T, atol=1e-14)

    def test_time_independent(self):
        """Test autonomous fields give the same matrix at any time"""
        sub = whole_domain(build_uniform_mesh(3, 3))
        fields = FieldSpec(kappa=(0.1, 0.1), advection=constant_advection)
        np.testing.assert_array_equal(assemble_flux(sub, fields, 0.0).matrix, assemble_flux(sub, fields, 2.5).matrix)

    def test_discontinuous_diffusion(self):
        """Test each element takes the diffusion of its side of the interface"""
        mesh = build_uniform_mesh(2, 2)
        sub = whole_domain(mesh, dirichlet_sides=())
        fields = FieldSpec(kappa=(1.0, 3.0))
        flux = assemble_flux(sub, fields).geometric()
        # node 0 touches only the lower left element, node 2 only the lower right one
        assert flux[0, 0] == pytest.approx(4.0 / 6.0)
        assert flux[2, 2] == pytest.approx(3.0 * 4.0 / 6.0)

    def test_invalid_diffusion(self):
        """Test nonpositive diffusion is rejected"""
        with pytest.raises(ValueError, match="positive"):
            FieldSpec(kappa=(1.0, 0.0))


class TestAssembleConstraint:
    """Tests for assemble_constraint function"""

    def test_single_interface_node(self):
        """Test G_gamma = 2h/3 for one free node on a unit interface"""
        first, second = partition_at(build_uniform_mesh(2, 2), 0.5)
        c1, c2 = assemble_constraint(first, second)
        np.testing.assert_allclose(c1.gamma, [[1.0 / 3.0]])
        np.testing.assert_allclose(c1.dirichlet.sum(), 2.0 * 0.5 / 6.0)
        assert np.count_nonzero(c1.dirichlet) == 2
        np.testing.assert_array_equal(c1.gamma, c2.gamma)

    def test_matching_and_spd(self):
        """Test G_1,gamma = G_2,gamma and SPD on a finer mesh"""
        first, second = partition_at(build_uniform_mesh(8, 8), 0.5)
        c1, c2 = assemble_constraint(first, second)
        np.testing.assert_allclose(c1.gamma, c2.gamma, atol=1e-14)
        np.testing.assert_allclose(c1.gamma, c1.gamma.T)
        assert np.all(np.linalg.eigvalsh(c1.gamma) > 0.0)
        assert c1.gamma.shape == (7, 7)
        assert np.count_nonzero(c1.dirichlet) <= 2

    def test_count_mismatch(self):
        """Test subdomains of different meshes are rejected"""
        first, _ = partition_at(build_uniform_mesh(4, 4), 0.5)
        _, second = partition_at(build_uniform_mesh(8, 8), 0.5)
        with pytest.raises(ValueError, match="mismatch"):
            assemble_constraint(first, second)

    def test_operators_bundle(self):
        """Test assemble_operators keeps the constraint"""
        first, second = partition_at(build_uniform_mesh(4, 4), 0.5)
        c1, _ = assemble_constraint(first, second)
        ops = assemble_operators(first, UNIT_DIFFUSION, c1)
        assert ops.constraint is c1
        assert ops.mass.matrix.shape == (first.num_nodes, first.num_nodes)


class TestBoundaryTerms:
    """Tests for the Dirichlet right-hand side contributions"""

    def setup_method(self):
        """Setup test fixtures"""
        self.subs = partition_at(build_uniform_mesh(4, 4), 0.5)
        self.constraints = assemble_constraint(*self.subs)
        self.ops = assemble_operators(self.subs[0], UNIT_DIFFUSION, self.constraints[0])

    def test_homogeneous(self):
        """Test zero data gives zero contributions"""
        zeros = np.zeros(self.subs[0].n_dirichlet)
        q_gamma, q_interior = boundary_rhs(self.ops, zeros, zeros)
        assert not np.any(q_gamma) and not np.any(q_interior)

    def test_linearity(self):
        """Test g = 1, g_dot = 0 gives the row sums of F_Gamma"""
        sub = self.subs[0]
        q_gamma, q_interior = boundary_rhs(self.ops, np.ones(sub.n_dirichlet), np.zeros(sub.n_dirichlet))
        row_sums = self.ops.flux.coupling.sum(axis=1)
        np.testing.assert_allclose(np.concatenate([q_gamma, q_interior]), row_sums)

    def test_length_mismatch(self):
        """Test data of the wrong length"""
        with pytest.raises(ValueError, match="shape"):
            boundary_rhs(self.ops, np.zeros(2), np.zeros(2))

    def test_equal_endpoint_rates_cancel(self):
        """Test equal rates on matching endpoints give no constraint contribution"""
        c1, c2 = self.constraints
        q = constraint_rhs(c1, c2, np.ones(self.subs[0].n_dirichlet), np.ones(self.subs[1].n_dirichlet))
        np.testing.assert_allclose(q, 0.0, atol=1e-15)


class TestDataTerms:
    """Tests for source and Dirichlet data sampling"""

    def test_constant_source_integrates_area(self):
        """Test the load of f = 1 sums to the area"""
        sub = whole_domain(build_uniform_mesh(4, 4), dirichlet_sides=())
        fields = FieldSpec(kappa=(1.0, 1.0), source=lambda x, y, t: np.ones_like(x))
        assert assemble_source(sub, fields, 0.0).sum() == pytest.approx(1.0)

    def test_no_source(self):
        """Test a missing source gives a zero load"""
        sub = whole_domain(build_uniform_mesh(4, 4))
        assert not np.any(assemble_source(sub, UNIT_DIFFUSION, 0.0))

    def test_analytic_rate(self):
        """Test the analytic rate is used when available"""
        sub = whole_domain(build_uniform_mesh(2, 2))
        fields = FieldSpec(
            kappa=(1.0, 1.0),
            dirichlet=lambda x, y, t: t * np.ones_like(x),
            dirichlet_rate=lambda x, y, t: 2.0 * np.ones_like(x),
        )
        g, g_dot = dirichlet_data(sub, fields, 0.5)
        np.testing.assert_allclose(g, 0.5)
        np.testing.assert_allclose(g_dot, 2.0)

    def test_difference_rates(self):
        """Test the forward difference at the initial time and backward afterwards"""
        sub = whole_domain(build_uniform_mesh(2, 2))
        fields = FieldSpec(kappa=(1.0, 1.0), dirichlet=lambda x, y, t: t**2 * np.ones_like(x))
        _, first = dirichlet_data(sub, fields, 0.0, dt=0.1)
        _, later = dirichlet_data(sub, fields, 0.5, dt=0.1)
        np.testing.assert_allclose(first, 0.1)
        np.testing.assert_allclose(later, (0.25 - 0.16) / 0.1)

    def test_backward_difference_over_previous_step(self):
        """Test the rate after a full step differences over that step, not the next one"""
        sub = whole_domain(build_uniform_mesh(2, 2))
        fields = FieldSpec(kappa=(1.0, 1.0), dirichlet=lambda x, y, t: t**2 * np.ones_like(x))
        _, rate = dirichlet_data(sub, fields, 0.6, dt=0.1, dt_back=0.3)
        np.testing.assert_allclose(rate, (0.36 - 0.09) / 0.3)
        _, first = dirichlet_data(sub, fields, 0.0, dt=0.1, dt_back=0.3)
        np.testing.assert_allclose(first, 0.1)

    def test_difference_needs_dt(self):
        """Test differencing without a step size"""
        sub = whole_domain(build_uniform_mesh(2, 2))
        fields = FieldSpec(kappa=(1.0, 1.0), dirichlet=lambda x, y, t: np.ones_like(x))
        with pytest.raises(ValueError, match="dt"):
            dirichlet_data(sub, fields, 0.3)

    def test_interface_data_disagreement(self):
        """Test disagreeing endpoint values are detected"""
        first, second = partition_at(build_uniform_mesh(4, 4), 0.5)
        check_interface_data(first, second, (np.zeros(first.n_dirichlet), np.zeros(second.n_dirichlet)))
        values2 = np.zeros(second.n_dirichlet)
        values2[second.interface_line[0] - second.n_free] = 1.0
        with pytest.raises(ValueError, match="endpoint"):
            check_interface_data(first, second, (np.zeros(first.n_dirichlet), values2))

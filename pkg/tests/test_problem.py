"""Tests for janus.problem module"""
import numpy as np
import pytest

from janus.assembly import FieldSpec, assemble_mass, dirichlet_data
from janus.fom import run_single_domain
from janus.mesh import build_uniform_mesh, partition_at
from janus.problem import (
    TimeGrid,
    cfl_time_step,
    leveque_initial_condition,
    manufactured_problem,
    rotation_field,
    solid_body_rotation_config,
)


class TestTimeGrid:
    """Tests for TimeGrid class"""

    def test_paper_step_count(self):
        """Test one rotation at the reproductive step takes 3732 steps"""
        grid = TimeGrid.uniform(2.0 * np.pi, 1.684e-3)
        assert grid.num_steps == 3732
        assert grid.times[-1] == 2.0 * np.pi
        assert grid.step_sizes[-1] <= 1.684e-3

    def test_exact_division(self):
        """Test no extra step when dt divides the interval"""
        grid = TimeGrid.uniform(1.0, 0.25)
        np.testing.assert_allclose(grid.times, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_sample_steps(self):
        """Test sampled steps always include the first and last"""
        grid = TimeGrid.uniform(1.0, 0.1)
        np.testing.assert_array_equal(grid.sample_steps(4), [0, 4, 8, 10])
        np.testing.assert_array_equal(grid.sample_steps(5), [0, 5, 10])

    def test_rate_steps_on_truncated_grid(self):
        """Test the backward difference spacing ignores the truncated last step"""
        grid = TimeGrid.uniform(0.7, 0.3)
        np.testing.assert_allclose(grid.step_sizes, [0.3, 0.3, 0.1])
        np.testing.assert_allclose(grid.rate_steps, [0.3, 0.3, 0.3])

    def test_rate_steps_single_step(self):
        """Test a one step grid uses its only step"""
        np.testing.assert_allclose(TimeGrid.uniform(0.1, 0.1).rate_steps, [0.1])

    def test_invalid(self):
        """Test nonpositive steps and strides"""
        with pytest.raises(ValueError):
            TimeGrid.uniform(1.0, 0.0)
        with pytest.raises(ValueError, match="stride"):
            TimeGrid.uniform(1.0, 0.1).sample_steps(0)


class TestCflTimeStep:
    """Tests for cfl_time_step function"""

    def test_pure_diffusion(self):
        """Test a = 0, kappa = 1, h = 0.5 gives 1/16"""
        mesh = build_uniform_mesh(2, 2)
        assert cfl_time_step(mesh, FieldSpec(kappa=(1.0, 1.0)), safety=1.0) == pytest.approx(1.0 / 16.0)

    def test_paper_magnitude(self):
        """Test the default safety reproduces the reproductive step within a factor of two"""
        cfg = solid_body_rotation_config(1e-5, 1e-5, 64)
        dt = cfl_time_step(cfg.build_mesh(), cfg.fields)
        assert 1.684e-3 / 2.0 <= dt <= 2.0 * 1.684e-3

    def test_linear_in_safety(self):
        """Test doubling the safety factor doubles the step"""
        mesh = build_uniform_mesh(8, 8)
        fields = solid_body_rotation_config(1e-3, 1e-3, 8).fields
        assert cfl_time_step(mesh, fields, 0.2) == pytest.approx(2.0 * cfl_time_step(mesh, fields, 0.1))

    @pytest.mark.parametrize("safety", [0.0, -0.5, 1.5])
    def test_invalid_safety(self, safety):
        """Test safety factors outside (0, 1]"""
        with pytest.raises(ValueError, match="safety"):
            cfl_time_step(build_uniform_mesh(2, 2), FieldSpec(kappa=(1.0, 1.0)), safety)


class TestSolidBodyRotation:
    """Tests for the solid body rotation problem"""

    @pytest.mark.parametrize(
        "kappa1, kappa2, dt",
        [(1e-5, 1e-5, 1.684e-3), (1e-2, 1e-2, 9.156e-4), (1e-5, 1e-4, None)],
    )
    def test_configurations(self, kappa1, kappa2, dt):
        """Test the benchmark setups"""
        cfg = solid_body_rotation_config(kappa1, kappa2, 64, dt=dt)
        assert cfg.fields.kappa == (kappa1, kappa2)
        assert cfg.final_time == pytest.approx(2.0 * np.pi)
        assert cfg.x_split == 0.5
        assert cfg.fields.homogeneous
        if dt is not None:
            assert cfg.time_step() == dt

    def test_transmission_coefficients(self):
        """Test each side of the interface takes its own diffusion"""
        fields = solid_body_rotation_config(1e-5, 1e-4, 8).fields
        np.testing.assert_allclose(fields.kappa_at(np.array([0.25, 0.75])), [1e-5, 1e-4])

    def test_rotation_field(self):
        """Test the rotation field is tangent to circles about the center"""
        x, y = np.array([0.5, 1.0, 0.5]), np.array([1.0, 0.5, 0.5])
        ax, ay = rotation_field(x, y)
        np.testing.assert_allclose(ax, [-0.5, 0.0, 0.0])
        np.testing.assert_allclose(ay, [0.0, 0.5, 0.0])

    def test_initial_condition_bodies(self):
        """Test values at the body centers and in the slot"""
        x = np.array([0.5, 0.25, 0.5, 0.5, 0.9])
        y = np.array([0.25, 0.5, 0.75, 0.8, 0.9])
        np.testing.assert_allclose(leveque_initial_condition(x, y), [1.0, 0.5, 0.0, 0.0, 0.0])
        assert leveque_initial_condition(np.array([0.45]), np.array([0.75]))[0] == 1.0

    def test_invalid_config(self):
        """Test nonpositive final time and stride"""
        with pytest.raises(ValueError, match="Final time"):
            solid_body_rotation_config(1e-5, 1e-5, 8, final_time=0.0)
        with pytest.raises(ValueError, match="stride"):
            solid_body_rotation_config(1e-5, 1e-5, 8, sample_stride=0)


class TestManufacturedProblem:
    """Tests for manufactured_problem function"""

    def test_unknown_id(self):
        """Test an unknown problem id"""
        with pytest.raises(ValueError, match="Unknown manufactured"):
            manufactured_problem("burgers")

    def test_initial_state_is_exact(self):
        """Test the interpolated initial condition equals the exact solution"""
        problem = manufactured_problem("diffusion", nx=4)
        coords = problem.config.build_mesh().coords
        np.testing.assert_allclose(
            problem.config.fields.initial(coords[:, 0], coords[:, 1]),
            problem.exact(coords[:, 0], coords[:, 1], 0.0),
        )

    def test_interface_endpoint_data_agree(self):
        """Test both subdomains see the same data at the interface endpoints"""
        problem = manufactured_problem("advection_diffusion", nx=4)
        first, second = partition_at(problem.config.build_mesh(), 0.5)
        g1, _ = dirichlet_data(first, problem.config.fields, 0.1)
        g2, _ = dirichlet_data(second, problem.config.fields, 0.1)
        for a, b in zip(first.interface_line[[0, -1]], second.interface_line[[0, -1]]):
            assert g1[a - first.n_free] == pytest.approx(g2[b - second.n_free])

    def test_convergence(self):
        """Test the L2 error drops by about four when h halves"""
        errors = []
        for nx in (4, 8, 16):
            problem = manufactured_problem("diffusion", nx=nx)
            cfg = problem.config
            traj = run_single_domain(cfg, sample_stride=1000000)
            mesh = cfg.build_mesh()
            whole = cfg.whole(mesh)
            exact = problem.exact(mesh.coords[:, 0], mesh.coords[:, 1], cfg.final_time)
            error = (traj.states[:, -1] - exact)[whole.nodes][whole.free]
            mass = assemble_mass(whole).free
            errors.append(np.sqrt(error @ mass @ error))
        ratios = [errors[0] / errors[1], errors[1] / errors[2]]
        assert all(3.0 <= r <= 5.5 for r in ratios), ratios

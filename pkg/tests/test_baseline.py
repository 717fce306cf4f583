"""Tests for janus.baseline module"""
import numpy as np
import pytest

from janus.baseline import SingleDomainRom
from janus.fom import SingleDomainModel, run_single_domain
from janus.problem import manufactured_problem, solid_body_rotation_config


class TestSingleDomainRom:
    """Tests for SingleDomainRom class"""

    def setup_method(self):
        """Setup test fixtures"""
        self.cfg = solid_body_rotation_config(1e-3, 1e-3, 8, final_time=0.3)
        self.traj = run_single_domain(self.cfg, sample_stride=1)

    def test_full_rank_reproduces_fom(self):
        """Test a basis spanning every snapshot reproduces the FOM states"""
        cfg = solid_body_rotation_config(1e-3, 1e-3, 4, final_time=0.5)
        traj = run_single_domain(cfg, sample_stride=1)
        assert traj.num_states - 1 >= cfg.whole().n_free
        rom = SingleDomainRom.from_trajectory(cfg, traj, delta=0.0)
        result = rom.run(cfg.time_grid())
        scale = float(np.max(np.abs(traj.states)))
        assert float(np.max(np.abs(result.states - traj.states))) <= 1e-6 * scale

    def test_dimension_from_threshold(self):
        """Test a looser threshold keeps fewer modes"""
        tight = SingleDomainRom.from_trajectory(self.cfg, self.traj, delta=1e-6)
        loose = SingleDomainRom.from_trajectory(self.cfg, self.traj, delta=1e-1)
        assert loose.dim <= tight.dim
        assert loose.mass.shape == (loose.dim, loose.dim)

    def test_sampling(self):
        """Test the stored steps of a strided run"""
        rom = SingleDomainRom.from_trajectory(self.cfg, self.traj, dim=3)
        grid = self.cfg.time_grid()
        result = rom.run(grid, sample_stride=4)
        np.testing.assert_array_equal(result.steps, grid.sample_steps(4))
        assert result.provenance["dim"] == 3

    def test_several_runs(self):
        """Test snapshots of several runs are pooled into one basis"""
        other = run_single_domain(self.cfg.with_kappa(1e-2, 1e-2), sample_stride=1)
        pooled = SingleDomainRom.from_trajectory(self.cfg, [self.traj, other], delta=1e-8)
        np.testing.assert_allclose(pooled.basis.T @ pooled.basis, np.eye(pooled.dim), atol=1e-10)

    def test_no_runs(self):
        """Test an empty run list"""
        with pytest.raises(ValueError, match="No snapshot"):
            SingleDomainRom.from_trajectory(self.cfg, [], dim=3)

    def test_dimension_above_rank(self):
        """Test a dimension above the snapshot rank"""
        with pytest.raises(ValueError, match="exceeds"):
            SingleDomainRom.from_trajectory(self.cfg, self.traj, dim=10**4)

    def test_missing_size(self):
        """Test a dimension or threshold is required"""
        with pytest.raises(ValueError, match="Either"):
            SingleDomainRom.from_trajectory(self.cfg, self.traj)

    def test_basis_rows(self):
        """Test a basis with the wrong row count"""
        model = SingleDomainModel(self.cfg.whole(), self.cfg.fields)
        with pytest.raises(ValueError, match="rows"):
            SingleDomainRom(model, np.eye(3))

    def test_inhomogeneous_data(self):
        """Test the Dirichlet data enters the reduced velocity"""
        problem = manufactured_problem("diffusion", nx=4)
        cfg = problem.config
        traj = run_single_domain(cfg, sample_stride=1)
        rom = SingleDomainRom.from_trajectory(cfg, traj, delta=0.0)
        result = rom.run(cfg.time_grid())
        boundary = cfg.whole().nodes[cfg.whole().dirichlet]
        np.testing.assert_allclose(result.states[boundary, -1], traj.states[boundary, -1])
        assert np.all(np.isfinite(result.states))

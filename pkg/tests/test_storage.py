"""Tests for janus.storage module"""
import json

import numpy as np
import pytest

from janus.fom import Trajectory
from janus.mesh import build_uniform_mesh, partition_at
from janus.pod import CompositeBasis, PodDecomposition, SnapshotSet, project_operators
from janus.problem import solid_body_rotation_config
from janus.storage import (
    load_basis,
    load_decomposition,
    load_matrix,
    load_trajectory,
    read_csv,
    save_basis,
    save_decomposition,
    save_matrix,
    save_rom_operators,
    save_trajectory,
    write_csv,
)


class TestMatrixFiles:
    """Tests for the matrix file format"""

    def test_archive_and_sidecar(self, tmp_path):
        """Test the archive and JSON sidecar are written side by side"""
        archive = save_matrix(tmp_path / "x", np.eye(2), np.array([0.0, 1.0]), {"note": "test"})
        assert archive.suffix == ".npz"
        with open(tmp_path / "x.json", "r", encoding="utf-8") as file:
            info = json.load(file)
        assert info["shape"] == [2, 2]
        assert info["note"] == "test"

    def test_load(self, tmp_path):
        """Test matrix, times, metadata and extra arrays are read back"""
        save_matrix(tmp_path / "x.npz", np.arange(6.0).reshape(2, 3), np.arange(3.0), {"a": 1}, extra=np.ones(2))
        matrix, times, metadata, arrays = load_matrix(tmp_path / "x")
        np.testing.assert_array_equal(matrix, np.arange(6.0).reshape(2, 3))
        np.testing.assert_array_equal(times, np.arange(3.0))
        assert metadata["a"] == 1
        np.testing.assert_array_equal(arrays["extra"], np.ones(2))

    def test_times_mismatch(self, tmp_path):
        """Test times must match the column count"""
        with pytest.raises(ValueError, match="columns"):
            save_matrix(tmp_path / "x", np.eye(2), np.zeros(3))

    def test_missing_file(self, tmp_path):
        """Test loading a file that does not exist"""
        with pytest.raises(ValueError, match="does not exist"):
            load_matrix(tmp_path / "missing")


class TestTrajectoryFiles:
    """Tests for trajectory files"""

    def test_save_load(self, tmp_path):
        """Test a trajectory survives a save and load"""
        traj = Trajectory(
            times=np.array([0.0, 0.5, 0.75]),
            steps=np.array([0, 2, 3]),
            states=np.random.default_rng(0).standard_normal((5, 3)),
            dt=0.25,
            provenance={"name": "run"},
        )
        loaded = load_trajectory(save_trajectory(tmp_path / "traj", traj))
        np.testing.assert_array_equal(loaded.states, traj.states)
        np.testing.assert_array_equal(loaded.steps, traj.steps)
        assert loaded.dt == 0.25
        assert loaded.provenance == {"name": "run"}

    def test_not_a_trajectory(self, tmp_path):
        """Test a plain matrix is not read as a trajectory"""
        save_matrix(tmp_path / "x", np.eye(2))
        with pytest.raises(ValueError, match="not a trajectory"):
            load_trajectory(tmp_path / "x")


class TestPodFiles:
    """Tests for decomposition and basis files"""

    def setup_method(self):
        """Setup test fixtures"""
        first, _ = partition_at(build_uniform_mesh(6, 6), 0.5)
        full = np.random.default_rng(3).standard_normal((first.num_nodes, 12))
        self.pod = PodDecomposition.from_snapshots(SnapshotSet(sub=first, full=full, provenance={"run": 0}))

    def test_decomposition(self, tmp_path):
        """Test singular values and leading vectors are kept"""
        loaded = load_decomposition(save_decomposition(tmp_path / "pod", self.pod))
        np.testing.assert_array_equal(loaded.interior.sigma, self.pod.interior.sigma)
        np.testing.assert_array_equal(loaded.interface.u, self.pod.interface.u[:, : self.pod.interface.rank])
        assert loaded.provenance == {"run": 0}
        original = self.pod.basis(d_interior=4)
        rebuilt = loaded.basis(d_interior=4)
        np.testing.assert_array_equal(rebuilt.interior, original.interior)
        np.testing.assert_array_equal(rebuilt.interface, original.interface)

    def test_basis(self, tmp_path):
        """Test a composite basis is read back with its thresholds"""
        basis = self.pod.basis(delta_interior=0.1)
        loaded = load_basis(save_basis(tmp_path / "basis", basis))
        np.testing.assert_array_equal(loaded.interior, basis.interior)
        np.testing.assert_array_equal(loaded.interface, basis.interface)
        assert loaded.delta_interior == 0.1
        assert loaded.delta_interface is None
        assert loaded.d_max_interface == basis.d_max_interface

    def test_kind_checks(self, tmp_path):
        """Test files of the wrong kind are rejected"""
        save_basis(tmp_path / "basis", CompositeBasis.identity(2, 3))
        with pytest.raises(ValueError, match="not a POD file"):
            load_decomposition(tmp_path / "basis")
        save_decomposition(tmp_path / "pod", self.pod)
        with pytest.raises(ValueError, match="not a basis file"):
            load_basis(tmp_path / "pod")

    def test_rom_operators(self, tmp_path):
        """Test projected operators are written with their dimensions"""
        _, ops = solid_body_rotation_config(1e-3, 1e-3, 6).coupled_operators()
        rom = project_operators(ops[0], self.pod.basis(d_interior=4))
        matrix, _, metadata, arrays = load_matrix(save_rom_operators(tmp_path / "rom", rom))
        np.testing.assert_array_equal(matrix, rom.mass)
        np.testing.assert_array_equal(arrays["constraint"], rom.constraint)
        assert metadata["kind"] == "rom_operators"
        assert (metadata["d_interface"], metadata["d_interior"]) == (rom.d_interface, 4)


class TestCsv:
    """Tests for write_csv and read_csv functions"""

    def test_provenance_line(self, tmp_path):
        """Test the hash comment precedes the header"""
        path = write_csv(tmp_path / "out" / "a.csv", ["x", "y"], [[1, 0.5]], "abc123")
        with open(path, "r", encoding="utf-8") as file:
            lines = file.read().splitlines()
        assert lines[0] == "# config_hash=abc123"
        assert lines[1] == "x,y"
        assert lines[2] == "1,5.00000000000000000e-01"

    def test_read_back(self, tmp_path):
        """Test rows are read as dicts without the comment"""
        path = write_csv(tmp_path / "a.csv", ["tag", "value"], [["FF_fLM", 0.1], ["RR_rLM", ""]], "h")
        header, rows = read_csv(path)
        assert header == ["tag", "value"]
        assert rows[0]["tag"] == "FF_fLM"
        assert float(rows[0]["value"]) == 0.1
        assert rows[1]["value"] == ""

    def test_deterministic(self, tmp_path):
        """Test identical rows give identical bytes"""
        rows = [[1, np.float64(1.0) / 3.0], [2, 2.0 / 3.0]]
        first = write_csv(tmp_path / "a.csv", ["n", "v"], rows, "h").read_bytes()
        second = write_csv(tmp_path / "b.csv", ["n", "v"], rows, "h").read_bytes()
        assert first == second

"""Tests for janus.verification module"""
from unittest.mock import patch

import numpy as np
import pytest

from janus.constants import FF_FLM, FR_FLM, FR_RLM, RR_FLM, RR_RLM
from janus.storage import read_csv
from janus.verification import (
    CHECK_HEADER,
    CheckResult,
    check_identity_projection,
    check_monolithic,
    check_schur,
    check_single_domain_consistency,
    run_verification,
)


def synthetic_table(rr_flm=1e9, spread=2.0, spd=True):
    """Condition table over two meshes and two basis sizes"""
    table = {}
    for nx in (16, 32):
        for d in (5, 10):
            for tag in (FF_FLM, RR_RLM, FR_FLM, FR_RLM):
                table[(tag, nx, d)] = (10.0 * (spread if nx == 32 else 1.0), spd)
            table[(RR_FLM, nx, d)] = (rr_flm, False)
    return table


class TestCheckSchur:
    """Tests for check_schur function"""

    def test_passes(self):
        """Test a well behaved table"""
        checks = {c.name: c for c in check_schur(synthetic_table())}
        assert all(c.passed for c in checks.values())
        assert checks["schur_condition_spread"].value == pytest.approx(2.0)
        assert checks["rr_flm_ill_conditioning"].value == pytest.approx(5e7)

    def test_not_spd(self):
        """Test a failed Cholesky factorization"""
        checks = {c.name: c for c in check_schur(synthetic_table(spd=False))}
        assert not checks["schur_spd"].passed

    def test_spread(self):
        """Test a condition number growing with the mesh"""
        checks = {c.name: c for c in check_schur(synthetic_table(spread=50.0))}
        assert not checks["schur_condition_spread"].passed
        assert not checks["schur_ff_condition"].passed

    def test_rr_flm_not_ill_conditioned(self):
        """Test RR_fLM conditioning close to RR_rLM fails the ill-posedness check"""
        checks = {c.name: c for c in check_schur(synthetic_table(rr_flm=50.0))}
        assert not checks["rr_flm_ill_conditioning"].passed


class TestChecks:
    """Tests for the individual oracles"""

    def test_monolithic(self):
        """Test partitioned steps match the saddle-point solve"""
        result = check_monolithic(seed=1234, steps=10)
        assert result.passed, result.detail
        assert result.name == "monolithic_dae"

    def test_identity_projection(self):
        """Test identity bases reproduce FF_fLM"""
        result = check_identity_projection(nx=4, final_time=0.2)
        assert result.passed, result.detail

    def test_single_domain_consistency(self):
        """Test FF_fLM equals the single-domain solution"""
        result = check_single_domain_consistency(nx=8, final_time=0.2)
        assert result.passed, result.detail
        assert result.value <= 1e-10


class TestRunVerification:
    """Tests for run_verification function"""

    def test_errors_become_failed_checks(self, tmp_path):
        """Test a check raising an error is recorded as failed and the rest still run"""
        passing = CheckResult("ok", True, 0.0, 1.0)
        with patch("janus.verification.check_single_domain_consistency", side_effect=RuntimeError("boom")), patch(
            "janus.verification.check_identity_projection", return_value=passing
        ), patch("janus.verification.check_monolithic", return_value=passing), patch(
            "janus.verification.condition_sweep", return_value=synthetic_table()
        ), patch(
            "janus.verification.check_interface_enforcement", return_value=passing
        ):
            results = run_verification(seed=3, out_dir=tmp_path)
        assert not results[0].passed
        assert "boom" in results[0].detail
        assert np.isnan(results[0].value)
        assert all(r.passed for r in results[1:])
        header, rows = read_csv(tmp_path / "verify.csv")
        assert header == CHECK_HEADER
        assert len(rows) == len(results)

    @pytest.mark.slow
    def test_all_checks_pass(self, tmp_path):
        """Test the full verification suite"""
        results = run_verification(out_dir=tmp_path)
        assert all(r.passed for r in results), [r for r in results if not r.passed]

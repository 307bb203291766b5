"""Galerkin validation gate for the circle-bundle closed-form spectrum."""

import numpy as np
import pytest

from crtorsion.oracle import (
    galerkin_block_eigenvalues,
    validate_eigenvalues,
    validate_heat_coefficients,
    validate_kernel_dimension,
)


class TestGalerkinBlocks:
    def test_principal_block_matches_closed_form(self):
        for m in (0, 2, 5):
            K = 8
            eigs = galerkin_block_eigenvalues(m, K)
            expected = np.array([k * (k + m + 1.0) for k in range(K + 1)])
            assert len(eigs) == K + 1
            assert np.max(np.abs(eigs - expected) / np.maximum(expected, 1.0)) < 1e-8

    def test_shifted_block_starts_higher(self):
        # difference vector with a negative component has no low modes:
        # the k-ladder starts at k = offset
        m, off = 3, 2
        eigs = galerkin_block_eigenvalues(m, 8, d1_offset=off)
        expected_first = off * (off + m + 1.0)
        assert eigs[0] == pytest.approx(expected_first, rel=1e-9)

    def test_eigenvalue_validation_wrapper(self):
        assert validate_eigenvalues(1, num_eigs=8, basis_factor=3) < 1e-7
        assert validate_eigenvalues(4, num_eigs=6, basis_factor=3) < 1e-7


class TestKernelDimension:
    def test_matches_holomorphic_section_count(self):
        for m in range(0, 7):
            assert validate_kernel_dimension(m) == m + 1


class TestHeatCoefficients:
    def test_rescaled_trace_coefficients_match_density(self):
        errs = validate_heat_coefficients(64)
        assert errs[0] < 0.02
        assert errs[1] < 0.02

    def test_agreement_improves_with_m(self):
        e32 = validate_heat_coefficients(32)
        e128 = validate_heat_coefficients(128)
        assert e128[1] < e32[1]

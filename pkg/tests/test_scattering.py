#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from numerics.cuspnd import averaging_matrix, cusp_nd
from numerics.errors import KernelDimensionError, NeumannPoleError
from numerics.fem import AnchorSolve
from numerics.scattering import (
    NDMatrix,
    ScatteringEvaluator,
    assemble_T,
    c_from_q,
    error_bound,
    interior_nd,
    kernel_vectors,
    scattering_matrix,
)
from tests.conftest import fabricate_spectral_data


def series_by_hand(data, s):
    lam = s * (1 - s)
    size = data.boundary_coeffs.shape[1]
    out = np.zeros((size, size), dtype=complex)
    for j, eigenvalue in enumerate(data.eigenvalues):
        c = data.boundary_coeffs[j]
        out += np.outer(c, c.conj()) / (eigenvalue - lam)
    return data.mode_heights[:, None] * out


def test_interior_series(spectral_data):
    s = 0.3 + 1.4j
    ndm = interior_nd(spectral_data, [], s)
    assert ndm.provenance == "series"
    assert np.allclose(ndm.entries, series_by_hand(spectral_data, s))


@pytest.mark.parametrize("anchor_points", [[0.5 + 2.2j], [0.5 + 2.2j, 0.5 + 4.7j]])
def test_anchored_series_is_exact_for_consistent_anchors(spectral_data, anchor_points):
    anchors = [AnchorSolve(s0=s0, matrix=series_by_hand(spectral_data, s0), J=spectral_data.J)
               for s0 in anchor_points]
    s = 0.2 + 3.1j
    ndm = interior_nd(spectral_data, anchors, s)
    assert ndm.provenance in ("anchored-series", "repeated-anchored-series")
    assert np.allclose(ndm.entries, series_by_hand(spectral_data, s), rtol=1e-10, atol=1e-12)


def test_anchor_truncation_mismatch(spectral_data):
    anchor = AnchorSolve(s0=0.5 + 2j, matrix=np.eye(3, dtype=complex), J=1)
    with pytest.raises(ValueError):
        interior_nd(spectral_data, [anchor], 0.3 + 1j)


def test_pole_detection(spectral_data):
    # λ = s(1-s) = 3.1 与第二个特征值重合
    s = 0.5 + 1j * np.sqrt(3.1 - 0.25)
    with pytest.raises(NeumannPoleError) as info:
        interior_nd(spectral_data, [], s)
    assert info.value.index == 2


def test_interior_symmetry(spectral_data):
    ndm = interior_nd(spectral_data, [], 0.5 + 2.0j)
    assert ndm.symmetry_defect(spectral_data.heights) < 1e-12


def test_assemble_T_checks_shapes(spectral_data):
    ndm = interior_nd(spectral_data, [], 0.5 + 2j)
    ndc = cusp_nd(0.5 + 2j, [(1.5, 1.0)], J=1)
    with pytest.raises(ValueError):
        assemble_T(ndm, ndc, averaging_matrix(spectral_data.J, 1))


def test_kernel_vectors_gap():
    T = np.diag([3.0, 2.0, 1e-14, 1.0]).astype(complex)
    kernel = kernel_vectors(T, 1, q_weight=False)
    assert abs(kernel.vectors[2, 0]) == pytest.approx(1.0)
    assert kernel.gap_ok
    nearly = np.diag([3.0, 2.0, 1e-3, 2e-3]).astype(complex)
    assert not kernel_vectors(nearly, 1, q_weight=False).gap_ok
    with pytest.raises(KernelDimensionError):
        kernel_vectors(nearly, 1, q_weight=False, strict=True)


def test_c_from_q_closed_cases():
    heights = np.array([2.0])
    s = 0.3 + 1.2j
    # Q₂ = 0 时 C = -a^{2s-1}
    C, _ = c_from_q(np.array([[1.0 + 0j]]), np.array([[0j]]), heights, s)
    assert C[0, 0] == pytest.approx(-(2.0 ** (2 * s - 1)))


def test_scattering_matches_generalized_eigenvalue_route(spectral_data):
    evaluator = ScatteringEvaluator(spectral_data)
    for s in (0.5 + 1.0j, 0.5 + 2.0j, 0.3 + 1.5j, 0.8 - 0.7j):
        result = evaluator(s)
        assert result.gap_ok
        assert result.C[0, 0] == pytest.approx(evaluator.via_generalized_eig(s), rel=1e-8)


def test_scattering_structural_identities(spectral_data):
    evaluator = ScatteringEvaluator(spectral_data)
    for t in (1.0, 2.0, 3.0):
        assert evaluator.unitarity_defect(t) < 1e-9
    assert evaluator.functional_defect(0.3 + 1.5j) < 1e-8
    assert evaluator.symmetry_defect(0.3 + 1.5j) < 1e-9


def test_three_cusp_scattering_is_unitary():
    data = fabricate_spectral_data(J=1, heights=(1.5, 1.5, 1.5), seed=3)
    evaluator = ScatteringEvaluator(data)
    assert evaluator.p == 3
    C = evaluator.matrix(0.5 + 1.6j)
    assert C.shape == (3, 3)
    assert np.allclose(C.conj().T @ C, np.eye(3), atol=1e-8)
    assert evaluator.functional_defect(0.2 + 2.5j) < 1e-7


def test_rejects_half():
    with pytest.raises(ValueError):
        scattering_matrix(fabricate_spectral_data(), [], 0.5)


def test_result_record_is_plain(spectral_data):
    record = ScatteringEvaluator(spectral_data)(0.5 + 2.0j).to_record()
    assert record["s"] == [0.5, 2.0]
    assert len(record["C"]) == 1 and len(record["C"][0][0]) == 2
    assert record["provenance"] == "series"


def test_error_bound_availability():
    assert error_bound(1e-8, 1e-8, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 0.5 + 2j, 1) is not None
    assert error_bound(1.0, 1.0, 1e-3, 10.0, 1.0, 1.0, 1.0, 1.0, 0.5 + 2j, 1) is None


def test_error_estimate_is_small_for_converged_series(spectral_data):
    evaluator = ScatteringEvaluator(spectral_data)
    estimate = evaluator.error_estimate(0.5 + 1.0j)
    assert estimate is None or estimate >= 0


def test_ndmatrix_symmetry_defect_detects_asymmetry():
    entries = np.arange(9, dtype=complex).reshape(3, 3)
    ndm = NDMatrix(s=0.5 + 1j, entries=entries, J=1, p=1)
    assert ndm.symmetry_defect([1.0]) > 0.1

#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from numerics.fem import (
    AnchorSolve,
    NeumannSpectralData,
    assemble,
    direct_nd_at,
    dirichlet_spectrum,
    extract_boundary_data,
    shift_anchor,
    solve_spectrum,
)
from numerics.errors import NeumannPoleError
from numerics.geometry import surface_from_name
from numerics.linalg import check_symmetric
from numerics.mesh import build_mesh
from numerics.scattering import interior_nd

# a = 2 时紧部分的双曲面积为 π/3 - 1/2
MODULAR_AREA = math.pi / 3 - 0.5


@pytest.fixture(scope="module")
def modular_system():
    spec = surface_from_name("A0")
    return assemble(build_mesh(spec, h=0.2, n_boundary=32), spec, order=1)


@pytest.mark.parametrize("order", [1, 2])
def test_matrices_symmetric_and_constants_in_kernel(order):
    spec = surface_from_name("A0")
    system = assemble(build_mesh(spec, h=0.2, n_boundary=32), spec, order=order)
    check_symmetric(system.K)
    check_symmetric(system.M)
    ones = np.ones(system.dimension)
    assert np.max(np.abs(system.K @ ones)) < 1e-10
    assert ones @ (system.M @ ones) == pytest.approx(MODULAR_AREA, rel=2e-2)


def test_lowest_neumann_eigenvalue_is_zero(modular_system):
    values, vectors = solve_spectrum(modular_system, 6)
    assert abs(values[0]) < 1e-8
    assert np.all(values[1:] > 1e-3)
    gram = vectors.T @ (modular_system.M @ vectors)
    assert np.allclose(gram, np.eye(6), atol=1e-8)


def test_boundary_functional_on_constants(modular_system):
    W = modular_system.boundary_functional(4)
    projected = W @ np.ones(modular_system.dimension)
    expected = np.zeros(9)
    expected[4] = 1.0
    assert np.allclose(projected, expected, atol=1e-12)


def test_folded_cusp_uses_even_extension():
    spec = surface_from_name("A0_even")
    system = assemble(build_mesh(spec, h=0.2, n_boundary=32), spec, order=1)
    projected = system.boundary_functional(2) @ np.ones(system.dimension)
    assert projected[2] == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
    assert system.boundary_resolution(1) == 32


def test_parseval_defect_non_negative(modular_system):
    values, vectors = solve_spectrum(modular_system, 10)
    data = extract_boundary_data(modular_system, values, vectors, J=4)
    assert data.boundary_coeffs.shape == (10, 9)
    assert np.min(data.parseval_defect()) > -1e-10
    # 实特征函数的系数满足 c_{-m} = conj(c_m)
    assert np.allclose(data.boundary_coeffs[:, ::-1], data.boundary_coeffs.conj(), atol=1e-10)


def test_resolution_check(modular_system):
    values, vectors = solve_spectrum(modular_system, 3)
    with pytest.raises(ValueError):
        extract_boundary_data(modular_system, values, vectors, J=9)


def test_full_series_equals_direct_solve(modular_system):
    # 使用全部特征对时，特征级数与直接求解在任意 s 处一致
    values, vectors = solve_spectrum(modular_system, modular_system.dimension)
    data = extract_boundary_data(modular_system, values, vectors, J=3)
    s0 = 0.5 + 6.0j
    anchor = direct_nd_at(modular_system, s0, J=3, eigenvalues=values)
    series = interior_nd(data, [], s0).entries
    assert np.allclose(series, anchor.matrix, rtol=1e-8, atol=1e-10)


def test_spectral_data_round_trip(tmp_path, modular_system):
    values, vectors = solve_spectrum(modular_system, 5)
    data = extract_boundary_data(modular_system, values, vectors, J=2)
    loaded = NeumannSpectralData.load(data.save(tmp_path / "spectral.npz"))
    assert np.array_equal(loaded.boundary_coeffs, data.boundary_coeffs)
    assert loaded.J == 2
    assert loaded.meta["family"] == "A"
    assert loaded.truncate(3).n == 3
    anchor = AnchorSolve(s0=0.5 + 6j, matrix=np.eye(5, dtype=complex), J=2)
    restored = AnchorSolve.load(anchor.save(tmp_path / "anchor.npz"))
    assert restored.s0 == anchor.s0
    assert restored.lam == pytest.approx(0.25 + 36)


def test_shift_anchor_moves_off_eigenvalue():
    s0 = 0.5 + 3.0j
    shifted = shift_anchor(s0, np.array([9.25]))
    assert shifted == pytest.approx(s0 + 0.1j)
    assert shift_anchor(s0, np.array([1.0])) == s0
    with pytest.raises(NeumannPoleError):
        shift_anchor(s0, np.array([0.25 + (3.0 + 0.1 * k) ** 2 for k in range(12)]))


def test_odd_reduction_has_positive_spectrum():
    spec = surface_from_name("A0_odd")
    system = assemble(build_mesh(spec, h=0.25, n_boundary=32), spec, order=1)
    values, t = dirichlet_spectrum(system, 3)
    assert np.all(values > 0.25)
    assert np.allclose(t, np.sqrt(values - 0.25))

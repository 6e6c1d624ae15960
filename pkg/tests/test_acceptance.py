#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
完整网格与有限元求解的验收测试，单个用例需要数分钟：pytest -m slow
"""

import numpy as np
import pytest

from numerics.fem import assemble, direct_nd_at, dirichlet_spectrum, extract_boundary_data, solve_spectrum
from numerics.geometry import surface_from_name
from numerics.mesh import build_mesh
from numerics.resonances import deflated_find, embedded_scan, newton_find
from numerics.scattering import ScatteringEvaluator
from numerics.specialfn import ClosedFormEvaluator, case_for_surface
from tests.conftest import ZETA_ZERO_ORDINATES

pytestmark = pytest.mark.slow

_EVALUATORS = {}


def fem_evaluator(name, h=0.02, order=2, n_boundary=128, n_eigenpairs=600, J=15, anchors=(0.5 + 6j,)):
    """同一进程内按预设名复用谱数据；P2 元、h = 0.02 时 t ≤ 10 的相对误差在 1e-3 以内"""
    key = (name, h, order, n_boundary, n_eigenpairs, J)
    if key not in _EVALUATORS:
        spec = surface_from_name(name)
        system = assemble(build_mesh(spec, h=h, n_boundary=n_boundary), spec, order=order)
        values, vectors = solve_spectrum(system, n_eigenpairs)
        data = extract_boundary_data(system, values, vectors, J)
        solved = [direct_nd_at(system, s0, J, values) for s0 in anchors]
        _EVALUATORS[key] = ScatteringEvaluator(data, solved, cusps=spec.cusps)
    return _EVALUATORS[key]


def test_modular_matches_closed_form():
    evaluator = fem_evaluator("A0")
    closed = ClosedFormEvaluator(case_for_surface(surface_from_name("A0")))
    worst = 0.0
    for t in np.arange(0.5, 10.01, 0.5):
        s = 0.5 + 1j * t
        exact = closed.matrix(s)
        worst = max(worst, float(np.linalg.norm(evaluator.matrix(s) - exact, 2) / np.linalg.norm(exact, 2)))
    assert worst <= 1e-3


def test_modular_structural_properties():
    evaluator = fem_evaluator("A0")
    for t in (0.5, 2.0, 5.0, 9.0):
        assert evaluator.unitarity_defect(t) <= 1e-3
    for s in (0.3 + 2.0j, 0.1 + 4.5j, 0.8 + 1.2j):
        assert evaluator.functional_defect(s) <= 1e-3
        assert evaluator(s).C[0, 0] == pytest.approx(evaluator.via_generalized_eig(s), rel=1e-6)
    result = evaluator(0.3 + 2.0j)
    assert result.sigma_p / result.sigma_next <= 1e-6


def test_modular_resonances_are_half_zeta_zeros():
    evaluator = fem_evaluator("A0")
    for gamma in ZETA_ZERO_ORDINATES[:5]:
        expected = 0.25 + 0.5j * gamma
        record = newton_find(expected - 0.05j, evaluator)
        assert abs(record.s - expected) <= 5e-3
        assert record.classification == "critical-line"


def test_artin_resonance_on_imaginary_axis():
    record = newton_find(0.0 + 4.5j, fem_evaluator("B_sqrt2"))
    assert abs(record.s - 4.5325j) <= 5e-3
    assert record.classification == "imaginary-axis"


def test_embedded_eigenvalue_of_modular_surface():
    result = embedded_scan(fem_evaluator("A0"), np.arange(13.70, 13.86, 0.01), workers=1)
    assert any(abs(c.t - 13.7798) <= 5e-3 for c in result.candidates)


def test_embedded_eigenvalue_of_artin_surface():
    result = embedded_scan(fem_evaluator("B_sqrt3"), np.arange(5.00, 5.20, 0.01), workers=1)
    assert any(abs(c.t - 5.0988) <= 5e-3 for c in result.candidates)


def test_genus_one_double_embedded_eigenvalue():
    result = embedded_scan(fem_evaluator("C_gutzwiller"), np.arange(2.90, 3.01, 0.01), workers=1)
    matches = [c for c in result.candidates if abs(c.t - 2.95648) <= 5e-3]
    assert matches and matches[0].multiplicity == 2


def test_genus_one_resonances():
    evaluator = fem_evaluator("C_gutzwiller")
    for expected in (0.25 + 7.0674j, 0.25 + 10.5110j):
        assert abs(newton_find(expected - 0.03j, evaluator).s - expected) <= 5e-3


@pytest.mark.parametrize("seeds", [[0.25 + 7.05j], [0.25 + 7.05j, 0.25 + 7.05j]])
def test_three_cusp_cluster(seeds):
    records = deflated_find(seeds, fem_evaluator("D"))
    cluster = min(records, key=lambda r: abs(r.s - (0.25 + 7.0675j)))
    assert cluster.multiplicity == 3
    assert abs(cluster.s - (0.25 + 7.0675j)) <= 5e-3


def test_odd_spectrum_of_modular_surface():
    spec = surface_from_name("A0_odd")
    system = assemble(build_mesh(spec, h=0.04, n_boundary=128, refinements=2), spec, order=2)
    _, t = dirichlet_spectrum(system, 3)
    assert t == pytest.approx([9.53369, 12.1730, 14.3585], abs=2e-3)

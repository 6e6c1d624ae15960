#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math

import mpmath
import numpy as np
import pytest

from numerics.cuspnd import (
    averaging_matrix,
    bessel_ratio,
    bessel_ratio_cf,
    bessel_ratio_quad,
    constant_mode_indices,
    cusp_nd,
    cusp_nd_entry,
    mode_ordering,
    mode_weights,
)
from numerics.errors import ConvergenceError
from numerics.geometry import CuspSpec


def reference_ratio(t: complex, x: float) -> complex:
    """1/2 + x K'_{it}(x)/K_{it}(x)，K' = -(K_{ν-1} + K_{ν+1})/2"""
    mpmath.mp.dps = 30
    nu = mpmath.mpc(0, 1) * mpmath.mpc(t.real, t.imag)
    k = mpmath.besselk(nu, x)
    dk = -(mpmath.besselk(nu - 1, x) + mpmath.besselk(nu + 1, x)) / 2
    return complex(mpmath.mpf("0.5") + x * dk / k)


@pytest.mark.parametrize("t,x", [
    (0.0, 1.0),
    (2.5, 6.0),
    (7.0, 2 * math.pi * 1.5),
    (3.0, 4 * math.pi),
    (5.0 + 0.2j, 2 * math.pi * 2.0),
    (1.0 - 0.3j, 3.0),
])
def test_continued_fraction_matches_mpmath(t, x):
    expected = reference_ratio(complex(t), x)
    assert abs(bessel_ratio_cf(t, x) - expected) <= 1e-10 * abs(expected)


@pytest.mark.parametrize("t,x", [(0.0, 1.0), (2.5, 6.0), (4.0, 9.0)])
def test_quadrature_agrees_with_continued_fraction(t, x):
    assert bessel_ratio_quad(t, x) == pytest.approx(bessel_ratio_cf(t, x), rel=1e-8)


def test_continued_fraction_iteration_limit():
    with pytest.raises(ConvergenceError) as info:
        bessel_ratio_cf(3.0, 2.0, max_iter=2)
    assert info.value.iterations == 2


def test_ratio_falls_back_to_quadrature():
    # 正常参数下 bessel_ratio 与连分式结果一致
    assert bessel_ratio(2.0, 5.0) == pytest.approx(bessel_ratio_cf(2.0, 5.0), rel=1e-14)


def test_rejects_non_positive_argument():
    with pytest.raises(ValueError):
        bessel_ratio_cf(1.0, 0.0)


def test_entry_zero_mode_and_symmetry():
    s = 0.5 + 3.0j
    assert cusp_nd_entry(s, 0, 1.5) == 0
    assert cusp_nd_entry(s, 3, 1.5) == cusp_nd_entry(s, -3, 1.5)


def test_entry_real_on_critical_line_and_decays():
    # 大 x 时 x K'/K ≈ -x，因此对角元约为 1/x
    s = 0.5 + 2.0j
    values = [cusp_nd_entry(s, m, 2.0) for m in range(1, 6)]
    assert all(abs(v.imag) < 1e-12 for v in values)
    assert all(v.real > 0 for v in values)
    assert np.all(np.diff([v.real for v in values]) < 0)
    x = 2 * math.pi * 5 * 2.0
    assert values[-1].real == pytest.approx(1.0 / x, rel=0.05)


def test_entry_depends_on_s_only_through_lambda():
    s = 0.3 + 1.7j
    assert cusp_nd_entry(s, 2, 1.2) == pytest.approx(cusp_nd_entry(1 - s, 2, 1.2), rel=1e-12)


def test_entry_width_scaling():
    s = 0.5 + 1.0j
    assert cusp_nd_entry(s, 2, 1.0, width=2.0) == pytest.approx(cusp_nd_entry(s, 1, 1.0), rel=1e-14)


def test_mode_ordering_indices():
    J, p = 2, 3
    modes = mode_ordering(J, p)
    assert len(modes) == (2 * J + 1) * p
    for index, (m, k) in enumerate(modes):
        assert index == (k - 1) * (2 * J + 1) + m + J
    assert constant_mode_indices(J, p).tolist() == [2, 7, 12]
    assert mode_weights(J, p)[:5].tolist() == [3.0, 2.0, 1.0, 2.0, 3.0]


def test_averaging_matrix_is_projection():
    av = averaging_matrix(2, 2)
    assert np.allclose(av @ av, av)
    assert np.trace(av).real == 2


def test_cusp_nd_accepts_specs_and_tuples():
    s = 0.5 + 4.0j
    from_specs = cusp_nd(s, [CuspSpec(index=1, height=1.5), CuspSpec(index=2, height=2.0, width=2.0)], J=3)
    from_tuples = cusp_nd(s, [(1.5, 1.0), (2.0, 2.0)], J=3)
    assert np.allclose(from_specs.diagonal, from_tuples.diagonal)
    assert from_specs.p == 2
    assert from_specs.entry(0, 2) == 0
    assert from_specs.entry(2, 1) == pytest.approx(cusp_nd_entry(s, 2, 1.5))
    assert from_specs.entry(-1, 2) == pytest.approx(cusp_nd_entry(s, 1, 2.0, 2.0))
    assert from_specs.matrix.shape == (14, 14)

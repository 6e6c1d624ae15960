#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest
from loguru import logger

from numerics.errors import ConvergenceError, NearSpectrumError
from numerics.resonances import (
    ResonanceRecord,
    Trajectory,
    classify,
    cluster_records,
    count_by_argument_principle,
    deflated_find,
    det_c_inverse_arg,
    embedded_scan,
    newton_find,
    resonance_scan,
    seed_scan,
    track,
)
from tests.conftest import EmbeddedModelEvaluator, ExponentialEvaluator, LinearRootEvaluator

MODULAR_FIRST = 0.25 + 1j * 14.134725142 / 2


@pytest.mark.parametrize("s,expected", [
    (0.25 + 7.0j, "critical-line"),
    (0.252 + 3.0j, "critical-line"),
    (0.001 + 4.5j, "imaginary-axis"),
    (0.495 + 1.0j, "near-spectrum"),
    (-0.3 + 2.0j, "generic"),
])
def test_classify(s, expected):
    assert classify(s) == expected


def test_det_uses_reflected_argument():
    evaluator = LinearRootEvaluator([0.1 + 2.0j])
    assert abs(det_c_inverse_arg(0.1 + 2.0j, evaluator)) < 1e-14
    assert det_c_inverse_arg(0.1 + 3.0j, evaluator) == pytest.approx(1.0j)


def test_newton_finds_modular_resonance(modular_evaluator):
    record = newton_find(0.25 + 7.0j, modular_evaluator)
    assert abs(record.s - MODULAR_FIRST) < 1e-6
    assert record.classification == "critical-line"
    assert record.residual < 1e-6
    assert record.pole == pytest.approx(1 - record.s)


def test_newton_finds_artin_resonance(artin_sqrt2_evaluator):
    record = newton_find(0.02 + 4.4j, artin_sqrt2_evaluator)
    assert abs(record.s - 1j * math.pi / math.log(2)) < 1e-6
    assert record.classification == "imaginary-axis"


def test_newton_diverges_without_roots():
    with pytest.raises(ConvergenceError) as info:
        newton_find(0.0 + 1.0j, ExponentialEvaluator())
    assert info.value.iterations >= 1


def test_newton_guard_band():
    with pytest.raises(NearSpectrumError):
        newton_find(0.4995 + 3.0j, LinearRootEvaluator([0.1 + 3.0j]))
    # 根本身在保护带内时迭代会越界
    with pytest.raises(NearSpectrumError):
        newton_find(0.3 + 3.0j, LinearRootEvaluator([0.4999 + 3.0j]))


def test_newton_returns_immediately_on_root():
    record = newton_find(0.1 + 2.0j, LinearRootEvaluator([0.1 + 2.0j]))
    assert record.iterations == 1
    assert record.s == 0.1 + 2.0j


def test_deflation_separates_near_double_root():
    roots = [0.1 + 2.0j, 0.1 + 2.0j + 5e-4]
    records = deflated_find([0.12 + 2.01j], LinearRootEvaluator(roots))
    assert len(records) == 1
    assert records[0].multiplicity == 2
    assert sorted(abs(m - roots[0]) < 1e-6 or abs(m - roots[1]) < 1e-6 for m in records[0].members) == [True, True]


def test_deflation_with_separate_seeds():
    roots = [0.1 + 2.0j, -0.1 + 3.0j]
    records = deflated_find([0.05 + 2.05j, -0.05 + 2.95j], LinearRootEvaluator(roots))
    assert [r.multiplicity for r in records] == [1, 1]
    assert np.allclose([r.s for r in records], roots, atol=1e-7)


def test_seed_on_known_root_does_not_crash():
    root = 0.1 + 1.0j
    evaluator = LinearRootEvaluator([root])
    records = deflated_find([root], evaluator)
    assert len(records) == 1
    assert records[0].s == root
    assert records[0].multiplicity == 1
    # 已知根由调用方给出时，落在其上的种子只会得到空结果
    assert deflated_find([root], evaluator, known=[root]) == []


def test_coincident_seeds_do_not_duplicate_roots():
    roots = [0.1 + 2.0j, 0.1 + 2.0j + 5e-4]
    evaluator = LinearRootEvaluator(roots)
    records = deflated_find([0.12 + 2.01j, 0.12 + 2.01j, roots[0]], evaluator)
    assert len(records) == 1
    assert records[0].multiplicity == 2


def test_seed_on_cluster_member_finds_partner():
    roots = [0.1 + 2.0j, 0.1 + 2.0j + 5e-4, -0.2 + 2.0j]
    records = deflated_find([roots[1], roots[2]], LinearRootEvaluator(roots))
    assert [r.multiplicity for r in records] == [1, 2]
    assert records[0].s == pytest.approx(roots[2], abs=1e-7)


def test_seed_without_root_is_reported():
    messages = []
    handler = logger.add(messages.append, level="WARNING")
    try:
        assert deflated_find([0.0 + 1.0j], ExponentialEvaluator()) == []
    finally:
        logger.remove(handler)
    assert any("0+1j" in m and "跳过" in m for m in messages)


def test_deflated_find_needs_seeds():
    with pytest.raises(ValueError):
        deflated_find([], LinearRootEvaluator([0.1 + 1j]))


def test_cluster_records_is_transitive():
    chain = [ResonanceRecord(s=0.1 + 2.0j + k * 8e-4, residual=1e-9 * (k + 1)) for k in range(3)]
    far = ResonanceRecord(s=0.1 + 1.0j, residual=1e-10)
    clusters = cluster_records(chain + [far], radius=1e-3)
    assert [c.multiplicity for c in clusters] == [1, 3]
    assert clusters[1].s == pytest.approx(0.1 + 2.0j + 8e-4)


def test_argument_principle_counts_zeros():
    evaluator = LinearRootEvaluator([0.1 + 2.0j, -0.1 + 2.5j])
    assert count_by_argument_principle((-0.2, 0.4, 1.0, 3.0), evaluator) == 2
    assert count_by_argument_principle((-0.2, 0.4, 1.0, 2.2), evaluator) == 1
    assert count_by_argument_principle((-0.2, 0.4, 3.0, 5.0), evaluator) == 0


def test_argument_principle_rejects_contour_near_spectrum():
    with pytest.raises(ValueError):
        count_by_argument_principle((-0.2, 0.495, 1.0, 3.0), LinearRootEvaluator([0.1 + 2j]))


def test_argument_principle_on_modular_surface(modular_evaluator):
    assert count_by_argument_principle((0.0, 0.45, 6.5, 7.5), modular_evaluator) == 1


def test_seed_scan_and_resonance_scan():
    evaluator = LinearRootEvaluator([0.1 + 1.0j])
    window = (-0.1, 0.3, 0.6, 1.4)
    seeds = seed_scan(evaluator, window, spacing=0.05, workers=1)
    assert abs(seeds[0] - (0.1 + 1.0j)) < 0.05
    records = resonance_scan(evaluator, window, spacing=0.05, workers=1)
    assert len(records) == 1
    assert abs(records[0].s - (0.1 + 1.0j)) < 1e-8


def test_resonance_scan_discards_roots_outside_window():
    records = resonance_scan(LinearRootEvaluator([0.1 + 3.0j]), (-0.1, 0.3, 0.6, 1.4), spacing=0.1, workers=1)
    assert records == []


def moving_root(parameter):
    return 0.1 + 0.05 * parameter + 1j * (2.0 + 0.1 * parameter)


def test_track_follows_linear_motion():
    parameters = np.linspace(0.0, 1.0, 6)
    trajectories = track(lambda x: LinearRootEvaluator([moving_root(x)]), parameters, [moving_root(0.0) + 0.01],
                         workers=1)
    assert len(trajectories) == 1
    trajectory = trajectories[0]
    assert not trajectory.truncated
    assert trajectory.parameters == pytest.approx(parameters.tolist())
    assert np.allclose(trajectory.points, [moving_root(x) for x in parameters], atol=1e-8)
    assert trajectory.max_step() < 0.05


def test_track_splits_on_jump():
    def factory(x):
        return LinearRootEvaluator([moving_root(x) if x < 0.5 else moving_root(x) + 0.5j])

    trajectories = track(factory, np.linspace(0.0, 1.0, 6), [moving_root(0.0)], workers=1)
    assert len(trajectories) == 2
    assert not any(t.truncated for t in trajectories)
    assert "拆分" in trajectories[0].note
    assert trajectories[1].parameters[0] == pytest.approx(0.6)


def test_track_truncates_on_failure():
    def factory(x):
        return LinearRootEvaluator([moving_root(x)]) if x < 0.5 else ExponentialEvaluator()

    trajectories = track(factory, np.linspace(0.0, 1.0, 6), [moving_root(0.0)], workers=1)
    assert len(trajectories) == 1
    assert trajectories[0].truncated
    assert len(trajectories[0].records) == 3


def test_track_requires_input():
    with pytest.raises(ValueError):
        track(lambda x: ExponentialEvaluator(), [], [0.1 + 1j])
    with pytest.raises(ValueError):
        track(lambda x: ExponentialEvaluator(), [0.0], [])


def test_trajectory_prediction():
    trajectory = Trajectory(predictor_order=2)
    for x in (0.0, 0.1, 0.2):
        trajectory.append(ResonanceRecord(s=moving_root(x), residual=0.0, parameter=x))
    assert trajectory.predict(0.3) == pytest.approx(moving_root(0.3))
    with pytest.raises(ValueError):
        Trajectory().predict(0.0)


def test_embedded_scan_finds_crossings():
    evaluator = EmbeddedModelEvaluator([1.234, 3.567])
    result = embedded_scan(evaluator, np.arange(0.0, 5.0, 0.1), workers=1)
    found = sorted(c.t for c in result.candidates)
    assert found == pytest.approx([1.234, 3.567], abs=1e-6)
    assert all(c.multiplicity == 1 for c in result.candidates)
    assert len(result.samples()) == 50


def test_embedded_scan_reports_double_crossing():
    result = embedded_scan(EmbeddedModelEvaluator([2.345, 2.345]), np.arange(0.0, 5.0, 0.1), workers=1)
    assert len(result.candidates) == 1
    candidate = result.candidates[0]
    assert candidate.multiplicity == 2
    assert candidate.lam == pytest.approx(0.25 + candidate.t ** 2)


def test_embedded_scan_rejects_negative_t():
    with pytest.raises(ValueError):
        embedded_scan(EmbeddedModelEvaluator([1.0]), [-0.1, 0.0, 0.1])


def test_record_row():
    row = ResonanceRecord(s=0.1 + 2.0j, residual=1e-9, parameter=0.5).to_row()
    assert set(row) == {"param", "re_s", "im_s", "residual", "class", "multiplicity"}
    assert row["class"] == "generic"
    assert row["multiplicity"] == 1

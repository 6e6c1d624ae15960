#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from numerics.errors import MeshError
from numerics.geometry import surface_from_name
from numerics.mesh import Mesh, build_mesh, is_reversed, refine, triangulate


@pytest.fixture(scope="module")
def modular():
    return surface_from_name("A0")


@pytest.fixture(scope="module")
def coarse_mesh(modular):
    return triangulate(modular, h=0.2, n_boundary=32)


def test_triangles_are_positively_oriented(coarse_mesh):
    assert np.all(coarse_mesh.signed_areas() > 0)
    assert np.all(coarse_mesh.vertices[:, 1] > 0)


def test_boundary_nodes_lie_on_arcs(modular, coarse_mesh):
    points = coarse_mesh.vertices[:, 0] + 1j * coarse_mesh.vertices[:, 1]
    for arc in modular.arcs:
        nodes = coarse_mesh.arc_nodes[arc.tag]
        expected = arc.point(coarse_mesh.arc_params[arc.tag])
        assert np.allclose(points[nodes], expected, atol=1e-12)


def test_cusp_section_resolution(modular, coarse_mesh):
    assert len(coarse_mesh.arc_nodes["horocycle"]) - 1 == 32
    xs = coarse_mesh.arc_params["horocycle"]
    assert np.allclose(np.diff(xs), 1.0 / 32)


def test_identified_nodes_share_dofs(modular, coarse_mesh):
    assert coarse_mesh.n_dofs < coarse_mesh.n_vertices
    for ident in modular.identifications:
        source = coarse_mesh.arc_nodes[ident.source]
        target = coarse_mesh.arc_nodes[ident.target]
        if is_reversed(modular, ident):
            target = target[::-1]
        assert np.array_equal(coarse_mesh.dof_map[source], coarse_mesh.dof_map[target])


def test_save_and_load(tmp_path, coarse_mesh):
    path = coarse_mesh.save(tmp_path / "mesh.npz")
    loaded = Mesh.load(path)
    assert np.array_equal(loaded.triangles, coarse_mesh.triangles)
    assert np.array_equal(loaded.dof_map, coarse_mesh.dof_map)
    assert loaded.merged_pairs == coarse_mesh.merged_pairs
    assert set(loaded.arc_nodes) == set(coarse_mesh.arc_nodes)


def test_refine_keeps_boundary_on_arcs(modular, coarse_mesh):
    fine = refine(coarse_mesh, modular)
    assert len(fine.triangles) == 4 * len(coarse_mesh.triangles)
    assert fine.n_boundary == 64
    points = fine.vertices[:, 0] + 1j * fine.vertices[:, 1]
    arc = modular.arc("arc_right")
    nodes = fine.arc_nodes["arc_right"]
    assert np.allclose(np.abs(points[nodes]), arc.radius, atol=1e-12)
    assert np.all(fine.signed_areas() > 0)
    assert fine.n_dofs < fine.n_vertices


@pytest.mark.parametrize("name", ["B_sqrt2", "C_acosh3", "D"])
def test_other_families_mesh(name):
    mesh = build_mesh(surface_from_name(name), h=0.25, n_boundary=32)
    assert np.all(mesh.signed_areas() > 0)
    assert mesh.n_dofs <= mesh.n_vertices


def test_invalid_target_size(modular):
    with pytest.raises(MeshError):
        triangulate(modular, h=-1.0)

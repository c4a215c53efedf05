import numpy as np
import pytest
from shapely.geometry import box

from transmonkit.exceptions import MeshingError, ParameterError
from transmonkit.geometry import PadLayout, Region, Geometry2D, build_geometry, parallel_plate_geometry
from transmonkit.meshing import (
    NODE_GROUND, NODE_DRIVEN, NODE_OUTER, NODE_INTERIOR, triangulate, refine_uniform, read_txt)
from transmonkit.electrostatics import assemble_and_solve

SMALL = PadLayout(pad_width=4.0, pad_thickness=0.5, pad_gap=2.0, substrate_depth=10.0, substrate_width=40.0,
                  airbox_width=60.0, airbox_above=30.0, airbox_below=2.0, oxide_thickness=0.0,
                  penetration_layers=False)


@pytest.fixture(scope='module')
def small_geom():
    return build_geometry(SMALL)


@pytest.fixture(scope='module')
def small_mesh(small_geom):
    return triangulate(small_geom, target_h=4.0, grading=8.0)


def test_quality(small_mesh):
    assert np.all(small_mesh.signed_areas() > 0)
    assert small_mesh.min_angles().min() >= 20.0 - 1e-6
    quality = small_mesh.quality()
    assert quality['nodes'] == small_mesh.node_count
    assert quality['min_angle_deg'] >= 20.0 - 1e-6


def test_regions(small_mesh):
    assert set(small_mesh.triangle_tags) == {'air', 'substrate'}
    assert not small_mesh.region_mask('metal_left').any()
    substrate_area = small_mesh.signed_areas()[small_mesh.region_mask('substrate')].sum()
    assert substrate_area == pytest.approx(40.0 * 10.0, rel=1e-9)


def test_conforming(small_mesh):
    _, counts = small_mesh.edges()
    assert counts.max() == 2


def test_boundary_markers(small_mesh):
    markers = small_mesh.boundary_markers
    for code in (NODE_GROUND, NODE_DRIVEN, NODE_OUTER, NODE_INTERIOR):
        assert np.any(markers == code)
    assert np.all(small_mesh.nodes[markers == NODE_GROUND, 0] <= -1.0 + 1e-9)
    assert np.all(small_mesh.nodes[markers == NODE_DRIVEN, 0] >= 1.0 - 1e-9)


def test_graded_towards_corners(small_geom, small_mesh):
    centroids = small_mesh.nodes[small_mesh.triangles].mean(axis=1)
    distance = np.min(np.linalg.norm(centroids[:, None] - small_geom.gap_corners[None], axis=2), axis=1)
    areas = small_mesh.signed_areas()
    assert areas[distance < 0.5].max() < 0.1 * areas[distance > 10].max()


def test_corner_h(small_geom):
    mesh = triangulate(small_geom, target_h=4.0, grading=1.0, corner_h=0.02)
    assert mesh.signed_areas().min() < 0.01
    assert mesh.node_count > triangulate(small_geom, target_h=4.0).node_count


@pytest.mark.parametrize('kwargs', [dict(target_h=0.0), dict(target_h=1.0, grading=0.5),
                                    dict(target_h=1.0, min_angle=40.0), dict(target_h=1.0, corner_h=-1.0)])
def test_invalid(small_geom, kwargs):
    with pytest.raises(ParameterError):
        triangulate(small_geom, **kwargs)


def test_retry_limit(small_geom):
    with pytest.raises(MeshingError) as err:
        triangulate(small_geom, target_h=4.0, grading=100.0, max_retries=0)
    assert err.value.statistics['nodes'] > 0


def test_refine_uniform(small_mesh):
    fine = refine_uniform(small_mesh)
    _, counts = small_mesh.edges()
    assert fine.node_count == small_mesh.node_count + counts.size
    assert fine.triangle_count == 4 * small_mesh.triangle_count
    assert fine.signed_areas().sum() == pytest.approx(small_mesh.signed_areas().sum(), rel=1e-12)
    assert np.all(fine.signed_areas() > 0)
    assert fine.min_angles().min() == pytest.approx(small_mesh.min_angles().min(), abs=1e-9)
    assert fine.target_h == small_mesh.target_h / 2
    assert np.array_equal(fine.boundary_markers[:small_mesh.node_count], small_mesh.boundary_markers)
    assert np.sum(fine.boundary_markers == NODE_DRIVEN) > np.sum(small_mesh.boundary_markers == NODE_DRIVEN)


def test_refined_pad_nodes_on_pads(small_mesh):
    fine = refine_uniform(refine_uniform(small_mesh))
    driven = fine.nodes[fine.boundary_markers == NODE_DRIVEN]
    on_face = (np.isclose(driven[:, 0], 1.0) | np.isclose(driven[:, 0], 5.0)
               | np.isclose(driven[:, 1], 0.0) | np.isclose(driven[:, 1], 0.5))
    assert np.all(on_face)


def test_swapped_terminals(small_mesh):
    swapped = small_mesh.with_swapped_terminals()
    assert np.array_equal(swapped.boundary_markers == NODE_GROUND, small_mesh.boundary_markers == NODE_DRIVEN)
    assert np.array_equal(swapped.boundary_markers == NODE_DRIVEN, small_mesh.boundary_markers == NODE_GROUND)


def test_parallel_plate_mesh():
    mesh = triangulate(parallel_plate_geometry(), target_h=0.5)
    assert set(mesh.triangle_tags) == {'air'}
    assert np.all(np.isclose(mesh.nodes[mesh.boundary_markers == NODE_GROUND, 1], -0.5))
    assert np.all(np.isclose(mesh.nodes[mesh.boundary_markers == NODE_DRIVEN, 1], 0.5))


def test_write_txt(small_mesh, tmp_path):
    path = tmp_path / 'mesh.txt'
    small_mesh.write_txt(path)
    with open(path) as fobj:
        assert fobj.readline().split() == [str(small_mesh.node_count), str(small_mesh.triangle_count)]
    nodes, triangles, tags = read_txt(path)
    np.testing.assert_array_equal(nodes, small_mesh.nodes)
    np.testing.assert_array_equal(triangles, small_mesh.triangles)
    assert set(tags) == {'air', 'substrate'}
    assert not list(tmp_path.glob('.*.tmp'))


def _square(side):
    return Geometry2D([Region('air', box(0.0, 0.0, side, side))], (0.0, 0.0, side, side))


def test_square_element_areas():
    mesh = triangulate(_square(8.0), target_h=2.0)
    areas = mesh.signed_areas()
    assert np.all(areas >= 0.2 * 2.0 ** 2)
    assert np.all(areas <= 0.8 * 2.0 ** 2)
    assert areas.sum() == pytest.approx(64.0)


def test_halving_h_grows_nodes():
    coarse = triangulate(_square(12.0), target_h=1.0)
    fine = triangulate(_square(12.0), target_h=0.5)
    assert 3 <= fine.node_count / coarse.node_count <= 5


def test_halving_h_settles_energy():
    geom = parallel_plate_geometry(width=20.0, separation=1.0, margin=5.0)
    coarse, fine = [assemble_and_solve(triangulate(geom, target_h=h, grading=8.0), {'air': 1.0}).total_energy
                    for h in (0.5, 0.25)]
    assert abs(fine - coarse) / fine < 0.01

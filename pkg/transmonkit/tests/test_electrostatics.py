from dataclasses import replace
import h5py
import numpy as np
import pytest
from scipy import constants

from transmonkit.exceptions import (ParameterError, SolverSetupError, SolverError, MeshResolutionError)
from transmonkit.geometry import (PadLayout, MATERIALS, build_geometry, parallel_plate_geometry,
                                  resolve_material_stack, material_map)
from transmonkit.meshing import triangulate, refine_uniform
from transmonkit.electrostatics import (
    assemble_and_solve, gauss_law_capacitance, terminal_charge, participation, field_maps, peak_field,
    potential_at, p1_gradients)

EPS0 = constants.epsilon_0
SMALL = PadLayout(pad_width=4.0, pad_thickness=0.5, pad_gap=2.0, substrate_depth=10.0, substrate_width=40.0,
                  airbox_width=60.0, airbox_above=30.0, airbox_below=2.0, oxide_thickness=0.0,
                  penetration_layers=False)


@pytest.fixture(scope='module')
def plates():
    return triangulate(parallel_plate_geometry(width=10.0, separation=1.0), target_h=0.5)


@pytest.fixture(scope='module')
def small_geom():
    return build_geometry(SMALL)


@pytest.fixture(scope='module')
def small_mesh(small_geom):
    return triangulate(small_geom, target_h=4.0, grading=8.0)


@pytest.fixture(scope='module')
def al_on_si(small_geom):
    return material_map(small_geom, resolve_material_stack('Al-on-Si'))


@pytest.fixture(scope='module')
def small_solution(small_mesh, al_on_si):
    return assemble_and_solve(small_mesh, al_on_si)


class TestParallelPlates:
    def test_capacitance(self, plates):
        sol = assemble_and_solve(plates, {'air': 1.0})
        assert sol.capacitance == pytest.approx(10 * EPS0, rel=1e-8)
        assert gauss_law_capacitance(sol, plates) == pytest.approx(10 * EPS0, rel=1e-6)
        assert gauss_law_capacitance(sol, plates, 'edge_flux') == pytest.approx(10 * EPS0, rel=1e-6)

    def test_uniform_field(self, plates):
        sol = assemble_and_solve(plates, {'air': 1.0})
        np.testing.assert_allclose(sol.e_field[:, 0], 0.0, atol=1.0)
        np.testing.assert_allclose(sol.e_field[:, 1], -1e6, rtol=1e-6)
        inside, outside = potential_at(sol, plates, [0.0, 0.0], [0.0, 0.75])
        assert inside == pytest.approx(0.5, rel=1e-6)
        assert np.isnan(outside)

    def test_dielectric_and_voltage(self, plates):
        sol = assemble_and_solve(plates, {'air': 4.0}, drive_voltage=2.0)
        assert sol.capacitance == pytest.approx(40 * EPS0, rel=1e-8)
        assert sol.total_energy == pytest.approx(0.5 * 40 * EPS0 * 4.0, rel=1e-8)
        assert terminal_charge(sol, plates, 'ground') == pytest.approx(-terminal_charge(sol, plates), rel=1e-6)

    def test_fringing_plates(self):
        mesh = triangulate(parallel_plate_geometry(width=200.0, separation=1.0, margin=10.0), target_h=2.0)
        ideal = 200 * EPS0
        capacitance = []
        for _ in range(3):
            sol = assemble_and_solve(mesh, {'air': 1.0})
            capacitance.append(sol.capacitance)
            mesh = refine_uniform(mesh)
        assert ideal < capacitance[0] < 1.1 * ideal
        assert ideal < capacitance[2] < 1.03 * ideal
        assert all(fine <= coarse * (1 + 1e-9) for coarse, fine in zip(capacitance, capacitance[1:]))

    def test_fringing_interior_field(self):
        mesh = triangulate(parallel_plate_geometry(width=200.0, separation=1.0, margin=10.0), target_h=2.0)
        sol = assemble_and_solve(mesh, {'air': 1.0})
        centroids = mesh.nodes[mesh.triangles].mean(axis=1)
        between = (np.abs(centroids[:, 0]) < 50.0) & (np.abs(centroids[:, 1]) < 0.5)
        np.testing.assert_allclose(sol.e_norm[between], 1e6, rtol=0.02)


class TestErrors:
    def test_zero_drive(self, plates):
        with pytest.raises(ParameterError):
            assemble_and_solve(plates, {'air': 1.0}, drive_voltage=0.0)

    def test_missing_material(self, plates):
        with pytest.raises(SolverSetupError, match='air'):
            assemble_and_solve(plates, {})

    def test_conductor_in_mesh(self, plates):
        with pytest.raises(SolverSetupError):
            assemble_and_solve(plates, {'air': MATERIALS['aluminum']})

    def test_no_ground(self, plates):
        with pytest.raises(SolverSetupError):
            assemble_and_solve(replace(plates, boundary_markers=np.zeros_like(plates.boundary_markers)),
                               {'air': 1.0})

    def test_iteration_limit(self, small_mesh, al_on_si):
        with pytest.raises(SolverError) as err:
            assemble_and_solve(small_mesh, al_on_si, maxiter=2)
        assert len(err.value.residual_history) == 2

    def test_inverted_triangle(self):
        xy = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        p1_gradients(xy, np.array([[0, 1, 2]]))
        with pytest.raises(SolverSetupError):
            p1_gradients(xy, np.array([[0, 2, 1]]))

    def test_method(self, plates):
        sol = assemble_and_solve(plates, {'air': 1.0})
        with pytest.raises(ParameterError):
            gauss_law_capacitance(sol, plates, 'flux')


class TestCoplanar:
    def test_energy_matches_charge(self, small_mesh, small_solution):
        assert gauss_law_capacitance(small_solution, small_mesh) == pytest.approx(small_solution.capacitance,
                                                                                  rel=1e-6)

    def test_reciprocity(self, small_mesh, al_on_si, small_solution):
        swapped = assemble_and_solve(small_mesh.with_swapped_terminals(), al_on_si)
        assert swapped.capacitance == pytest.approx(small_solution.capacitance, rel=1e-6)

    def test_nested_refinement_lowers_energy(self, small_mesh, al_on_si, small_solution):
        fine = assemble_and_solve(refine_uniform(small_mesh), al_on_si)
        assert fine.capacitance <= small_solution.capacitance * (1 + 1e-9)

    def test_substrate_contrast(self, small_geom, small_mesh, small_solution):
        sapphire = assemble_and_solve(small_mesh, material_map(small_geom, resolve_material_stack('Al-on-sapphire')))
        vacuum = assemble_and_solve(small_mesh, {'air': 1.0, 'substrate': 1.0})
        assert vacuum.capacitance < sapphire.capacitance < small_solution.capacitance

    def test_potential_range(self, small_solution):
        assert small_solution.potential.min() > -0.01
        assert small_solution.potential.max() < 1.01
        assert small_solution.iterations > 0

    def test_mirror_symmetry(self, small_geom, al_on_si):
        mesh = triangulate(small_geom, target_h=0.5, grading=4.0)
        sol = assemble_and_solve(mesh, al_on_si)
        x = np.array([0.0, 3.0, 10.0, 8.0, 2.5, 20.0])
        y = np.array([1.0, 3.0, 5.0, -4.0, -1.0, 10.0])
        right = potential_at(sol, mesh, x, y)
        left = potential_at(sol, mesh, -x, y)
        np.testing.assert_allclose(right + left, sol.drive_voltage, atol=0.02)


class TestParticipation:
    def test_without_band(self, small_mesh, small_solution):
        report = participation(small_solution, small_mesh, None)
        assert sum(report.fractions.values()) == pytest.approx(1.0)
        assert report.fractions['substrate_surface_layer'] == 0.0
        assert report.fractions['metal_oxide'] == 0.0
        assert report.fractions['substrate_bulk'] > 0.5
        assert report.as_dict()['surface_layer_thickness_nm'] is None

    def test_unresolved_band(self, small_mesh, small_solution):
        with pytest.raises(MeshResolutionError, match='corner_h'):
            participation(small_solution, small_mesh, 3.0)

    def test_invalid_thickness(self, small_mesh, small_solution):
        with pytest.raises(ParameterError):
            participation(small_solution, small_mesh, 0.0)

    def test_resolved_band(self, small_geom, al_on_si):
        mesh = triangulate(small_geom, target_h=4.0, grading=8.0, corner_h=0.001)
        sol = assemble_and_solve(mesh, al_on_si)
        bare = participation(sol, mesh, None)
        report = participation(sol, mesh, 3.0)
        assert report.fractions['substrate_surface_layer'] > 0
        assert report.fractions['substrate_surface_layer'] < report.fractions['substrate_bulk']
        assert report.fractions['substrate_surface_layer'] + report.fractions['substrate_bulk'] == \
            pytest.approx(bare.fractions['substrate_bulk'], rel=1e-9)
        assert report.lossy_dielectric == report.fractions['substrate_surface_layer']
        thicker = participation(sol, mesh, 6.0)
        assert thicker.fractions['substrate_surface_layer'] > report.fractions['substrate_surface_layer']

    def test_band_spans_substrate_width(self, small_geom, al_on_si):
        mesh = triangulate(small_geom, target_h=4.0, grading=8.0, corner_h=0.001)
        sol = assemble_and_solve(mesh, al_on_si)
        uniform = replace(sol, energy_density=np.ones_like(sol.energy_density))
        report = participation(uniform, mesh, 3.0)
        assert report.energies['substrate_surface_layer'] == pytest.approx(40e-6 * 3e-9, rel=1e-6)
        assert report.energies['substrate_bulk'] == pytest.approx(40e-6 * (10e-6 - 3e-9), rel=1e-6)

    def test_full_stack(self):
        geom = build_geometry(PadLayout(pad_width=4.0, pad_thickness=0.5, pad_gap=2.0, substrate_depth=10.0,
                                        substrate_width=40.0, airbox_width=60.0, airbox_above=30.0,
                                        airbox_below=2.0))
        mesh = triangulate(geom, target_h=4.0, grading=8.0, corner_h=0.001)
        sol = assemble_and_solve(mesh, material_map(geom, resolve_material_stack('Al-on-Si')))
        report = participation(sol, mesh, 3.0)
        for name in ('metal_oxide', 'penetration_layer', 'substrate_surface_layer'):
            assert report.fractions[name] > 0
        assert sum(report.fractions.values()) == pytest.approx(1.0)


class TestFieldMaps:
    def test_raster(self, small_mesh, small_solution):
        raster = field_maps(small_solution, small_mesh, (13, 9), bounds=(-6.0, -1.0, 6.0, 1.0))
        assert raster.e_norm.shape == (9, 13)
        inside_pad = (np.argmin(np.abs(raster.y - 0.25)), np.argmin(np.abs(raster.x - 3.0)))
        assert np.isnan(raster.e_norm[inside_pad])
        assert raster.triangle_index[inside_pad] == -1
        in_gap = (np.argmin(np.abs(raster.y - 0.5)), np.argmin(np.abs(raster.x)))
        assert raster.e_norm[in_gap] > 0
        assert len(list(raster.rows())) == 13 * 9

    def test_whole_airbox(self, small_mesh, small_solution):
        raster = field_maps(small_solution, small_mesh, (5, 5))
        assert raster.x[0] == small_mesh.airbox[0]
        assert raster.y[-1] == small_mesh.airbox[3]

    def test_invalid_raster(self, small_mesh, small_solution):
        with pytest.raises(ParameterError):
            field_maps(small_solution, small_mesh, (1, 5))

    def test_peak_near_gap(self, small_geom, small_mesh, small_solution):
        value, centroid = peak_field(small_solution, small_mesh)
        assert value == pytest.approx(small_solution.e_norm.max())
        assert np.min(np.linalg.norm(small_geom.gap_corners - centroid, axis=1)) < 1.0


def test_save_h5(small_mesh, small_solution, tmp_path):
    path = tmp_path / 'fields.h5'
    small_solution.save_h5(path, small_mesh)
    with h5py.File(path, 'r') as f:
        assert f['potential'].shape == (small_mesh.node_count,)
        assert f['triangles'].shape == (small_mesh.triangle_count, 3)
        assert f.attrs['capacitance_F_per_m'] == pytest.approx(small_solution.capacitance)
        assert f.attrs['coordinate_unit'] == 'um'


@pytest.fixture(scope='module')
def default_layout_reports():
    reports = {}
    for name in ('Al-on-Si', 'Nb-on-Si'):
        stack = resolve_material_stack(name)
        geom = build_geometry(PadLayout(), stack.metal)
        mesh = triangulate(geom, target_h=20.0, grading=4.0, min_angle=20.0, corner_h=0.0015)
        sol = assemble_and_solve(mesh, material_map(geom, stack))
        reports[name] = (geom, mesh, sol, participation(sol, mesh, 3.0))
    return reports


class TestMaterialContrast:
    def test_aluminum_has_more_lossy_participation(self, default_layout_reports):
        aluminum = default_layout_reports['Al-on-Si'][3]
        niobium = default_layout_reports['Nb-on-Si'][3]
        assert aluminum.lossy_dielectric > niobium.lossy_dielectric
        assert niobium.fractions['penetration_layer'] > aluminum.fractions['penetration_layer']

    @pytest.mark.parametrize('name', ['Al-on-Si', 'Nb-on-Si'])
    def test_peak_at_gap_corner(self, default_layout_reports, name):
        geom, mesh, sol, _ = default_layout_reports[name]
        _, centroid = peak_field(sol, mesh)
        assert np.min(np.linalg.norm(geom.gap_corners - centroid, axis=1)) < 2.0

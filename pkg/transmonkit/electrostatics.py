#!/usr/bin/env python
# coding=utf-8
# Filename: electrostatics.py

"""
Linear (P1) finite elements for div(eps grad V) = 0 on a Mesh2D.

The pads are Dirichlet boundaries (ground at 0 V, driven at the drive
voltage), the airbox walls are homogeneous Neumann. Coordinates are
converted from um to m, so fields are in V/m and energies and capacitances
are per unit depth (J/m, F/m).
"""

import json
import warnings
from dataclasses import dataclass, field
import numpy as np
import h5py
import scipy.sparse
import scipy.sparse.linalg
import shapely
import matplotlib.tri as mtri
from scipy import constants

from transmonkit.exceptions import (ParameterError, SolverSetupError, SolverError, NumericalError,
                                    MeshResolutionError, TransmonkitWarning)
from transmonkit.geometry import MaterialSpec, PARTICIPATION_CLASSES, region_class
from transmonkit.meshing import NODE_GROUND, NODE_DRIVEN

UM = 1e-6
NM = 1e-9
SOLVER_RTOL = 1e-10


@dataclass(eq=False)
class FieldSolution:
    """
    Potential and derived fields of one solve.

    Attributes
    ----------
    potential : ndarray
        Nodal potential in V.
    e_field : ndarray
        Piecewise constant field in V/m, shape (m, 2).
    e_norm : ndarray
        |E| per triangle in V/m.
    energy_density : ndarray
        1/2 eps |E|^2 per triangle in J/m^3.
    total_energy : float
        Stored energy per unit depth in J/m.
    drive_voltage : float
        Potential of the driven pad in V.
    permittivity : ndarray
        Absolute permittivity per triangle in F/m.
    areas : ndarray
        Triangle areas in m^2.
    stiffness : scipy.sparse.csr_matrix
        The assembled stiffness matrix, unconstrained.
    residual_history : list of float
        Relative residual after every CG iteration.

    """
    potential: np.ndarray
    e_field: np.ndarray
    e_norm: np.ndarray
    energy_density: np.ndarray
    total_energy: float
    drive_voltage: float
    permittivity: np.ndarray
    areas: np.ndarray
    stiffness: object = None
    residual_history: list = field(default_factory=list)

    @property
    def capacitance(self):
        """ 2 U / V^2 in F/m. """
        return 2.0 * self.total_energy / self.drive_voltage ** 2

    @property
    def iterations(self):
        return len(self.residual_history)

    def save_h5(self, path, mesh):
        """ Write mesh and fields to an HDF5 file, path may also be a binary file object. """
        with h5py.File(path, 'w') as f:
            f.create_dataset('nodes', data=mesh.nodes, compression='gzip', compression_opts=1)
            f.create_dataset('triangles', data=mesh.triangles, compression='gzip', compression_opts=1)
            f.create_dataset('triangle_region', data=mesh.triangle_region, compression='gzip', compression_opts=1)
            f.create_dataset('potential', data=self.potential, compression='gzip', compression_opts=1)
            f.create_dataset('e_field', data=self.e_field, compression='gzip', compression_opts=1)
            f.create_dataset('energy_density', data=self.energy_density, compression='gzip', compression_opts=1)
            f.attrs['region_tags'] = json.dumps(list(mesh.region_tags))
            f.attrs['total_energy_J_per_m'] = self.total_energy
            f.attrs['capacitance_F_per_m'] = self.capacitance
            f.attrs['drive_voltage_V'] = self.drive_voltage
            f.attrs['coordinate_unit'] = 'um'


@dataclass(eq=False)
class ParticipationReport:
    """
    Fractions of the stored energy per region class.

    Attributes
    ----------
    fractions : dict
        p_region for substrate_bulk, substrate_surface_layer, metal_oxide,
        penetration_layer and air.
    energies : dict
        Energy per class in J/m.
    capacitance : float
        F/m.
    total_energy : float
        J/m.
    drive_voltage : float
        V.
    surface_layer_thickness : float or None
        nm, None if no surface band was separated.

    """
    fractions: dict
    energies: dict
    capacitance: float
    total_energy: float
    drive_voltage: float
    surface_layer_thickness: float

    @property
    def lossy_dielectric(self):
        """ Participation of the oxide plus the substrate surface layer. """
        return self.fractions['metal_oxide'] + self.fractions['substrate_surface_layer']

    def as_dict(self):
        return {'fractions': dict(self.fractions),
                'energies_J_per_m': dict(self.energies),
                'capacitance_F_per_m': self.capacitance,
                'total_energy_J_per_m': self.total_energy,
                'drive_voltage_V': self.drive_voltage,
                'surface_layer_thickness_nm': self.surface_layer_thickness}


@dataclass(eq=False)
class FieldRaster:
    """ Piecewise constant fields sampled on a regular grid, NaN outside of the mesh. """
    x: np.ndarray
    y: np.ndarray
    e_norm: np.ndarray
    energy_density: np.ndarray
    triangle_index: np.ndarray

    def rows(self):
        """ (x, y, e_norm, energy_density) per raster point, row by row. """
        xx, yy = np.meshgrid(self.x, self.y)
        return zip(xx.ravel(), yy.ravel(), self.e_norm.ravel(), self.energy_density.ravel())


def _relative_permittivity(tag, material):
    if isinstance(material, MaterialSpec):
        if material.is_conductor:
            raise SolverSetupError('Region {} is a conductor ({}) but is part of the mesh'.format(tag, material.name))
        return material.relative_permittivity
    try:
        value = float(material)
    except (TypeError, ValueError):
        raise SolverSetupError('Material of region {} must be a MaterialSpec or a number, got {!r}'
                               .format(tag, material))
    if not value > 0:
        raise SolverSetupError('Relative permittivity of region {} must be > 0, got {}'.format(tag, value))
    return value


def p1_gradients(xy, triangles):
    """
    Gradients of the three P1 basis functions per triangle.

    Returns
    -------
    gradients : ndarray
        Shape (m, 3, 2).
    areas : ndarray
        Positive triangle areas, shape (m,).

    """
    p = xy[triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0):
        raise SolverSetupError('The mesh has {} degenerate or inverted triangles'.format(int(np.sum(det <= 0))))
    gradients = np.empty((p.shape[0], 3, 2))
    for i, (j, k) in enumerate(((1, 2), (2, 0), (0, 1))):
        gradients[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / det
        gradients[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / det
    return gradients, 0.5 * det


def assemble_and_solve(mesh, materials, drive_voltage=1.0, rtol=SOLVER_RTOL, maxiter=None):
    """
    Solve the electrostatic problem on a mesh.

    Parameters
    ----------
    mesh : Mesh2D
    materials : dict
        Region tag -> MaterialSpec or relative permittivity, for every
        region tag of the mesh's triangles.
    drive_voltage : float
        Potential of the driven pad in V, nonzero.
    rtol : float
        Relative residual target of the conjugate gradient solve.
    maxiter : int or None
        Iteration limit, 10 times the number of unknowns if None.

    Returns
    -------
    sol : FieldSolution

    Raises
    ------
    SolverSetupError
        Missing materials, conductor regions in the mesh, or a missing
        ground or driven pad.
    SolverError
        If conjugate gradients stagnates, with the residual history.

    """
    if not (np.isfinite(drive_voltage) and drive_voltage != 0):
        raise ParameterError('The drive voltage must be finite and nonzero, got {}'.format(drive_voltage))

    used_tags = [mesh.region_tags[i] for i in np.unique(mesh.triangle_region)]
    missing = [tag for tag in used_tags if tag not in materials]
    if missing:
        raise SolverSetupError('No material for region(s) {}'.format(', '.join(missing)))
    eps_r_per_region = np.ones(len(mesh.region_tags))
    for tag in used_tags:
        eps_r_per_region[mesh.region_tags.index(tag)] = _relative_permittivity(tag, materials[tag])
    permittivity = constants.epsilon_0 * eps_r_per_region[mesh.triangle_region]

    ground = mesh.boundary_markers == NODE_GROUND
    driven = mesh.boundary_markers == NODE_DRIVEN
    if not ground.any() or not driven.any():
        raise SolverSetupError('The mesh needs ground and driven pad nodes, found {} and {}'.format(
            int(ground.sum()), int(driven.sum())))

    xy = mesh.nodes * UM
    gradients, areas = p1_gradients(xy, mesh.triangles)
    local = (permittivity * areas)[:, None, None] * np.einsum('mik,mjk->mij', gradients, gradients)
    rows = np.broadcast_to(mesh.triangles[:, :, None], local.shape)
    cols = np.broadcast_to(mesh.triangles[:, None, :], local.shape)
    n_nodes = mesh.node_count
    stiffness = scipy.sparse.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                                        shape=(n_nodes, n_nodes)).tocsr()

    potential = np.zeros(n_nodes)
    potential[driven] = drive_voltage
    fixed = ground | driven
    free = np.flatnonzero(~fixed)
    history = []
    if free.size:
        a_ff = stiffness[free][:, free].tocsr()
        rhs = -(stiffness[free][:, np.flatnonzero(fixed)] @ potential[fixed])
        diagonal = a_ff.diagonal()
        if np.any(diagonal <= 0):
            raise SolverSetupError('{} free nodes are not connected to any triangle'.format(int(np.sum(diagonal <= 0))))
        preconditioner = scipy.sparse.diags(1.0 / diagonal)
        rhs_norm = np.linalg.norm(rhs)

        def record_residual(xk):
            history.append(float(np.linalg.norm(rhs - a_ff @ xk) / rhs_norm))

        solution, info = scipy.sparse.linalg.cg(a_ff, rhs, x0=np.zeros(free.size), rtol=rtol, atol=0.0,
                                                maxiter=maxiter if maxiter is not None else 10 * free.size,
                                                M=preconditioner, callback=record_residual)
        if info > 0:
            raise SolverError('Conjugate gradients did not reach a relative residual of {} in {} iterations'
                              .format(rtol, info), history, {'unknowns': int(free.size)})
        if info < 0 or not np.all(np.isfinite(solution)):
            raise NumericalError('Conjugate gradients broke down (info = {})'.format(info),
                                 {'unknowns': int(free.size)})
        potential[free] = solution

    low, high = min(0.0, drive_voltage), max(0.0, drive_voltage)
    violation = max(low - potential.min(), potential.max() - high)
    if violation > 1e-9 * abs(drive_voltage):
        warnings.warn('Discrete maximum principle violated by {:.3g} V, the mesh has obtuse triangles '
                      'across material interfaces'.format(violation), TransmonkitWarning)

    e_field = -np.einsum('mi,mik->mk', potential[mesh.triangles], gradients)
    e_norm = np.hypot(e_field[:, 0], e_field[:, 1])
    energy_density = 0.5 * permittivity * e_norm ** 2
    return FieldSolution(potential=potential, e_field=e_field, e_norm=e_norm, energy_density=energy_density,
                         total_energy=float(np.sum(energy_density * areas)), drive_voltage=float(drive_voltage),
                         permittivity=permittivity, areas=areas, stiffness=stiffness, residual_history=history)


def terminal_charge(sol, mesh, terminal='driven'):
    """ Charge per unit depth (C/m) on a pad, from the reaction of the discrete system. """
    code = {'driven': NODE_DRIVEN, 'ground': NODE_GROUND}[terminal]
    reaction = sol.stiffness @ sol.potential
    return float(np.sum(reaction[mesh.boundary_markers == code]))


def gauss_law_capacitance(sol, mesh, method='reaction'):
    """
    Capacitance per unit depth from the charge on the driven pad.

    Parameters
    ----------
    method : str
        'reaction' sums the residual of the discrete system over the pad
        nodes, 'edge_flux' integrates eps E.n of the adjacent triangles
        along the pad boundary.

    """
    if method == 'reaction':
        return terminal_charge(sol, mesh, 'driven') / sol.drive_voltage
    if method != 'edge_flux':
        raise ParameterError("method must be 'reaction' or 'edge_flux', got {!r}".format(method))

    driven = mesh.boundary_markers == NODE_DRIVEN
    charge = 0.0
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        a, b = mesh.triangles[:, i], mesh.triangles[:, j]
        on_pad = driven[a] & driven[b] & ~driven[mesh.triangles[:, k]]
        if not on_pad.any():
            continue
        tangent = (mesh.nodes[b[on_pad]] - mesh.nodes[a[on_pad]]) * UM
        # outward normal of a counter-clockwise triangle, pointing into the pad
        into_pad = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        flux = np.einsum('ij,ij->i', sol.e_field[on_pad], -into_pad)
        charge += float(np.sum(sol.permittivity[on_pad] * flux))
    return charge / sol.drive_voltage


def participation(sol, mesh, surface_layer_thickness=3.0):
    """
    Split the stored energy into region classes.

    The substrate surface layer is the part of the substrate within
    surface_layer_thickness below its top surface, over the full substrate
    width including the parts under the pads. Triangles crossing the layer
    boundary are clipped, their energy density is constant.

    Parameters
    ----------
    sol : FieldSolution
    mesh : Mesh2D
    surface_layer_thickness : float or None
        In nm, > 0. None skips the surface band, all substrate energy is
        then counted as bulk.

    Returns
    -------
    report : ParticipationReport

    Raises
    ------
    MeshResolutionError
        If no substrate triangle at the surface is as thin as the layer.

    """
    if surface_layer_thickness is not None and not (np.isfinite(surface_layer_thickness)
                                                    and surface_layer_thickness > 0):
        raise ParameterError('The surface layer thickness must be > 0 nm, got {}'.format(surface_layer_thickness))
    energy = sol.energy_density * sol.areas
    classes = np.array([region_class(tag) for tag in mesh.region_tags], dtype=object)[mesh.triangle_region]
    energies = {name: float(np.sum(energy[classes == name])) for name in PARTICIPATION_CLASSES}

    substrate = np.flatnonzero(classes == 'substrate_bulk')
    if substrate.size and mesh.substrate_top is not None and surface_layer_thickness is not None:
        layer = surface_layer_thickness * NM / UM
        top = mesh.substrate_top
        tol = 1e-9 * np.hypot(mesh.airbox[2] - mesh.airbox[0], mesh.airbox[3] - mesh.airbox[1])
        y = mesh.nodes[mesh.triangles[substrate], 1]
        at_surface = np.sum(np.abs(y - top) <= tol, axis=1) >= 2
        heights = y.max(axis=1) - y.min(axis=1)
        if not np.any(at_surface & (heights <= layer * (1 + 1e-9))):
            raise MeshResolutionError(
                'The mesh does not resolve the {} nm substrate surface layer, the thinnest surface element is '
                '{:.4g} nm high. Refine the mesh near the pads (corner_h <= {} um).'.format(
                    surface_layer_thickness, heights[at_surface].min() * 1e3 if at_surface.any() else np.nan,
                    layer / 2))

        near = substrate[y.max(axis=1) > top - layer]
        polygons = shapely.polygons(mesh.nodes[mesh.triangles[near]])
        xs = mesh.nodes[mesh.triangles[substrate], 0]
        band = shapely.box(xs.min(), top - layer, xs.max(), top)
        inside = shapely.area(shapely.intersection(polygons, band)) / shapely.area(polygons)
        surface = float(np.sum(energy[near] * np.clip(inside, 0.0, 1.0)))
        energies['substrate_surface_layer'] = surface
        energies['substrate_bulk'] = max(energies['substrate_bulk'] - surface, 0.0)

    total = sum(energies.values())
    fractions = {name: value / total for name, value in energies.items()}
    return ParticipationReport(fractions=fractions, energies=energies, capacitance=sol.capacitance,
                               total_energy=sol.total_energy, drive_voltage=sol.drive_voltage,
                               surface_layer_thickness=surface_layer_thickness)


def _triangulation(mesh):
    return mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles)


def field_maps(sol, mesh, raster, bounds=None):
    """
    Sample e_norm and energy_density on a regular grid.

    Every grid point takes the value of the triangle containing it, points
    outside of the mesh (pad cores, outside of the bounds) are NaN.

    Parameters
    ----------
    raster : tuple(int, int)
        (nx, ny), each >= 2.
    bounds : tuple or None
        (xmin, ymin, xmax, ymax) in um, the airbox if None.

    Returns
    -------
    raster : FieldRaster

    """
    nx, ny = raster
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise ParameterError('The raster must be at least 2 x 2, got {}'.format(raster))
    xmin, ymin, xmax, ymax = bounds if bounds is not None else mesh.airbox
    x = np.linspace(xmin, xmax, int(nx))
    y = np.linspace(ymin, ymax, int(ny))
    xx, yy = np.meshgrid(x, y)
    index = _triangulation(mesh).get_trifinder()(xx, yy)
    inside = index >= 0
    e_norm = np.full(index.shape, np.nan)
    energy_density = np.full(index.shape, np.nan)
    e_norm[inside] = sol.e_norm[index[inside]]
    energy_density[inside] = sol.energy_density[index[inside]]
    return FieldRaster(x=x, y=y, e_norm=e_norm, energy_density=energy_density, triangle_index=index)


def peak_field(sol, mesh):
    """ Largest e_norm in V/m and the centroid (um) of its triangle. """
    k = int(np.argmax(sol.e_norm))
    return float(sol.e_norm[k]), mesh.nodes[mesh.triangles[k]].mean(axis=0)


def potential_at(sol, mesh, x, y):
    """ Linearly interpolated potential at points in um, NaN outside of the mesh. """
    interpolator = mtri.LinearTriInterpolator(_triangulation(mesh), sol.potential)
    return np.ma.filled(interpolator(np.asarray(x, dtype=float), np.asarray(y, dtype=float)), np.nan)

#!/usr/bin/env python
# coding=utf-8
# Filename: adaptive.py

"""
Mesh-refinement passes over a cross-section, tracking the capacitance and
the qubit frequency derived from it until the frequency settles.

Per pass: mesh, solve, C (F/m) -> C_3D = C * depth -> E_C -> f_q with the
closed-form transmon frequency at fixed E_J.
"""

import math
from dataclasses import dataclass, field, replace
import numpy as np

from transmonkit.exceptions import ParameterError, TransmonkitError, PassError
from transmonkit.geometry import MaterialStack, material_map, build_geometry
from transmonkit.meshing import triangulate, refine_uniform
from transmonkit.electrostatics import assemble_and_solve, participation
from transmonkit.transmon import ec_from_capacitance, qubit_frequency
from transmonkit.utils import parallel_map

#: Element size ratio between two passes of the 'remesh' refinement.
REFINEMENT_RATIO = 1.0 / math.sqrt(2.0)
REFINEMENT_MODES = ('remesh', 'nested')
AGGREGATE_PREFIX = 'pass'


@dataclass(frozen=True)
class PassRecord:
    """
    Quantities extracted in one pass.

    Attributes
    ----------
    pass_index : int
        1-based.
    node_count, triangle_count : int
    target_h : float
        Element size away from the pads in um.
    capacitance : float
        F/m.
    ec, fq : float
        GHz.
    delta_rel : float or None
        abs(fq - fq_prev) / abs(fq_prev), None for pass 1.
    iterations : int
        Conjugate gradient iterations of the solve.
    participation : dict
        Energy fraction per region class.

    """
    pass_index: int
    node_count: int
    triangle_count: int
    target_h: float
    capacitance: float
    ec: float
    fq: float
    delta_rel: float = None
    iterations: int = 0
    participation: dict = field(default_factory=dict)

    def csv_row(self):
        return [self.pass_index, self.node_count, self.capacitance, self.ec, self.fq, self.delta_rel]


@dataclass(eq=False)
class ConvergenceReport:
    """
    All passes of one run and the settings needed to replay them.

    A failed run keeps the passes completed before the failure and the
    error message.

    """
    label: str
    passes: list
    criterion: float
    settings: dict
    error: str = None

    @property
    def converged(self):
        return bool(self.passes) and self.passes[-1].delta_rel is not None \
            and self.passes[-1].delta_rel <= self.criterion

    @property
    def passes_to_converge(self):
        return len(self.passes) if self.converged else None

    @property
    def failed(self):
        return self.error is not None

    @property
    def final_fq(self):
        return self.passes[-1].fq if self.passes else None

    def csv_rows(self):
        return [record.csv_row() for record in self.passes]

    def summary(self):
        return {'label': self.label, 'converged': self.converged, 'criterion': self.criterion,
                'passes_to_converge': self.passes_to_converge, 'final_fq_GHz': self.final_fq,
                'error': self.error, 'settings': self.settings,
                'passes': list(self.passes)}


@dataclass(frozen=True)
class QubitVariant:
    label: str
    geometry: object


CSV_HEADER = ['pass', 'node_count', 'capacitance_F_per_m', 'ec_GHz', 'fq_GHz', 'delta_rel']


def _materials_for(geom, materials):
    if isinstance(materials, MaterialStack):
        return material_map(geom, materials)
    return materials


def _mesh_for_pass(geom, settings, pass_index, previous_mesh=None):
    if settings['refinement'] == 'nested' and previous_mesh is not None:
        return refine_uniform(previous_mesh)
    target_h = settings['target_h']
    if settings['refinement'] == 'remesh':
        target_h *= REFINEMENT_RATIO ** (pass_index - 1)
    return triangulate(geom, target_h, grading=settings['grading'], min_angle=settings['min_angle'],
                       corner_h=settings['corner_h'])


def _solve_pass(materials, settings, pass_index, mesh, previous_fq=None):
    sol = assemble_and_solve(mesh, materials, drive_voltage=settings['drive_voltage'])
    c_total = sol.capacitance * settings['depth'] * 1e-6
    ec = ec_from_capacitance(c_total)
    fq = qubit_frequency(settings['ej'], ec)
    report = participation(sol, mesh, settings['surface_layer_thickness'])
    delta = None if previous_fq is None else abs(fq - previous_fq) / abs(previous_fq)
    return PassRecord(pass_index=pass_index, node_count=mesh.node_count, triangle_count=mesh.triangle_count,
                      target_h=mesh.target_h, capacitance=sol.capacitance, ec=ec, fq=fq, delta_rel=delta,
                      iterations=sol.iterations, participation=report.fractions)


def run_convergence(geom, materials, ej, depth=100.0, max_passes=6, tol=0.005, target_h=20.0, grading=4.0,
                    min_angle=20.0, corner_h=None, refinement='remesh', drive_voltage=1.0,
                    surface_layer_thickness=None, label='Q1', verbose=True):
    """
    Successive solves with finer meshes until f_q settles.

    Parameters
    ----------
    geom : Geometry2D
    materials : dict or MaterialStack
        Region tag -> material, or a stack that is mapped onto the tags.
    ej : float
        Josephson energy in GHz.
    depth : float
        Extrusion depth in um.
    max_passes : int
        >= 2.
    tol : float
        Convergence criterion on delta_rel, > 0.
    target_h, grading, min_angle, corner_h :
        Mesh parameters of pass 1.
    refinement : str
        'remesh': pass k is meshed with target_h * REFINEMENT_RATIO**(k-1).
        'nested': pass k is the uniform refinement of pass k-1, so the
        capacitance can only decrease from pass to pass.
    surface_layer_thickness : float or None
        nm, if set the participation of every pass separates the substrate
        surface band.
    label : str
        Name of the run in reports and errors.

    Returns
    -------
    report : ConvergenceReport

    Raises
    ------
    PassError
        Wraps any error of a pass together with its index.

    """
    if int(max_passes) != max_passes or max_passes < 2:
        raise ParameterError('max_passes must be an integer >= 2, got {}'.format(max_passes))
    if not (np.isfinite(tol) and tol > 0):
        raise ParameterError('tol must be > 0, got {}'.format(tol))
    if refinement not in REFINEMENT_MODES:
        raise ParameterError('refinement must be one of {}, got {!r}'.format(REFINEMENT_MODES, refinement))
    if not (np.isfinite(depth) and depth > 0):
        raise ParameterError('depth must be > 0 um, got {}'.format(depth))
    if not (np.isfinite(ej) and ej > 0):
        raise ParameterError('E_J must be > 0, got {}'.format(ej))

    settings = dict(ej=float(ej), depth=float(depth), target_h=float(target_h), grading=float(grading),
                    min_angle=float(min_angle), corner_h=corner_h, refinement=refinement,
                    drive_voltage=float(drive_voltage), surface_layer_thickness=surface_layer_thickness,
                    max_passes=int(max_passes))
    materials = _materials_for(geom, materials)
    report = ConvergenceReport(label=label, passes=[], criterion=float(tol), settings=settings)

    mesh, previous_fq = None, None
    for pass_index in range(1, int(max_passes) + 1):
        try:
            mesh = _mesh_for_pass(geom, settings, pass_index, mesh)
            record = _solve_pass(materials, settings, pass_index, mesh, previous_fq)
        except TransmonkitError as err:
            raise PassError(pass_index, err, completed=report.passes) from err
        report.passes.append(record)
        if verbose:
            print('{}: pass {}, {} nodes, C = {:.6g} F/m, f_q = {:.6g} GHz, delta = {}'.format(
                label, pass_index, record.node_count, record.capacitance, record.fq,
                '-' if record.delta_rel is None else '{:.3g}'.format(record.delta_rel)))
        if record.delta_rel is not None and record.delta_rel <= tol:
            break
        previous_fq = record.fq

    return report


def replay_pass(geom, materials, report, pass_index):
    """
    Re-solve one pass of a report from its recorded settings.

    Returns
    -------
    record : PassRecord
        Has the same values as report.passes[pass_index - 1] within the
        solver tolerance. delta_rel is recomputed against the recorded
        previous pass.

    """
    if not 1 <= pass_index <= len(report.passes):
        raise ParameterError('The report has passes 1..{}, got {}'.format(len(report.passes), pass_index))
    settings = report.settings
    materials = _materials_for(geom, materials)
    try:
        if settings['refinement'] == 'nested':
            mesh = _mesh_for_pass(geom, settings, 1)
            for _ in range(pass_index - 1):
                mesh = refine_uniform(mesh)
        else:
            mesh = _mesh_for_pass(geom, settings, pass_index)
        previous_fq = report.passes[pass_index - 2].fq if pass_index > 1 else None
        return _solve_pass(materials, settings, pass_index, mesh, previous_fq)
    except TransmonkitError as err:
        raise PassError(pass_index, err) from err


def perturbed_pad_variants(layout, count, spread, metal=None, prefix='Q'):
    """
    A family of qubit cross-sections with pad widths spread evenly over
    pad_width * (1 +- spread).

    Parameters
    ----------
    layout : PadLayout
        The nominal layout.
    count : int
        >= 1, a single variant is the nominal layout.
    spread : float
        Relative spread in [0, 0.5].
    metal : MaterialSpec or None
        Passed on to build_geometry.

    Returns
    -------
    variants : list of QubitVariant

    """
    if int(count) != count or count < 1:
        raise ParameterError('count must be an integer >= 1, got {}'.format(count))
    if not 0 <= spread <= 0.5:
        raise ParameterError('spread must be in [0, 0.5], got {}'.format(spread))
    offsets = np.linspace(-spread, spread, int(count)) if count > 1 else np.zeros(1)
    return [QubitVariant('{}{}'.format(prefix, i + 1),
                         build_geometry(replace(layout, pad_width=layout.pad_width * (1 + s)), metal))
            for i, s in enumerate(offsets)]


def multi_qubit_convergence(variants, materials, ej, n_workers=None, **kwargs):
    """
    Independent convergence runs for a list of qubit variants.

    A failing variant does not stop the others, its report carries the
    error and the passes completed before it.

    Parameters
    ----------
    variants : list of QubitVariant
        At least one.
    materials : dict or MaterialStack
    ej : float
    n_workers : int or None
        Worker threads, capped by TRANSMONKIT_MAX_WORKERS.
    kwargs
        Passed on to run_convergence.

    Returns
    -------
    reports : list of ConvergenceReport
        In the order of variants.

    """
    variants = list(variants)
    if not variants:
        raise ParameterError('At least one qubit variant is required')
    labels = [variant.label for variant in variants]
    if len(set(labels)) != len(labels):
        raise ParameterError('Variant labels must be unique, got {}'.format(labels))

    def run(variant):
        try:
            return run_convergence(variant.geometry, materials, ej, label=variant.label, **kwargs)
        except TransmonkitError as err:
            if isinstance(err, PassError):
                print('{}: failed in pass {}: {}'.format(variant.label, err.pass_index, err.cause))
            else:
                print('{}: failed: {}'.format(variant.label, err))
            return ConvergenceReport(label=variant.label, passes=list(getattr(err, 'completed', [])),
                                     criterion=float(kwargs.get('tol', 0.005)), settings=dict(kwargs, ej=ej),
                                     error=str(err))

    return parallel_map(run, variants, n_workers)


def aggregate_rows(reports):
    """
    Header and rows of the wide table with one f_q column per qubit.

    Failed qubits are left out. Runs that stopped early have empty fields
    in later passes.

    """
    reports = [report for report in reports if not report.failed]
    header = [AGGREGATE_PREFIX] + ['{}_fq_GHz'.format(report.label) for report in reports]
    n_passes = max((len(report.passes) for report in reports), default=0)
    rows = []
    for k in range(n_passes):
        rows.append([k + 1] + [report.passes[k].fq if k < len(report.passes) else None for report in reports])
    return header, rows

#!/usr/bin/env python
# coding=utf-8
# Filename: make_reports.py
"""
Main transmonkit code which takes a run config and writes the tables, figures
and metadata of one of the four report types:

spectrum  normalized transmon bands over the offset charge
chip      dispersion, anharmonicity and coupling sweeps of chip presets
fem       electrostatics and participation ratios of a two-pad cross-section
converge  mesh convergence of the qubit frequency for a family of qubits

Usage:
    transmonkit (spectrum | chip | fem | converge) --config=CONFIGFILE [--out=OUTDIR] [--format=FORMAT]
    transmonkit presets list
    transmonkit (-h | --help)
    transmonkit --version

Options:
    -h --help             Show this screen.
    --version             Show the version.
    --config=CONFIGFILE   A .toml or .json file that contains the configuration options of the run.
                          All options and their defaults are documented in transmonkit/default_config.toml.
    --out=OUTDIR          Output directory, overrides output_dirpath of the config.
    --format=FORMAT       csv, svg or both, overrides format of the config.

Exit codes:
    0  success
    1  invalid input (config, parameters, geometry, solver setup, mesh resolution)
    2  numerical failure, or every qubit of a converge run failed
    3  some qubits of a chip or converge run failed, the others were reported

"""

import os
import sys
from dataclasses import dataclass, field, asdict
from docopt import docopt

from transmonkit.__version__ import version
from transmonkit.exceptions import (ParameterError, GeometryError, ConfigError, SolverSetupError,
                                    MeshResolutionError, NumericalError, MeshingError, PassError,
                                    TransmonkitError)
from transmonkit.io import (COMMANDS, check_user_input, load_config, make_output_dirs, write_csv, write_json,
                            build_metadata, atomic_open)
from transmonkit.transmon import normalized_bands, RESIDUAL_TOL, DEGENERACY_TOL, NEAR_RESONANCE_GHZ
from transmonkit.geometry import (PadLayout, MATERIAL_STACKS, build_geometry, material_map,
                                  resolve_material_stack, PROVENANCE as MATERIAL_PROVENANCE)
from transmonkit.meshing import triangulate
from transmonkit.electrostatics import (assemble_and_solve, participation, field_maps, peak_field,
                                        gauss_law_capacitance, SOLVER_RTOL)
from transmonkit.adaptive import (CSV_HEADER as CONVERGENCE_HEADER, REFINEMENT_RATIO, aggregate_rows,
                                  multi_qubit_convergence, perturbed_pad_variants)
from transmonkit.chipsets import (LONG_CSV_HEADER, PROVENANCE as CHIP_PROVENANCE, builtin_preset_map,
                                  dispersion_statistics, fit_anharmonicity, load_chip_presets,
                                  run_anharmonicity_sweep, run_coupling_sweep, run_dispersion_sweep)
from transmonkit import plotting

VALIDATION_ERRORS = (ParameterError, GeometryError, ConfigError, SolverSetupError, MeshResolutionError)
NUMERICAL_ERRORS = (NumericalError, MeshingError, PassError)


@dataclass
class CommandOutcome:
    """ Files written by a command, and the qubits that failed. """
    files: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    total: int = 0


def _wants(config, kind):
    return config['format'] in (kind, 'both')


def _prepare(config, command):
    # validate everything before the output directory exists
    resolved = check_user_input(config, command)
    return resolved, make_output_dirs(resolved['output_dirpath'], command)


class _Stage:
    """ Attaches the name of the running stage to errors passing through. """
    def __init__(self):
        self.name = None

    def __call__(self, name):
        self.name = name
        print('Stage: ' + name)
        return self

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, TransmonkitError) and not hasattr(exc, 'stage'):
            exc.stage = self.name
        return False


def cmd_spectrum(config):
    """
    Normalized bands for every ratio of the spectrum block.

    Writes bands_ratio_<r>.csv (ng, band0, band1, ...) and .svg per ratio and
    metadata.json.

    """
    config, outdir = _prepare(config, 'spectrum')
    block = config['spectrum']
    outcome = CommandOutcome()
    cutoffs = {}
    for ratio in block['ratios']:
        bands = normalized_bands(ratio, block['ec'], block['ng_samples'], block['levels'], block['cutoff'])
        cutoffs['{:g}'.format(ratio)] = bands.cutoff
        stem = os.path.join(outdir, 'bands_ratio_{:g}'.format(ratio))
        if _wants(config, 'csv'):
            header = ['ng'] + ['band{}'.format(m) for m in range(bands.levels)]
            rows = [[ng] + list(bands.bands[:, k]) for k, ng in enumerate(bands.ng_grid)]
            write_csv(stem + '.csv', header, rows)
            outcome.files.append(stem + '.csv')
        if _wants(config, 'svg'):
            plotting.plot_bands(bands, stem + '.svg')
            outcome.files.append(stem + '.svg')
        print('Spectrum: E_J/E_C = {:g} done, cutoff N = {}'.format(ratio, bands.cutoff))

    metadata = build_metadata('spectrum', config, tolerances={'residual': RESIDUAL_TOL,
                                                              'degeneracy': DEGENERACY_TOL,
                                                              'cutoff_per_ratio': cutoffs})
    write_json(os.path.join(outdir, 'metadata.json'), metadata)
    outcome.files.append(os.path.join(outdir, 'metadata.json'))
    return outcome


def _resolve_chips(block):
    available = builtin_preset_map()
    if block['preset_file'] is not None:
        available.update(load_chip_presets(block['preset_file']))
    missing = [name for name in block['presets'] if name not in available]
    if missing:
        raise ConfigError('chip.presets', 'Unknown chip preset(s) {}, available: {}'.format(
            ', '.join(missing), ', '.join(sorted(available))))
    return [available[name] for name in block['presets']]


def cmd_chip(config):
    """
    The three sweeps for every chip of the chip block.

    Writes <chip>_sweeps.csv in long format, <chip>_dispersion.svg,
    <chip>_anharmonicity.svg, <chip>_coupling.svg and <chip>_metadata.json.
    Qubits that fail are left out and listed in the metadata.

    """
    config = check_user_input(config, 'chip')
    block = config['chip']
    chips = _resolve_chips(block)
    outdir = make_output_dirs(config['output_dirpath'], 'chip')
    outcome = CommandOutcome()
    for chip in chips:
        print('Chip {}: {} qubits'.format(chip.name, len(chip.qubits)))
        dispersion = run_dispersion_sweep(chip, block['ratio_grid'], block['cutoff'], skip_failures=True)
        anharm = run_anharmonicity_sweep(chip, block['ec_grid'], block['cutoff'], skip_failures=True)
        coupling = run_coupling_sweep(chip, block['coupling_ratio_grid'], block['cutoff'], skip_failures=True)
        sweeps = (dispersion, anharm, coupling)
        failed = sorted(set().union(*(sweep.failures for sweep in sweeps)))
        outcome.failed.extend('{}/{}'.format(chip.name, label) for label in failed)
        outcome.total += len(chip.qubits)

        fit = fit_anharmonicity(anharm) if anharm.series and len(block['ec_grid']) > 1 else None
        stem = os.path.join(outdir, chip.name)
        if _wants(config, 'csv'):
            write_csv(stem + '_sweeps.csv', LONG_CSV_HEADER, [row for sweep in sweeps for row in sweep.rows()])
            outcome.files.append(stem + '_sweeps.csv')
        if _wants(config, 'svg'):
            plotting.plot_dispersion(dispersion, stem + '_dispersion.svg')
            plotting.plot_coupling(coupling, stem + '_coupling.svg')
            outcome.files.extend([stem + '_dispersion.svg', stem + '_coupling.svg'])
            if fit is not None:
                plotting.plot_anharmonicity(anharm, fit, stem + '_anharmonicity.svg')
                outcome.files.append(stem + '_anharmonicity.svg')

        try:
            statistics = dispersion_statistics(chip, block['cutoff'])
        except (ParameterError, NumericalError) as err:
            statistics = {'error': str(err)}
        metadata = build_metadata(
            'chip', config, tolerances={'residual': RESIDUAL_TOL, 'degeneracy': DEGENERACY_TOL,
                                        'near_resonance_GHz': NEAR_RESONANCE_GHZ,
                                        'cutoffs': {sweep.kind: sweep.metadata['cutoffs'] for sweep in sweeps}},
            provenance=[CHIP_PROVENANCE], chip={'name': chip.name, 'description': chip.description,
                                                'qubits': [asdict(qubit) for qubit in chip.qubits]},
            dispersion_statistics=statistics, anharmonicity_fit=fit,
            failures={sweep.kind: sweep.failures for sweep in sweeps})
        write_json(stem + '_metadata.json', metadata)
        outcome.files.append(stem + '_metadata.json')
    return outcome


def _stack_and_layout(block):
    stack = resolve_material_stack(block['material_preset'], block['materials'])
    return stack, PadLayout(**block['geometry'])


def cmd_fem(config):
    """
    Solve one cross-section and report fields and participation ratios.

    Writes fem_raster.csv (x, y, e_norm, energy_density), fem_e_norm.svg,
    fem_energy_density.svg, participation.json, mesh.txt,
    field_solution.h5 and metadata.json.

    """
    config, outdir = _prepare(config, 'fem')
    block = config['fem']
    mesh_block = block['mesh']
    layer_nm = block['surface_layer_thickness_nm']
    outcome = CommandOutcome()
    stage = _Stage()

    with stage('geometry'):
        stack, layout = _stack_and_layout(block)
        geom = build_geometry(layout, stack.metal)
    with stage('mesh'):
        corner_h = mesh_block['corner_h'] if mesh_block['corner_h'] is not None else layer_nm * 1e-3 / 2
        mesh = triangulate(geom, mesh_block['target_h'], mesh_block['grading'], mesh_block['min_angle'], corner_h)
        print('Mesh: {} nodes, {} triangles'.format(mesh.node_count, mesh.triangle_count))
    with stage('solve'):
        sol = assemble_and_solve(mesh, material_map(geom, stack), block['drive_voltage'])
        print('Solve: {} iterations, C = {:.6g} F/m'.format(sol.iterations, sol.capacitance))
    with stage('participation'):
        report = participation(sol, mesh, layer_nm)
        raster = field_maps(sol, mesh, block['raster'], block['raster_bounds'])
        peak, location = peak_field(sol, mesh)

    path = os.path.join(outdir, 'fem_raster.csv')
    if _wants(config, 'csv'):
        write_csv(path, ['x', 'y', 'e_norm', 'energy_density'], raster.rows())
        outcome.files.append(path)
    if _wants(config, 'svg'):
        for quantity in ('e_norm', 'energy_density'):
            path = os.path.join(outdir, 'fem_{}.svg'.format(quantity))
            plotting.plot_field_map(raster, quantity, path, title='{}, {} V'.format(stack.name, block['drive_voltage']))
            outcome.files.append(path)

    summary = report.as_dict()
    summary.update(material_preset=stack.name, lossy_dielectric=report.lossy_dielectric,
                   peak_e_norm_V_per_m=peak, peak_location_um=location,
                   gauss_law_capacitance_F_per_m=gauss_law_capacitance(sol, mesh),
                   materials={'metal': asdict(stack.metal), 'substrate': asdict(stack.substrate)},
                   provenance=MATERIAL_PROVENANCE)
    path = os.path.join(outdir, 'participation.json')
    write_json(path, summary)
    outcome.files.append(path)

    path = os.path.join(outdir, 'mesh.txt')
    mesh.write_txt(path)
    outcome.files.append(path)
    path = os.path.join(outdir, 'field_solution.h5')
    with atomic_open(path, 'w+b') as fobj:
        sol.save_h5(fobj, mesh)
    outcome.files.append(path)

    metadata = build_metadata('fem', config, tolerances={'cg_relative_residual': SOLVER_RTOL,
                                                         'corner_h_um': corner_h,
                                                         'cg_iterations': sol.iterations},
                              provenance=[MATERIAL_PROVENANCE], geometry=geom.description, mesh=mesh.quality())
    write_json(os.path.join(outdir, 'metadata.json'), metadata)
    outcome.files.append(os.path.join(outdir, 'metadata.json'))
    return outcome


def cmd_converge(config):
    """
    Convergence runs for a family of qubit variants.

    Writes convergence_<label>.csv per qubit, convergence_aggregate.csv with
    one f_q column per successful qubit, convergence.svg and metadata.json.

    """
    config, outdir = _prepare(config, 'converge')
    block = config['converge']
    mesh_block = block['mesh']
    outcome = CommandOutcome()

    stack, layout = _stack_and_layout(block)
    variants = perturbed_pad_variants(layout, block['n_variants'], block['pad_width_spread'], stack.metal)
    reports = multi_qubit_convergence(
        variants, stack, block['ej'], depth=block['depth_um'], max_passes=block['max_passes'], tol=block['tol'],
        target_h=mesh_block['target_h'], grading=mesh_block['grading'], min_angle=mesh_block['min_angle'],
        corner_h=mesh_block['corner_h'], refinement=block['refinement'], drive_voltage=block['drive_voltage'],
        surface_layer_thickness=block['surface_layer_thickness_nm'])
    outcome.total = len(reports)
    outcome.failed = [report.label for report in reports if report.failed]

    if _wants(config, 'csv'):
        for report in reports:
            if report.passes:
                path = os.path.join(outdir, 'convergence_{}.csv'.format(report.label))
                write_csv(path, CONVERGENCE_HEADER, report.csv_rows())
                outcome.files.append(path)
        path = os.path.join(outdir, 'convergence_aggregate.csv')
        write_csv(path, *aggregate_rows(reports))
        outcome.files.append(path)
    if _wants(config, 'svg'):
        path = os.path.join(outdir, 'convergence.svg')
        plotting.plot_convergence(reports, path)
        outcome.files.append(path)

    metadata = build_metadata('converge', config, tolerances={'cg_relative_residual': SOLVER_RTOL,
                                                              'criterion': block['tol'],
                                                              'refinement_ratio': REFINEMENT_RATIO},
                              provenance=[MATERIAL_PROVENANCE,
                                          'f_q = sqrt(8 E_J E_C) - E_C with E_C from the capacitance per unit '
                                          'depth times depth_um, a 2D electrostatic stand-in for eigenmode passes'],
                              qubits=[report.summary() for report in reports])
    write_json(os.path.join(outdir, 'metadata.json'), metadata)
    outcome.files.append(os.path.join(outdir, 'metadata.json'))
    return outcome


def cmd_presets_list():
    """ Print the builtin chip presets and material stacks. """
    for chip in builtin_preset_map().values():
        statistics = dispersion_statistics(chip)
        print('{}: {}'.format(chip.name, chip.description))
        for qubit in chip.qubits:
            print('    {:4s} E_J = {:8.4f} GHz  E_C = {:6.4f} GHz  E_J/E_C = {:7.3f}  f_r = {:g} GHz  g0 = {:g} GHz  '
                  'dispersion = {:8.3f} MHz'.format(qubit.label, qubit.ej, qubit.ec, qubit.ratio,
                                                    qubit.resonator_freq, qubit.g0,
                                                    statistics['dispersion_MHz'][qubit.label]))
        print('    coefficient of variation of the dispersion: {:.4f}'.format(statistics['cv']))
    print('Material stacks:')
    for name in MATERIAL_STACKS:
        stack = resolve_material_stack(name)
        print('    {:15s} metal {} (oxide {:g} nm, eps_r {:g}, lambda_L {:g} nm), substrate {} (eps_r {:g})'.format(
            name, stack.metal.name, stack.metal.oxide_thickness * 1e3, stack.metal.oxide_permittivity,
            stack.metal.london_penetration_depth, stack.substrate.name, stack.substrate.relative_permittivity))


COMMAND_FUNCS = {'spectrum': cmd_spectrum, 'chip': cmd_chip, 'fem': cmd_fem, 'converge': cmd_converge}


def exit_code(command, outcome):
    """ 0 if nothing failed, 2 if every qubit of a converge run failed, 3 for partial failures. """
    if not outcome.failed:
        return 0
    if command == 'converge' and len(outcome.failed) == outcome.total:
        return 2
    return 3


def _report_error(err):
    stage = getattr(err, 'stage', None)
    prefix = 'Error in stage {}: '.format(stage) if stage else 'Error: '
    print(prefix + '{}: {}'.format(type(err).__name__, err), file=sys.stderr)


def main(argv=None):
    """
    Parses the command line and runs a command.

    Returns
    -------
    exit_code : int

    """
    args = docopt(__doc__, argv=argv, version='transmonkit ' + version)
    try:
        if args['presets']:
            cmd_presets_list()
            return 0
        command = next(name for name in COMMANDS if args[name])
        config = load_config(args['--config'])
        if args['--out'] is not None:
            config['output_dirpath'] = args['--out']
        if args['--format'] is not None:
            config['format'] = args['--format']
        outcome = COMMAND_FUNCS[command](config)
    except VALIDATION_ERRORS as err:
        _report_error(err)
        return 1
    except NUMERICAL_ERRORS as err:
        _report_error(err)
        return 2

    for path in outcome.files:
        print('Wrote ' + path)
    if outcome.failed:
        print('Failed qubits: ' + ', '.join(outcome.failed), file=sys.stderr)
    return exit_code(command, outcome)


if __name__ == '__main__':
    sys.exit(main())

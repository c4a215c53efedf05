#!/usr/bin/env python
# coding=utf-8
# Filename: chipsets.py

"""
Qubit parameter sets of multi-qubit chips and the sweeps run over them.

The builtin chips are synthesized: the E_J/E_C ratio of every chip is
chosen by root finding so that the nominal qubit has a given ground
transition dispersion, and the individual qubits are spread around it.

"""

import json
import functools
from dataclasses import dataclass, field, asdict
import numpy as np
import scipy.optimize

from transmonkit.exceptions import ParameterError, NumericalError, ConfigError
from transmonkit.transmon import (charge_dispersion, anharmonicity, coupling_curve, default_cutoff,
                                  RESIDUAL_TOL, DEGENERACY_TOL, NEAR_RESONANCE_GHZ)
from transmonkit.utils import check_grid, parallel_map
from transmonkit.io import atomic_open

MIN_RATIO = 10.0
RATIO_BRACKET = (10.0, 200.0)
PRESET_SCHEMA_VERSION = 1

#: Nominal values of the builtin chips. spread is the relative parameter
#: spread of the qubits around the nominal one.
BUILTIN_CHIPS = {
    'chip4': dict(n_qubits=4, ec=0.6, dispersion_mhz=60.0, spread=0.05, resonator_freq=5.0, g0=0.05),
    'chip8': dict(n_qubits=8, ec=0.5, dispersion_mhz=6.0, spread=0.01, resonator_freq=6.0, g0=0.05),
}
PROVENANCE = ('Qubit parameters of the builtin chips are synthesized: the E_J/E_C ratio is found by root '
              'finding on the charge dispersion, the qubits are spread around it. No measured device data.')


@dataclass(frozen=True)
class QubitPreset:
    """
    Parameters of one qubit and its readout resonator, energies in GHz.
    """
    label: str
    ej: float
    ec: float
    resonator_freq: float
    g0: float

    def __post_init__(self):
        for name in ('ej', 'ec', 'resonator_freq'):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError('Qubit {}: {} must be > 0, got {}'.format(self.label, name, value))
        if not (np.isfinite(self.g0) and self.g0 >= 0):
            raise ParameterError('Qubit {}: g0 must be >= 0, got {}'.format(self.label, self.g0))
        if self.ratio < MIN_RATIO * (1 - 1e-12):
            raise ParameterError('Qubit {}: E_J/E_C = {:.4g} is outside of the transmon regime (>= {})'.format(
                self.label, self.ratio, MIN_RATIO))

    @property
    def ratio(self):
        return self.ej / self.ec


@dataclass(frozen=True)
class ChipPreset:
    name: str
    qubits: tuple
    description: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'qubits', tuple(self.qubits))
        if not self.qubits:
            raise ParameterError('Chip {} has no qubits'.format(self.name))
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise ParameterError('Qubit labels of chip {} must be unique, got {}'.format(self.name, labels))
        expected = BUILTIN_CHIPS.get(self.name, {}).get('n_qubits')
        if expected is not None and len(self.qubits) != expected:
            raise ParameterError('Chip {} must have {} qubits, got {}'.format(self.name, expected, len(self.qubits)))

    @property
    def labels(self):
        return [qubit.label for qubit in self.qubits]


@dataclass(frozen=True, eq=False)
class Series:
    """
    One curve of a sweep. y is NaN at flagged points, their note says why.
    """
    qubit: str
    x_name: str
    y_name: str
    x: np.ndarray
    y: np.ndarray
    notes: tuple = ()

    def note(self, k):
        return self.notes[k] if self.notes else ''


@dataclass(eq=False)
class SweepResult:
    """
    All series of one sweep over a chip.

    Attributes
    ----------
    chip : str
    kind : str
        'dispersion', 'anharmonicity' or 'coupling'.
    series : list of Series
        Ordered by qubit label as in the chip, then by y_name.
    failures : dict
        Qubit label -> error message of qubits that were skipped.
    metadata : dict
        Cutoffs and tolerances used, provenance.

    """
    chip: str
    kind: str
    series: list
    failures: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def get(self, qubit, y_name=None):
        for series in self.series:
            if series.qubit == qubit and (y_name is None or series.y_name == y_name):
                return series
        raise KeyError((qubit, y_name))

    def rows(self):
        """ Long-format rows (chip, qubit, x_name, x_value, y_name, y_value, note). """
        rows = []
        for series in self.series:
            for k, (x, y) in enumerate(zip(series.x, series.y)):
                rows.append([self.chip, series.qubit, series.x_name, float(x), series.y_name,
                             None if np.isnan(y) else float(y), series.note(k)])
        return rows


LONG_CSV_HEADER = ['chip', 'qubit', 'x_name', 'x_value', 'y_name', 'y_value', 'note']


def bisect_ratio_for_dispersion(target_mhz, ec, bracket=RATIO_BRACKET, cutoff=None):
    """
    The E_J/E_C ratio at which the 0-1 charge dispersion equals a target.

    Parameters
    ----------
    target_mhz : float
        Charge dispersion in MHz.
    ec : float
        Charging energy in GHz.
    bracket : tuple(float, float)
        Ratio interval to search.

    Raises
    ------
    ParameterError
        If the target is not reached inside of the bracket.

    """
    if not (np.isfinite(target_mhz) and target_mhz > 0):
        raise ParameterError('The target dispersion must be > 0 MHz, got {}'.format(target_mhz))

    def log_mismatch(ratio):
        # deep in the transmon regime the dispersion drops to round-off level
        dispersion = charge_dispersion(ratio * ec, ec, (0, 1), cutoff) * 1e3
        return np.log(max(dispersion, np.finfo(float).tiny)) - np.log(target_mhz)

    low, high = log_mismatch(bracket[0]), log_mismatch(bracket[1])
    if low * high > 0:
        raise ParameterError('A dispersion of {} MHz at E_C = {} GHz is outside of the ratio range {}'.format(
            target_mhz, ec, bracket))
    return float(scipy.optimize.brentq(log_mismatch, bracket[0], bracket[1], xtol=1e-12, rtol=1e-12))


def spread_qubits(name, n_qubits, ec, ratio, spread, resonator_freq, g0):
    """
    Qubits with E_C scaled by (1 + s) and E_J by (1 - s), s evenly spaced on [-spread, spread].
    """
    ej = ratio * ec
    offsets = np.linspace(-spread, spread, n_qubits) if n_qubits > 1 else np.zeros(1)
    qubits = [QubitPreset('Q{}'.format(i + 1), ej=float(ej * (1 - s)), ec=float(ec * (1 + s)),
                          resonator_freq=resonator_freq, g0=g0) for i, s in enumerate(offsets)]
    return ChipPreset(name=name, qubits=qubits,
                      description='E_J/E_C = {:.6g} at E_C = {} GHz, parameters spread by +-{:g}%'.format(
                          ratio, ec, spread * 100))


@functools.lru_cache(maxsize=None)
def builtin_presets():
    """
    The builtin chips.

    Returns
    -------
    chip4, chip8 : ChipPreset
        chip4 has a wide spread of dispersions within 20-160 MHz, chip8 has
        tightly clustered dispersions within 2-12 MHz.

    """
    chips = []
    for name, nominal in BUILTIN_CHIPS.items():
        ratio = bisect_ratio_for_dispersion(nominal['dispersion_mhz'], nominal['ec'])
        chips.append(spread_qubits(name, nominal['n_qubits'], nominal['ec'], ratio, nominal['spread'],
                                   nominal['resonator_freq'], nominal['g0']))
    return tuple(chips)


def builtin_preset_map():
    return {chip.name: chip for chip in builtin_presets()}


def _labelled(label, func):
    """ Run func, prefixing errors with the qubit label. """
    try:
        return func()
    except NumericalError as err:
        raise NumericalError('Qubit {}: {}'.format(label, err), dict(err.diagnostics, qubit=label)) from err
    except ParameterError as err:
        raise ParameterError('Qubit {}: {}'.format(label, err)) from err


def _sweep(chip, kind, per_qubit, skip_failures, n_workers, metadata):
    def run(qubit):
        try:
            return _labelled(qubit.label, lambda: per_qubit(qubit)), None
        except (NumericalError, ParameterError) as err:
            if not skip_failures:
                raise
            return [], str(err)

    outcomes = parallel_map(run, chip.qubits, n_workers)
    series, failures = [], {}
    for qubit, (qubit_series, error) in zip(chip.qubits, outcomes):
        if error is not None:
            failures[qubit.label] = error
            print('Chip {}: {} sweep skipped qubit {}: {}'.format(chip.name, kind, qubit.label, error))
        series.extend(qubit_series)
    metadata = dict(metadata, preset=chip.name, tolerances={'residual': RESIDUAL_TOL, 'degeneracy': DEGENERACY_TOL,
                                                             'near_resonance_GHz': NEAR_RESONANCE_GHZ})
    return SweepResult(chip=chip.name, kind=kind, series=series, failures=failures, metadata=metadata)


def _cutoffs_used(cutoff, pairs):
    if cutoff is not None:
        return [int(cutoff)]
    return sorted({default_cutoff(ej, ec) for ej, ec in pairs})


def run_dispersion_sweep(chip, ratio_grid, cutoff=None, skip_failures=False, n_workers=None):
    """
    0-1 charge dispersion in MHz over E_J/E_C at the preset E_C of every qubit.

    Parameters
    ----------
    chip : ChipPreset
    ratio_grid : sequence of float
        Strictly ascending, all >= 1.
    cutoff : int or None
    skip_failures : bool
        If True, qubits that fail are recorded in SweepResult.failures
        instead of raising.
    n_workers : int or None

    Returns
    -------
    result : SweepResult

    """
    ratios = check_grid(ratio_grid, 'ratio grid', minimum=1.0, allow_equal=True)

    def per_qubit(qubit):
        values = [charge_dispersion(r * qubit.ec, qubit.ec, (0, 1), cutoff) * 1e3 for r in ratios]
        return [Series(qubit.label, 'ej_over_ec', 'dispersion01_MHz', ratios.copy(), np.array(values))]

    cutoffs = _cutoffs_used(cutoff, [(r * q.ec, q.ec) for q in chip.qubits for r in ratios])
    return _sweep(chip, 'dispersion', per_qubit, skip_failures, n_workers, {'cutoffs': cutoffs})


def run_anharmonicity_sweep(chip, ec_grid, cutoff=None, skip_failures=False, n_workers=None):
    """ Anharmonicity in GHz over E_C at the preset E_J/E_C of every qubit. """
    ecs = check_grid(ec_grid, 'E_C grid', minimum=0.0)

    def per_qubit(qubit):
        values = [anharmonicity(qubit.ratio * ec, ec, cutoff) for ec in ecs]
        return [Series(qubit.label, 'ec_GHz', 'anharmonicity_GHz', ecs.copy(), np.array(values))]

    cutoffs = _cutoffs_used(cutoff, [(q.ratio * ec, ec) for q in chip.qubits for ec in ecs])
    return _sweep(chip, 'anharmonicity', per_qubit, skip_failures, n_workers, {'cutoffs': cutoffs})


def run_coupling_sweep(chip, ratio_grid, cutoff=None, skip_failures=False, n_workers=None):
    """
    Bare coupling and dispersive shift over E_J/E_C at the preset E_J of every qubit.

    Every qubit gets a 'g_bare_GHz' and a 'chi_GHz' series. chi is NaN with
    a note where the qubit is near resonance with the resonator.

    """
    ratios = check_grid(ratio_grid, 'ratio grid', minimum=1.0, allow_equal=True)

    def per_qubit(qubit):
        curve = coupling_curve(qubit.ej, qubit.ej / ratios, qubit.resonator_freq, qubit.g0, cutoff)
        return [Series(qubit.label, 'ej_over_ec', 'g_bare_GHz', curve.ratio, curve.g_bare),
                Series(qubit.label, 'ej_over_ec', 'chi_GHz', curve.ratio, curve.chi, tuple(curve.notes))]

    cutoffs = _cutoffs_used(cutoff, [(q.ej, q.ej / r) for q in chip.qubits for r in ratios])
    return _sweep(chip, 'coupling', per_qubit, skip_failures, n_workers, {'cutoffs': cutoffs})


def dispersion_statistics(chip, cutoff=None):
    """
    0-1 charge dispersion of every qubit at its preset parameters.

    Returns
    -------
    stats : dict
        'dispersion_MHz' (label -> value), 'mean_MHz', 'min_MHz', 'max_MHz'
        and 'cv', the coefficient of variation std / mean.

    """
    values = {q.label: charge_dispersion(q.ej, q.ec, (0, 1), cutoff) * 1e3 for q in chip.qubits}
    array = np.array(list(values.values()))
    return {'dispersion_MHz': values, 'mean_MHz': float(array.mean()), 'min_MHz': float(array.min()),
            'max_MHz': float(array.max()), 'cv': float(array.std() / array.mean())}


def fit_anharmonicity(result):
    """
    Straight-line fits of an anharmonicity sweep.

    Returns
    -------
    fit : dict
        'slope' and 'intercept' per qubit label, the pooled fit over all
        qubits ('pooled_slope', 'pooled_intercept') and 'scatter', the rms
        residual of all points around the pooled fit.

    """
    if result.kind != 'anharmonicity':
        raise ParameterError('Expected an anharmonicity sweep, got {}'.format(result.kind))
    slopes, intercepts = {}, {}
    for series in result.series:
        if len(series.x) < 2:
            raise ParameterError('A line fit needs at least 2 points, qubit {} has {}'.format(
                series.qubit, len(series.x)))
        slopes[series.qubit], intercepts[series.qubit] = (float(v) for v in np.polyfit(series.x, series.y, 1))
    x = np.concatenate([series.x for series in result.series])
    y = np.concatenate([series.y for series in result.series])
    pooled_slope, pooled_intercept = np.polyfit(x, y, 1)
    residuals = y - (pooled_slope * x + pooled_intercept)
    return {'slope': slopes, 'intercept': intercepts, 'pooled_slope': float(pooled_slope),
            'pooled_intercept': float(pooled_intercept), 'scatter': float(np.sqrt(np.mean(residuals ** 2)))}


def dump_chip_presets(chips, path):
    """ Write chips to a JSON preset file. """
    document = {'schema_version': PRESET_SCHEMA_VERSION,
                'chips': [{'name': chip.name, 'description': chip.description,
                           'qubits': [asdict(qubit) for qubit in chip.qubits]} for chip in chips]}
    with atomic_open(path) as fobj:
        json.dump(document, fobj, indent=2)
        fobj.write('\n')


def load_chip_presets(path):
    """
    Read chips from a JSON preset file.

    Returns
    -------
    chips : dict
        Chip name -> ChipPreset.

    """
    try:
        with open(path) as fobj:
            document = json.load(fobj)
    except (OSError, ValueError) as err:
        raise ConfigError('chip.preset_file', 'Could not read {}: {}'.format(path, err))
    if not isinstance(document, dict) or document.get('schema_version') != PRESET_SCHEMA_VERSION:
        raise ConfigError('chip.preset_file', 'Expected a preset document with schema_version {}'.format(
            PRESET_SCHEMA_VERSION))
    chips = {}
    for i, entry in enumerate(document.get('chips', [])):
        try:
            qubits = [QubitPreset(**qubit) for qubit in entry['qubits']]
            chip = ChipPreset(name=entry['name'], qubits=qubits, description=entry.get('description', ''))
        except (KeyError, TypeError) as err:
            raise ConfigError('chip.preset_file', 'Chip {} is malformed: {}'.format(i, err))
        except ParameterError as err:
            raise ConfigError('chip.preset_file', str(err))
        if chip.name in chips:
            raise ConfigError('chip.preset_file', 'Chip {} is defined twice'.format(chip.name))
        chips[chip.name] = chip
    return chips

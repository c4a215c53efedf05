#!/usr/bin/env python
# coding=utf-8
# Filename: io.py

"""
IO Code for transmonkit: run configs, output directories and atomic file writers.
"""

import os
import csv
import json
import math
import numbers
import tempfile
import contextlib
import datetime
import dataclasses
import toml
import numpy as np

from transmonkit.__version__ import version
from transmonkit.exceptions import ConfigError, ParameterError
from transmonkit.geometry import MATERIAL_STACKS, resolve_material_stack

SCHEMA_VERSION = 1
COMMANDS = ('spectrum', 'chip', 'fem', 'converge')
FORMATS = ('csv', 'svg', 'both')
DEFAULT_CONFIG_FILEPATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'default_config.toml')


@contextlib.contextmanager
def atomic_open(path, mode='w'):
    """
    Open a temporary file next to path, and move it to path on success.

    Nothing is left behind if the body raises.

    """
    path = os.fspath(path)
    dirpath = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(prefix='.' + os.path.basename(path) + '.', suffix='.tmp', dir=dirpath)
    try:
        kwargs = {} if 'b' in mode else {'encoding': 'utf-8', 'newline': ''}
        with os.fdopen(fd, mode, **kwargs) as fobj:
            yield fobj
        os.replace(tmp_path, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.remove(tmp_path)
        raise


def format_value(value):
    """ CSV field of a value: repr for floats, empty for None and NaN. """
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        value = float(value)
        return '' if math.isnan(value) else repr(value)
    return str(value)


def write_csv(path, header, rows):
    """ Write a header and rows of values to a CSV file. """
    with atomic_open(path) as fobj:
        writer = csv.writer(fobj, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])


def to_jsonable(obj):
    """ Convert numpy types, tuples and dataclasses to plain JSON values, NaN and inf to None. """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, numbers.Integral):
        return int(obj)
    if isinstance(obj, numbers.Real):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def write_json(path, obj):
    with atomic_open(path) as fobj:
        json.dump(to_jsonable(obj), fobj, indent=2, sort_keys=True)
        fobj.write('\n')


def load_config(config_filepath):
    """
    Loads a run config from a .toml or .json file.

    Parameters
    ----------
    config_filepath : str
        Full filepath to a config file. The options are documented in
        transmonkit/default_config.toml.

    Returns
    -------
    config : dict
        The raw config, to be checked with check_user_input.

    """
    if not os.path.isfile(config_filepath):
        raise ConfigError('config', 'The file -' + str(config_filepath) + '- does not exist.')
    extension = os.path.splitext(config_filepath)[1].lower()
    try:
        if extension == '.json':
            with open(config_filepath) as fobj:
                config = json.load(fobj)
        elif extension == '.toml':
            config = toml.load(config_filepath)
        else:
            raise ConfigError('config', 'Config files must end with .json or .toml, got ' + str(config_filepath))
    except (ValueError, toml.TomlDecodeError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError('config', 'Could not parse {}: {}'.format(config_filepath, err))
    if not isinstance(config, dict):
        raise ConfigError('config', 'The config must be a table of options')
    print('Loaded the config file from ' + os.path.abspath(config_filepath))

    return config


def load_default_config():
    """ The documented defaults of every option. """
    return toml.load(DEFAULT_CONFIG_FILEPATH)


def _none(value):
    # toml has no null, 'None' strings stand for it
    return None if value in (None, 'None') else value


def _merge(defaults, user, path, free_tables=()):
    merged = dict(defaults)
    for key, value in user.items():
        field = '.'.join(path + (key,))
        if key not in defaults and field not in free_tables:
            raise ConfigError(field, 'Unknown option')
        if isinstance(defaults.get(key), dict) and field not in free_tables:
            if not isinstance(value, dict):
                raise ConfigError(field, 'Expected a table of options')
            merged[key] = _merge(defaults[key], value, path + (key,), free_tables)
        else:
            merged[key] = value
    return merged


def _number(block, key, path, minimum=None, exclusive=True, maximum=None, integer=False, optional=False):
    field = path + '.' + key
    value = _none(block[key])
    if value is None:
        if optional:
            block[key] = None
            return None
        raise ConfigError(field, 'A value is required')
    expected = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, expected):
        raise ConfigError(field, 'Expected {}, got {!r}'.format('an integer' if integer else 'a number', value))
    if not math.isfinite(value):
        raise ConfigError(field, 'Expected a finite number, got {!r}'.format(value))
    if minimum is not None and (value <= minimum if exclusive else value < minimum):
        raise ConfigError(field, 'Must be {} {}, got {!r}'.format('>' if exclusive else '>=', minimum, value))
    if maximum is not None and value > maximum:
        raise ConfigError(field, 'Must be <= {}, got {!r}'.format(maximum, value))
    block[key] = int(value) if integer else float(value)
    return block[key]


def _choice(block, key, path, choices):
    if block[key] not in choices:
        raise ConfigError(path + '.' + key, 'Must be one of {}, got {!r}'.format(', '.join(choices), block[key]))
    return block[key]


def _boolean(block, key, path):
    if not isinstance(block[key], bool):
        raise ConfigError(path + '.' + key, 'Expected true or false, got {!r}'.format(block[key]))
    return block[key]


def _number_list(block, key, path, minimum=None, exclusive=True, ascending=False, length=None, integer=False):
    field = path + '.' + key
    values = block[key]
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        raise ConfigError(field, 'Expected a non-empty list of numbers, got {!r}'.format(values))
    if length is not None and len(values) != length:
        raise ConfigError(field, 'Expected {} values, got {}'.format(length, len(values)))
    items = {str(i): value for i, value in enumerate(values)}
    for i in items:
        _number(items, i, field, minimum=minimum, exclusive=exclusive, integer=integer)
    checked = [items[str(i)] for i in range(len(values))]
    if ascending and any(b <= a for a, b in zip(checked, checked[1:])):
        raise ConfigError(field, 'Values must be strictly ascending, got {!r}'.format(checked))
    block[key] = checked
    return checked


def _check_geometry(block, path):
    for key in ('pad_width', 'pad_thickness', 'pad_gap', 'substrate_depth', 'substrate_width',
                'airbox_width', 'airbox_above', 'airbox_below'):
        _number(block, key, path, minimum=0)
    _number(block, 'oxide_thickness', path, minimum=0, exclusive=False, optional=True)
    _number(block, 'penetration_depth', path, minimum=0, exclusive=False, optional=True)
    _boolean(block, 'penetration_layers', path)


def _check_mesh(block, path):
    _number(block, 'target_h', path, minimum=0)
    _number(block, 'grading', path, minimum=1, exclusive=False)
    _number(block, 'min_angle', path, minimum=0, maximum=34)
    _number(block, 'corner_h', path, minimum=0, optional=True)


def _check_materials(block, path):
    _choice(block, 'material_preset', path, tuple(MATERIAL_STACKS))
    overrides = block.get('materials') or {}
    try:
        resolve_material_stack(block['material_preset'], overrides)
    except ParameterError as err:
        raise ConfigError(path + '.materials', str(err))


def _check_spectrum(block, path):
    _number(block, 'ec', path, minimum=0)
    _number_list(block, 'ratios', path, minimum=0)
    _number(block, 'ng_samples', path, minimum=3, exclusive=False, integer=True)
    _number(block, 'levels', path, minimum=2, exclusive=False, maximum=5, integer=True)
    _number(block, 'cutoff', path, minimum=1, exclusive=False, integer=True, optional=True)


def _check_chip(block, path):
    presets = block['presets']
    if not isinstance(presets, list) or not presets or not all(isinstance(p, str) for p in presets):
        raise ConfigError(path + '.presets', 'Expected a non-empty list of preset names, got {!r}'.format(presets))
    if len(set(presets)) != len(presets):
        raise ConfigError(path + '.presets', 'Preset names must be unique, got {!r}'.format(presets))
    block['preset_file'] = _none(block['preset_file'])
    if block['preset_file'] is not None and not os.path.isfile(block['preset_file']):
        raise ConfigError(path + '.preset_file', 'The file -' + str(block['preset_file']) + '- does not exist.')
    _number_list(block, 'ratio_grid', path, minimum=1, exclusive=False, ascending=True)
    _number_list(block, 'ec_grid', path, minimum=0, ascending=True)
    _number_list(block, 'coupling_ratio_grid', path, minimum=1, exclusive=False, ascending=True)
    _number(block, 'cutoff', path, minimum=1, exclusive=False, integer=True, optional=True)


def _check_fem(block, path):
    _check_materials(block, path)
    _number(block, 'drive_voltage', path)
    if block['drive_voltage'] == 0:
        raise ConfigError(path + '.drive_voltage', 'Must be nonzero')
    _number(block, 'surface_layer_thickness_nm', path, minimum=0)
    _number_list(block, 'raster', path, minimum=2, exclusive=False, length=2, integer=True)
    block['raster_bounds'] = _none(block['raster_bounds'])
    if block['raster_bounds'] is not None:
        xmin, ymin, xmax, ymax = _number_list(block, 'raster_bounds', path, length=4)
        if not (xmax > xmin and ymax > ymin):
            raise ConfigError(path + '.raster_bounds', 'Expected [xmin, ymin, xmax, ymax] with min < max')
    _check_geometry(block['geometry'], path + '.geometry')
    _check_mesh(block['mesh'], path + '.mesh')


def _check_converge(block, path):
    _check_materials(block, path)
    _number(block, 'ej', path, minimum=0)
    _number(block, 'depth_um', path, minimum=0)
    _number(block, 'max_passes', path, minimum=2, exclusive=False, integer=True)
    _number(block, 'tol', path, minimum=0)
    _choice(block, 'refinement', path, ('remesh', 'nested'))
    _number(block, 'n_variants', path, minimum=1, exclusive=False, integer=True)
    _number(block, 'pad_width_spread', path, minimum=0, exclusive=False, maximum=0.5)
    _number(block, 'drive_voltage', path)
    if block['drive_voltage'] == 0:
        raise ConfigError(path + '.drive_voltage', 'Must be nonzero')
    _number(block, 'surface_layer_thickness_nm', path, minimum=0, optional=True)
    _check_geometry(block['geometry'], path + '.geometry')
    _check_mesh(block['mesh'], path + '.mesh')


_BLOCK_CHECKS = {'spectrum': _check_spectrum, 'chip': _check_chip, 'fem': _check_fem, 'converge': _check_converge}


def check_user_input(config, command):
    """
    Sanity check of the user input, merged over the defaults.

    Parameters
    ----------
    config : dict
        Raw config as returned by load_config.
    command : str
        One of 'spectrum', 'chip', 'fem' and 'converge'. Only this
        command's block is checked and kept.

    Returns
    -------
    resolved : dict
        Top-level options and the resolved block of the command. 'None'
        strings are replaced by None.

    Raises
    ------
    ConfigError
        With the dotted path of the first invalid option.

    """
    if command not in COMMANDS:
        raise ConfigError('command', 'Unknown command {!r}'.format(command))
    defaults = load_default_config()
    free_tables = ('fem.materials', 'converge.materials')
    merged = _merge(defaults, config, (), free_tables)

    if merged['schema_version'] != SCHEMA_VERSION:
        raise ConfigError('schema_version', 'Only schema version {} is supported, got {!r}'.format(
            SCHEMA_VERSION, merged['schema_version']))
    if not isinstance(merged['output_dirpath'], str) or not merged['output_dirpath']:
        raise ConfigError('output_dirpath', 'Expected a directory path')
    if merged['format'] not in FORMATS:
        raise ConfigError('format', 'Must be one of {}, got {!r}'.format(', '.join(FORMATS), merged['format']))
    if merged['deterministic'] is not True:
        raise ConfigError('deterministic', 'Only deterministic runs are supported')

    block = merged[command]
    if 'materials' in block:
        block['materials'] = _none(block['materials']) or {}
        if not isinstance(block['materials'], dict):
            raise ConfigError(command + '.materials', 'Expected a table with metal and substrate overrides')
    _BLOCK_CHECKS[command](block, command)

    resolved = {key: merged[key] for key in ('schema_version', 'output_dirpath', 'format', 'deterministic')}
    resolved[command] = block
    return resolved


def make_output_dirs(output_dirpath, command):
    """
    Creates the output directory of a command if it doesn't exist already.

    Returns
    -------
    dirpath : str
        <output_dirpath>/<command>

    """
    dirpath = os.path.join(output_dirpath, command)
    try:
        os.makedirs(dirpath, exist_ok=True)
    except OSError as err:
        raise ConfigError('output_dirpath', 'Can not create {}: {}'.format(dirpath, err))
    if not os.access(dirpath, os.W_OK):
        raise ConfigError('output_dirpath', 'The directory {} is not writable'.format(dirpath))
    return dirpath


def build_metadata(command, config, tolerances=None, provenance=None, **extra):
    """
    The metadata that goes along with every output file set.

    Parameters
    ----------
    command : str
    config : dict
        The resolved config.
    tolerances : dict or None
        Numerical tolerances and cutoffs actually used.
    provenance : list of str or None
        Where preset-derived values come from.

    """
    metadata = {'schema_version': SCHEMA_VERSION,
                'tool': 'transmonkit',
                'version': version,
                'command': command,
                'timestamp': datetime.datetime.now(datetime.timezone.utc).isoformat(timespec='seconds'),
                'config': config,
                'tolerances': tolerances or {},
                'provenance': list(provenance or [])}
    metadata.update(extra)
    return metadata

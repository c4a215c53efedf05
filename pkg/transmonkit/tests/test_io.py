import os
import json
import dataclasses
import numpy as np
import pytest

from transmonkit.exceptions import ConfigError
from transmonkit.io import (SCHEMA_VERSION, atomic_open, build_metadata, check_user_input, format_value,
                            load_config, load_default_config, make_output_dirs, to_jsonable, write_csv, write_json)


def _field_of(config, command):
    with pytest.raises(ConfigError) as excinfo:
        check_user_input(config, command)
    return excinfo.value.field


class TestCheckUserInput:
    def test_defaults(self):
        resolved = check_user_input({}, 'spectrum')
        assert set(resolved) == {'schema_version', 'output_dirpath', 'format', 'deterministic', 'spectrum'}
        block = resolved['spectrum']
        assert block['cutoff'] is None
        assert block['ng_samples'] == 101 and isinstance(block['ng_samples'], int)
        assert block['ratios'] == [1.0, 5.0, 10.0, 50.0]

    def test_every_command_resolves(self):
        for command in ('spectrum', 'chip', 'fem', 'converge'):
            assert command in check_user_input({}, command)

    def test_partial_tables_keep_defaults(self):
        config = {'fem': {'geometry': {'pad_width': 30}, 'mesh': {'corner_h': 0.5}}}
        block = check_user_input(config, 'fem')['fem']
        assert block['geometry']['pad_width'] == 30.0
        assert block['geometry']['pad_gap'] == 10.0
        assert block['geometry']['oxide_thickness'] is None
        assert block['mesh']['corner_h'] == 0.5
        assert block['mesh']['target_h'] == 20.0

    def test_null_and_none_strings(self):
        assert check_user_input({'spectrum': {'cutoff': None}}, 'spectrum')['spectrum']['cutoff'] is None
        assert check_user_input({'spectrum': {'cutoff': 'None'}}, 'spectrum')['spectrum']['cutoff'] is None
        assert check_user_input({'spectrum': {'cutoff': 20}}, 'spectrum')['spectrum']['cutoff'] == 20

    def test_material_overrides(self):
        config = {'fem': {'materials': {'substrate': {'relative_permittivity': 11.45}}}}
        assert check_user_input(config, 'fem')['fem']['materials'] == {'substrate': {'relative_permittivity': 11.45}}
        assert _field_of({'fem': {'materials': {'metal': {'colour': 'grey'}}}}, 'fem') == 'fem.materials'
        assert _field_of({'fem': {'materials': {'air': {}}}}, 'fem') == 'fem.materials'
        assert _field_of({'fem': {'materials': [1, 2]}}, 'fem') == 'fem.materials'
        assert _field_of({'fem': {'material_preset': 'Pb-on-glass'}}, 'fem') == 'fem.material_preset'

    def test_unknown_options(self):
        assert _field_of({'outdir': 'x'}, 'spectrum') == 'outdir'
        assert _field_of({'spectrum': {'ecc': 0.2}}, 'spectrum') == 'spectrum.ecc'
        assert _field_of({'fem': {'mesh': {'h': 1.0}}}, 'fem') == 'fem.mesh.h'
        assert _field_of({'fem': {'geometry': 5}}, 'fem') == 'fem.geometry'

    def test_top_level(self):
        assert _field_of({'format': 'pdf'}, 'spectrum') == 'format'
        assert _field_of({'schema_version': SCHEMA_VERSION + 1}, 'spectrum') == 'schema_version'
        assert _field_of({'deterministic': False}, 'spectrum') == 'deterministic'
        assert _field_of({'output_dirpath': ''}, 'spectrum') == 'output_dirpath'
        with pytest.raises(ConfigError):
            check_user_input({}, 'plot')

    def test_spectrum_block(self):
        assert _field_of({'spectrum': {'ng_samples': 2}}, 'spectrum') == 'spectrum.ng_samples'
        assert _field_of({'spectrum': {'ng_samples': 10.5}}, 'spectrum') == 'spectrum.ng_samples'
        assert _field_of({'spectrum': {'levels': 6}}, 'spectrum') == 'spectrum.levels'
        assert _field_of({'spectrum': {'ec': True}}, 'spectrum') == 'spectrum.ec'
        assert _field_of({'spectrum': {'ec': 0}}, 'spectrum') == 'spectrum.ec'
        assert _field_of({'spectrum': {'ratios': []}}, 'spectrum') == 'spectrum.ratios'
        assert _field_of({'spectrum': {'ratios': [1.0, 'x']}}, 'spectrum') == 'spectrum.ratios.1'

    def test_chip_block(self, tmp_path):
        assert _field_of({'chip': {'ratio_grid': [20.0, 10.0]}}, 'chip') == 'chip.ratio_grid'
        assert _field_of({'chip': {'ratio_grid': [0.5, 10.0]}}, 'chip') == 'chip.ratio_grid.0'
        assert _field_of({'chip': {'presets': []}}, 'chip') == 'chip.presets'
        assert _field_of({'chip': {'presets': ['chip4', 'chip4']}}, 'chip') == 'chip.presets'
        missing = str(tmp_path / 'missing.json')
        assert _field_of({'chip': {'preset_file': missing}}, 'chip') == 'chip.preset_file'

    def test_fem_block(self):
        assert _field_of({'fem': {'mesh': {'target_h': -1.0}}}, 'fem') == 'fem.mesh.target_h'
        assert _field_of({'fem': {'mesh': {'min_angle': 40}}}, 'fem') == 'fem.mesh.min_angle'
        assert _field_of({'fem': {'mesh': {'grading': 0.5}}}, 'fem') == 'fem.mesh.grading'
        assert _field_of({'fem': {'geometry': {'pad_gap': 0}}}, 'fem') == 'fem.geometry.pad_gap'
        assert _field_of({'fem': {'geometry': {'penetration_layers': 1}}}, 'fem') == 'fem.geometry.penetration_layers'
        assert _field_of({'fem': {'drive_voltage': 0}}, 'fem') == 'fem.drive_voltage'
        assert _field_of({'fem': {'raster': [10]}}, 'fem') == 'fem.raster'
        assert _field_of({'fem': {'raster_bounds': [1.0, 0.0, 0.0, 1.0]}}, 'fem') == 'fem.raster_bounds'
        block = check_user_input({'fem': {'raster_bounds': 'None'}}, 'fem')['fem']
        assert block['raster_bounds'] is None

    def test_converge_block(self):
        assert _field_of({'converge': {'refinement': 'adaptive'}}, 'converge') == 'converge.refinement'
        assert _field_of({'converge': {'max_passes': 1}}, 'converge') == 'converge.max_passes'
        assert _field_of({'converge': {'pad_width_spread': 0.6}}, 'converge') == 'converge.pad_width_spread'
        assert _field_of({'converge': {'n_variants': 0}}, 'converge') == 'converge.n_variants'
        assert _field_of({'converge': {'ej': float('nan')}}, 'converge') == 'converge.ej'


class TestLoadConfig:
    def test_toml_and_json(self, tmp_path):
        toml_path = tmp_path / 'run.toml'
        toml_path.write_text("format = 'csv'\n[spectrum]\nec = 0.3\nratios = [50.0]\n")
        json_path = tmp_path / 'run.json'
        json_path.write_text(json.dumps({'format': 'csv', 'spectrum': {'ec': 0.3, 'ratios': [50.0]}}))
        assert load_config(str(toml_path)) == load_config(str(json_path))

    def test_invalid_files(self, tmp_path):
        with pytest.raises(ConfigError, match='does not exist'):
            load_config(str(tmp_path / 'missing.toml'))
        yaml_path = tmp_path / 'run.yaml'
        yaml_path.write_text('format: csv\n')
        with pytest.raises(ConfigError, match='.json or .toml'):
            load_config(str(yaml_path))
        broken = tmp_path / 'broken.json'
        broken.write_text('{"format": ')
        with pytest.raises(ConfigError, match='Could not parse'):
            load_config(str(broken))
        listed = tmp_path / 'listed.json'
        listed.write_text('[1, 2]')
        with pytest.raises(ConfigError) as excinfo:
            load_config(str(listed))
        assert excinfo.value.field == 'config'

    def test_default_config_is_complete(self):
        defaults = load_default_config()
        assert defaults['schema_version'] == SCHEMA_VERSION
        for command in ('spectrum', 'chip', 'fem', 'converge'):
            assert isinstance(defaults[command], dict)


def test_format_value():
    assert format_value(None) == ''
    assert format_value(float('nan')) == ''
    assert format_value(np.float64('nan')) == ''
    assert format_value(True) == 'true'
    assert format_value(np.bool_(False)) == 'false'
    assert format_value(np.int64(3)) == '3'
    assert format_value(0.1) == '0.1'
    assert format_value(np.float64(1) / 3) == repr(1 / 3)
    assert format_value(float('inf')) == 'inf'
    assert format_value('note') == 'note'


def test_write_csv(tmp_path):
    path = tmp_path / 'table.csv'
    write_csv(str(path), ['x', 'y', 'note'], [[1, 0.5, None], [2, float('nan'), 'a,b']])
    assert path.read_text() == 'x,y,note\n1,0.5,\n2,,"a,b"\n'


def test_to_jsonable():
    @dataclasses.dataclass
    class Point:
        x: float
        y: tuple

    converted = to_jsonable({'a': np.arange(3), 'b': np.float64('nan'), 'c': Point(1.5, (np.int32(2), np.inf)),
                             1: np.bool_(True)})
    assert converted == {'a': [0, 1, 2], 'b': None, 'c': {'x': 1.5, 'y': [2, None]}, '1': True}
    json.dumps(converted, allow_nan=False)


def test_write_json(tmp_path):
    path = tmp_path / 'out.json'
    write_json(str(path), {'b': np.float32(0.5), 'a': [np.nan]})
    text = path.read_text()
    assert text.endswith('\n')
    assert json.loads(text) == {'a': [None], 'b': 0.5}
    assert text.index('"a"') < text.index('"b"')


class TestAtomicOpen:
    def test_replaces_on_success(self, tmp_path):
        path = tmp_path / 'data.txt'
        path.write_text('old')
        with atomic_open(str(path)) as fobj:
            fobj.write('new')
            assert path.read_text() == 'old'
        assert path.read_text() == 'new'
        assert list(tmp_path.glob('.*.tmp')) == []

    def test_nothing_left_on_error(self, tmp_path):
        path = tmp_path / 'data.txt'
        path.write_text('old')
        with pytest.raises(RuntimeError):
            with atomic_open(str(path)) as fobj:
                fobj.write('partial')
                raise RuntimeError('interrupted')
        assert path.read_text() == 'old'
        assert list(tmp_path.glob('.*.tmp')) == []

        fresh = tmp_path / 'fresh.bin'
        with pytest.raises(KeyError):
            with atomic_open(fresh, 'w+b') as fobj:
                fobj.write(b'\x00')
                raise KeyError('x')
        assert not fresh.exists()
        assert sorted(p.name for p in tmp_path.iterdir()) == ['data.txt']


class TestOutputDirs:
    def test_creates_command_dir(self, tmp_path):
        dirpath = make_output_dirs(str(tmp_path / 'out'), 'fem')
        assert dirpath == os.path.join(str(tmp_path / 'out'), 'fem')
        assert os.path.isdir(dirpath)
        assert make_output_dirs(str(tmp_path / 'out'), 'fem') == dirpath

    def test_blocked_by_file(self, tmp_path):
        blocker = tmp_path / 'out'
        blocker.write_text('not a directory')
        with pytest.raises(ConfigError) as excinfo:
            make_output_dirs(str(blocker), 'fem')
        assert excinfo.value.field == 'output_dirpath'


def test_build_metadata():
    config = check_user_input({}, 'spectrum')
    metadata = build_metadata('spectrum', config, tolerances={'residual': 1e-9}, provenance=['synthetic'],
                              extra_key=[1, 2])
    assert metadata['schema_version'] == SCHEMA_VERSION
    assert metadata['tool'] == 'transmonkit'
    assert metadata['command'] == 'spectrum'
    assert metadata['config'] is config
    assert metadata['tolerances'] == {'residual': 1e-9}
    assert metadata['provenance'] == ['synthetic']
    assert metadata['extra_key'] == [1, 2]
    assert 'T' in metadata['timestamp']
    assert build_metadata('fem', config)['provenance'] == []

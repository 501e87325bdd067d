import json

import pandas as pd
import pytest

import database
from channels import binary_entropy
from cli import main, parse_attack, parse_grid
from config import ConfigError


def read_json(path):
    with open(path) as f:
        return json.load(f)


def test_parse_grid():
    assert parse_grid('0:1:5').tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid('0.1, 0.2').tolist() == [0.1, 0.2]
    assert parse_grid([0.3]).tolist() == [0.3]
    with pytest.raises(ConfigError):
        parse_grid('a:b:c')


def test_parse_attack():
    assert parse_attack('passive').kind == 'passive'
    assert parse_attack('bsc:0.1').channel.matrix[0, 1] == pytest.approx(0.1)
    with pytest.raises(ConfigError):
        parse_attack('erasure')


def test_malformed_config_writes_nothing(tmp_path):
    config = tmp_path / 'bad.json'
    config.write_text('{not json')
    out = tmp_path / 'out'
    assert main(['capacity', '--binary-closed-form', '--D1', '0.3', '--config', str(config),
                 '--out-dir', str(out)]) == 2
    assert not out.exists()


def test_missing_budget_is_a_config_error(tmp_path):
    out = tmp_path / 'out'
    assert main(['capacity', '--active', '--out-dir', str(out)]) == 2
    assert not out.exists()


def test_closed_form_sweep(tmp_path):
    out = tmp_path / 'sweep'
    code = main(['capacity', '--binary-closed-form', '--D2', '0.2', '--sweep', 'D1',
                 '--grid', '0:0.6:13', '--out-dir', str(out)])
    assert code == 0
    frame = pd.read_csv(out / 'capacity_sweep.csv')
    assert list(frame.columns) == ['D1', 'C']
    assert frame['C'].is_monotonic_increasing
    assert frame['C'].iloc[-1] == pytest.approx(1.0 - binary_entropy(0.2))
    manifest = read_json(out / 'manifest.json')
    assert manifest['command'] == 'capacity'
    assert manifest['exit_code'] == 0
    assert manifest['config']['sweep']['param'] == 'D1'


def test_passive_capacity_reports_bound(tmp_path):
    assert main(['capacity', '--passive', '--D1', '0.2', '--out-dir', str(tmp_path)]) == 0
    summary = read_json(tmp_path / 'capacity.json')
    assert summary['value'] == pytest.approx(binary_entropy(0.2), abs=1e-3)
    assert summary['rd_upper_bound'] >= summary['value'] - 1e-9


def test_config_file_values(tmp_path):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'seed': 4, 'game': {'D1': 0.4, 'D2': 0.2}}))
    assert main(['capacity', '--binary-closed-form', '--config', str(config), '--out-dir', str(tmp_path)]) == 0
    assert read_json(tmp_path / 'capacity.json')['value'] == pytest.approx(binary_entropy(0.4) - binary_entropy(0.2), abs=1e-3)
    assert read_json(tmp_path / 'manifest.json')['seed'] == 4


def test_passive_exponent_curve(tmp_path):
    assert main(['exponent', '--passive', '--D1', '0.4', '--rates', '0:1.2:13', '--out-dir', str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / 'exponent.csv')
    assert list(frame.columns) == ['R', 'E_r']
    assert (frame.loc[frame['R'] >= 1.0 - 1e-9, 'E_r'] == 0.0).all()
    assert read_json(tmp_path / 'exponent.json')['zero_crossing'] == pytest.approx(1.0)


def test_active_exponent_needs_binary_source(tmp_path):
    config = tmp_path / 'run.json'
    config.write_text(json.dumps({'source': {'probs': [0.5, 0.3, 0.2]}}))
    assert main(['exponent', '--active', '--D1', '0.3', '--config', str(config),
                 '--out-dir', str(tmp_path / 'out')]) == 2


def test_nested_loopback(tmp_path):
    assert main(['codec', 'loopback', '--scheme', 'nested', '--N', '3', '--exhaustive',
                 '--out-dir', str(tmp_path)]) == 0
    report = read_json(tmp_path / 'trial_report.json')
    assert report['p_e_hat'] == 0.0
    assert report['method'] == 'exact'


def test_nested_encode_decode(tmp_path):
    cover = tmp_path / 'cover.txt'
    cover.write_text('010\n')
    keys = tmp_path / 'keys.json'
    enc, dec = tmp_path / 'enc', tmp_path / 'dec'
    assert main(['codec', 'encode', '--scheme', 'nested', '--N', '3', '--covertext', str(cover),
                 '--message', '1', '--key-seed', '7', '--key-file', str(keys), '--key-name', 'alice',
                 '--out-dir', str(enc)]) == 0
    assert main(['codec', 'decode', '--scheme', 'nested', '--N', '3', '--stegotext', str(enc / 'stegotext.txt'),
                 '--key-file', str(keys), '--key-name', 'alice', '--out-dir', str(dec)]) == 0
    assert read_json(dec / 'decoded.json') == {'message': 1, 'error': None}


def test_wrong_length_covertext(tmp_path):
    cover = tmp_path / 'cover.txt'
    cover.write_text('0101\n')
    assert main(['codec', 'encode', '--scheme', 'nested', '--N', '3', '--covertext', str(cover),
                 '--key-seed', '1', '--out-dir', str(tmp_path / 'out')]) == 4
    assert read_json(tmp_path / 'out' / 'manifest.json')['exit_code'] == 4


def test_missing_key_is_a_config_error(tmp_path):
    cover = tmp_path / 'cover.txt'
    cover.write_text('010\n')
    assert main(['codec', 'encode', '--scheme', 'nested', '--N', '3', '--covertext', str(cover),
                 '--out-dir', str(tmp_path / 'out')]) == 2


def test_unreadable_covertext_still_writes_manifest(tmp_path):
    cover = tmp_path / 'cover.txt'
    cover.write_text('0x1\n')
    assert main(['codec', 'encode', '--scheme', 'nested', '--N', '3', '--covertext', str(cover),
                 '--key-seed', '1', '--out-dir', str(tmp_path / 'out')]) == 2
    manifest = read_json(tmp_path / 'out' / 'manifest.json')
    assert manifest['exit_code'] == 2
    assert manifest['output_paths'] == []


def test_rm_build_encode_decode(tmp_path):
    build, enc, dec = tmp_path / 'build', tmp_path / 'enc', tmp_path / 'dec'
    assert main(['codec', 'build', '--N', '4', '--R', '0.25', '--D1', '0.5', '--dump',
                 '--out-dir', str(build)]) == 0
    assert (build / 'codebook.sbcb').exists() and (build / 'codebook.json').exists()
    cover = tmp_path / 'cover.txt'
    cover.write_text('0110\n')
    assert main(['codec', 'encode', '--scheme', 'rm', '--codebook', str(build / 'codebook.sbcb'),
                 '--covertext', str(cover), '--key-seed', '3', '--message', '1', '--out-dir', str(enc)]) == 0
    stego = (enc / 'stegotext.txt').read_text().strip()
    assert sorted(stego) == sorted('0110')
    assert main(['codec', 'decode', '--scheme', 'rm', '--codebook', str(build / 'codebook.sbcb'),
                 '--stegotext', str(enc / 'stegotext.txt'), '--key-seed', '3', '--out-dir', str(dec)]) == 0
    assert set(read_json(dec / 'decoded.json')) == {'message', 'error'}


def test_verify_nested_passes(tmp_path):
    assert main(['verify', '--scheme', 'nested', '--N', '3', '--out-dir', str(tmp_path)]) == 0
    report = read_json(tmp_path / 'security_report.json')
    assert report['passed'] and report['tv_distance'] == 0.0


def test_verify_control_fails(tmp_path):
    assert main(['verify', '--control', '--N', '4', '--out-dir', str(tmp_path)]) == 5
    assert not read_json(tmp_path / 'security_report.json')['passed']


def test_verify_sampled_is_evidence_only(tmp_path):
    assert main(['verify', '--scheme', 'nested', '--N', '3', '--sampled', '--samples', '200',
                 '--out-dir', str(tmp_path)]) == 0
    assert read_json(tmp_path / 'security_report.json')['note'] == 'sampled, not a proof'


def test_runs_are_recorded_in_the_ledger(tmp_path, monkeypatch):
    monkeypatch.setattr(database, 'DATABASE_URL', f"sqlite:///{tmp_path / 'runs.db'}")
    assert main(['capacity', '--binary-closed-form', '--D1', '0.3', '--D2', '0.1',
                 '--out-dir', str(tmp_path / 'out')]) == 0
    runs = database.get_run_history(command='capacity')
    assert len(runs) == 1
    assert runs[0].exit_code == 0
    assert runs[0].config['mode'] == 'binary_closed_form'


def test_capacity_output_is_rounded_to_tolerance(tmp_path):
    assert main(['capacity', '--binary-closed-form', '--D1', '0.3', '--D2', '0.2', '--tol', '0.01',
                 '--out-dir', str(tmp_path)]) == 0
    value = read_json(tmp_path / 'capacity.json')['value']
    assert value == round(value, 2)
    assert value == pytest.approx(0.18704, abs=5e-3)

import json

import pytest

from config import DEFAULT_SEED, ConfigError, load_run_config, resolve_seed


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv('STEGCAP_SEED', '11')
    assert resolve_seed(3, {'seed': 5}) == 3
    assert resolve_seed(None, {'seed': 5}) == 5
    assert resolve_seed(None, {}) == 11
    monkeypatch.delenv('STEGCAP_SEED')
    assert resolve_seed(None, {}) == DEFAULT_SEED


def test_bad_seed_environment(monkeypatch):
    monkeypatch.setenv('STEGCAP_SEED', 'abc')
    with pytest.raises(ConfigError):
        resolve_seed()


def test_no_config_file():
    assert load_run_config(None) == {}


@pytest.mark.parametrize('content', ['{oops', '[1, 2]', json.dumps({'game': 3}), json.dumps({'seed': 'x'})])
def test_malformed_config(tmp_path, content):
    path = tmp_path / 'run.json'
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / 'absent.json')

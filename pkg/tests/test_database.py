import database


def test_ledger_disabled_without_url():
    assert database.configure_engine() is None
    assert not database.ledger_enabled()
    assert database.add_run_to_db({'command': 'capacity'}) is False
    assert database.get_run_history() == []


def test_add_and_query_runs(tmp_path):
    assert database.configure_engine(f"sqlite:///{tmp_path / 'ledger.db'}") is not None
    assert database.init_db()
    for command, code in (('capacity', 0), ('verify', 5), ('capacity', 3)):
        assert database.add_run_to_db({
            'command': command, 'seed': 0, 'config': {'D1': 0.3}, 'tool_version': '0.1.0',
            'wall_time': 0.5, 'output_paths': ['capacity.json'], 'exit_code': code,
        })
    assert len(database.get_run_history()) == 3
    capacity = database.get_run_history(command='capacity')
    assert sorted(r.exit_code for r in capacity) == [0, 3]
    assert capacity[0].config == {'D1': 0.3}
    assert len(database.get_run_history(limit=1)) == 1


def test_bad_row_is_rolled_back(tmp_path):
    database.configure_engine(f"sqlite:///{tmp_path / 'ledger.db'}")
    database.init_db()
    assert database.add_run_to_db({'command': 'capacity', 'no_such_column': 1}) is False
    assert database.get_run_history() == []

"""
CLI のテスト (click.testing.CliRunner)
"""
import json

import pytest
from click.testing import CliRunner
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool

from app.database import init_db
from app.exceptions import EXIT_BUDGET_EXCEEDED, EXIT_INPUT_ERROR
from app.models.run_record import PlayRun, SolveRun
from app.services import run_ledger
from main import cli


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def pennies_file(runner, tmp_path):
    path = tmp_path / "pennies.json"
    result = runner.invoke(cli, ["generate", "pennies", "--gamma", "0.9", "--out", str(path)])
    assert result.exit_code == 0, result.output
    return path


@pytest.fixture
def memory_ledger(monkeypatch):
    """実行記録をインメモリ SQLite に向ける"""
    engine = create_engine("sqlite://", connect_args={"check_same_thread": False}, poolclass=StaticPool)
    session_factory = sessionmaker(bind=engine)
    monkeypatch.setattr(run_ledger, "SessionLocal", session_factory)
    monkeypatch.setattr(run_ledger, "init_db", lambda: init_db(bind=engine))
    return session_factory


def test_generate_and_info(runner, pennies_file):
    result = runner.invoke(cli, ["info", str(pennies_file)])
    assert result.exit_code == 0, result.output
    info = json.loads(result.stdout)
    assert info["states"] == 4
    assert info["family"] == "pennies"
    assert info["block_sizes"]["second"] == 2


def test_generate_patrolling_alias(runner, tmp_path):
    path = tmp_path / "patrol.json"
    result = runner.invoke(
        cli, ["generate", "patrolling", "--vertices", "4", "--p", "0.6", "--seed", "2", "--out", str(path)]
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["family"] == "patrolling"


def test_solve_then_play(runner, pennies_file, tmp_path):
    bounds = tmp_path / "pennies.bounds.json"
    log = tmp_path / "progress.jsonl"
    result = runner.invoke(
        cli, ["solve", str(pennies_file), "--epsilon", "0.5", "--out", str(bounds), "--log", str(log)]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.stdout)
    assert report["final_gap"] <= 0.5
    assert not report["budget_exceeded"]
    lines = log.read_text(encoding="utf-8").splitlines()
    assert len(lines) == report["trials"]
    assert "gap" in json.loads(lines[0])

    trajectories = tmp_path / "traj.jsonl"
    result = runner.invoke(
        cli,
        [
            "play", str(pennies_file), str(bounds),
            "--episodes", "200", "--seed", "1", "--trajectories", str(trajectories),
        ],
    )
    assert result.exit_code == 0, result.output
    play = json.loads(result.stdout)
    assert play["verdict"] == "pass"
    assert play["episodes"] == 200
    assert len(trajectories.read_text(encoding="utf-8").splitlines()) == 200 * play["horizon"]


def test_default_bounds_path(runner, pennies_file):
    result = runner.invoke(cli, ["solve", str(pennies_file), "--epsilon", "1.0"])
    assert result.exit_code == 0, result.output
    assert pennies_file.with_name("pennies.bounds.json").exists()


def test_time_limit_exits_with_budget_code(runner, pennies_file, tmp_path):
    bounds = tmp_path / "partial.bounds.json"
    result = runner.invoke(
        cli, ["solve", str(pennies_file), "--epsilon", "0.001", "--time-limit", "0", "--out", str(bounds)]
    )
    assert result.exit_code == EXIT_BUDGET_EXCEEDED
    assert bounds.exists()
    assert json.loads(result.stdout)["budget_exceeded"] is True

    result = runner.invoke(cli, ["play", str(pennies_file), str(bounds), "--episodes", "20"])
    assert result.exit_code == 0, result.output
    assert any("時間切れ" in w for w in json.loads(result.stdout)["warnings"])


def test_malformed_game_file(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"states": []}', encoding="utf-8")
    result = runner.invoke(cli, ["info", str(path)])
    assert result.exit_code == EXIT_INPUT_ERROR
    assert "InvalidGame" in result.output


def test_bad_generator_parameters(runner, tmp_path):
    result = runner.invoke(cli, ["generate", "pennies", "--gamma", "1.5", "--out", str(tmp_path / "x.json")])
    assert result.exit_code == EXIT_INPUT_ERROR


def test_record_writes_runs(runner, pennies_file, tmp_path, memory_ledger):
    bounds = tmp_path / "pennies.bounds.json"
    result = runner.invoke(cli, ["solve", str(pennies_file), "--epsilon", "1.0", "--out", str(bounds), "--record"])
    assert result.exit_code == 0, result.output
    result = runner.invoke(
        cli, ["play", str(pennies_file), str(bounds), "--episodes", "20", "--mode", "p1-vs-uniform", "--record"]
    )
    assert result.exit_code == 0, result.output
    session = memory_ledger()
    try:
        assert session.query(SolveRun).count() == 1
        assert session.query(PlayRun).one().mode == "p1-vs-uniform"
    finally:
        session.close()


def test_bench_smoke_records_every_instance(runner, tmp_path, memory_ledger):
    result = runner.invoke(
        cli, ["bench", "--suite", "smoke", "--epsilon", "50", "--time-limit", "5", "--out-dir", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    assert "pennies" in result.stdout and "tiger" in result.stdout
    assert len(list(tmp_path.glob("*.bounds.json"))) == 3
    session = memory_ledger()
    try:
        assert {row.family for row in session.query(SolveRun)} == {"pennies", "pursuit", "tiger"}
    finally:
        session.close()

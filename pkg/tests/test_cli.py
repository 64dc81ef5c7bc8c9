from __future__ import annotations

import pytest

from flowplan import GridMap, Path, validate_path
from flowplan import scenarios
from flowplan.cli import main
from flowplan.grid import ACTION_BY_NAME


@pytest.fixture
def empty5_file(tmp_path) -> str:
    f = tmp_path / "empty5.txt"
    f.write_text(scenarios.load("empty5"), encoding="utf-8")
    return str(f)


@pytest.fixture
def corridor_file(tmp_path) -> str:
    f = tmp_path / "corridor.txt"
    f.write_text(scenarios.load("corridor"), encoding="utf-8")
    return str(f)


def parse_csv_path(text: str) -> Path:
    lines = [ln for ln in text.strip().splitlines() if not ln.startswith("#")]
    assert lines[0] == "t,row,col,action"
    steps = []
    for line in lines[1:]:
        t, row, col, action = line.split(",")
        index = None if action == "-" else ACTION_BY_NAME[action].index
        steps.append((int(t), (int(row), int(col)), index))
    return Path(tuple(steps), False)


def test_mintime_prints_five(capsys, empty5_file):
    assert main(["mintime", empty5_file]) == 0
    assert capsys.readouterr().out.strip() == "5"


def test_mintime_unreachable_exits_one(tmp_path, capsys):
    f = tmp_path / "walled.txt"
    f.write_text("---\nS#G\n.#.\n", encoding="utf-8")
    assert main(["mintime", str(f)]) == 1
    assert "no feasible path" in capsys.readouterr().err


def test_plan_csv_revalidates_as_a_path(capsys, empty5_file):
    assert main(["plan", empty5_file]) == 0
    out = capsys.readouterr().out
    path = parse_csv_path(out)
    validate_path(path, GridMap.empty(5, 5))
    assert path.steps[0] == (1, (0, 0), ACTION_BY_NAME["down-right"].index)
    assert path.steps[-1] == (5, (4, 4), None)


def test_plan_below_minimum_time_exits_one(capsys, empty5_file):
    assert main(["plan", empty5_file, "--horizon", "2"]) == 1
    err = capsys.readouterr().err
    assert "no feasible path" in err


def test_plan_is_byte_identical_across_runs(capsys, empty5_file):
    assert main(["plan", empty5_file]) == 0
    first = capsys.readouterr().out
    assert main(["plan", empty5_file]) == 0
    second = capsys.readouterr().out
    assert first == second


def test_plan_rejects_multi_agent_files(capsys, corridor_file):
    assert main(["plan", corridor_file]) == 2
    assert "single-agent" in capsys.readouterr().err


def test_parse_errors_exit_two(tmp_path, capsys):
    f = tmp_path / "bad.txt"
    f.write_text("speed = 11\n---\nS.G\n", encoding="utf-8")
    assert main(["mintime", str(f)]) == 2
    assert "scenario error" in capsys.readouterr().err


def test_missing_file_exits_two(capsys):
    assert main(["plan", "/nonexistent/path.txt"]) == 2


def test_usage_error_exits_two(capsys):
    assert main(["warp", "x"]) == 2


def test_flows_writes_frames_per_slice(tmp_path, capsys, empty5_file):
    out = tmp_path / "frames"
    assert main(["flows", empty5_file, "--out-dir", str(out)]) == 0
    files = sorted(p.name for p in out.iterdir())
    # horizon 5 -> joint tensors at t = 1..4 for three kinds
    assert len(files) == 12
    assert "forward_t001.txt" in files and "posterior_t004.txt" in files
    text = (out / "backward_t001.txt").read_text(encoding="utf-8")
    assert len(text.splitlines()) == 5


def test_flows_pixmap_format(tmp_path, empty5_file, capsys):
    out = tmp_path / "frames"
    assert main(["flows", empty5_file, "--out-dir", str(out), "--format", "pixmap"]) == 0
    ppm = (out / "forward_t001.ppm").read_bytes()
    assert ppm.startswith(b"P6\n5 5\n255\n")


def test_sample_emits_seeded_blocks(capsys, empty5_file):
    assert main(["sample", empty5_file, "--n", "3", "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert out.count("# path") == 3
    assert "seed 5" in out and "seed 7" in out


def test_simulate_writes_trace_and_agent_csv(tmp_path, capsys, corridor_file):
    out = tmp_path / "sim"
    assert main(["simulate", corridor_file, "--out-dir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert "agent_1.csv" in names and "agent_2.csv" in names
    assert any(n.startswith("trace_t001") for n in names)
    ws_grid = GridMap.empty(5, 7).with_obstacles(
        [(0, j) for j in range(7)]
        + [(4, j) for j in range(7)]
        + [(1, 0), (1, 6), (3, 0), (3, 6)]
        + [(2, 0), (2, 1), (2, 2), (2, 4), (2, 5), (2, 6)]
    )
    for agent_file in ("agent_1.csv", "agent_2.csv"):
        path = parse_csv_path((out / agent_file).read_text(encoding="utf-8"))
        validate_path(path, ws_grid)
    first_frame = (out / "trace_t001.txt").read_text(encoding="utf-8")
    assert "1" in first_frame and "2" in first_frame and "a" in first_frame


def test_simulate_rejects_single_agent_files(capsys, empty5_file):
    assert main(["simulate", empty5_file, "--out-dir", "/tmp/nowhere"]) == 2

import csv
import json
import socket
import threading
from collections import defaultdict

import pytest

from junction_bench.cli import EnvServer, encode_response, handle_request, main, parse_agent
from junction_bench.config import (ConfigError, RunConfig, dump_config, echo_config,
                                   parse_config, resolve)
from junction_bench.env import IntersectionEnv
from junction_bench.learner.td3 import TD3Agent, TD3Config, save_actor
from junction_bench.road_network import Turn

TINY_GRID = ["--set", "scenario.step = 30", "--set", "scenario.gap_range = 16, 46"]


# configuration ------------------------------------------------------------------------

def test_defaults():
    cfg = parse_config()
    assert cfg == RunConfig()
    assert cfg.reward.t_max == 30.0 and cfg.sim.dt == 0.1
    assert cfg.scenario.speed_range == (10.0, 40.0) and cfg.stochastic.n_social_flows == 3


def test_file_then_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# demo\nreward.t_max = 25\nstochastic.ignore_ego = false\n"
                    "scenario.gap_range = 20, 40\n")
    cfg = parse_config(path, ["reward.t_max = 20"])
    assert cfg.reward.t_max == 20.0
    assert cfg.stochastic.ignore_ego is False
    assert cfg.scenario.gap_range == (20.0, 40.0)


def test_echo_reflects_override(tmp_path):
    cfg = parse_config(None, ["reward.t_max = 20"])
    text = echo_config(cfg, tmp_path).read_text()
    assert "reward.t_max = 20.0" in text.splitlines()


def test_dump_roundtrips():
    cfg = parse_config(None, ["td3.gamma = 0.995", "run.workers = 3", "idm.v0 = 8.5"])
    assert resolve(dump_config(cfg)) == cfg


@pytest.mark.parametrize("text, pattern", [
    ("reward.tmax = 3", r"reward\.tmax \(<config> line 1\): unknown key"),
    ("nope.x = 1", r"nope\.x .*unknown key"),
    ("\n\nsim.dt = fast", r"sim\.dt \(<config> line 3\): expected float"),
    ("reward.t_max = 0", r"reward\.t_max \(<config> line 1\)"),
    ("stochastic.ignore_ego = maybe", r"stochastic\.ignore_ego .*expected bool"),
    ("scenario.speed_range = 10", r"scenario\.speed_range .*expected tuple"),
    ("just text", r"expected 'section\.key = value'"),
])
def test_error_messages_name_key_and_line(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        resolve(text)


def test_override_errors_name_source():
    with pytest.raises(ConfigError, match=r"run\.workers \(--set\)"):
        resolve("", ["run.workers = 0"])


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "absent.cfg")


# command line -------------------------------------------------------------------------

def test_eval_det_tiny_grid(tmp_path, capsys):
    assert main(["eval-det", "--agent", "idm", "--out", str(tmp_path), "--seed", "0",
                 *TINY_GRID]) == 0
    rows = list(csv.reader(open(tmp_path / "deterministic_idm.csv")))
    assert [r[0] for r in rows[1:]] == ["A", "B", "C", "D", "E"]
    assert all(r[1] == "4" for r in rows[1:])
    by_task = list(csv.reader(open(tmp_path / "deterministic_idm_by_task.csv")))
    assert [r[0] for r in by_task[1:]] == ["left", "right", "straight"]
    assert "scenario.step = 30.0" in (tmp_path / "resolved_config.txt").read_text()


def test_eval_sto(tmp_path):
    assert main(["eval-sto", "--agent", "constant:9", "--tasks", "right", "--episodes", "3",
                 "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "stochastic_right_constant_9.csv")))
    assert rows[1][0] == "right" and rows[1][1] == "3"


def test_replay_step_count(tmp_path):
    out = tmp_path / "replay.csv"
    assert main(["replay", "--scenario", "C", "--cell", "20,30", "--agent", "aeb",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    steps = sorted({int(r["step"]) for r in rows})
    last_time = float(rows[-1]["time"])
    assert steps == list(range(1, len(steps) + 1))
    assert len(steps) == round(last_time / 0.1)
    assert {r["role"] for r in rows} >= {"ego"}
    assert (tmp_path / "replay_config.txt").exists()


def test_sample_traffic_histogram_mass(tmp_path):
    assert main(["sample-traffic", "--flow", "straight", "--draws", "100000",
                 "--out", str(tmp_path)]) == 0
    mass = defaultdict(float)
    counts = defaultdict(int)
    for r in csv.DictReader(open(tmp_path / "traffic_histogram.csv")):
        mass[r["flow"], r["quantity"]] += float(r["mass"])
        counts[r["flow"], r["quantity"]] += int(r["count"])
    assert set(mass) == {("D", "speed_kmh"), ("D", "gap_m"), ("E", "speed_kmh"), ("E", "gap_m")}
    assert all(abs(m - 1.0) <= 1e-9 for m in mass.values())
    assert all(c == 100000 for c in counts.values())
    with open(tmp_path / "traffic_samples.csv") as fh:
        assert sum(1 for _ in fh) == 2 * 100000 + 1


@pytest.mark.parametrize("argv", [
    ["eval-det", "--agent", "idm", "--set", "reward.bogus = 1"],
    ["eval-det", "--agent", "robot"],
    ["eval-det", "--agent", "idm", "--scenarios", "A,Q"],
    ["eval-sto", "--agent", "td3:/nonexistent/model"],
    ["replay", "--scenario", "A", "--cell", "20", "--agent", "idm"],
    ["frobnicate"],
    [],
])
def test_usage_and_config_errors_exit_1(argv, tmp_path, capsys):
    if argv and argv[0] != "frobnicate":
        argv = argv + ["--out", str(tmp_path / "o.csv" if argv[0] == "replay" else tmp_path)]
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_runtime_error_exit_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["eval-sto", "--agent", "idm", "--tasks", "right", "--episodes", "1",
                 "--out", str(blocker / "sub")]) == 2
    assert "error" in capsys.readouterr().err


def test_td3_model_directory_layout(tmp_path):
    save_actor(TD3Agent(TD3Config(hidden=8), 0).actor, tmp_path / "left.bin")
    (tmp_path / "right").mkdir()
    save_actor(TD3Agent(TD3Config(hidden=8), 1).actor, tmp_path / "right" / "actor.bin")
    cfg = RunConfig()
    agent = parse_agent(f"td3:{tmp_path}", cfg, [Turn.LEFT, Turn.RIGHT])
    assert agent.tasks() == {Turn.LEFT, Turn.RIGHT}
    with pytest.raises(ConfigError, match="straight"):
        parse_agent(f"td3:{tmp_path}", cfg, [Turn.STRAIGHT])


# wire protocol --------------------------------------------------------------------------

def test_encode_response_layout():
    line = encode_response([0.0] * 34, -0.1, False, "running")
    assert list(json.loads(line)) == ["observation", "reward", "done", "outcome"]
    body = line.split('"observation": [')[1].split("]")[0]
    assert all(len(t.replace("-", "").replace(".", "")) >= 9 for t in body.split(", "))
    assert '"reward": -0.100000000' in line


def test_handle_request_cycle():
    env = IntersectionEnv()
    cfg = RunConfig()
    first = json.loads(handle_request(env, '{"cmd": "reset", "seed": 3, "scenario": "D@20,30"}',
                                      cfg))
    assert len(first["observation"]) == 34 and first["done"] is False
    step = json.loads(handle_request(env, '{"cmd": "step", "a0": 1.0, "a1": 0.0}', cfg))
    assert step["reward"] == -0.1 and step["outcome"] == "running"
    assert "error" in json.loads(handle_request(env, '{"cmd": "jump"}', cfg))
    assert "error" in json.loads(handle_request(env, "not json", cfg))
    assert "error" in json.loads(handle_request(env, '{"cmd": "step"}', cfg))
    fresh = IntersectionEnv()
    assert "error" in json.loads(handle_request(fresh, '{"cmd": "step", "a0": 1, "a1": 0}',
                                                cfg))


def test_server_over_socket():
    server = EnvServer(("127.0.0.1", 0), RunConfig())
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        with socket.create_connection(server.server_address[:2], timeout=10) as sock:
            fh = sock.makefile("rw")
            fh.write('{"cmd": "reset", "seed": 0, "scenario": "sto:left"}\n')
            fh.write('{"cmd": "step", "a0": 0.5, "a1": 0.0}\n')
            fh.flush()
            reset, step = json.loads(fh.readline()), json.loads(fh.readline())
        assert len(reset["observation"]) == 34
        assert step["done"] is False and step["reward"] == -0.1
    finally:
        server.shutdown()
        server.server_close()

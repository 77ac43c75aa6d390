"""Command-line entry point.

    junction-bench train --task straight --episodes 20000 --seed 0 --out runs/s0
    junction-bench eval-det --agent idm --out reports
    junction-bench eval-sto --agent td3:runs/models --episodes 1000 --out reports
    junction-bench sample-traffic --flow left --draws 100000 --out traffic
    junction-bench replay --scenario A --cell 20,30 --agent aeb --out replay.csv
    junction-bench serve --port 5555

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import socketserver
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import AEBAgent, ActorAgent, ConstantAgent, IDMAgent
from .config import ConfigError, RunConfig, echo_config, parse_config
from .env import IntersectionEnv, LifecycleError
from .evaluation import emit_report, run_deterministic, run_stochastic
from .learner.td3 import load_actor, train
from .road_network import Movement, Turn, build_default_intersection
from .scenario import (EGO_ARM, FUNCTIONAL_SCENARIOS, ConcreteScenario, StochasticConfig,
                       training_scenario)
from .traffic_gen import GapSamplerParams, SpawnerState, draw_parameters

log = logging.getLogger("junction_bench")

TASKS = {t.value: t for t in Turn}


class UsageError(ConfigError):
    """Bad command-line arguments (reported like a configuration error)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# construction from config -------------------------------------------------------

@dataclass(frozen=True)
class EnvFactory:
    """Picklable zero-argument environment constructor for a resolved config."""

    cfg: RunConfig

    def __call__(self) -> IntersectionEnv:
        m = self.cfg.map
        imap = build_default_intersection(m.lane_width, m.approach_length, m.junction_half_width)
        return IntersectionEnv(imap, self.cfg.sim, self.cfg.reward, self.cfg.scenario.warmup,
                               social_aeb=self.cfg.aeb)


def training_for(cfg: RunConfig, task: Turn, with_traffic: bool = True):
    gap = GapSamplerParams(*cfg.scenario.gap_range, n=cfg.training.gap_n)
    return training_scenario(task, EGO_ARM, cfg.scenario.speed_range, gap,
                             cfg.training.theta, cfg.aeb, with_traffic)


def stochastic_for(cfg: RunConfig, task: Turn) -> StochasticConfig:
    s = cfg.stochastic
    return StochasticConfig(Movement(EGO_ARM, task), s.n_social_flows, cfg.scenario.speed_range,
                            cfg.scenario.gap_range, s.ignore_ego, cfg.aeb)


class TaskActorAgent:
    """Dispatches to one trained actor per ego task."""

    def __init__(self, actors: dict, label: str):
        self.actors = {t: ActorAgent(a, label) for t, a in actors.items()}
        self.label = label

    def tasks(self):
        return set(self.actors)

    def act(self, obs, env):
        turn = env.ego.route.movement.turn
        try:
            return self.actors[turn].act(obs, env)
        except KeyError:
            raise UsageError(f"agent {self.label} has no model for the {turn.value} task") from None


def _load_model(path: Path):
    try:
        return load_actor(path)
    except (OSError, ValueError, IndexError) as exc:
        raise UsageError(f"cannot load model file {path}: {exc}") from None


def parse_agent(spec: str, cfg: RunConfig, needed_tasks=()):
    """Build an agent from ``idm``, ``aeb``, ``constant[:v]`` or ``td3:path``.

    ``td3:path`` takes either one actor file (used for every task) or a
    directory holding ``<task>.bin`` or ``<task>/actor.bin`` per task.
    Every model needed for ``needed_tasks`` is loaded here, before any
    simulation starts.
    """
    kind, _, arg = spec.partition(":")
    if kind == "idm" and not arg:
        return IDMAgent(cfg.idm)
    if kind == "aeb" and not arg:
        return AEBAgent(cfg.aeb)
    if kind == "constant":
        try:
            return ConstantAgent(float(arg) if arg else 9.0)
        except ValueError:
            raise UsageError(f"bad constant agent speed in {spec!r}") from None
    if kind == "td3" and arg:
        path = Path(arg)
        if path.is_file():
            actor = _load_model(path)
            return TaskActorAgent({t: actor for t in Turn}, spec)
        if not path.is_dir():
            raise UsageError(f"model path {path} does not exist")
        actors = {}
        for turn in Turn:
            for cand in (path / f"{turn.value}.bin", path / turn.value / "actor.bin"):
                if cand.is_file():
                    actors[turn] = _load_model(cand)
                    break
        missing = [t.value for t in needed_tasks if t not in actors]
        if missing:
            raise UsageError(f"model directory {path} has no actor for task(s) {missing}")
        return TaskActorAgent(actors, spec)
    raise UsageError(f"invalid agent spec {spec!r}; expected idm, aeb, constant[:v] or td3:path")


def parse_scenario(text: str, cfg: RunConfig):
    """``A@V,d`` (grid cell), ``train:<task>``, ``empty:<task>`` or ``sto:<task>``."""
    if "@" in text:
        sid, _, cell = text.partition("@")
        return ConcreteScenario(_functional(sid), *_cell(cell))
    kind, _, task = text.partition(":")
    turn = _task(task)
    if kind == "train":
        return training_for(cfg, turn)
    if kind == "empty":
        return training_for(cfg, turn, with_traffic=False)
    if kind == "sto":
        return stochastic_for(cfg, turn)
    raise UsageError(f"bad scenario {text!r}; expected A@V,d, train:task, empty:task or sto:task")


def _functional(sid: str):
    try:
        return FUNCTIONAL_SCENARIOS[sid.strip().upper()]
    except KeyError:
        raise UsageError(f"unknown functional scenario {sid!r} (expected A-E)") from None


def _cell(text: str):
    try:
        v, d = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad cell {text!r}; expected V,d") from None
    return v, d


def _task(name: str) -> Turn:
    try:
        return TASKS[name.strip().lower()]
    except KeyError:
        raise UsageError(f"unknown task {name!r} (expected left, right or straight)") from None


# commands -------------------------------------------------------------------------

def cmd_train(args, cfg: RunConfig):
    task = _task(args.task)
    out = Path(args.out)
    echo_config(cfg, out)
    episodes = args.episodes or cfg.training.episodes
    scenario = training_for(cfg, task, with_traffic=not args.no_traffic)
    curve, _ = train(EnvFactory(cfg), scenario, cfg.td3, episodes, args.seed, out_dir=out,
                     progress_every=args.progress_every, checkpoint_every=args.checkpoint_every)
    log.info("trained %d episodes, final moving success %.3f", len(curve.rows),
             curve.moving_success)


def cmd_eval_det(args, cfg: RunConfig):
    ids = [s.strip().upper() for s in args.scenarios.split(",")]
    for sid in ids:
        _functional(sid)
    needed = {FUNCTIONAL_SCENARIOS[s].ego_task.turn for s in ids}
    agent = parse_agent(args.agent, cfg, needed)
    out = Path(args.out)
    echo_config(cfg, out)
    sc = cfg.scenario
    report = run_deterministic(agent, ids, [args.seed], EnvFactory(cfg),
                               {"speed_range": sc.speed_range, "gap_range": sc.gap_range,
                                "step": sc.step},
                               workers=cfg.run.workers)
    for p in emit_report(report, out):
        log.info("wrote %s", p)


def cmd_eval_sto(args, cfg: RunConfig):
    tasks = [_task(t) for t in args.tasks.split(",")]
    agent = parse_agent(args.agent, cfg, tasks)
    out = Path(args.out)
    echo_config(cfg, out)
    n = args.episodes or cfg.stochastic.episodes
    for task in tasks:
        report = run_stochastic(agent, stochastic_for(cfg, task), n, args.seed, EnvFactory(cfg),
                                workers=cfg.run.workers)
        # model paths stay in the summary; the file name only says "td3"
        name = "td3" if report.agent.startswith("td3:") else report.agent.replace(":", "_")
        stem = f"stochastic_{task.value}_{name}"
        for p in emit_report(report, out, stem):
            log.info("wrote %s", p)


def _flows_for(spec: str, cfg: RunConfig):
    spec = spec.strip()
    if spec.lower() in TASKS:
        scen = training_for(cfg, _task(spec))
        names = [sid for sid, fs in FUNCTIONAL_SCENARIOS.items()
                 if fs.ego_task.turn is scen.ego_task.turn]
        return list(zip(names, scen.active_flows))
    fs = _functional(spec)
    scen = training_for(cfg, fs.ego_task.turn)
    for flow in scen.active_flows:
        if flow.route == fs.flow_route:
            return [(fs.id, flow)]
    raise UsageError(f"no training flow for scenario {spec}")


def histogram_rows(flow_id: str, quantity: str, values: np.ndarray, lo: float, hi: float,
                   bins: int):
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    mass = counts / counts.sum()
    return [(flow_id, quantity, float(edges[i]), float(edges[i + 1]), int(counts[i]),
             float(mass[i])) for i in range(bins)]


def cmd_sample_traffic(args, cfg: RunConfig):
    if args.draws < 1:
        raise UsageError("--draws must be >= 1")
    flows = _flows_for(args.flow, cfg)
    out = Path(args.out)
    echo_config(cfg, out)
    streams = np.random.SeedSequence(args.seed).spawn(len(flows))
    samples = out / "traffic_samples.csv"
    hist = out / "traffic_histogram.csv"
    hist_rows = []
    with open(samples, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["flow", "index", "speed_kmh", "gap_m"])
        for (fid, flow), seq in zip(flows, streams):
            rng = np.random.default_rng(seq)
            spawner = SpawnerState.for_flow(flow)
            speeds = np.empty(args.draws)
            gaps = np.empty(args.draws)
            for i in range(args.draws):
                speeds[i], gaps[i] = draw_parameters(spawner, flow, rng)
                w.writerow([fid, i, repr(float(speeds[i])), repr(float(gaps[i]))])
            r = flow.speed_range
            hist_rows += histogram_rows(fid, "speed_kmh", speeds, r.lower, r.upper, args.bins)
            hist_rows += histogram_rows(fid, "gap_m", gaps, flow.gap.d_l, flow.gap.d_u, args.bins)
    with open(hist, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["flow", "quantity", "bin_lo", "bin_hi", "count", "mass"])
        for row in hist_rows:
            w.writerow([*row[:2], repr(row[2]), repr(row[3]), row[4], repr(row[5])])
    log.info("wrote %s and %s", samples, hist)


REPLAY_COLUMNS = ["step", "time", "vehicle_id", "role", "s", "v", "x", "y", "heading",
                  "ego_reward"]


def cmd_replay(args, cfg: RunConfig):
    if args.cell:
        scenario = ConcreteScenario(_functional(args.scenario), *_cell(args.cell))
    else:
        scenario = parse_scenario(args.scenario, cfg)
    turn = (scenario.functional.ego_task if isinstance(scenario, ConcreteScenario)
            else scenario.ego_task).turn
    agent = parse_agent(args.agent, cfg, [turn])
    out = Path(args.out)
    echo_config(cfg, out.parent, f"{out.stem}_config.txt")
    env = EnvFactory(cfg)()
    obs = env.reset(scenario, args.seed)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPLAY_COLUMNS)
        while True:
            step = env.step(agent.act(obs, env))
            obs = step.observation
            world = env.world
            for veh in world.vehicles:
                (x, y), h = world.pose(veh)
                w.writerow([env.steps, repr(env.elapsed), veh.id, veh.role.value, repr(veh.s),
                            repr(veh.v), repr(float(x)), repr(float(y)), repr(float(h)),
                            repr(step.reward)])
            if step.done:
                break
    res = env.result()
    log.info("%s: %s after %.1f s, return %.1f; wrote %s", scenario_label(scenario),
             res.outcome.value, res.duration, res.total_reward, out)


def scenario_label(scenario) -> str:
    return getattr(scenario, "label", None) or str(getattr(scenario, "ego_task", scenario))


# wire protocol ----------------------------------------------------------------------

def _num(x: float) -> str:
    # shortest round-trip decimal, padded to at least 9 significant digits
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite number in response")
    text = repr(x)
    mantissa = text.split("e")[0].replace("-", "").replace(".", "").lstrip("0")
    return text if len(mantissa) >= 9 else format(x, "#.9g")


def encode_response(obs, reward, done, outcome) -> str:
    """One response line with fixed field order: observation, reward, done, outcome."""
    return ('{"observation": [' + ", ".join(_num(v) for v in obs) + '], "reward": '
            + _num(reward) + ', "done": ' + ("true" if done else "false")
            + ', "outcome": "' + outcome + '"}')


def handle_request(env: IntersectionEnv, line: str, cfg: RunConfig) -> str:
    """Apply one request line to ``env`` and return the response line.

    Requests: ``{"cmd": "reset", "seed": 0, "scenario": "A@20,30"}`` or
    ``{"cmd": "step", "a0": 1.0, "a1": 0.0}``. Errors come back as
    ``{"error": "..."}``.
    """
    try:
        req = json.loads(line)
        cmd = req.get("cmd")
        if cmd == "reset":
            scen = parse_scenario(str(req.get("scenario", "train:straight")), cfg)
            obs = env.reset(scen, int(req.get("seed", 0)))
            return encode_response(obs, 0.0, False, "running")
        if cmd == "step":
            if env.world is None:
                raise LifecycleError("no episode; send reset first")
            out = env.step((float(req["a0"]), float(req["a1"])))
            return encode_response(out.observation, out.reward, out.done, out.outcome.value)
        raise ValueError(f"unknown cmd {cmd!r}")
    except (ValueError, KeyError, TypeError, LifecycleError, ConfigError) as exc:
        return json.dumps({"error": str(exc)})


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        env = self.server.env_factory()
        for raw in self.rfile:
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            self.wfile.write((handle_request(env, line, self.server.cfg) + "\n").encode())
            self.wfile.flush()


class EnvServer(socketserver.ThreadingTCPServer):
    """One independent environment per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, cfg: RunConfig):
        super().__init__(address, _Handler)
        self.cfg = cfg
        self.env_factory = EnvFactory(cfg)


def cmd_serve(args, cfg: RunConfig):
    with EnvServer((args.host, args.port), cfg) as server:
        log.info("serving on %s:%d", *server.server_address[:2])
        server.serve_forever()


# entry point ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="junction-bench", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="train a TD3 agent for one task")
    t.add_argument("--task", required=True)
    t.add_argument("--episodes", type=int, default=None)
    t.add_argument("--out", required=True)
    t.add_argument("--no-traffic", action="store_true")
    t.add_argument("--progress-every", type=int, default=100)
    t.add_argument("--checkpoint-every", type=int, default=0)
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("eval-det", parents=[common], help="deterministic grid test")
    d.add_argument("--agent", required=True)
    d.add_argument("--scenarios", default="A,B,C,D,E")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_eval_det)

    s = sub.add_parser("eval-sto", parents=[common], help="stochastic test")
    s.add_argument("--agent", required=True)
    s.add_argument("--tasks", default="left,straight,right")
    s.add_argument("--episodes", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval_sto)

    g = sub.add_parser("sample-traffic", parents=[common], help="training-flow parameter samples")
    g.add_argument("--flow", required=True, help="functional scenario id or task name")
    g.add_argument("--draws", type=int, default=10_000)
    g.add_argument("--bins", type=int, default=30)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_sample_traffic)

    r = sub.add_parser("replay", parents=[common], help="per-step trajectory of one episode")
    r.add_argument("--scenario", required=True, help="functional id (with --cell) or scenario spec")
    r.add_argument("--cell", help="V,d grid cell")
    r.add_argument("--agent", required=True)
    r.add_argument("--out", required=True, help="CSV path")
    r.set_defaults(func=cmd_replay)

    v = sub.add_parser("serve", parents=[common], help="line-delimited JSON environment server")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=5555)
    v.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(message)s", stream=sys.stderr)
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"run.seed = {args.seed}")
        cfg = parse_config(args.config, overrides)
        args.seed = cfg.run.seed
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
